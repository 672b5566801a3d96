"""On-disk convention for embedding dumps and model checkpoints.

A matrix file is one JSON header line followed by little-endian float32
values in row-major order. A checkpoint directory holds one such file per
parameter tensor plus ``config.json``.
"""
import json
import logging
from pathlib import Path

import numpy as np
import torch

logger = logging.getLogger(__name__)

_LE_FLOAT32 = np.dtype("<f4")


def write_matrix(path, matrix, **extra):
    matrix = np.asarray(matrix)
    if matrix.ndim == 1:
        count, dim = 1, matrix.shape[0]
    else:
        count, dim = matrix.shape[0], int(np.prod(matrix.shape[1:]))
    header = {"count": int(count), "dim": int(dim), **extra}
    with open(path, "wb") as handle:
        handle.write((json.dumps(header) + "\n").encode("utf-8"))
        handle.write(np.ascontiguousarray(matrix, dtype=_LE_FLOAT32).tobytes())


def read_matrix(path):
    """Return (float64 array of shape (count, dim), header dict)."""
    with open(path, "rb") as handle:
        header = json.loads(handle.readline().decode("utf-8"))
        values = np.frombuffer(handle.read(), dtype=_LE_FLOAT32)
    expected = header["count"] * header["dim"]
    if values.size != expected:
        raise ValueError(f"{path}: expected {expected} values, found {values.size}")
    return values.astype(np.float64).reshape(header["count"], header["dim"]), header


def save_checkpoint(model, config, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, tensor in model.state_dict().items():
        array = tensor.detach().cpu().numpy()
        write_matrix(directory / f"{name}.bin", array.reshape(1, -1) if array.ndim <= 1 else array,
                     shape=list(array.shape))
    with open(directory / "config.json", "w", encoding="utf-8") as handle:
        json.dump(config, handle, indent=2, sort_keys=True)
    logger.info("Saved checkpoint with %d tensors to %s", len(model.state_dict()), directory)


def load_config(directory):
    with open(Path(directory) / "config.json", encoding="utf-8") as handle:
        return json.load(handle)


def load_state(model, directory):
    """Fill ``model`` in place from the tensor files in ``directory``."""
    directory = Path(directory)
    state = {}
    for name, current in model.state_dict().items():
        values, header = read_matrix(directory / f"{name}.bin")
        state[name] = torch.from_numpy(values.reshape(header["shape"])).to(current.dtype)
    model.load_state_dict(state)
    return model
