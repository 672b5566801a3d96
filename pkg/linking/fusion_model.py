"""Fusion-in-decoder reader.

Each (context, candidate) input is encoded on its own with positions starting
at 0; the encoder outputs are concatenated and the decoder cross-attends over
the whole concatenation. Nothing in the decoder sees segment order, so
permuting candidates does not change what it decodes.
"""
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from . import checkpoints
from .exceptions import (
    DeadEndError,
    NonFiniteGradientError,
    SequenceTooLongError,
    TargetTooLongError,
    TooManyCandidatesError,
)
from .layers import DecoderStack, EncoderStack, init_fan_in_uniform
from .training import fit

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    encoder_layers: int = 2
    decoder_layers: int = 2
    heads: int = 2
    ff_width: int = 128
    n_cand: int = 16
    max_segment_len: int = 512
    max_target_len: int = 64

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.d_model % self.heads:
            raise ValueError(f"d_model={self.d_model} is not divisible by heads={self.heads}")


@dataclass(frozen=True)
class FusedRepresentation:
    states: torch.Tensor
    boundaries: tuple

    def segment(self, i):
        start, end = self.boundaries[i]
        return self.states[start:end]

    def __len__(self):
        return len(self.boundaries)


class FusionModel(nn.Module):
    def __init__(self, config, bos_id, eos_id):
        super().__init__()
        self.config = config
        self.bos_id = bos_id
        self.eos_id = eos_id
        self.embedding = nn.Embedding(config.vocab_size, config.d_model)
        self.encoder = EncoderStack(config.d_model, config.heads, config.ff_width,
                                    config.encoder_layers, config.max_segment_len)
        self.decoder = DecoderStack(config.d_model, config.heads, config.ff_width,
                                    config.decoder_layers, config.max_target_len)
        self.lm_head = nn.Linear(config.d_model, config.vocab_size)
        init_fan_in_uniform(self)
        self.double()
        self.eval()

    def encode_segment(self, ids):
        return self.encoder(self.embedding(torch.as_tensor(ids, dtype=torch.long)))

    def decoder_logits(self, memory, prefix):
        """Next-token logits at every position of ``prefix``: (len(prefix), vocab)."""
        embedded = self.embedding(torch.as_tensor(prefix, dtype=torch.long))
        return self.lm_head(self.decoder(embedded, memory))

    def to_config(self):
        return {"kind": "reader", "bos_id": self.bos_id, "eos_id": self.eos_id, **asdict(self.config)}

    def save(self, directory, **extra):
        checkpoints.save_checkpoint(self, {**self.to_config(), **extra}, directory)

    @classmethod
    def load(cls, directory):
        raw = checkpoints.load_config(directory)
        fields = {name: raw[name] for name in ModelConfig.__dataclass_fields__}
        model = cls(ModelConfig(**fields), raw["bos_id"], raw["eos_id"])
        return checkpoints.load_state(model, Path(directory))


# ============================================
# ENCODING AND DECODING
# ============================================

def encode_candidates(model, inputs):
    """Encode every candidate input independently and concatenate in input order."""
    if not inputs:
        raise ValueError("at least one candidate input is required")
    if len(inputs) > model.config.n_cand:
        raise TooManyCandidatesError(f"{len(inputs)} candidates, model accepts {model.config.n_cand}")
    segments = []
    boundaries = []
    offset = 0
    for ids in inputs:
        if not 0 < len(ids) <= model.config.max_segment_len:
            raise SequenceTooLongError(
                f"segment of {len(ids)} tokens, model accepts 1..{model.config.max_segment_len}"
            )
        segments.append(model.encode_segment(ids))
        boundaries.append((offset, offset + len(ids)))
        offset += len(ids)
    return FusedRepresentation(torch.cat(segments, dim=0), tuple(boundaries))


def greedy_decode(model, fused, max_len, return_logits=False):
    """Argmax decoding until ``<eos>`` or ``max_len`` tokens; ties go to the lowest id."""
    max_len = min(max_len, model.config.max_target_len)
    output = []
    step_logits = []
    prefix = [model.bos_id]
    with torch.inference_mode():
        for _ in range(max_len):
            logits = model.decoder_logits(fused.states, prefix)[-1]
            step_logits.append(logits)
            token = int(torch.argmax(logits))
            if token == model.eos_id:
                break
            output.append(token)
            prefix.append(token)
    return (output, step_logits) if return_logits else output


class PrefixTrie:
    """Trie over token-id sequences; a terminal node may also branch."""

    def __init__(self, eos_id):
        self.eos_id = eos_id
        self.root = {}
        self._terminal = set()
        self._nodes = {(): self.root}
        self.depth = 0

    def add(self, ids):
        ids = tuple(ids)
        node = self.root
        for i in range(len(ids)):
            node = node.setdefault(ids[i], {})
            self._nodes.setdefault(ids[:i + 1], node)
        self._terminal.add(ids)
        self.depth = max(self.depth, len(ids))

    def __bool__(self):
        return bool(self._terminal)

    def __contains__(self, ids):
        return tuple(ids) in self._terminal

    def __len__(self):
        return len(self._terminal)

    def is_terminal(self, prefix):
        return tuple(prefix) in self._terminal

    def allowed(self, prefix):
        """Sorted token ids that may follow ``prefix`` (``<eos>`` when it ends a path)."""
        prefix = tuple(prefix)
        node = self._nodes.get(prefix)
        if node is None:
            return []
        allowed = set(node)
        if prefix in self._terminal:
            allowed.add(self.eos_id)
        return sorted(allowed)

    @classmethod
    def from_sequences(cls, sequences, eos_id):
        trie = cls(eos_id)
        for ids in sequences:
            trie.add(ids)
        return trie


def build_trie(titles, tokenizer):
    if not titles:
        raise ValueError("cannot build a trie without titles")
    return PrefixTrie.from_sequences((tokenizer.encode_text(t) for t in titles), tokenizer.eos_id)


def constrained_decode(model, fused, trie, max_len=None):
    """Greedy decoding restricted to trie continuations; always ends on a full path."""
    if not trie:
        raise ValueError("cannot decode against an empty trie")
    limit = min(trie.depth + 1 if max_len is None else max_len, model.config.max_target_len)
    output = []
    prefix = [model.bos_id]
    with torch.inference_mode():
        for _ in range(limit):
            allowed = trie.allowed(output)
            if not allowed:
                raise DeadEndError(f"no continuation after {output}")
            logits = model.decoder_logits(fused.states, prefix)[-1]
            token = allowed[int(torch.argmax(logits[allowed]))]
            if token == model.eos_id:
                return output
            output.append(token)
            prefix.append(token)
    if trie.is_terminal(output):
        return output
    raise DeadEndError(f"max_len={limit} reached before a complete trie path")


# ============================================
# TRAINING
# ============================================

def teacher_forced_loss(model, inputs, target):
    """Mean cross-entropy of ``target`` followed by ``<eos>``."""
    labels = list(target) + [model.eos_id]
    if len(labels) > model.config.max_target_len:
        raise TargetTooLongError(
            f"target of {len(target)} tokens exceeds {model.config.max_target_len - 1}"
        )
    fused = encode_candidates(model, inputs)
    logits = model.decoder_logits(fused.states, [model.bos_id] + list(target))
    return F.cross_entropy(logits, torch.as_tensor(labels, dtype=torch.long))


def backward(model, loss):
    """Reverse-mode gradients of ``loss`` for every named parameter."""
    model.zero_grad(set_to_none=True)
    loss.backward()
    gradients = {}
    for name, parameter in model.named_parameters():
        grad = parameter.grad
        grad = torch.zeros_like(parameter) if grad is None else grad.detach().clone()
        if not torch.isfinite(grad).all():
            raise NonFiniteGradientError(f"non-finite gradient for {name}")
        gradients[name] = grad
    return gradients


def grad_check(model, inputs, target, epsilon=1e-4, samples=100, rng=None):
    """Largest relative error between backward() and central finite differences.

    At most ``samples`` coordinates are checked per parameter tensor.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    analytic = backward(model, teacher_forced_loss(model, inputs, target))
    worst = 0.0
    with torch.no_grad():
        for name, parameter in model.named_parameters():
            flat = parameter.data.view(-1)
            picks = rng.choice(flat.numel(), size=min(samples, flat.numel()), replace=False)
            grad = analytic[name].view(-1)
            for i in picks:
                i = int(i)
                original = flat[i].item()
                flat[i] = original + epsilon
                plus = teacher_forced_loss(model, inputs, target).item()
                flat[i] = original - epsilon
                minus = teacher_forced_loss(model, inputs, target).item()
                flat[i] = original
                numeric = (plus - minus) / (2 * epsilon)
                exact = grad[i].item()
                error = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-5)
                worst = max(worst, error)
    logger.debug("grad_check max relative error %.3e", worst)
    return worst


@dataclass(frozen=True)
class ReaderExample:
    inputs: tuple
    target: tuple


def train(model, dataset, config, rng, evaluate=None):
    """Adam on teacher-forced loss with the linear warm-up/decay schedule."""
    return fit(model, dataset, lambda ex: teacher_forced_loss(model, ex.inputs, ex.target),
               config, rng, evaluate)
