"""Adam training loop with linear warm-up / linear decay and best-checkpoint selection."""
import copy
import csv
import logging
import math
from dataclasses import dataclass, field

import torch

from .exceptions import DivergenceDetectedError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    warmup: float = 0.01
    steps: int = 1000
    batch_size: int = 8
    eval_every: int = 1000


@dataclass(frozen=True)
class LossPoint:
    step: int
    loss: float
    lr: float


@dataclass
class TrainResult:
    curve: list = field(default_factory=list)
    best_step: int = None
    best_score: float = None


def warmup_steps(total, warmup):
    if total <= 0:
        return 0
    return max(1, math.ceil(round(warmup * total, 9)))


def lr_multiplier(step, total, warmup):
    """Multiplier of the peak rate applied at 1-based ``step``.

    Ramps linearly from 0 to 1 over the warm-up steps, then decays linearly so
    that the last step runs at 0.
    """
    ramp = warmup_steps(total, warmup)
    if step <= ramp:
        return step / ramp
    return (total - step) / (total - ramp)


def fit(model, examples, loss_fn, config, rng, evaluate=None):
    """Minimize ``mean(loss_fn(example))`` over random batches of ``examples``.

    ``evaluate`` (a zero-argument callable returning a score, higher is better)
    runs every ``config.eval_every`` steps and after the last one; the
    best-scoring parameters are restored before returning.
    """
    result = TrainResult()
    if config.steps <= 0:
        return result
    if not examples:
        raise ValueError("cannot train on an empty dataset")

    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda epoch: lr_multiplier(epoch + 1, config.steps, config.warmup)
    )
    best_state = None
    order = []
    model.train()
    for step in range(1, config.steps + 1):
        batch = []
        while len(batch) < min(config.batch_size, len(examples)):
            if not order:
                order = list(rng.permutation(len(examples)))
            batch.append(examples[order.pop()])

        lr = optimizer.param_groups[0]["lr"]
        optimizer.zero_grad(set_to_none=True)
        loss = torch.stack([loss_fn(example) for example in batch]).mean()
        if not torch.isfinite(loss):
            raise DivergenceDetectedError(f"loss became {loss.item()} at step {step}")
        loss.backward()
        optimizer.step()
        scheduler.step()
        result.curve.append(LossPoint(step, loss.item(), lr))

        if evaluate is not None and (step % config.eval_every == 0 or step == config.steps):
            model.eval()
            score = evaluate()
            model.train()
            logger.info("step %d loss %.5f lr %.3g score %.4f", step, loss.item(), lr, score)
            if result.best_score is None or score > result.best_score:
                result.best_score = score
                result.best_step = step
                best_state = copy.deepcopy(model.state_dict())
        elif step % config.eval_every == 0:
            logger.info("step %d loss %.5f lr %.3g", step, loss.item(), lr)

    if best_state is not None:
        model.load_state_dict(best_state)
        logger.info("Restored parameters from step %d (score %.4f)", result.best_step, result.best_score)
    model.eval()
    return result


def write_loss_curve(curve, path):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["step", "loss", "lr"])
        for point in curve:
            writer.writerow([point.step, repr(point.loss), repr(point.lr)])
