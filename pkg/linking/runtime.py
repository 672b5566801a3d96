"""Seeding and the ordered worker pool used for parallel scoring and reading."""
import random
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import torch


def seed_everything(seed):
    """Seed every generator a run touches and return the run's numpy generator.

    All sampling inside the toolkit draws from the returned generator; torch is
    seeded only for parameter initialization.
    """
    random.seed(seed)
    torch.manual_seed(seed)
    return np.random.default_rng(seed)


def ordered_map(fn, items, threads=1):
    """Map ``fn`` over ``items`` on ``threads`` workers, results in input order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
