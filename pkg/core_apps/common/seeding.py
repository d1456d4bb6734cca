import random

import numpy as np
import torch


def seed_everything(seed: int) -> np.random.Generator:
    """Seed python, numpy and torch, force deterministic kernels, return a fresh numpy generator."""
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True)
    return np.random.default_rng(seed)


def derive_seed(*parts) -> int:
    """Stable 31-bit seed from arbitrary hashable parts (independent of PYTHONHASHSEED)."""
    value = 0
    for part in parts:
        for ch in str(part):
            value = (value * 1_000_003 + ord(ch)) % (2**31 - 1)
        value = (value * 7919 + 17) % (2**31 - 1)
    return value
