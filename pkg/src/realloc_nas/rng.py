"""Order-independent random streams.

Every stream is keyed by the run seed plus the identity of what it is used
for (a purpose tag and the candidate's codes), so evaluating candidates in any
order or on any number of workers draws the same numbers.
"""

from __future__ import annotations

import os
from typing import Sequence

import numpy as np

SEED_ENV = "REALLOC_NAS_SEED"
MASK64 = (1 << 64) - 1

# purpose tags
NOISE = 1
PARTIAL = 2
PAIRED = 3
GENERATOR = 4


def stream(seed: int, tag: int, *codes: Sequence[int]) -> np.random.Generator:
    key = [tag]
    for code in codes:
        key.append(len(code))
        key.extend(int(c) for c in code)
    ss = np.random.SeedSequence(entropy=int(seed) & MASK64, spawn_key=tuple(key))
    return np.random.Generator(np.random.PCG64(ss))


def seed_from_env(default: int = 0) -> int:
    value = os.environ.get(SEED_ENV)
    if value is None or value == "":
        return default
    return int(value, 0)
