"""Deterministic seed fan-out.

Every random stream in the pipeline is keyed by the master seed plus a tuple of
labels (purpose, song ids, feature code, ...). Results therefore do not depend
on evaluation order or on how work is split across processes.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, *parts) -> int:
    h = hashlib.sha256(repr((int(master),) + tuple(str(p) for p in parts)).encode())
    return int.from_bytes(h.digest()[:8], "little")


def rng_for(master: int, *parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *parts))
