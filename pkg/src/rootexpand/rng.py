"""Reproducible random streams.

Every stochastic routine takes an integer ``seed`` and draws from streams
derived as ``Philox(SeedSequence(seed, spawn_key=(stream,)))``.  Philox is a
counter-based generator, so streams are independent of evaluation order and
can be produced in parallel.
"""
from __future__ import annotations

import numpy as np

__all__ = ["stream"]


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Generator for stream ``index`` of experiment ``seed``."""
    if seed < 0 or index < 0:
        raise ValueError("seed and stream index must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))
