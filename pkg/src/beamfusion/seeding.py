"""Deterministic derivation of per-purpose random generators.

Every source of randomness in the package flows from a single root seed.
A (root, purpose-tag, index) triple is fed into a ``SeedSequence`` so that
streams for different purposes and sample indices are statistically
independent yet fully reproducible, and independent of execution order.
"""

from __future__ import annotations

import zlib

import numpy as np


def derive_seed(root_seed: int, tag: str, index: int = 0) -> np.random.SeedSequence:
    """Seed sequence for one purpose ("lidar", "gps-noise", ...) and index."""
    return np.random.SeedSequence([int(root_seed), zlib.crc32(tag.encode("utf-8")), int(index)])


def derive_rng(root_seed: int, tag: str, index: int = 0) -> np.random.Generator:
    """Generator seeded from (root, tag, index); same triple, same stream."""
    return np.random.Generator(np.random.PCG64(derive_seed(root_seed, tag, index)))
