"""Seeded random streams and uniform subsampling without replacement.

Every stream is a :class:`numpy.random.Generator` over PCG64. Run streams are
derived from integer key paths such as ``(master_seed, run_id)`` through
:class:`numpy.random.SeedSequence`. Each key is encoded as two little-endian
32-bit words before hashing, so key paths of different lengths or magnitudes
never alias. SeedSequence hashing and PCG64 are both platform independent,
which keeps recorded traces reproducible across machines.

The scheme is versioned by :data:`RNG_SCHEME`. Golden traces depend on it, so
any change to the derivation or the generator is a breaking change.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import InvalidArgument

RNG_SCHEME = "pcg64/seedsequence-u32x2/v1"

#: Streams are plain numpy generators; the alias names the role.
RngStream = np.random.Generator

_U64 = 1 << 64


def _encode_keys(keys: Sequence[int]) -> np.ndarray:
    words = []
    for key in keys:
        key = int(key)
        if not 0 <= key < _U64:
            raise InvalidArgument(f"seed keys must be 64-bit unsigned integers, got {key}")
        words.append(key & 0xFFFFFFFF)
        words.append(key >> 32)
    return np.asarray(words, dtype=np.uint32)


def derive_run_rng(master_seed: int, run_id: int, *extra: int) -> np.random.Generator:
    """Return the stream for ``(master_seed, run_id, *extra)``.

    Pure and deterministic: equal key paths give identical streams, distinct
    paths give statistically independent streams.
    """
    entropy = _encode_keys((master_seed, run_id, *extra))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def subsample_without_replacement(source, j: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``j`` elements of ``source`` at distinct positions, uniformly over j-subsets.

    Positions come from ``rng.choice(n, j, replace=False)``, which returns
    each ordered j-subset of positions with equal probability. ``source`` is
    never modified.

    Args:
        source: 1-d sequence of reals.
        j: subsample size, ``1 <= j <= len(source)``.
        rng: stream consumed by the draw.

    Returns:
        Array of the ``j`` chosen values in draw order.
    """
    values = np.asarray(source, dtype=float)
    n = values.shape[0]
    if not 1 <= j <= n:
        raise InvalidArgument(f"subsample size must satisfy 1 <= j <= {n}, got {j}")
    return values[rng.choice(n, size=j, replace=False)]
