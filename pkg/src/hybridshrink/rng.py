"""Counter-based seeding.

Every random stream is addressed by ``(seed, *stream_index)`` and built from
:class:`numpy.random.SeedSequence` with the index as its ``spawn_key``.  Two
different indices never share a stream, so sweep points and chunks can be
computed in any order (or in parallel) and still merge to identical results.

Samplers pinned here: normals are numpy's ziggurat ``standard_normal`` on
PCG64; gammas are numpy's Marsaglia-Tsang ``standard_gamma``.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import InvalidInputError

SEED_ENV_VAR = "HYBRIDSHRINK_SEED"
UINT64_MAX = 2**64 - 1


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    seed = check_seed(seed)
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= UINT64_MAX:
        raise InvalidInputError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def default_seed() -> int:
    """Seed from the ``HYBRIDSHRINK_SEED`` environment variable, else 0."""
    raw = os.environ.get(SEED_ENV_VAR)
    return check_seed(raw) if raw else 0


def inverse_gamma(rng: np.random.Generator, shape, scale, size=None):
    """Inverse-Gamma draws, shape-scale form (density ~ x**(-shape-1) exp(-scale/x))."""
    return scale / rng.standard_gamma(shape, size=size)


def student_t(rng: np.random.Generator, df, size=None):
    """t draws built as Z / sqrt(chi2_df / df)."""
    z = rng.standard_normal(size)
    chi2 = 2.0 * rng.standard_gamma(df / 2.0, size=size)
    return z / np.sqrt(chi2 / df)
