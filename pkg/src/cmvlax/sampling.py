"""Seeded random samples used by tests, sweeps and the CLI.

All randomness goes through ``numpy.random.Generator`` over the PCG64
bit generator, always seeded explicitly.
"""

from __future__ import annotations

import numpy as np

from .linalg import iwasawa

MAX_COND = 1e6


def rng(seed) -> np.random.Generator:
    if seed is None:
        raise ValueError("a seed is required for randomized computations")
    return np.random.Generator(np.random.PCG64(seed))


def gaussian_matrix(gen: np.random.Generator, n: int) -> np.ndarray:
    return (gen.standard_normal((n, n)) + 1j * gen.standard_normal((n, n))) / np.sqrt(2)


def random_gl(gen: np.random.Generator, n: int, max_cond: float = MAX_COND) -> np.ndarray:
    """Gaussian-entry matrix, redrawn until its condition number is <= max_cond."""
    while True:
        g = gaussian_matrix(gen, n)
        if np.linalg.cond(g) <= max_cond:
            return g


def random_unitary(gen: np.random.Generator, n: int) -> np.ndarray:
    """Haar-distributed unitary: the unitary Iwasawa factor of a Gaussian matrix."""
    return iwasawa(random_gl(gen, n)).k


def random_alphas(gen: np.random.Generator, m: int, radius: float = 0.95) -> np.ndarray:
    """``m`` points uniformly distributed in the disk ``|z| < radius``."""
    r = radius * np.sqrt(gen.uniform(size=m))
    phi = gen.uniform(0.0, 2 * np.pi, size=m)
    return r * np.exp(1j * phi)


def random_algebra(gen: np.random.Generator, n: int) -> np.ndarray:
    """Random element of gl(n, C)."""
    return gaussian_matrix(gen, n)
