"""Dense complex matrix kernel.

Iwasawa factorization ``g = k b`` (``k`` unitary, ``b`` lower triangular with
positive diagonal), the associated group factors ``g = g_+ g_-^{-1}``, matrix
exponential, and spectra.  Matrices are plain ``numpy`` ``complex128`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NoConvergence, SingularInput

EPS = np.finfo(np.float64).eps


def tol_lin(n: int) -> float:
    """Backward-error scaled tolerance ``128 n eps``."""
    return 128 * n * EPS


def as_matrix(a) -> np.ndarray:
    """Coerce ``a`` to a finite square ``complex128`` array."""
    m = np.array(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def fro(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, "fro"))


def unitarity_residual(a: np.ndarray) -> float:
    """``||a a* - I||_F``."""
    return fro(a @ dagger(a) - np.eye(a.shape[0]))


def is_normal(a: np.ndarray, tol: float | None = None) -> bool:
    n = a.shape[0]
    if tol is None:
        tol = tol_lin(n)
    scale = max(fro(a) ** 2, 1.0)
    return fro(a @ dagger(a) - dagger(a) @ a) <= tol * scale


@dataclass(frozen=True)
class IwasawaPair:
    """``g = k @ b`` with ``k`` unitary and ``b`` lower triangular, diag(b) > 0."""

    k: np.ndarray
    b: np.ndarray

    def product(self) -> np.ndarray:
        return self.k @ self.b


def _check_invertible(g: np.ndarray) -> None:
    s = np.linalg.svd(g, compute_uv=False)
    n = g.shape[0]
    if not s[-1] > n * EPS * s[0]:
        raise SingularInput(
            f"matrix is numerically singular (sigma_min={s[-1]:.3e}, sigma_max={s[0]:.3e})"
        )


def _reversed_cholesky_step(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # g* g = c c* with c upper triangular: Cholesky of the index-reversed Gram matrix.
    gram = dagger(g) @ g
    gram = 0.5 * (gram + dagger(gram))
    low = np.linalg.cholesky(gram[::-1, ::-1])
    b = dagger(low[::-1, ::-1])
    k = scipy.linalg.solve_triangular(b, g.T, trans="T", lower=True).T
    return k, b


def iwasawa(g, check: bool = True) -> IwasawaPair:
    """Factor ``g = k b`` with ``k`` unitary and ``b`` in the lower Borel group.

    The factorization uses the Cholesky factor of the index-reversed Gram
    matrix ``g* g`` and is applied twice (the second pass re-orthogonalizes
    ``k``), so that unitarity of ``k`` holds to working precision for any
    condition number below ``eps**-1/2``.

    Raises:
        SingularInput: if ``g`` is numerically singular.
    """
    g = as_matrix(g)
    if check:
        _check_invertible(g)
    try:
        k1, b1 = _reversed_cholesky_step(g)
        k, b2 = _reversed_cholesky_step(k1)
    except np.linalg.LinAlgError as exc:
        raise SingularInput(f"Gram matrix is not positive definite: {exc}") from exc
    b = np.tril(b2 @ b1)
    b[np.diag_indices_from(b)] = b.diagonal().real
    return IwasawaPair(k, b)


def iwasawa_gram_schmidt(g) -> IwasawaPair:
    """Independent Iwasawa factorization by modified Gram-Schmidt.

    Columns are orthonormalized from the last to the first, which produces
    the lower-triangular factor directly.  Each column is orthogonalized
    twice.  Slower than :func:`iwasawa`; used as a cross-check.
    """
    g = as_matrix(g)
    _check_invertible(g)
    n = g.shape[0]
    k = np.zeros_like(g)
    b = np.zeros_like(g)
    for j in range(n - 1, -1, -1):
        v = g[:, j].copy()
        for _ in range(2):
            for i in range(j + 1, n):
                r = np.vdot(k[:, i], v)
                b[i, j] += r
                v = v - r * k[:, i]
        nrm = np.linalg.norm(v)
        if nrm == 0.0:
            raise SingularInput("column dependence in Gram-Schmidt")
        b[j, j] = nrm
        k[:, j] = v / nrm
    return IwasawaPair(k, b)


def group_factors(g) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(g_plus, g_minus)`` with ``g = g_plus @ inv(g_minus)``.

    ``g_plus`` is unitary and ``g_minus`` is lower triangular with positive
    diagonal.
    """
    pair = iwasawa(g)
    n = pair.b.shape[0]
    gminus = scipy.linalg.solve_triangular(pair.b, np.eye(n), lower=True)
    return pair.k, gminus


def plus(g) -> np.ndarray:
    """Unitary Iwasawa factor ``g_+``."""
    return iwasawa(g).k


def minus(g) -> np.ndarray:
    """Lower Iwasawa factor ``g_-`` (the inverse of ``b``)."""
    return group_factors(g)[1]


def matrix_exp(x) -> np.ndarray:
    """Matrix exponential.

    Normal inputs go through a complex Schur form (unitary diagonalization);
    anything else uses scipy's scaling-and-squaring Pade approximant.
    """
    x = as_matrix(x)
    n = x.shape[0]
    if not np.any(x):
        return np.eye(n, dtype=np.complex128)
    if is_normal(x):
        t, z = scipy.linalg.schur(x, output="complex")
        return (z * np.exp(np.diag(t))) @ dagger(z)
    return scipy.linalg.expm(x)


def spectrum(g) -> np.ndarray:
    """Eigenvalues with multiplicity.

    Raises:
        NoConvergence: if LAPACK's QR iteration fails.
    """
    g = as_matrix(g)
    try:
        return np.linalg.eigvals(g)
    except np.linalg.LinAlgError as exc:
        # geev uses at most 30 n QR sweeps
        raise NoConvergence(
            f"eigensolver failed for n={g.shape[0]} (budget 30*n QR sweeps): {exc}"
        ) from exc


def spectral_distance(a, b) -> float:
    """Largest eigenvalue displacement under the best one-to-one matching."""
    from scipy.optimize import linear_sum_assignment

    a = np.asarray(a)
    b = np.asarray(b)
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max()) if len(a) else 0.0
