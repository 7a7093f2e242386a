"""Finite CMV matrices built from Verblunsky coefficients.

A coefficient tuple ``alpha = (alpha_0, ..., alpha_{n-2})`` in the open unit
disk gives 2x2 unitary blocks ``theta_j = [[conj(a), rho], [rho, -a]]`` with
``rho = sqrt(1 - |a|^2)``.  The even factor stacks ``theta_0, theta_2, ...``
and the odd factor stacks ``1, theta_1, theta_3, ...``; whichever factor
comes up one row short is padded with a trailing ``-1``.  The CMV matrix is
``even @ odd``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import NotCMV, OutOfDisk
from .linalg import as_matrix, tol_lin, unitarity_residual

DISK_MARGIN = 1e-12

W_STAR = np.array([[0, 1], [1, 0]], dtype=np.complex128)


@dataclass(frozen=True)
class VerblunskyCoefficients:
    alphas: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alphas, dtype=np.complex128))
        if a.ndim != 1 or a.size == 0:
            raise ValueError("need at least one coefficient (n >= 2)")
        bad = np.flatnonzero(1.0 - np.abs(a) <= DISK_MARGIN)
        if bad.size:
            j = int(bad[0])
            raise OutOfDisk(f"|alpha_{j}| = {abs(a[j])!r} is not inside the unit disk")
        a.setflags(write=False)
        object.__setattr__(self, "alphas", a)

    @property
    def n(self) -> int:
        return self.alphas.size + 1

    def __len__(self):
        return self.alphas.size


@dataclass(frozen=True)
class ThetaBlock:
    alpha: complex
    rho: float

    @property
    def matrix(self) -> np.ndarray:
        a, r = self.alpha, self.rho
        return np.array([[np.conj(a), r], [r, -a]], dtype=np.complex128)


@dataclass(frozen=True)
class CMVFactors:
    even: np.ndarray
    odd: np.ndarray

    def product(self) -> np.ndarray:
        return self.even @ self.odd


@dataclass(frozen=True)
class CMVMatrix:
    matrix: np.ndarray
    factors: CMVFactors
    coefficients: VerblunskyCoefficients


def theta_block(alpha: complex) -> ThetaBlock:
    """The 2x2 block for one coefficient.

    Raises:
        OutOfDisk: if ``|alpha| >= 1 - 1e-12``.
    """
    alpha = complex(alpha)
    if 1.0 - abs(alpha) <= DISK_MARGIN:
        raise OutOfDisk(f"|alpha| = {abs(alpha)!r} is not inside the unit disk")
    return ThetaBlock(alpha, float(np.sqrt(1.0 - abs(alpha) ** 2)))


def _coerce(coeffs) -> VerblunskyCoefficients:
    if isinstance(coeffs, VerblunskyCoefficients):
        return coeffs
    return VerblunskyCoefficients(coeffs)


def _stack(n: int, start: int, alphas) -> np.ndarray:
    """Block-diagonal matrix: leading 1 if ``start == 1``, theta blocks, trailing -1."""
    m = np.zeros((n, n), dtype=np.complex128)
    if start == 1:
        m[0, 0] = 1.0
    i = start
    for a in alphas:
        m[i:i + 2, i:i + 2] = theta_block(a).matrix
        i += 2
    if i == n - 1:
        m[i, i] = -1.0
    return m


def even_factor(n: int, even_alphas) -> np.ndarray:
    """``diag(theta_0, theta_2, ...)``, trailing ``-1`` when ``n`` is odd."""
    even_alphas = list(even_alphas)
    if len(even_alphas) != n // 2:
        raise ValueError(f"even factor of size {n} needs {n // 2} coefficients")
    return _stack(n, 0, even_alphas)


def odd_factor(n: int, odd_alphas) -> np.ndarray:
    """``diag(1, theta_1, theta_3, ...)``, trailing ``-1`` when ``n`` is even."""
    odd_alphas = list(odd_alphas)
    if len(odd_alphas) != (n - 1) // 2:
        raise ValueError(f"odd factor of size {n} needs {(n - 1) // 2} coefficients")
    return _stack(n, 1, odd_alphas)


def build_factors(coeffs) -> CMVFactors:
    c = _coerce(coeffs)
    n = c.n
    return CMVFactors(even_factor(n, c.alphas[0::2]), odd_factor(n, c.alphas[1::2]))


def build_cmv(coeffs) -> CMVMatrix:
    c = _coerce(coeffs)
    f = build_factors(c)
    return CMVMatrix(f.product(), f, c)


def free_cmv(n: int) -> CMVMatrix:
    """CMV matrix of the zero coefficient tuple."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return build_cmv(np.zeros(n - 1, dtype=np.complex128))


@lru_cache(maxsize=None)
def structural_support(n: int) -> np.ndarray:
    """Boolean mask of entries of ``even @ odd`` that can be nonzero.

    Each factor is replaced by its block pattern of independent placeholders
    and multiplied as a boolean product; a product entry is a sum of
    products of distinct symbols, so it is structurally zero exactly when no
    term survives.
    """
    even = np.zeros((n, n), dtype=bool)
    odd = np.zeros((n, n), dtype=bool)
    for i in range(0, n - 1, 2):
        even[i:i + 2, i:i + 2] = True
    if n % 2:
        even[n - 1, n - 1] = True
    odd[0, 0] = True
    for i in range(1, n - 1, 2):
        odd[i:i + 2, i:i + 2] = True
    if n % 2 == 0:
        odd[n - 1, n - 1] = True
    support = (even.astype(np.int64) @ odd.astype(np.int64)) > 0
    support.setflags(write=False)
    return support


def zero_pattern(n: int) -> np.ndarray:
    """Entries of a CMV matrix forced to vanish that lie within the band ``|i-j| <= 2``."""
    i, j = np.indices((n, n))
    return (~structural_support(n)) & (np.abs(i - j) <= 2)


@dataclass
class ValidationReport:
    """Outcome of a structural check.

    ``residual`` is the largest measured deviation; ``failures`` lists the
    violated constraints in the order they were checked.
    """

    passed: bool
    residual: float
    checks: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def first_failure(self):
        return self.failures[0] if self.failures else None

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "residual": self.residual,
            "checks": dict(self.checks),
            "failures": list(self.failures),
            "warnings": list(self.warnings),
        }


def _read_factors(m: np.ndarray) -> np.ndarray:
    """Read the coefficients off ``m`` assuming ``m = even @ odd``.

    Even blocks come from their first column, odd blocks from their first
    row, each contracted against the unit-norm neighbouring block that was
    already recovered, so no division by a small ``rho`` occurs.
    """
    n = m.shape[0]
    alphas = np.zeros(n - 1, dtype=np.complex128)
    prev = None
    for j in range(n - 1):
        if j == 0:
            alphas[0] = np.conj(m[0, 0])
        elif j % 2 == 0:
            # rows j, j+1 of m over columns j-1, j equal theta_j[:,0] (x) theta_{j-1}[1,:]
            col = m[j:j + 2, j - 1:j + 1] @ np.conj(prev[1, :])
            alphas[j] = np.conj(col[0])
        else:
            # rows j-1, j of m over columns j, j+1 equal theta_{j-1}[:,1] (x) theta_j[0,:]
            row = np.conj(prev[:, 1]) @ m[j - 1:j + 1, j:j + 2]
            alphas[j] = np.conj(row[0])
        if 1.0 - abs(alphas[j]) <= DISK_MARGIN:
            return alphas[: j + 1]
        prev = theta_block(alphas[j]).matrix
    return alphas


def validate_cmv(m, tol: float | None = None) -> ValidationReport:
    """Check that ``m`` is a finite CMV matrix.

    Checks, in order: unitarity, vanishing of entries with ``|i-j| >= 3``,
    the forced zeros inside the band, and that coefficients read from ``m``
    rebuild it.  ``tol`` defaults to ``tol_lin(n)`` and applies to every
    check.
    """
    m = as_matrix(m)
    n = m.shape[0]
    if tol is None:
        tol = tol_lin(n)
    rep = ValidationReport(passed=True, residual=0.0)

    def record(name, value):
        rep.checks[name] = float(value)
        rep.residual = max(rep.residual, float(value))
        if not value <= tol:
            rep.failures.append(f"{name}: {value:.3e} > {tol:.3e}")

    if n < 2:
        rep.passed = False
        rep.failures.append("dimension: n must be >= 2")
        return rep
    record("unitarity", unitarity_residual(m))
    i, j = np.indices((n, n))
    outside = np.abs(i - j) >= 3
    record("band", np.abs(m[outside]).max(initial=0.0))
    record("zero_pattern", np.abs(m[zero_pattern(n)]).max(initial=0.0))

    alphas = _read_factors(m)
    if alphas.size < n - 1 or 1.0 - abs(alphas[-1]) <= DISK_MARGIN:
        rep.failures.append(
            f"extraction: coefficient {alphas.size - 1} has modulus "
            f"{abs(alphas[-1]):.6g}, not inside the unit disk"
        )
        rep.checks["extraction"] = float("inf")
        rep.residual = float("inf")
    else:
        rebuilt = build_factors(alphas).product()
        record("extraction", np.abs(rebuilt - m).max())
        if 1.0 - np.abs(alphas).max() < 1e-6:
            rep.warnings.append("coefficient close to the unit circle; rho is ill-conditioned")
    rep.passed = not rep.failures
    return rep


def extract_coefficients(m, tol: float | None = None) -> tuple[CMVFactors, VerblunskyCoefficients]:
    """Recover the unique theta-factorization and coefficients of a CMV matrix.

    Raises:
        NotCMV: naming the first violated structural constraint.
    """
    m = as_matrix(m)
    rep = validate_cmv(m, tol)
    if not rep.passed:
        raise NotCMV(f"not a CMV matrix: {rep.first_failure}")
    coeffs = VerblunskyCoefficients(_read_factors(m))
    return build_factors(coeffs), coeffs
