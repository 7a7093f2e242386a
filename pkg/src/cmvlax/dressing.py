"""Dressing action of the dual group and the orbits through the free factors.

``dress(g, x) = g_+^{-1} x (x^{-1} g x)_+``.  Through the even free factor
``diag(w*, w*, ...)`` the orbit is the set of even block-diagonal theta
matrices, and through ``diag(1, w*, ...)`` it is the odd set; the
``preimage_*`` functions produce an explicit dressing element for any
member.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cmv import (
    DISK_MARGIN,
    ValidationReport,
    even_factor,
    extract_coefficients,
    odd_factor,
    validate_cmv,
)
from .errors import NotCMV, NotInOrbit, SingularInput
from .linalg import as_matrix, iwasawa, tol_lin, unitarity_residual


@dataclass(frozen=True)
class OrbitTag:
    parity: str
    n: int

    def __post_init__(self):
        if self.parity not in ("even", "odd"):
            raise ValueError(f"parity must be 'even' or 'odd', got {self.parity!r}")
        if self.n < 1:
            raise ValueError("n must be positive")


def free_even(n: int) -> np.ndarray:
    return even_factor(n, np.zeros(n // 2))


def free_odd(n: int) -> np.ndarray:
    return odd_factor(n, np.zeros((n - 1) // 2))


def base_point(tag: OrbitTag) -> np.ndarray:
    return free_even(tag.n) if tag.parity == "even" else free_odd(tag.n)


def _solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularInput(str(exc)) from exc


def dress(g, x) -> np.ndarray:
    """``g_+^{-1} x (x^{-1} g x)_+`` with group-level Iwasawa factors.

    Raises:
        SingularInput: if ``g`` or ``x`` is singular.
    """
    g, x = as_matrix(g), as_matrix(x)
    gplus = iwasawa(g).k
    conj = _solve(x, g @ x)
    return gplus.conj().T @ x @ iwasawa(conj).k


def dress_lower(g, x) -> np.ndarray:
    """The same element written as ``g_-^{-1} x (x^{-1} g x)_-``."""
    g, x = as_matrix(g), as_matrix(x)
    b_g = iwasawa(g).b
    b_c = iwasawa(_solve(x, g @ x)).b
    # (x^{-1} g x)_- is the inverse of its lower factor b_c
    return b_g @ _solve(b_c.T, x.T).T


def _block_layout(tag: OrbitTag):
    """(leading_one, list of 2x2 block starts, trailing_minus_one)."""
    n = tag.n
    start = 0 if tag.parity == "even" else 1
    starts = list(range(start, n - 1, 2))
    trailing = (n - start) % 2 == 1
    return start == 1, starts, trailing


def read_blocks(a: np.ndarray, tag: OrbitTag) -> np.ndarray:
    """Coefficients of the 2x2 blocks, read as ``-a[1, 1]`` of each block."""
    _, starts, _ = _block_layout(tag)
    return np.array([-a[i + 1, i + 1] for i in starts], dtype=np.complex128)


def in_orbit(a, tag: OrbitTag, tol: float | None = None) -> ValidationReport:
    """Check membership of ``a`` in the even or odd theta-block set.

    Each block's coefficient is read from its (2,2) entry; the (1,1) entry,
    both off-diagonal entries and every entry outside the blocks are then
    compared to the exact block they imply.  The residual is the largest
    entry deviation.
    """
    a = as_matrix(a)
    n = a.shape[0]
    rep = ValidationReport(passed=True, residual=0.0)
    if n != tag.n:
        rep.passed = False
        rep.residual = float("inf")
        rep.failures.append(f"dimension: expected {tag.n}, got {n}")
        return rep
    if tol is None:
        tol = tol_lin(n)
    leading, starts, trailing = _block_layout(tag)
    expected = np.zeros((n, n), dtype=np.complex128)
    if leading:
        expected[0, 0] = 1.0
    if trailing:
        expected[n - 1, n - 1] = -1.0
    for i in starts:
        alpha = -a[i + 1, i + 1]
        if 1.0 - abs(alpha) <= DISK_MARGIN:
            rep.failures.append(f"block at {i}: |alpha| = {abs(alpha):.6g} not inside the disk")
            alpha = alpha / abs(alpha) * (1.0 - DISK_MARGIN) if alpha != 0 else alpha
        elif 1.0 - abs(alpha) < 1e-6:
            rep.warnings.append(f"block at {i}: rho = {np.sqrt(1 - abs(alpha) ** 2):.3e} near zero")
        rho = np.sqrt(1.0 - abs(alpha) ** 2)
        expected[i:i + 2, i:i + 2] = [[np.conj(alpha), rho], [rho, -alpha]]
    dev = np.abs(a - expected)
    rep.residual = float(dev.max())
    rep.checks["block_structure"] = rep.residual
    if leading:
        rep.checks["leading"] = float(dev[0, 0])
    if trailing:
        rep.checks["trailing"] = float(dev[n - 1, n - 1])
    if rep.residual > tol:
        i, j = np.unravel_index(np.argmax(dev), dev.shape)
        rep.failures.append(
            f"entry ({i}, {j}) deviates from {tag.parity} block form by {rep.residual:.3e} > {tol:.3e}"
        )
    rep.passed = not rep.failures
    return rep


def _preimage(target, tag: OrbitTag) -> np.ndarray:
    target = as_matrix(target)
    rep = in_orbit(target, tag)
    if not rep.passed:
        raise NotInOrbit(f"target not in the {tag.parity} orbit: {rep.first_failure}")
    n = tag.n
    g = np.eye(n, dtype=np.complex128)
    _, starts, _ = _block_layout(tag)
    for i, alpha in zip(starts, read_blocks(target, tag)):
        rho = np.sqrt(1.0 - abs(alpha) ** 2)
        g[i:i + 2, i:i + 2] = [[rho, 0.0], [-alpha, 1.0]]
    return g


def preimage_even(target) -> np.ndarray:
    """Lower-triangular block-diagonal ``g`` with ``dress(g, free_even(n)) == target``.

    Each block is ``[[rho, 0], [-alpha, 1]]``; a trailing 1x1 block is 1.

    Raises:
        NotInOrbit: if ``target`` is not an even theta-block matrix.
    """
    target = as_matrix(target)
    return _preimage(target, OrbitTag("even", target.shape[0]))


def preimage_odd(target) -> np.ndarray:
    """Odd analogue of :func:`preimage_even`, with a leading 1x1 block equal to 1."""
    target = as_matrix(target)
    return _preimage(target, OrbitTag("odd", target.shape[0]))


def leaf_product_check(even, odd, tol: float | None = None) -> ValidationReport:
    """Check that ``(even, odd)`` lies in the product of the two orbits and maps to a CMV matrix.

    The product must pass :func:`validate_cmv`, and re-extracting the
    theta-factorization of the product must return the same pair.
    """
    even, odd = as_matrix(even), as_matrix(odd)
    n = even.shape[0]
    if tol is None:
        tol = tol_lin(n)
    rep = ValidationReport(passed=True, residual=0.0)
    for name, sub in (
        ("even", in_orbit(even, OrbitTag("even", n), tol)),
        ("odd", in_orbit(odd, OrbitTag("odd", odd.shape[0]), tol)),
    ):
        rep.checks[f"{name}_orbit"] = sub.residual
        rep.residual = max(rep.residual, sub.residual)
        rep.failures += [f"{name} factor: {f}" for f in sub.failures]
    if rep.failures:
        rep.passed = False
        return rep
    product = even @ odd
    sub = validate_cmv(product, tol)
    rep.checks["cmv"] = sub.residual
    rep.residual = max(rep.residual, sub.residual)
    rep.failures += [f"product: {f}" for f in sub.failures]
    if sub.passed:
        try:
            factors, _ = extract_coefficients(product, tol)
        except NotCMV as exc:
            rep.failures.append(f"product: {exc}")
        else:
            dev = max(np.abs(factors.even - even).max(), np.abs(factors.odd - odd).max())
            rep.checks["refactorization"] = float(dev)
            rep.residual = max(rep.residual, float(dev))
            if dev > tol:
                rep.failures.append(f"refactorization differs by {dev:.3e} > {tol:.3e}")
    rep.checks["unitarity"] = max(unitarity_residual(even), unitarity_residual(odd))
    rep.passed = not rep.failures
    return rep
