"""The r-matrix layer on gl(n, C) viewed as a real Lie algebra.

The splitting is ``gl(n) = k + b`` with ``k = u(n)`` (skew-Hermitian) and
``b`` the lower-triangular matrices with real diagonal.  ``J`` is
``P_k - P_b``; the pairing is ``(X, Y) = Im tr(XY)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import IllConditioned
from .linalg import as_matrix, commutator, fro, iwasawa, matrix_exp

FD_STEP = 1e-5


def _parts(x: np.ndarray):
    upper = np.triu(x, 1)
    lower = np.tril(x, -1)
    diag = np.diag(np.diag(x))
    return upper, diag, lower


def project_k(x) -> np.ndarray:
    """Projection onto u(n) along b.

    The strict upper part ``U`` maps to ``U - U*`` and the imaginary part of
    the diagonal is kept; the real diagonal belongs to b.
    """
    x = np.asarray(x, dtype=np.complex128)
    upper, diag, _ = _parts(x)
    return upper - upper.conj().T + 1j * diag.imag


def project_b(x) -> np.ndarray:
    """Projection onto lower-triangular-real-diagonal matrices along u(n)."""
    x = np.asarray(x, dtype=np.complex128)
    upper, diag, lower = _parts(x)
    return lower + diag.real + upper.conj().T


def project_k_literal(x) -> np.ndarray:
    """``U - U*`` with the diagonal dropped entirely.

    Diagnostic only: it is not a projection onto u(n) (it kills ``iI``).
    """
    x = np.asarray(x, dtype=np.complex128)
    upper = np.triu(x, 1)
    return upper - upper.conj().T


def project_b_literal(x) -> np.ndarray:
    """``L + D + U*`` keeping the full complex diagonal; diagnostic only."""
    x = np.asarray(x, dtype=np.complex128)
    upper, diag, lower = _parts(x)
    return lower + diag + upper.conj().T


def j_map(x) -> np.ndarray:
    return project_k(x) - project_b(x)


def j_bracket(x, y) -> np.ndarray:
    """``([JX, Y] + [X, JY]) / 2``."""
    return 0.5 * (commutator(j_map(x), y) + commutator(x, j_map(y)))


def pairing(x, y) -> float:
    """``Im tr(XY)``."""
    x = np.asarray(x)
    y = np.asarray(y)
    return float(np.sum(x * y.T).imag)


def mybe_residual(x, y) -> float:
    """Frobenius norm of ``[JX,JY] - J([JX,Y] + [X,JY]) + [X,Y]``."""
    jx, jy = j_map(x), j_map(y)
    return fro(
        commutator(jx, jy)
        - j_map(commutator(jx, y) + commutator(x, jy))
        + commutator(x, y)
    )


@dataclass(frozen=True)
class HamiltonianFunction:
    """A real function on the group (or on pairs of group elements).

    ``kind`` is ``"trace_power"``, ``"pair_trace_power"`` or ``"custom"``.
    Call the object to evaluate it.
    """

    kind: str
    evaluator: Callable
    power: int | None = None

    def __call__(self, *g) -> float:
        return float(self.evaluator(*g))


def trace_power(k: int) -> HamiltonianFunction:
    """``H_k(g) = Re tr(g^k) / k``."""
    if k < 1:
        raise ValueError("power must be a positive integer")

    def h(g):
        return np.trace(np.linalg.matrix_power(g, k)).real / k

    return HamiltonianFunction("trace_power", h, k)


def pair_trace_power(k: int) -> HamiltonianFunction:
    """``H_k(g1, g2) = Re tr((g1 g2)^k) / k``."""
    if k < 1:
        raise ValueError("power must be a positive integer")

    def h(g1, g2):
        return np.trace(np.linalg.matrix_power(g1 @ g2, k)).real / k

    return HamiltonianFunction("pair_trace_power", h, k)


def custom(evaluator: Callable) -> HamiltonianFunction:
    return HamiltonianFunction("custom", evaluator)


def grad_trace_power(g, k: int) -> np.ndarray:
    """Left and right gradient of ``H_k``: ``i g^k``."""
    return 1j * np.linalg.matrix_power(as_matrix(g), k)


@lru_cache(maxsize=None)
def _basis(n: int):
    """Real basis ``{E_jk, i E_jk}`` of gl(n) and the LU factors of its Gram matrix."""
    basis = []
    for j in range(n):
        for k in range(n):
            e = np.zeros((n, n), dtype=np.complex128)
            e[j, k] = 1.0
            basis.append(e)
            basis.append(1j * e)
    gram = np.array([[pairing(a, b) for b in basis] for a in basis])
    cond = np.linalg.cond(gram)
    lu = scipy.linalg.lu_factor(gram)
    return tuple(basis), lu, cond


def numerical_gradient(phi, g, side: str = "right", step: float = FD_STEP) -> np.ndarray:
    """Gradient of ``phi`` at ``g`` from central differences.

    ``side="right"`` gives ``D phi`` defined by ``(D phi, X) = d/dt phi(e^{tX} g)``;
    ``side="left"`` gives ``D' phi`` with ``(D' phi, X) = d/dt phi(g e^{tX})``.
    The gradient is recovered from its pairings with the real basis
    ``{E_jk, i E_jk}`` through the Gram matrix of the pairing.

    Raises:
        IllConditioned: if the Gram matrix has condition number above 1e8.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    g = as_matrix(g)
    basis, lu, cond = _basis(g.shape[0])
    if cond > 1e8:
        raise IllConditioned(f"pairing Gram matrix has condition {cond:.3e}")
    derivs = np.empty(len(basis))
    for m, e in enumerate(basis):
        fwd, bwd = matrix_exp(step * e), matrix_exp(-step * e)
        if side == "right":
            derivs[m] = (phi(fwd @ g) - phi(bwd @ g)) / (2 * step)
        else:
            derivs[m] = (phi(g @ fwd) - phi(g @ bwd)) / (2 * step)
    # (D, B_m) = sum_l c_l (B_l, B_m); the Gram matrix is symmetric
    coef = scipy.linalg.lu_solve(lu, derivs)
    return np.tensordot(coef, np.array(basis), axes=1)


def gradient(phi, g, side: str = "right") -> np.ndarray:
    """Analytic gradient for trace powers, central differences otherwise."""
    if isinstance(phi, HamiltonianFunction) and phi.kind == "trace_power":
        return grad_trace_power(g, phi.power)
    return numerical_gradient(phi, g, side)


def sklyanin_bracket(phi, psi, g) -> float:
    """``(J D'phi, D'psi) - (J D phi, D psi)`` at ``g``.

    With this normalization the derivative of ``phi`` along the Hamiltonian
    vector field of ``psi`` (see :mod:`cmvlax.flows`) equals
    ``sklyanin_bracket(psi, phi, g) / 2``.
    """
    g = as_matrix(g)
    dl_phi, dl_psi = gradient(phi, g, "left"), gradient(psi, g, "left")
    dr_phi, dr_psi = gradient(phi, g, "right"), gradient(psi, g, "right")
    return pairing(j_map(dl_phi), dl_psi) - pairing(j_map(dr_phi), dr_psi)


def dual_multiply(g, h) -> np.ndarray:
    """Product in the dual group: ``g_+ h g_-^{-1}``.

    Since ``g_-^{-1}`` is the lower Iwasawa factor ``b`` of ``g = k b``, this
    is ``k h b``.
    """
    pair = iwasawa(g)
    return pair.k @ as_matrix(h) @ pair.b
