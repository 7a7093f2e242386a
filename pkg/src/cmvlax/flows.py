"""Lax flows of the trace-power Hamiltonians and their exact solutions.

Single flow:  ``g' = g A - A g`` with ``A = P_k(i g^k)``.
Pair flow:    ``g1' = g1 P_k(i (g2 g1)^k) - P_k(i (g1 g2)^k) g1`` and the
mirrored equation for ``g2``; the CMV-factor flow is the pair flow with
``(g1, g2) = (even, odd)``.

Exact solutions come from Iwasawa-factorizing ``exp(t i g0^k) = u(t) b(t)``
and conjugating by ``u(t)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cmv import DISK_MARGIN, VerblunskyCoefficients, build_factors, even_factor, odd_factor
from .dressing import OrbitTag, in_orbit, read_blocks
from .errors import DiskExit, InvalidParams, NotInOrbit, StepRejected
from .linalg import (
    as_matrix,
    iwasawa,
    matrix_exp,
    spectral_distance,
    spectrum,
    unitarity_residual,
)
from .rmatrix import project_k

J_MAX = 4


def _check_power(k) -> int:
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise InvalidParams(f"flow power k must be a positive integer, got {k!r}")
    return int(k)


def _generator(g: np.ndarray, k: int) -> np.ndarray:
    return project_k(1j * np.linalg.matrix_power(g, k))


def vector_field_hk(g, k: int) -> np.ndarray:
    """``g A - A g`` with ``A = P_k(i g^k)``."""
    k = _check_power(k)
    g = np.asarray(g, dtype=np.complex128)
    a = _generator(g, k)
    return g @ a - a @ g


def vector_field_pair(g1, g2, k: int) -> tuple[np.ndarray, np.ndarray]:
    k = _check_power(k)
    g1 = np.asarray(g1, dtype=np.complex128)
    g2 = np.asarray(g2, dtype=np.complex128)
    a12 = _generator(g1 @ g2, k)
    a21 = _generator(g2 @ g1, k)
    return g1 @ a21 - a12 @ g1, g2 @ a12 - a21 @ g2


def vector_field_cmv(even, odd, k: int, check: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """The pair field on (even, odd) theta factors.

    Raises:
        NotInOrbit: if ``check`` and either factor is not of theta-block form.
    """
    k = _check_power(k)
    if check:
        even, odd = as_matrix(even), as_matrix(odd)
        n = even.shape[0]
        for name, m in (("even", even), ("odd", odd)):
            rep = in_orbit(m, OrbitTag(name, n), tol=1e-8)
            if not rep.passed:
                raise NotInOrbit(f"{name} factor: {rep.first_failure}")
    return vector_field_pair(even, odd, k)


# --- states and trajectories ---------------------------------------------------------


@dataclass(frozen=True)
class FlowState:
    """Flow state: ``variant`` is ``"single"``, ``"pair"`` or ``"cmv"``."""

    variant: str
    mats: tuple

    def __post_init__(self):
        sizes = {"single": 1, "pair": 2, "cmv": 2}
        if self.variant not in sizes:
            raise InvalidParams(f"unknown state variant {self.variant!r}")
        if len(self.mats) != sizes[self.variant]:
            raise InvalidParams(f"{self.variant} state needs {sizes[self.variant]} matrices")
        object.__setattr__(self, "mats", tuple(as_matrix(m) for m in self.mats))

    @classmethod
    def single(cls, g):
        return cls("single", (g,))

    @classmethod
    def pair(cls, g1, g2):
        return cls("pair", (g1, g2))

    @classmethod
    def cmv(cls, even, odd):
        return cls("cmv", (even, odd))

    @property
    def n(self) -> int:
        return self.mats[0].shape[0]

    def monodromy(self) -> np.ndarray:
        """``g`` for single states, ``g1 g2`` otherwise."""
        if self.variant == "single":
            return self.mats[0]
        return self.mats[0] @ self.mats[1]


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    conserved: list = field(default_factory=list)
    unitarity: list = field(default_factory=list)
    structure: list = field(default_factory=list)

    def append(self, t, state, j_max):
        self.times.append(float(t))
        self.states.append(state)
        self.conserved.append(conserved_quantities(state.monodromy(), j_max))
        self.unitarity.append(max(unitarity_residual(m) for m in state.mats))
        self.structure.append(structure_residual(state))

    @property
    def final(self) -> FlowState:
        return self.states[-1]

    def conserved_drift(self) -> float:
        c = np.array(self.conserved)
        return float(np.abs(c - c[0]).max())

    def spectrum_drift(self) -> float:
        s0 = spectrum(self.states[0].monodromy())
        return max(spectral_distance(s0, spectrum(s.monodromy())) for s in self.states)


def conserved_quantities(g: np.ndarray, j_max: int = J_MAX) -> list:
    """``[H_1(g), ..., H_jmax(g)]`` with ``H_j = Re tr(g^j) / j``."""
    out = []
    p = np.eye(g.shape[0], dtype=np.complex128)
    for j in range(1, j_max + 1):
        p = p @ g
        out.append(float(np.trace(p).real / j))
    return out


def structure_residual(state: FlowState) -> float:
    """Theta-block residual of both factors for cmv states; 0 otherwise."""
    if state.variant != "cmv":
        return 0.0
    even, odd = state.mats
    n = state.n
    return max(
        in_orbit(even, OrbitTag("even", n), tol=np.inf).residual,
        in_orbit(odd, OrbitTag("odd", n), tol=np.inf).residual,
    )


def _field(state: FlowState, k: int):
    if state.variant == "single":
        return (vector_field_hk(state.mats[0], k),)
    return vector_field_pair(state.mats[0], state.mats[1], k)


def _rebuild_theta(m: np.ndarray, tag: OrbitTag) -> np.ndarray:
    alphas = read_blocks(m, tag)
    mod = np.abs(alphas)
    cap = 1.0 - DISK_MARGIN
    alphas = np.where(mod > cap, alphas / np.where(mod == 0, 1, mod) * cap, alphas)
    build = even_factor if tag.parity == "even" else odd_factor
    return build(tag.n, alphas)


def reproject(state: FlowState) -> FlowState:
    """Snap a state back onto its structure set.

    Single and pair matrices are replaced by their unitary Iwasawa factor;
    cmv factors are rebuilt exactly from the coefficients read off their
    blocks (clamped inside the disk).
    """
    if state.variant == "cmv":
        n = state.n
        return FlowState.cmv(
            _rebuild_theta(state.mats[0], OrbitTag("even", n)),
            _rebuild_theta(state.mats[1], OrbitTag("odd", n)),
        )
    return FlowState(state.variant, tuple(iwasawa(m).k for m in state.mats))


def _rk4_step(state: FlowState, k: int, h: float) -> FlowState:
    def shifted(ds, c):
        return FlowState(state.variant, tuple(m + c * d for m, d in zip(state.mats, ds)))

    k1 = _field(state, k)
    k2 = _field(shifted(k1, h / 2), k)
    k3 = _field(shifted(k2, h / 2), k)
    k4 = _field(shifted(k3, h), k)
    return FlowState(
        state.variant,
        tuple(
            m + (h / 6) * (a + 2 * b + 2 * c + d)
            for m, a, b, c, d in zip(state.mats, k1, k2, k3, k4)
        ),
    )


def integrate(
    state: FlowState,
    k: int,
    t_end: float,
    h: float,
    reproject_steps: bool = False,
    j_max: int = J_MAX,
    sample_every: int = 1,
    step_tol: float = 1e-8,
) -> Trajectory:
    """Fixed-step classical RK4 on the field matching ``state.variant``.

    ``t_end`` may be negative (integrates backwards with step ``-h``) or
    zero (a single sample).  The step count is ``ceil(|t_end| / h)`` with
    the step shrunk to land exactly on ``t_end``.

    Raises:
        InvalidParams: for ``k < 1``, ``h <= 0`` or non-finite times.
        StepRejected: if one step grows the unitarity or structure residual
            by more than ``1e3 * step_tol``, or produces non-finite values.
    """
    k = _check_power(k)
    if not (np.isfinite(h) and h > 0):
        raise InvalidParams(f"step size must be positive, got {h!r}")
    if not np.isfinite(t_end):
        raise InvalidParams(f"t_end must be finite, got {t_end!r}")
    if sample_every < 1:
        raise InvalidParams("sample_every must be >= 1")
    steps = int(np.ceil(abs(t_end) / h - 1e-9)) if t_end else 0
    dt = t_end / steps if steps else 0.0
    limit = 1e3 * step_tol

    traj = Trajectory()
    traj.append(0.0, state, j_max)
    prev_res = max(traj.unitarity[-1], traj.structure[-1])
    for i in range(1, steps + 1):
        state = _rk4_step(state, k, dt)
        if not all(np.all(np.isfinite(m)) for m in state.mats):
            raise StepRejected(f"non-finite state at step {i} (t={i * dt:.6g})")
        if reproject_steps:
            state = reproject(state)
        res = max(
            max(unitarity_residual(m) for m in state.mats), structure_residual(state)
        )
        if res - prev_res > limit:
            raise StepRejected(
                f"residual grew by {res - prev_res:.3e} > {limit:.3e} at step {i} (t={i * dt:.6g})"
            )
        prev_res = res
        if i % sample_every == 0 or i == steps:
            traj.append(i * dt, state, j_max)
    return traj


# --- exact solutions -----------------------------------------------------------------


def _unitary_flow_factor(g0: np.ndarray, k: int, t: float) -> np.ndarray:
    # i g0^k is normal for unitary g0; matrix_exp diagonalizes it unitarily
    return iwasawa(matrix_exp(t * 1j * np.linalg.matrix_power(g0, k))).k


def solve_by_factorization(g0, k: int, t: float) -> np.ndarray:
    """``u(t)^{-1} g0 u(t)`` where ``exp(t i g0^k) = u(t) b(t)``."""
    k = _check_power(k)
    g0 = as_matrix(g0)
    if t == 0:
        return g0.copy()
    u = _unitary_flow_factor(g0, k, t)
    return u.conj().T @ g0 @ u


def solve_pair_by_factorization(g1, g2, k: int, t: float) -> tuple[np.ndarray, np.ndarray]:
    """``(u^{-1} g1 v, v^{-1} g2 u)`` with ``u``, ``v`` the unitary factors of
    ``exp(t i (g1 g2)^k)`` and ``exp(t i (g2 g1)^k)``."""
    k = _check_power(k)
    g1, g2 = as_matrix(g1), as_matrix(g2)
    if t == 0:
        return g1.copy(), g2.copy()
    u = _unitary_flow_factor(g1 @ g2, k, t)
    v = _unitary_flow_factor(g2 @ g1, k, t)
    return u.conj().T @ g1 @ v, v.conj().T @ g2 @ u


def verblunsky_trajectory(alpha0, k: int, t_end: float, h: float, sample_every: int = 1):
    """Coefficients along the cmv flow, integrated with reprojection.

    Returns a list of ``(time, coefficients)`` pairs.

    Raises:
        DiskExit: if some coefficient reaches ``|alpha| >= 1 - 1e-12``.
    """
    coeffs = alpha0 if isinstance(alpha0, VerblunskyCoefficients) else VerblunskyCoefficients(alpha0)
    f = build_factors(coeffs)
    n = coeffs.n
    traj = integrate(
        FlowState.cmv(f.even, f.odd), k, t_end, h, reproject_steps=True, sample_every=sample_every
    )
    out = []
    for t, s in zip(traj.times, traj.states):
        alphas = np.empty(n - 1, dtype=np.complex128)
        alphas[0::2] = read_blocks(s.mats[0], OrbitTag("even", n))
        alphas[1::2] = read_blocks(s.mats[1], OrbitTag("odd", n))
        bad = np.flatnonzero(1.0 - np.abs(alphas) <= DISK_MARGIN)
        if bad.size:
            raise DiskExit(f"alpha_{bad[0]} left the disk at t={t:.6g}", time=t)
        out.append((t, VerblunskyCoefficients(alphas)))
    return out


def factorization_trajectory(state: FlowState, k: int, times, j_max: int = J_MAX) -> Trajectory:
    """Trajectory sampled from the exact solution at the given times."""
    k = _check_power(k)
    traj = Trajectory()
    for t in times:
        if state.variant == "single":
            s = FlowState.single(solve_by_factorization(state.mats[0], k, t))
        else:
            s = FlowState(state.variant, solve_pair_by_factorization(*state.mats, k, t))
        traj.append(t, s, j_max)
    return traj


def state_distance(a: FlowState, b: FlowState) -> float:
    """Frobenius distance summed over the component matrices."""
    return float(sum(np.linalg.norm(x - y) for x, y in zip(a.mats, b.mats)))
