"""Invariant suites behind ``cmvlax check``.

Each suite returns a list of :class:`Measurement` records: the worst value
of an invariant over the seeded samples, next to its threshold.  Trial ``i``
of a suite draws from its own generator seeded with ``(seed, tag, n, i)``,
so results do not depend on execution order or on ``--parallel``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from zlib import crc32

import numpy as np

from . import cmv, dressing, flows, linalg, rmatrix, sampling

SUITES = ("structure", "poisson", "orbits", "flows")
DEFAULT_SIZES = {
    "structure": range(2, 17),
    "poisson": range(2, 11),
    "orbits": range(2, 11),
    "flows": (4, 6, 8),
}


@dataclass
class Measurement:
    name: str
    n: int
    measured: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(self.measured <= self.threshold)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def _gen(seed: int, tag: str, n: int, i: int) -> np.random.Generator:
    return sampling.rng([seed, crc32(tag.encode()), n, i])


def _sweep(fn, trials, parallel):
    if parallel and trials > 1:
        with ThreadPoolExecutor() as pool:
            return list(pool.map(fn, range(trials)))
    return [fn(i) for i in range(trials)]


def _collect(n, rows, thresholds):
    """Max of each named quantity over trials, as measurements."""
    out = []
    for name, thr in thresholds.items():
        vals = [r[name] for r in rows if name in r]
        if vals:
            out.append(Measurement(name, n, float(max(vals)), thr))
    return out


# --- structure -----------------------------------------------------------------------

STRUCTURE_THRESHOLDS = {
    "cmv_unitarity": 1e-12,
    "cmv_zero_pattern": 1e-14,
    "cmv_alpha_roundtrip": 1e-12,
    "cmv_determinant": 1e-12,
    "iwasawa_reconstruction_rel": 1e-11,
    "iwasawa_cross_method": 1e-10,
    "iwasawa_unitarity": 1e-12,
}


def _structure_trial(seed, n, i):
    gen = _gen(seed, "structure", n, i)
    alphas = sampling.random_alphas(gen, n - 1)
    c = cmv.build_cmv(alphas)
    m = c.matrix
    _, back = cmv.extract_coefficients(m)
    i_, j_ = np.indices((n, n))
    forced = (np.abs(i_ - j_) >= 3) | cmv.zero_pattern(n)
    g = sampling.random_gl(gen, n)
    p = linalg.iwasawa(g)
    q = linalg.iwasawa_gram_schmidt(g)
    return {
        "cmv_unitarity": linalg.unitarity_residual(m),
        "cmv_zero_pattern": float(np.abs(m[forced]).max(initial=0.0)),
        "cmv_alpha_roundtrip": float(np.abs(back.alphas - alphas).max()),
        "cmv_determinant": float(abs(np.linalg.det(m) - (-1.0) ** n)),
        "iwasawa_reconstruction_rel": linalg.fro(p.product() - g) / linalg.fro(g),
        "iwasawa_cross_method": float(max(np.abs(p.k - q.k).max(), np.abs(p.b - q.b).max())),
        "iwasawa_unitarity": linalg.unitarity_residual(p.k),
    }


def structure_suite(n, seed, trials, parallel=False):
    rows = _sweep(lambda i: _structure_trial(seed, n, i), trials, parallel)
    return _collect(n, rows, STRUCTURE_THRESHOLDS)


# --- poisson -------------------------------------------------------------------------

POISSON_THRESHOLDS = {
    "j_skew_symmetry_rel": 1e-12,
    "isotropy_k_rel": 1e-12,
    "isotropy_b_rel": 1e-12,
    "mybe_rel": 1e-12,
    "jacobi_rel": 1e-12,
    "involution_hj_hk": 1e-10,
    "gradient_fd": 1e-5,
    "bracket_flow_fd": 1e-5,
    "dual_identity": 1e-11,
    "dual_associativity": 1e-11,
}


def _jacobi(x, y, z):
    jb = rmatrix.j_bracket
    return jb(jb(x, y), z) + jb(jb(y, z), x) + jb(jb(z, x), y)


def _poisson_trial(seed, n, i):
    gen = _gen(seed, "poisson", n, i)
    x, y, z = (sampling.random_algebra(gen, n) for _ in range(3))
    nx, ny, nz = linalg.fro(x), linalg.fro(y), linalg.fro(z)
    kx, ky = rmatrix.project_k(x), rmatrix.project_k(y)
    bx, by = rmatrix.project_b(x), rmatrix.project_b(y)
    jx, jy = rmatrix.j_map(x), rmatrix.j_map(y)
    row = {
        "j_skew_symmetry_rel": abs(rmatrix.pairing(jx, y) + rmatrix.pairing(x, jy)) / (nx * ny),
        "isotropy_k_rel": abs(rmatrix.pairing(kx, ky)) / (nx * ny),
        "isotropy_b_rel": abs(rmatrix.pairing(bx, by)) / (nx * ny),
        "mybe_rel": rmatrix.mybe_residual(x, y) / (nx * ny),
        "jacobi_rel": linalg.fro(_jacobi(x, y, z)) / (nx * ny * nz),
    }
    u = sampling.random_unitary(gen, n)
    worst = 0.0
    for j in range(1, 4):
        for k in range(1, 4):
            val = rmatrix.sklyanin_bracket(rmatrix.trace_power(j), rmatrix.trace_power(k), u)
            worst = max(worst, abs(val))
    row["involution_hj_hk"] = worst
    row["gradient_fd"] = gradient_fd_error(gen, u, int(gen.integers(1, 4)))
    return row


def gradient_fd_error(gen, g, k, step=rmatrix.FD_STEP):
    """|(i g^k, X) - d/dt H_k(e^{tX} g)| for one random direction X."""
    x = sampling.random_algebra(gen, g.shape[0])
    x /= linalg.fro(x)
    h = rmatrix.trace_power(k)
    fd = (h(linalg.matrix_exp(step * x) @ g) - h(linalg.matrix_exp(-step * x) @ g)) / (2 * step)
    return abs(rmatrix.pairing(rmatrix.grad_trace_power(g, k), x) - fd)


def bracket_flow_error(gen, n, k, step=1e-6):
    """Compare d/dt phi along the H_k field with {H_k, phi}/2 for phi = Re tr(M g^2)."""
    g = sampling.random_unitary(gen, n)
    mm = sampling.gaussian_matrix(gen, n)
    phi = rmatrix.custom(lambda a: np.trace(mm @ a @ a).real)
    v = flows.vector_field_hk(g, k)
    fd = (phi(g + step * v) - phi(g - step * v)) / (2 * step)
    return abs(fd - 0.5 * rmatrix.sklyanin_bracket(rmatrix.trace_power(k), phi, g))


def _dual_trial(seed, i, n=6):
    gen = _gen(seed, "dual", n, i)
    g, h, w = (sampling.random_gl(gen, n) for _ in range(3))
    eye = np.eye(n)
    dm = rmatrix.dual_multiply
    lhs, rhs = dm(dm(g, h), w), dm(g, dm(h, w))
    scale = max(linalg.fro(lhs), 1.0)
    return {
        "dual_identity": float(
            max(np.abs(dm(eye, h) - h).max(), np.abs(dm(h, eye) - h).max())
        ),
        "dual_associativity": linalg.fro(lhs - rhs) / scale,
    }


def poisson_suite(n, seed, trials, parallel=False):
    rows = _sweep(lambda i: _poisson_trial(seed, n, i), trials, parallel)
    out = _collect(n, rows, POISSON_THRESHOLDS)
    if trials and n >= 2:
        gen = _gen(seed, "bracket-flow", n, 0)
        err = max(bracket_flow_error(gen, n, k) for k in (1, 2))
        out.append(Measurement("bracket_flow_fd", n, err, POISSON_THRESHOLDS["bracket_flow_fd"]))
    return out


def dual_suite(seed, trials, parallel=False):
    rows = _sweep(lambda i: _dual_trial(seed, i), trials, parallel)
    return _collect(6, rows, POISSON_THRESHOLDS)


# --- orbits --------------------------------------------------------------------------

ORBIT_THRESHOLDS = {
    "orbit_even_membership": 1e-10,
    "orbit_odd_membership": 1e-10,
    "preimage_even_roundtrip": 1e-12,
    "preimage_odd_roundtrip": 1e-12,
    "dressing_forms_agree": 1e-11,
    "dressing_unitarity": 1e-12,
    "dressing_composition": 1e-10,
}


def random_theta(gen, tag: dressing.OrbitTag) -> np.ndarray:
    """Random element of the even or odd theta-block set."""
    n = tag.n
    if tag.parity == "even":
        return cmv.even_factor(n, sampling.random_alphas(gen, n // 2))
    return cmv.odd_factor(n, sampling.random_alphas(gen, (n - 1) // 2))


def _orbit_trial(seed, n, i):
    gen = _gen(seed, "orbits", n, i)
    row = {}
    for parity, pre in (("even", dressing.preimage_even), ("odd", dressing.preimage_odd)):
        tag = dressing.OrbitTag(parity, n)
        x = dressing.base_point(tag)
        g = sampling.random_gl(gen, n)
        a = dressing.dress(g, x)
        row[f"orbit_{parity}_membership"] = dressing.in_orbit(a, tag).residual
        row["dressing_unitarity"] = max(
            row.get("dressing_unitarity", 0.0), linalg.unitarity_residual(a)
        )
        row["dressing_forms_agree"] = max(
            row.get("dressing_forms_agree", 0.0),
            float(np.abs(a - dressing.dress_lower(g, x)).max()),
        )
        target = random_theta(gen, tag)
        back = dressing.dress(pre(target), x)
        row[f"preimage_{parity}_roundtrip"] = float(np.abs(back - target).max())
    g, h = sampling.random_gl(gen, n), sampling.random_gl(gen, n)
    y = sampling.random_unitary(gen, n)
    lhs = dressing.dress(rmatrix.dual_multiply(g, h), y)
    row["dressing_composition"] = float(
        np.abs(lhs - dressing.dress(h, dressing.dress(g, y))).max()
    )
    return row


def orbits_suite(n, seed, trials, parallel=False):
    rows = _sweep(lambda i: _orbit_trial(seed, n, i), trials, parallel)
    return _collect(n, rows, ORBIT_THRESHOLDS)


# --- flows ---------------------------------------------------------------------------

FLOW_THRESHOLDS = {
    "monodromy_identity": 1e-12,
    "product_rule_identity": 1e-12,
    "tangency": 1e-13,
    "conserved_drift": 1e-8,
    "spectrum_drift": 1e-8,
    "unitarity_drift": 1e-8,
    "cmv_invariance": 1e-8,
    "rk4_vs_factorization": 1e-6,
    "pair_rk4_vs_factorization": 1e-6,
    "pair_product_vs_single": 1e-10,
}


def monodromy_error(g1, g2, k):
    d1, d2 = flows.vector_field_pair(g1, g2, k)
    return float(np.abs(d1 @ g2 + g1 @ d2 - flows.vector_field_hk(g1 @ g2, k)).max())


def _flow_point_trial(seed, n, i):
    gen = _gen(seed, "flow-points", n, i)
    k = 1 + i % 3
    g1, g2 = sampling.random_unitary(gen, n), sampling.random_unitary(gen, n)
    c = cmv.build_cmv(sampling.random_alphas(gen, n - 1))
    v = flows.vector_field_hk(g1, k)
    return {
        "monodromy_identity": monodromy_error(g1, g2, k),
        "product_rule_identity": monodromy_error(c.factors.even, c.factors.odd, k),
        "tangency": float(np.abs(v @ g1.conj().T + g1 @ v.conj().T).max()),
    }


def flow_run(seed, n, k, t_end=1.0, h=1e-3):
    """One seeded CMV initial condition integrated both ways."""
    gen = _gen(seed, "flow-run", n, k)
    c = cmv.build_cmv(sampling.random_alphas(gen, n - 1))
    single = flows.integrate(flows.FlowState.single(c.matrix), k, t_end, h)
    pair = flows.integrate(flows.FlowState.cmv(c.factors.even, c.factors.odd), k, t_end, h)
    exact = flows.solve_by_factorization(c.matrix, k, t_end)
    e, o = flows.solve_pair_by_factorization(c.factors.even, c.factors.odd, k, t_end)
    invariance = max(
        cmv.validate_cmv(s.monodromy(), tol=np.inf).residual for s in pair.states
    )
    invariance = max(invariance, max(pair.structure))
    return {
        "conserved_drift": max(single.conserved_drift(), pair.conserved_drift()),
        "spectrum_drift": max(single.spectrum_drift(), pair.spectrum_drift()),
        "unitarity_drift": max(max(single.unitarity), max(pair.unitarity)),
        "cmv_invariance": invariance,
        "rk4_vs_factorization": linalg.fro(single.final.mats[0] - exact),
        "pair_rk4_vs_factorization": linalg.fro(pair.final.mats[0] - e)
        + linalg.fro(pair.final.mats[1] - o),
        "pair_product_vs_single": linalg.fro(e @ o - exact),
    }


def flows_suite(n, seed, trials, parallel=False, powers=(1, 2, 3)):
    rows = _sweep(lambda i: _flow_point_trial(seed, n, i), trials, parallel)
    out = _collect(n, rows, FLOW_THRESHOLDS)
    if trials:
        runs = _sweep(lambda i: flow_run(seed, n, powers[i]), len(powers), parallel)
        out += _collect(n, runs, FLOW_THRESHOLDS)
    return out


# --- driver --------------------------------------------------------------------------


def run_suite(suite: str, seed: int, trials: int, sizes=None, parallel=False) -> dict:
    """Run one suite (or ``"all"``) and return a JSON-ready report."""
    names = SUITES if suite == "all" else (suite,)
    for name in names:
        if name not in SUITES:
            raise ValueError(f"unknown suite {name!r}")
    measurements = []
    warnings = []
    if trials == 0:
        warnings.append("trials=0: no samples drawn, all invariants vacuously pass")
    for name in names:
        ns = list(sizes) if sizes is not None else list(DEFAULT_SIZES[name])
        fn = {
            "structure": structure_suite,
            "poisson": poisson_suite,
            "orbits": orbits_suite,
            "flows": flows_suite,
        }[name]
        for n in ns:
            measurements += [(name, m) for m in fn(n, seed, trials, parallel)]
        if name == "poisson":
            measurements += [(name, m) for m in dual_suite(seed, trials, parallel)]
    return {
        "suite": suite,
        "seed": seed,
        "trials": trials,
        "passed": all(m.passed for _, m in measurements),
        "warnings": warnings,
        "invariants": [dict(suite=s, **m.as_dict()) for s, m in measurements],
    }
