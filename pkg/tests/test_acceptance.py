"""Acceptance criteria, each at its stated tolerance.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

import numpy as np
import pytest

from cmvlax import cli, cmv, dressing, flows, linalg, rmatrix, sampling
from cmvlax.dressing import OrbitTag

SEED = 2718


def gen_for(*key):
    return sampling.rng([SEED, *key])


def test_1_cmv_structure(criterion):
    worst = {"unitarity": 0.0, "zero_pattern": 0.0, "alpha_roundtrip": 0.0}
    for n in range(2, 17):
        gen = gen_for(1, n)
        i, j = np.indices((n, n))
        forced = (np.abs(i - j) >= 3) | cmv.zero_pattern(n)
        for _ in range(200):
            a = sampling.random_alphas(gen, n - 1, radius=0.99)
            m = cmv.build_cmv(a).matrix
            worst["unitarity"] = max(worst["unitarity"], linalg.unitarity_residual(m))
            worst["zero_pattern"] = max(worst["zero_pattern"], np.abs(m[forced]).max(initial=0.0))
            _, back = cmv.extract_coefficients(m)
            worst["alpha_roundtrip"] = max(worst["alpha_roundtrip"], np.abs(back.alphas - a).max())
    ok = worst["unitarity"] <= 1e-12 and worst["zero_pattern"] <= 1e-14 and worst["alpha_roundtrip"] <= 1e-12
    criterion("1 CMV structure", ok, str({k: f"{v:.2e}" for k, v in worst.items()}))
    assert ok, worst


def test_2_iwasawa(criterion):
    rec = cross = 0.0
    gen = gen_for(2)
    for t in range(200):
        n = 2 + t % 15
        g = sampling.random_gl(gen, n)
        p = linalg.iwasawa(g)
        q = linalg.iwasawa_gram_schmidt(g)
        rec = max(rec, linalg.fro(p.product() - g) / linalg.fro(g))
        cross = max(cross, np.abs(p.k - q.k).max(), np.abs(p.b - q.b).max())
    ok = rec <= 1e-11 and cross <= 1e-10
    criterion("2 Iwasawa", ok, f"reconstruction={rec:.2e} cross-method={cross:.2e}")
    assert ok


def _jacobi(x, y, z):
    jb = rmatrix.j_bracket
    return jb(jb(x, y), z) + jb(jb(y, z), x) + jb(jb(z, x), y)


def test_3_poisson_layer(criterion):
    worst = dict(skew=0.0, iso_k=0.0, iso_b=0.0, mybe=0.0, jacobi=0.0, involution=0.0)
    gen = gen_for(3)
    for t in range(200):
        n = 2 + t % 9
        x, y, z = (sampling.random_algebra(gen, n) for _ in range(3))
        nx, ny, nz = linalg.fro(x), linalg.fro(y), linalg.fro(z)
        pr = rmatrix.pairing
        worst["skew"] = max(worst["skew"], abs(pr(rmatrix.j_map(x), y) + pr(x, rmatrix.j_map(y))) / (nx * ny))
        worst["iso_k"] = max(worst["iso_k"], abs(pr(rmatrix.project_k(x), rmatrix.project_k(y))) / (nx * ny))
        worst["iso_b"] = max(worst["iso_b"], abs(pr(rmatrix.project_b(x), rmatrix.project_b(y))) / (nx * ny))
        worst["mybe"] = max(worst["mybe"], rmatrix.mybe_residual(x, y) / (nx * ny))
        worst["jacobi"] = max(worst["jacobi"], linalg.fro(_jacobi(x, y, z)) / (nx * ny * nz))
    for t in range(20):
        u = sampling.random_unitary(gen, 2 + t % 9)
        for j in range(1, 5):
            for k in range(1, 5):
                br = rmatrix.sklyanin_bracket(rmatrix.trace_power(j), rmatrix.trace_power(k), u)
                worst["involution"] = max(worst["involution"], abs(br))
    ok = all(v <= 1e-12 for key, v in worst.items() if key != "involution") and worst["involution"] <= 1e-10
    criterion("3 Poisson layer", ok, str({k: f"{v:.2e}" for k, v in worst.items()}))
    assert ok, worst


def test_4_dual_group(criterion):
    n = 6
    gen = gen_for(4)
    ident = assoc = 0.0
    eye = np.eye(n)
    dm = rmatrix.dual_multiply
    for _ in range(100):
        g, h, w = (sampling.random_gl(gen, n) for _ in range(3))
        ident = max(ident, np.abs(dm(eye, g) - g).max(), np.abs(dm(g, eye) - g).max())
        assoc = max(assoc, np.abs(dm(dm(g, h), w) - dm(g, dm(h, w))).max())
    ok = ident <= 1e-11 and assoc <= 1e-11
    criterion("4 Dual group", ok, f"identity={ident:.2e} associativity={assoc:.2e}")
    assert ok


def _random_theta(gen, tag):
    if tag.parity == "even":
        return cmv.even_factor(tag.n, sampling.random_alphas(gen, tag.n // 2))
    return cmv.odd_factor(tag.n, sampling.random_alphas(gen, (tag.n - 1) // 2))


def test_5_dressing_orbits(criterion):
    hits = total = 0
    member = pre = forms = 0.0
    for n in range(2, 11):
        gen = gen_for(5, n)
        for parity in ("even", "odd"):
            tag = OrbitTag(parity, n)
            x = dressing.base_point(tag)
            invert = dressing.preimage_even if parity == "even" else dressing.preimage_odd
            for _ in range(100):
                g = sampling.random_gl(gen, n)
                a = dressing.dress(g, x)
                rep = dressing.in_orbit(a, tag, tol=1e-10)
                hits += rep.passed
                total += 1
                member = max(member, rep.residual)
                forms = max(forms, np.abs(a - dressing.dress_lower(g, x)).max())
                target = _random_theta(gen, tag)
                pre = max(pre, np.abs(dressing.dress(invert(target), x) - target).max())
    ok = hits == total and member <= 1e-10 and pre <= 1e-12 and forms <= 1e-11
    criterion("5 Dressing orbits", ok,
              f"{hits}/{total} members, membership={member:.2e} preimage={pre:.2e} forms={forms:.2e}")
    assert ok


def test_6_flows(criterion):
    gen = gen_for(6)
    mono = prod = 0.0
    for t in range(50):
        n, k = 2 + t % 9, 1 + t % 4
        g1, g2 = sampling.random_unitary(gen, n), sampling.random_unitary(gen, n)
        d1, d2 = flows.vector_field_pair(g1, g2, k)
        mono = max(mono, np.abs(d1 @ g2 + g1 @ d2 - flows.vector_field_hk(g1 @ g2, k)).max())
        f = cmv.build_factors(sampling.random_alphas(gen, n - 1))
        de, do = flows.vector_field_cmv(f.even, f.odd, k)
        prod = max(prod, np.abs(de @ f.odd + f.even @ do - flows.vector_field_hk(f.product(), k)).max())

    c = cmv.build_cmv(sampling.random_alphas(gen, 5))
    single = flows.integrate(flows.FlowState.single(c.matrix), 1, 1.0, 1e-3)
    pair = flows.integrate(flows.FlowState.cmv(c.factors.even, c.factors.odd), 1, 1.0, 1e-3)
    conserved = max(single.conserved_drift(), pair.conserved_drift())
    spec = max(single.spectrum_drift(), pair.spectrum_drift())
    unit = max(max(single.unitarity), max(pair.unitarity))
    inv = max(
        max(cmv.validate_cmv(s.mats[0], tol=1e-8).residual for s in single.states),
        max(cmv.validate_cmv(s.monodromy(), tol=1e-8).residual for s in pair.states),
        max(pair.structure),
    )
    ok = mono <= 1e-12 and prod <= 1e-12 and max(conserved, spec, unit, inv) <= 1e-8
    criterion("6 Flows", ok, f"monodromy={mono:.2e} product={prod:.2e} H={conserved:.2e} "
              f"spectrum={spec:.2e} unitarity={unit:.2e} cmv={inv:.2e}")
    assert ok


def test_7_factorization_solution(criterion):
    single_gap = pair_gap = prod_gap = 0.0
    for n in range(2, 9):
        for k in (1, 2, 3):
            gen = gen_for(7, n, k)
            c = cmv.build_cmv(sampling.random_alphas(gen, n - 1))
            e0, o0 = c.factors.even, c.factors.odd
            rk = flows.integrate(flows.FlowState.single(c.matrix), k, 1.0, 1e-3, sample_every=10**6)
            rkp = flows.integrate(flows.FlowState.cmv(e0, o0), k, 1.0, 1e-3, sample_every=10**6)
            exact = flows.solve_by_factorization(c.matrix, k, 1.0)
            e, o = flows.solve_pair_by_factorization(e0, o0, k, 1.0)
            single_gap = max(single_gap, linalg.fro(rk.final.mats[0] - exact))
            pair_gap = max(pair_gap, flows.state_distance(rkp.final, flows.FlowState.cmv(e, o)))
            prod_gap = max(prod_gap, linalg.fro(e @ o - exact))
    ok = single_gap <= 1e-6 and pair_gap <= 1e-6 and prod_gap <= 1e-10
    criterion("7 Factorization solution", ok,
              f"single={single_gap:.2e} pair={pair_gap:.2e} product={prod_gap:.2e}")
    assert ok


def test_8_gradient_consistency(criterion):
    gen = gen_for(8)
    step = 1e-5
    worst = 0.0
    for t in range(50):
        n, k = 2 + t % 7, 1 + t % 3
        g = sampling.random_unitary(gen, n)
        x = sampling.random_algebra(gen, n)
        x /= linalg.fro(x)
        h = rmatrix.trace_power(k)
        fd = (h(linalg.matrix_exp(step * x) @ g) - h(linalg.matrix_exp(-step * x) @ g)) / (2 * step)
        worst = max(worst, abs(rmatrix.pairing(rmatrix.grad_trace_power(g, k), x) - fd))
    ok = worst <= 1e-5
    criterion("8 Gradient consistency", ok, f"max |analytic - fd| = {worst:.2e}")
    assert ok


def test_9_cli_reproducibility(tmp_path, criterion):
    commands = [
        ["flow", "--n", 5, "--k", 2, "--t-end", 0.5, "--h", 1e-2, "--method", "both",
         "--seed", 11, "--format", "csv"],
        ["flow", "--n", 4, "--variant", "pair", "--t-end", 0.1, "--h", 1e-2, "--seed", 11],
        ["dress", "--random", "--trials", 30, "--n", 7, "--base", "odd", "--seed", 11],
        ["check", "--suite", "orbits", "--trials", 5, "--seed", 11],
    ]
    identical = True
    for idx, cmd in enumerate(commands):
        outs = []
        for rep in range(2):
            out = tmp_path / f"run{rep}" / f"cmd{idx}.out"
            assert cli.main([str(a) for a in cmd] + ["--out", str(out)]) == 0
            outs.append(sorted((p.relative_to(out.parent), p.read_bytes())
                               for p in out.parent.rglob("*") if p.is_file()
                               and p.name.startswith(f"cmd{idx}")))
        identical &= outs[0] == outs[1]
    code = cli.main(["check", "--suite", "all", "--seed", "1", "--out", str(tmp_path / "all.json")])
    ok = identical and code == 0
    criterion("9 CLI reproducibility", ok, f"byte-identical={identical} check-all-exit={code}")
    assert ok
