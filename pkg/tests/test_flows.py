import numpy as np
import pytest

from cmvlax import cmv, linalg, rmatrix, sampling
from cmvlax.errors import InvalidParams, NotInOrbit, StepRejected
from cmvlax.flows import (
    FlowState,
    conserved_quantities,
    factorization_trajectory,
    integrate,
    reproject,
    solve_by_factorization,
    solve_pair_by_factorization,
    state_distance,
    vector_field_cmv,
    vector_field_hk,
    vector_field_pair,
    verblunsky_trajectory,
)


def cmv_state(gen, n):
    c = cmv.build_cmv(sampling.random_alphas(gen, n - 1))
    return c, FlowState.cmv(c.factors.even, c.factors.odd)


class TestVectorFields:
    @pytest.mark.parametrize("k", [1, 2, 5])
    def test_identity(self, k):
        np.testing.assert_array_equal(vector_field_hk(np.eye(3), k), 0)

    def test_diagonal_unitary(self, gen):
        g = np.diag(np.exp(1j * gen.uniform(0, 2 * np.pi, 5)))
        for k in (1, 2, 3):
            np.testing.assert_allclose(vector_field_hk(g, k), 0, atol=1e-15)

    def test_matches_bracket_on_free_cmv(self):
        # recover the H_1 field entrywise from brackets with the coordinate functions
        x = cmv.free_cmv(4).matrix
        v = vector_field_hk(x, 1)
        h1 = rmatrix.trace_power(1)
        rec = np.zeros((4, 4), dtype=complex)
        for i in range(4):
            for j in range(4):
                re = rmatrix.custom(lambda g, i=i, j=j: g[i, j].real)
                im = rmatrix.custom(lambda g, i=i, j=j: g[i, j].imag)
                rec[i, j] = 0.5 * (
                    rmatrix.sklyanin_bracket(h1, re, x) + 1j * rmatrix.sklyanin_bracket(h1, im, x)
                )
        np.testing.assert_allclose(rec, v, atol=1e-5)

    def test_tangent_to_unitary_group(self, gen):
        for n in (2, 5, 8):
            g = sampling.random_unitary(gen, n)
            for k in (1, 2, 3):
                v = vector_field_hk(g, k)
                assert np.abs(v @ g.conj().T + g @ v.conj().T).max() <= 1e-13

    def test_pair_identity(self):
        d1, d2 = vector_field_pair(np.eye(3), np.eye(3), 2)
        np.testing.assert_array_equal(d1, 0)
        np.testing.assert_array_equal(d2, 0)

    def test_monodromy_identity(self, gen):
        for n in (3, 6):
            for k in (1, 2, 3):
                g1, g2 = sampling.random_unitary(gen, n), sampling.random_unitary(gen, n)
                d1, d2 = vector_field_pair(g1, g2, k)
                lhs = d1 @ g2 + g1 @ d2
                assert np.abs(lhs - vector_field_hk(g1 @ g2, k)).max() <= 1e-12

    def test_pair_swap(self, gen):
        g1, g2 = sampling.random_unitary(gen, 4), sampling.random_unitary(gen, 4)
        d1, d2 = vector_field_pair(g1, g2, 2)
        e1, e2 = vector_field_pair(g2, g1, 2)
        np.testing.assert_allclose(e1, d2, atol=1e-15)
        np.testing.assert_allclose(e2, d1, atol=1e-15)

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_cmv_free_product_rule(self, k):
        f = cmv.free_cmv(6).factors
        de, do = vector_field_cmv(f.even, f.odd, k)
        lhs = de @ f.odd + f.even @ do
        assert np.abs(lhs - vector_field_hk(f.product(), k)).max() <= 1e-13

    def test_cmv_random_product_rule(self, gen):
        c, _ = cmv_state(gen, 6)
        de, do = vector_field_cmv(c.factors.even, c.factors.odd, 1)
        lhs = de @ c.factors.odd + c.factors.even @ do
        assert np.abs(lhs - vector_field_hk(c.matrix, 1)).max() <= 1e-12

    def test_cmv_field_tangent_to_blocks(self, gen):
        c, _ = cmv_state(gen, 7)
        de, do = vector_field_cmv(c.factors.even, c.factors.odd, 2)
        assert np.abs(de[c.factors.even == 0]).max() <= 1e-15
        assert np.abs(do[c.factors.odd == 0]).max() <= 1e-15

    def test_free_cmv_field_is_not_zero(self):
        f = cmv.free_cmv(4).factors
        de, do = vector_field_cmv(f.even, f.odd, 1)
        # each even block starts moving with d(alpha)/dt = -i; the odd factor is momentarily still
        np.testing.assert_allclose(de, 1j * np.eye(4), atol=1e-15)
        np.testing.assert_allclose(do, 0, atol=1e-15)

    def test_cmv_rejects_non_orbit(self, gen):
        with pytest.raises(NotInOrbit):
            vector_field_cmv(sampling.random_unitary(gen, 4), cmv.free_cmv(4).factors.odd, 1)

    @pytest.mark.parametrize("k", [0, -1, 1.5])
    def test_bad_power(self, k):
        f = cmv.free_cmv(4).factors
        with pytest.raises(InvalidParams):
            vector_field_cmv(f.even, f.odd, k)
        with pytest.raises(InvalidParams):
            vector_field_hk(np.eye(2), k)


class TestIntegrate:
    def test_fixed_point(self):
        traj = integrate(FlowState.single(np.eye(4)), 2, 0.5, 0.01)
        for s in traj.states:
            np.testing.assert_array_equal(s.mats[0], np.eye(4))

    def test_zero_time(self, gen):
        _, st = cmv_state(gen, 4)
        traj = integrate(st, 1, 0.0, 1e-3)
        assert traj.times == [0.0] and traj.final is st

    def test_free_conservation(self):
        x = cmv.free_cmv(6).matrix
        traj = integrate(FlowState.single(x), 1, 1.0, 1e-3, j_max=3)
        c = np.array(traj.conserved)
        assert np.abs(c - c[0]).max() <= 1e-8
        assert traj.spectrum_drift() <= 1e-8
        assert max(traj.unitarity) <= 1e-8

    def test_cmv_set_invariant(self, gen):
        _, st = cmv_state(gen, 6)
        traj = integrate(st, 1, 1.0, 1e-3, sample_every=50)
        for s in traj.states:
            rep = cmv.validate_cmv(s.monodromy(), tol=1e-8)
            assert rep.passed and rep.residual <= 1e-8

    def test_reprojection(self, gen):
        u = sampling.random_unitary(gen, 5)
        traj = integrate(FlowState.single(u), 2, 1.0, 1e-2, reproject_steps=True)
        assert max(traj.unitarity) <= 1e-12
        _, st = cmv_state(gen, 5)
        traj = integrate(st, 2, 0.5, 1e-2, reproject_steps=True)
        assert max(traj.structure) <= 1e-15

    def test_reproject_idempotent(self, gen):
        _, st = cmv_state(gen, 6)
        once = reproject(st)
        assert state_distance(reproject(once), once) == 0.0

    def test_times_and_lengths(self, gen):
        _, st = cmv_state(gen, 4)
        traj = integrate(st, 1, 0.1, 0.03, sample_every=2)
        assert np.all(np.diff(traj.times) > 0)
        assert traj.times[-1] == pytest.approx(0.1)
        assert len({len(traj.times), len(traj.states), len(traj.conserved), len(traj.unitarity)}) == 1

    def test_invalid(self, gen):
        st = FlowState.single(np.eye(2))
        with pytest.raises(InvalidParams):
            integrate(st, 1, 1.0, 0.0)
        with pytest.raises(InvalidParams):
            integrate(st, 0, 1.0, 0.1)
        with pytest.raises(InvalidParams):
            integrate(st, 1, np.inf, 0.1)

    def test_step_rejected(self, gen):
        u = sampling.random_unitary(gen, 6)
        with pytest.raises(StepRejected):
            integrate(FlowState.single(u), 3, 20.0, 2.0)

    def test_state_variants(self):
        with pytest.raises(InvalidParams):
            FlowState("triple", (np.eye(2),))
        with pytest.raises(InvalidParams):
            FlowState("pair", (np.eye(2),))


class TestFactorization:
    def test_time_zero(self, gen):
        u = sampling.random_unitary(gen, 4)
        np.testing.assert_array_equal(solve_by_factorization(u, 2, 0.0), u)
        a, b = solve_pair_by_factorization(u, u.T, 1, 0.0)
        np.testing.assert_array_equal(a, u)
        np.testing.assert_array_equal(b, u.T)

    def test_diagonal_fixed(self, gen):
        g = np.diag(np.exp(1j * gen.uniform(0, 2 * np.pi, 4)))
        for t in (0.3, 2.0, 7.0):
            np.testing.assert_allclose(solve_by_factorization(g, 2, t), g, atol=1e-12)

    def test_against_rk4_single(self, gen):
        c, _ = cmv_state(gen, 6)
        traj = integrate(FlowState.single(c.matrix), 1, 1.0, 1e-4, sample_every=10**6)
        assert linalg.fro(traj.final.mats[0] - solve_by_factorization(c.matrix, 1, 1.0)) <= 1e-6

    def test_against_rk4_cmv_pair(self, gen):
        c, st = cmv_state(gen, 6)
        traj = integrate(st, 1, 0.5, 1e-4, sample_every=10**6)
        e, o = solve_pair_by_factorization(c.factors.even, c.factors.odd, 1, 0.5)
        assert state_distance(traj.final, FlowState.cmv(e, o)) <= 1e-6

    def test_pair_product(self, gen):
        g1, g2 = sampling.random_unitary(gen, 5), sampling.random_unitary(gen, 5)
        for k in (1, 2, 3):
            a, b = solve_pair_by_factorization(g1, g2, k, 0.8)
            assert linalg.fro(a @ b - solve_by_factorization(g1 @ g2, k, 0.8)) <= 1e-10

    def test_isospectral(self, gen):
        u = sampling.random_unitary(gen, 6)
        g = solve_by_factorization(u, 2, 3.0)
        assert linalg.spectral_distance(linalg.spectrum(u), linalg.spectrum(g)) <= 1e-10

    def test_exact_solution_stays_cmv(self, gen):
        c, _ = cmv_state(gen, 7)
        e, o = solve_pair_by_factorization(c.factors.even, c.factors.odd, 2, 1.5)
        from cmvlax.dressing import leaf_product_check

        assert leaf_product_check(e, o, tol=1e-10).passed

    def test_trajectory_helper(self, gen):
        c, st = cmv_state(gen, 4)
        traj = factorization_trajectory(st, 1, [0.0, 0.5, 1.0])
        assert traj.times == [0.0, 0.5, 1.0]
        c0 = conserved_quantities(c.matrix)
        np.testing.assert_allclose(traj.conserved[-1], c0, atol=1e-12)


class TestVerblunsky:
    def test_from_zero_matches_factorization(self):
        # the zero tuple is not a fixed point: the coefficients leave 0 at once
        out = verblunsky_trajectory(np.zeros(3), 1, 0.5, 1e-3, sample_every=250)
        assert np.abs(out[-1][1].alphas).max() > 0.1
        f = cmv.free_cmv(4).factors
        e, o = solve_pair_by_factorization(f.even, f.odd, 1, 0.5)
        _, c = cmv.extract_coefficients(e @ o)
        assert np.abs(out[-1][1].alphas - c.alphas).max() <= 1e-6

    def test_seeded_n4(self, gen):
        a0 = sampling.random_alphas(gen, 3)
        out = verblunsky_trajectory(a0, 1, 1.0, 1e-3, sample_every=100)
        f = cmv.build_factors(a0)
        e, o = solve_pair_by_factorization(f.even, f.odd, 1, 1.0)
        _, c = cmv.extract_coefficients(e @ o)
        assert np.abs(out[-1][1].alphas - c.alphas).max() <= 1e-6
        assert all(np.abs(a.alphas).max() < 1 for _, a in out)

    def test_reversal(self, gen):
        a0 = sampling.random_alphas(gen, 5)
        fwd = verblunsky_trajectory(a0, 2, 0.5, 1e-3, sample_every=10**6)
        back = verblunsky_trajectory(fwd[-1][1], 2, -0.5, 1e-3, sample_every=10**6)
        assert np.abs(back[-1][1].alphas - a0).max() <= 1e-7
