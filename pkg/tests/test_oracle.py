import numpy as np
import pytest

from wspice.errors import ConfigError
from wspice.estimators import EstimatorConfig, estimate, weighted_cost
from wspice.linmodel import PowerEstimate, SnapshotSet, build_dictionary
from wspice.oracle import (
    minimize_spice_direct,
    solve_inner_ls,
    solve_l1_lad,
    solve_sqrt_lasso,
)
from wspice.verify import random_sparse_instance

from .conftest import complex_gaussian


class TestSolveL1Lad:
    def test_zero_data(self, rng):
        d = build_dictionary(complex_gaussian(rng, (4, 6)))
        res = solve_l1_lad(d, np.zeros(4, complex), np.ones(4), np.ones(6))
        assert res.objective <= 1e-8
        assert np.linalg.norm(res.x) <= 1e-6

    def test_scalar_flat_valley(self):
        """With unit weights and B = [1], every x in [0, y] attains the same
        objective y; assert the value, not the minimizer."""
        d = build_dictionary(np.eye(1))
        res = solve_l1_lad(d, np.array([3.0 + 0j]), np.ones(1), np.ones(1))
        assert abs(res.objective - 3.0) <= 1e-6
        assert res.certificate <= 1e-9

    def test_objective_below_zero_candidate(self, rng):
        """The solver must at least beat x = 0."""
        d, data, _ = random_sparse_instance(rng, 6, 12, k=2)
        y = data.Y[:, 0]
        w1 = d.column_sq_norms[12:]
        w2 = d.column_sq_norms[:12]
        res = solve_l1_lad(d, y, w1, w2)
        at_zero = float(np.sqrt(w1) @ np.abs(y))
        assert res.objective <= at_zero + 1e-9

    def test_positive_weights_required(self, rng):
        d = build_dictionary(complex_gaussian(rng, (3, 4)))
        with pytest.raises(ConfigError):
            solve_l1_lad(d, np.ones(3, complex), np.zeros(3), np.ones(4))


class TestSolveSqrtLasso:
    def test_zero_data(self, rng):
        d = build_dictionary(complex_gaussian(rng, (4, 6)))
        res = solve_sqrt_lasso(d, np.zeros(4, complex), 2.0, np.ones(6))
        assert res.objective <= 1e-8

    def test_large_multiplier_bounded_by_zero_solution(self, rng):
        d, data, _ = random_sparse_instance(rng, 5, 10, k=1)
        y = data.Y[:, 0]
        w = 1000.0
        res = solve_sqrt_lasso(d, y, w, d.column_sq_norms[:10])
        assert res.objective <= w * np.linalg.norm(y) + 1e-6

    def test_penalty_dominates_small_signals(self, rng):
        """A huge l1 weight forces x -> 0 and objective -> w ||y||."""
        d, data, _ = random_sparse_instance(rng, 5, 10, k=1)
        y = data.Y[:, 0]
        res = solve_sqrt_lasso(d, y, 1.0, np.full(10, 1e8))
        assert np.linalg.norm(res.x) <= 1e-6
        assert abs(res.objective - np.linalg.norm(y)) <= 1e-4 * np.linalg.norm(y)


class TestSolveInnerLs:
    def test_vanishing_ridge_limit(self, rng):
        """Huge signal powers reduce the problem to weighted least squares."""
        B = complex_gaussian(rng, (8, 4))  # overdetermined so LS is unique
        d = build_dictionary(B)
        y = complex_gaussian(rng, 8)
        p = PowerEstimate(np.concatenate([np.full(4, 1e12), np.ones(8)]), 4)
        res = solve_inner_ls(d, y, p)
        x_ls, *_ = np.linalg.lstsq(B, y, rcond=None)
        assert np.allclose(res.x, x_ls, rtol=1e-5)

    def test_scalar_identity(self):
        d = build_dictionary(np.eye(1))
        res = solve_inner_ls(d, np.array([2.0 + 0j]), PowerEstimate(np.ones(2), 1))
        assert np.isclose(res.x[0], 1.0)
        assert np.isclose(res.objective, 2.0)  # equals y^* R^{-1} y = 4/2

    def test_attained_value_is_quadratic_form(self, rng):
        for _ in range(5):
            d, data, _ = random_sparse_instance(rng, 5, 12, k=2)
            p = PowerEstimate(rng.uniform(0.05, 4.0, size=17), 12)
            res = solve_inner_ls(d, data.Y[:, 0], p)
            R = (d.A * p.values) @ d.A.conj().T
            quad = float(np.real(np.vdot(data.Y[:, 0], np.linalg.solve(R, data.Y[:, 0]))))
            assert np.isclose(res.objective, quad, rtol=1e-10)

    def test_requires_positive_powers(self, rng):
        d, data, _ = random_sparse_instance(rng, 4, 8, k=1)
        vals = np.ones(12)
        vals[0] = 0.0
        with pytest.raises(ConfigError):
            solve_inner_ls(d, data.Y[:, 0], PowerEstimate(vals, 8))


class TestMinimizeSpiceDirect:
    def test_scalar_problem_against_golden_section(self, rng):
        """M = N = 1: the objective reduces to |y|^2 / r + c r over the
        effective scale r, minimized by a golden-section scan."""
        d = build_dictionary(np.array([[1.5 + 0j]]))
        y = np.array([2.0 + 1j])
        w = np.array([2.0, 1.0])
        p = minimize_spice_direct(d, y, w)
        # golden-section reference on r = |b|^2 p1 + p2 with the cheaper of
        # the two power routes
        c = min(w[0] / abs(d.B[0, 0]) ** 2, w[1])
        phi = (np.sqrt(5) - 1) / 2
        lo, hi = 1e-6, 100.0
        f = lambda r: abs(y[0]) ** 2 / r + c * r
        for _ in range(200):
            r1, r2 = hi - phi * (hi - lo), lo + phi * (hi - lo)
            if f(r1) < f(r2):
                hi = r2
            else:
                lo = r1
        r_ref = 0.5 * (lo + hi)
        r_opt = abs(d.B[0, 0]) ** 2 * p.values[0] + p.values[1]
        assert np.isclose(r_opt, r_ref, rtol=1e-4)
        obj = abs(y[0]) ** 2 / r_opt + float(w @ p.values)
        assert np.isclose(obj, f(r_ref), rtol=1e-6)

    def test_weight_scaling_scales_minimizer(self, rng):
        d, data, _ = random_sparse_instance(rng, 4, 8, k=1, snr_db=15.0)
        y = data.Y[:, 0]
        w = d.column_sq_norms
        base = minimize_spice_direct(d, y, w).values
        for c in (0.5, 2.0):
            scaled = minimize_spice_direct(d, y, c ** 2 * w).values
            assert np.linalg.norm(base - c * scaled) <= 1e-4 * np.linalg.norm(base)

    def test_matches_engine_objective(self, rng):
        d, data, _ = random_sparse_instance(rng, 8, 20, k=2)
        w = d.column_sq_norms
        direct = minimize_spice_direct(d, data.Y[:, 0], w)
        engine = estimate(d, data, EstimatorConfig(policy="spice", tol=1e-10, max_iters=50000))
        c_direct = weighted_cost(d, data, direct, w)
        c_engine = weighted_cost(d, data, engine.powers, w)
        assert abs(c_direct - c_engine) <= 1e-4 * abs(c_engine)

    def test_rejects_nonpositive_weights(self, rng):
        d, data, _ = random_sparse_instance(rng, 4, 8, k=1)
        with pytest.raises(ConfigError):
            minimize_spice_direct(d, data.Y[:, 0], np.zeros(12))


class TestEquivalenceChain:
    def test_three_routes_share_the_joint_objective(self, rng):
        """Iteration engine, projected gradient, and the LAD solver reach
        the same joint two-block objective on a small instance, despite
        sharing no solver code."""
        from wspice.amplitude import lmmse_amplitudes
        from wspice.verify import lad_joint_objective

        d, data, _ = random_sparse_instance(rng, 8, 20, k=2)
        y = data.Y[:, 0]
        w = d.column_sq_norms

        engine = estimate(d, data, EstimatorConfig(policy="spice", tol=1e-10, max_iters=30000))
        x_engine = lmmse_amplitudes(d, data, engine.powers).x
        direct = minimize_spice_direct(d, y, w)
        x_direct = lmmse_amplitudes(d, data, direct).x
        lad = solve_l1_lad(d, y, w[20:], w[:20])

        values = [
            lad_joint_objective(d, y, x_engine),
            lad_joint_objective(d, y, x_direct),
            2.0 * lad.objective,
        ]
        spread = (max(values) - min(values)) / min(values)
        assert spread <= 1e-3, values
