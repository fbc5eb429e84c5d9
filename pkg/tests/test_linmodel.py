import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wspice.errors import (
    DimensionMismatchError,
    NotPositiveDefiniteError,
    ZeroColumnError,
)
from wspice.linmodel import (
    PowerEstimate,
    SnapshotSet,
    assemble_covariance,
    build_dictionary,
    factor_covariance,
    noise_floor,
    quad_forms,
)

from .conftest import complex_gaussian


class TestBuildDictionary:
    def test_identity_regressors(self):
        d = build_dictionary(np.eye(3))
        assert np.array_equal(d.A, np.concatenate([np.eye(3), np.eye(3)], axis=1))
        assert np.array_equal(d.column_sq_norms, np.ones(6))

    def test_ones_column(self):
        d = build_dictionary(np.ones((3, 1)))
        assert np.allclose(d.column_sq_norms, [3.0, 1.0, 1.0, 1.0])

    def test_column_norms_against_entrywise_sum(self, rng):
        B = complex_gaussian(rng, (4, 8))
        d = build_dictionary(B)
        # independent elementwise accumulation
        expected = np.zeros(12)
        A = np.concatenate([B, np.eye(4)], axis=1)
        for k in range(12):
            for i in range(4):
                expected[k] += abs(A[i, k]) ** 2
        assert np.allclose(d.column_sq_norms, expected, rtol=1e-12)

    def test_zero_column_rejected(self):
        B = np.ones((3, 2), dtype=complex)
        B[:, 1] = 0
        with pytest.raises(ZeroColumnError) as err:
            build_dictionary(B)
        assert err.value.index == 1

    def test_empty_rejected(self):
        with pytest.raises(DimensionMismatchError):
            build_dictionary(np.zeros((0, 3)))


class TestFactorCovariance:
    def test_identity_dictionary_unit_powers(self):
        d = build_dictionary(np.eye(2))
        f = factor_covariance(d, PowerEstimate(np.ones(4), 2))
        R = f.chol_lower @ f.chol_lower.conj().T
        assert np.allclose(R, 2 * np.eye(2))
        assert f.jitter_applied == 0.0

    def test_pure_noise_model(self):
        d = build_dictionary(np.eye(3) + 1j * np.eye(3))
        sigma2 = 0.7
        p = np.concatenate([np.zeros(3), np.full(3, sigma2)])
        f = factor_covariance(d, PowerEstimate(p, 3))
        R = f.chol_lower @ f.chol_lower.conj().T
        assert np.allclose(R, sigma2 * np.eye(3))

    def test_matches_rank_one_accumulation(self, rng):
        B = complex_gaussian(rng, (3, 5))
        d = build_dictionary(B)
        p = PowerEstimate(rng.uniform(0.1, 2.0, size=8), 5)
        R_brute = np.zeros((3, 3), dtype=complex)
        for k in range(8):
            a = d.A[:, k]
            R_brute += p.values[k] * np.outer(a, a.conj())
        f = factor_covariance(d, p)
        assert np.allclose(f.chol_lower @ f.chol_lower.conj().T, R_brute, rtol=1e-12)

    def test_zero_powers_rejected(self):
        d = build_dictionary(np.eye(2))
        with pytest.raises(NotPositiveDefiniteError):
            factor_covariance(d, PowerEstimate(np.zeros(4), 2))

    @given(seed=st.integers(0, 10 ** 6))
    @settings(max_examples=25, deadline=None)
    def test_hermitian_and_solve_consistency(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 6))
        m = int(rng.integers(1, 9))
        B = complex_gaussian(rng, (n, m))
        d = build_dictionary(B)
        p = PowerEstimate(rng.uniform(0.05, 3.0, size=m + n), m)
        R = assemble_covariance(d, p)
        assert np.allclose(R, R.conj().T, rtol=1e-12, atol=1e-14)
        f = factor_covariance(d, p)
        y = complex_gaussian(rng, n)
        assert np.allclose(R @ f.solve(y), y, rtol=1e-8)


class TestQuadForms:
    def test_identity_covariance(self):
        d = build_dictionary(np.eye(2))
        # R = I comes from zero signal powers and unit noise powers
        p = PowerEstimate(np.array([0.0, 0.0, 1.0, 1.0]), 2)
        f = factor_covariance(d, p)
        data = SnapshotSet.from_snapshots(np.array([[2.0], [0.0]], dtype=complex))
        g, dd = quad_forms(f, d, data)
        assert np.isclose(g[0], 2.0)  # e_1 column picks first entry of y
        assert np.allclose(dd, 1.0)

    def test_scaled_identity_covariance(self, rng):
        B = complex_gaussian(rng, (3, 4))
        d = build_dictionary(B)
        c = 2.5
        p = PowerEstimate(np.concatenate([np.zeros(4), np.full(3, c)]), 4)
        f = factor_covariance(d, p)
        data = SnapshotSet.from_snapshots(complex_gaussian(rng, (3, 1)))
        _, dd = quad_forms(f, d, data)
        assert np.allclose(dd, d.column_sq_norms / c, rtol=1e-12)

    def test_matches_dense_inverse(self, rng):
        B = complex_gaussian(rng, (3, 5))
        d = build_dictionary(B)
        p = PowerEstimate(rng.uniform(0.1, 1.5, size=8), 5)
        data = SnapshotSet.from_snapshots(complex_gaussian(rng, (3, 1)))
        f = factor_covariance(d, p)
        g, dd = quad_forms(f, d, data)
        R_inv = np.linalg.inv(assemble_covariance(d, p))
        g_ref = d.A.conj().T @ R_inv @ data.Y[:, 0]
        d_ref = np.real(np.einsum("ik,ij,jk->k", d.A.conj(), R_inv, d.A))
        assert np.allclose(g, g_ref, rtol=1e-10)
        assert np.allclose(dd, d_ref, rtol=1e-10)

    def test_d_real_and_positive(self, rng):
        B = complex_gaussian(rng, (4, 6))
        d = build_dictionary(B)
        p = PowerEstimate(rng.uniform(1e-6, 1.0, size=10), 6)
        f = factor_covariance(d, p)
        data = SnapshotSet.from_snapshots(complex_gaussian(rng, (4, 1)))
        _, dd = quad_forms(f, d, data)
        assert dd.dtype.kind == "f"
        assert np.all(dd > 0)

    def test_multisnapshot_reduces_to_single(self, rng):
        """Duplicating one snapshot keeps the sample covariance equal to
        y y^*, so the row-norm form must equal |g| * ||y||."""
        B = complex_gaussian(rng, (3, 5))
        d = build_dictionary(B)
        p = PowerEstimate(rng.uniform(0.1, 1.0, size=8), 5)
        y = complex_gaussian(rng, 3)
        single = SnapshotSet.from_snapshots(y[:, None])
        double = SnapshotSet.from_snapshots(np.stack([y, y], axis=1))
        f = factor_covariance(d, p)
        g1, d1 = quad_forms(f, d, single)
        g2, d2 = quad_forms(f, d, double)
        assert np.allclose(g2, np.abs(g1) * np.linalg.norm(y), rtol=1e-10)
        assert np.allclose(d1, d2)


class TestSnapshotSet:
    def test_sample_cov_single(self, rng):
        y = complex_gaussian(rng, 4)
        s = SnapshotSet.from_snapshots(y[:, None])
        assert np.allclose(s.sample_cov, np.outer(y, y.conj()))
        assert s.t == 1 and np.array_equal(s.y, y)

    def test_sample_cov_hermitian(self, rng):
        Y = complex_gaussian(rng, (4, 7))
        s = SnapshotSet.from_snapshots(Y)
        assert np.allclose(s.sample_cov, s.sample_cov.conj().T)

    def test_noise_floor_scales_with_energy(self, rng):
        Y = complex_gaussian(rng, (4, 2))
        base = noise_floor(SnapshotSet.from_snapshots(Y))
        scaled = noise_floor(SnapshotSet.from_snapshots(3.0 * Y))
        assert np.isclose(scaled, 9.0 * base)


class TestPowerEstimate:
    def test_slices(self):
        p = PowerEstimate(np.array([1.0, 2.0, 3.0, 4.0, 5.0]), 2)
        assert np.array_equal(p.signal, [1.0, 2.0])
        assert np.array_equal(p.noise, [3.0, 4.0, 5.0])

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            PowerEstimate(np.array([1.0, -0.1, 1.0]), 1)
