import numpy as np
import pytest

from wspice.identifiability import classify_uniqueness, khatri_rao
from wspice.linmodel import PowerEstimate, build_dictionary

from .conftest import complex_gaussian


def _gaussian_dict(rng, n, m):
    return build_dictionary(complex_gaussian(rng, (n, m)))


class TestKhatriRao:
    def test_single_row_gives_squared_moduli(self, rng):
        d = _gaussian_dict(rng, 1, 3)
        kr = khatri_rao(d)
        assert kr.shape == (1, 4)
        assert np.allclose(kr[0], np.abs(d.A[0]) ** 2)

    def test_identity_columns_independent(self):
        d = build_dictionary(np.eye(2))
        kr = khatri_rao(d)
        # noise columns duplicate the identity regressors here; restrict to
        # the two distinct outer products e1 e1^*, e2 e2^*
        sub = kr[:, 2:]
        assert np.linalg.matrix_rank(sub) == 2
        assert np.allclose(sub[:, 0], [1, 0, 0, 0])
        assert np.allclose(sub[:, 1], [0, 0, 0, 1])

    def test_columns_match_outer_product_vectorization(self, rng):
        d = _gaussian_dict(rng, 3, 5)
        kr = khatri_rao(d)
        for k in range(8):
            a = d.A[:, k]
            outer = np.outer(a, a.conj())
            assert np.allclose(kr[:, k], outer.T.reshape(-1))

    def test_rank_invariant_to_column_permutation(self, rng):
        d = _gaussian_dict(rng, 3, 6)
        kr = khatri_rao(d)
        perm = rng.permutation(kr.shape[1])
        s1 = np.linalg.svd(kr, compute_uv=False)
        s2 = np.linalg.svd(kr[:, perm], compute_uv=False)
        assert np.allclose(s1, s2, rtol=1e-10)


class TestClassifyUniqueness:
    def test_generically_unique_case(self, rng):
        report = classify_uniqueness(_gaussian_dict(rng, 3, 5))
        assert report.verdict == "generically_unique"
        assert report.kr_rank == 8
        assert report.threshold_check  # 8 < 9
        assert report.witness is None

    def test_not_unique_with_witness(self, rng):
        d = _gaussian_dict(rng, 2, 10)
        p = PowerEstimate(np.ones(12), 10)
        report = classify_uniqueness(d, p)
        assert report.verdict == "not_unique"
        assert report.kr_rank <= 4
        q = report.witness
        assert q is not None
        # the witness must sit in the null space of the column-wise
        # Kronecker matrix ...
        assert np.linalg.norm(khatri_rao(d) @ q) <= 1e-8 * np.linalg.norm(q)
        # ... equivalently A diag(q) A^* vanishes ...
        Q = (d.A * q) @ d.A.conj().T
        bound = 1e-8 * np.max(np.abs(q)) * np.linalg.norm(d.A) ** 2
        assert np.linalg.norm(Q) <= bound
        # ... and some positive step keeps the powers nonnegative
        eps = 1e-6 * p.values[p.values > 0].min()
        assert np.all(p.values + eps * q >= 0)

    def test_unique_case(self, rng):
        report = classify_uniqueness(_gaussian_dict(rng, 3, 2))
        assert report.verdict == "unique"
        assert report.kr_rank == 5

    def test_rank_deficit_without_powers_is_indeterminate(self, rng):
        report = classify_uniqueness(_gaussian_dict(rng, 2, 10))
        assert report.verdict == "indeterminate"

    def test_duplicated_column_downgrades_small_m(self, rng):
        B = complex_gaussian(rng, (3, 2))
        B[:, 1] = B[:, 0]  # any-N-columns premise fails
        report = classify_uniqueness(build_dictionary(B))
        assert report.verdict == "indeterminate"

    def test_report_serializes(self, rng):
        blob = classify_uniqueness(_gaussian_dict(rng, 3, 5)).to_dict()
        assert blob["verdict"] == "generically_unique"
        assert blob["witness"] is None

    def test_seeded_subset_sampling_reproducible(self, rng):
        d = _gaussian_dict(rng, 4, 3)
        r1 = classify_uniqueness(d, seed=7)
        r2 = classify_uniqueness(d, seed=7)
        assert r1.verdict == r2.verdict == "unique"
