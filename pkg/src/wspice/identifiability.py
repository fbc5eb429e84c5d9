"""Uniqueness analysis of the covariance parameterization.

``R(p) = A diag(p) A^*`` determines ``p`` uniquely iff no real ``q != 0``
satisfies both ``A diag(q) A^* = 0`` and ``p + q >= 0``.  Vectorizing the
first condition turns it into a null-space question for the column-wise
Kronecker (Khatri-Rao) matrix with columns ``conj(a_k) (x) a_k``, so the
classification is driven by that matrix's rank:

* ``M < N`` with any N dictionary columns independent and full Khatri-Rao
  rank: the parameterization is unique.
* ``M + N < N^2`` with full Khatri-Rao rank: unique for almost every
  dictionary ("generically unique").
* rank deficit: a null-space witness that keeps ``p + eps q`` nonnegative
  certifies non-uniqueness; otherwise the verdict stays indeterminate.

The "any N columns independent" premise is sampled probabilistically (it is
combinatorial to check exhaustively); a failed sample downgrades the verdict
to indeterminate, never upgrades it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linmodel import Dictionary, PowerEstimate

__all__ = ["UniquenessReport", "khatri_rao", "classify_uniqueness"]

RANK_RTOL = 1e-10  # singular values below this fraction of the largest count as zero
WITNESS_RTOL = 1e-8
SUBSET_SAMPLES = 100

VERDICTS = ("unique", "generically_unique", "not_unique", "indeterminate")


@dataclass(frozen=True)
class UniquenessReport:
    """Classification outcome.

    ``witness``, when present, is a real vector ``q`` with ``A diag(q) A^*``
    numerically zero and ``p + eps q >= 0`` for a small ``eps > 0``.
    """

    verdict: str
    kr_rank: int
    threshold_check: bool  # M + N < N^2
    witness: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "kr_rank": self.kr_rank,
            "threshold_check": self.threshold_check,
            "witness": None if self.witness is None else [float(q) for q in self.witness],
        }


def khatri_rao(dictionary: Dictionary) -> np.ndarray:
    """Column-wise Kronecker matrix with columns ``conj(a_k) (x) a_k``.

    Column k is the vectorization of the rank-one outer product
    ``a_k a_k^*``; shape ``(N^2, M + N)``.
    """
    A = dictionary.A
    return np.einsum("jk,ik->jik", A.conj(), A).reshape(A.shape[0] ** 2, A.shape[1])


def _rank(singular_values: np.ndarray) -> int:
    if singular_values.size == 0:
        return 0
    cutoff = RANK_RTOL * singular_values[0]
    return int(np.sum(singular_values > cutoff))


def _real_null_basis(kr: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the real null space of ``kr``.

    The null space is conjugation-symmetric, so stacking real and imaginary
    parts loses nothing.
    """
    stacked = np.concatenate([kr.real, kr.imag], axis=0)
    _, s, vt = np.linalg.svd(stacked, full_matrices=True)
    r = _rank(s)
    return vt[r:].T


def _subsets_full_rank(A: np.ndarray, rng: np.random.Generator, samples: int) -> bool:
    n, total = A.shape
    for _ in range(samples):
        cols = rng.choice(total, size=n, replace=False)
        s = np.linalg.svd(A[:, cols], compute_uv=False)
        if _rank(s) < n:
            return False
    return True


def _nonneg_witness(
    basis: np.ndarray, p: np.ndarray
) -> Optional[np.ndarray]:
    """Search the null basis for a direction keeping ``p + eps q >= 0``."""
    positive = p[p > 0]
    if positive.size == 0:
        eps = 1.0
    else:
        eps = 1e-6 * float(positive.min())
    zero_set = p == 0
    for j in range(basis.shape[1]):
        for q in (basis[:, j], -basis[:, j]):
            if np.all(q[zero_set] >= 0) and np.all(p + eps * q >= 0):
                return q.copy()
    return None


def classify_uniqueness(
    dictionary: Dictionary,
    powers: Optional[PowerEstimate] = None,
    seed: int = 0,
    subset_samples: int = SUBSET_SAMPLES,
) -> UniquenessReport:
    """Classify whether ``R(p) = A diag(p) A^*`` pins down ``p``.

    With full Khatri-Rao rank the verdict is ``unique`` (when ``M < N`` and
    sampled N-column subsets are all full rank) or ``generically_unique``
    (when ``M + N < N^2``).  With a rank deficit and ``powers`` supplied, a
    sign-feasible null-space witness yields ``not_unique``; in every
    remaining case the verdict is ``indeterminate``.
    """
    n, m = dictionary.n, dictionary.m
    total = m + n
    kr = khatri_rao(dictionary)
    s = np.linalg.svd(kr, compute_uv=False)
    kr_rank = _rank(s)
    threshold = total < n * n

    if kr_rank >= total:
        if m < n:
            rng = np.random.default_rng(seed)
            if _subsets_full_rank(dictionary.A, rng, subset_samples):
                return UniquenessReport("unique", kr_rank, threshold)
            return UniquenessReport("indeterminate", kr_rank, threshold)
        if threshold:
            return UniquenessReport("generically_unique", kr_rank, threshold)
        # M + N = N^2 exactly with full rank: the null space is trivial
        return UniquenessReport("unique", kr_rank, threshold)

    if powers is None:
        return UniquenessReport("indeterminate", kr_rank, threshold)
    basis = _real_null_basis(kr)
    if basis.shape[1] == 0:
        return UniquenessReport("indeterminate", kr_rank, threshold)
    witness = _nonneg_witness(basis, powers.values)
    if witness is None:
        return UniquenessReport("indeterminate", kr_rank, threshold)
    return UniquenessReport("not_unique", kr_rank, threshold, witness=witness)
