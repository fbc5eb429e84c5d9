"""Data model and shared linear-algebra kernels.

Everything downstream works with an augmented dictionary ``A = [B | I_N]``
and a nonnegative power vector ``p`` of length ``M + N``: the first ``M``
entries are signal powers, the trailing ``N`` are per-sample noise powers.
The implied covariance is ``R(p) = A diag(p) A^*``, factorized once per
iteration as an N-by-N Cholesky decomposition (never in the (M+N)-dimensional
form, since N << M in the target scenarios).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .errors import (
    DimensionMismatchError,
    NotPositiveDefiniteError,
    ZeroColumnError,
)

__all__ = [
    "Dictionary",
    "PowerEstimate",
    "SnapshotSet",
    "CovarianceFactor",
    "build_dictionary",
    "factor_covariance",
    "quad_forms",
    "noise_floor",
]

# Diagonal jitter starts at this fraction of the mean eigenvalue and doubles
# on each retry; 8 retries total before giving up.
JITTER_SCALE = 1e-12
JITTER_RETRIES = 8

# Noise powers are clamped to this fraction of the mean per-sample energy so
# R(p) stays positive definite when updates drive them toward zero.
NOISE_FLOOR_SCALE = 1e-12


@dataclass(frozen=True)
class Dictionary:
    """Augmented regressor dictionary ``A = [B | I_N]``.

    Attributes
    ----------
    B : np.ndarray
        Given regressors, complex, shape ``(N, M)``.
    A : np.ndarray
        Augmentation ``[B | I_N]``, shape ``(N, M + N)``.
    column_sq_norms : np.ndarray
        Real vector of squared column norms of ``A``; the trailing ``N``
        entries are exactly 1.
    """

    B: np.ndarray
    A: np.ndarray
    column_sq_norms: np.ndarray

    @property
    def n(self) -> int:
        """Number of samples (rows)."""
        return self.B.shape[0]

    @property
    def m(self) -> int:
        """Number of given regressors (signal columns)."""
        return self.B.shape[1]


@dataclass(frozen=True)
class PowerEstimate:
    """Nonnegative power vector over signal and noise columns.

    ``values[:n_signal]`` are signal powers, ``values[n_signal:]`` per-sample
    noise powers, all in squared-amplitude units.
    """

    values: np.ndarray
    n_signal: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or not (0 < self.n_signal < v.size):
            raise DimensionMismatchError(
                f"power vector of size {v.size} incompatible with "
                f"{self.n_signal} signal entries"
            )
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("powers must be finite and nonnegative")
        object.__setattr__(self, "values", v)

    @property
    def signal(self) -> np.ndarray:
        return self.values[: self.n_signal]

    @property
    def noise(self) -> np.ndarray:
        return self.values[self.n_signal:]

    def replace(self, values: np.ndarray) -> "PowerEstimate":
        """Same split, new values."""
        return PowerEstimate(values, self.n_signal)


@dataclass(frozen=True)
class SnapshotSet:
    """One or more data snapshots plus their sample covariance.

    Attributes
    ----------
    Y : np.ndarray
        Complex snapshots, shape ``(N, T)`` with ``T >= 1``.
    sample_cov : np.ndarray
        Hermitian ``(1/T) * Y Y^*``; equals ``y y^*`` for T = 1.
    """

    Y: np.ndarray
    sample_cov: np.ndarray

    @classmethod
    def from_snapshots(cls, Y: np.ndarray) -> "SnapshotSet":
        Y = np.atleast_2d(np.asarray(Y, dtype=complex))
        if Y.ndim != 2 or Y.shape[0] < 1 or Y.shape[1] < 1:
            raise DimensionMismatchError("snapshot matrix must be N x T with N, T >= 1")
        cov = (Y @ Y.conj().T) / Y.shape[1]
        cov = 0.5 * (cov + cov.conj().T)
        return cls(Y=Y, sample_cov=cov)

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def t(self) -> int:
        return self.Y.shape[1]

    @property
    def y(self) -> np.ndarray:
        """The single snapshot, for T = 1 data."""
        if self.t != 1:
            raise DimensionMismatchError("single-snapshot view of multisnapshot data")
        return self.Y[:, 0]

    def energy(self) -> float:
        """Squared Frobenius norm of the snapshots."""
        return float(np.sum(np.abs(self.Y) ** 2))


@dataclass(frozen=True)
class CovarianceFactor:
    """Cholesky factorization ``R = L L^*`` of a model covariance.

    ``jitter_applied`` records any diagonal regularization that was needed
    to reach positive definiteness (0.0 in the usual case).
    """

    chol_lower: np.ndarray
    jitter_applied: float

    def half_solve(self, Z: np.ndarray) -> np.ndarray:
        """Return ``L^{-1} Z``."""
        return solve_triangular(self.chol_lower, Z, lower=True, check_finite=False)

    def solve(self, Z: np.ndarray) -> np.ndarray:
        """Return ``R^{-1} Z``."""
        return cho_solve((self.chol_lower, True), Z, check_finite=False)

    def quad_y(self, y: np.ndarray) -> float:
        """Return ``y^* R^{-1} y`` (real, nonnegative)."""
        z = self.half_solve(y)
        return float(np.real(np.vdot(z, z)))

    def quad_cov(self, C: np.ndarray) -> float:
        """Return ``tr(C R^{-1} C)`` for Hermitian ``C`` (real)."""
        Z = self.half_solve(C)
        return float(np.sum(np.abs(Z) ** 2))

    def logdet(self) -> float:
        """Return ``ln |R|``."""
        return float(2.0 * np.sum(np.log(np.real(np.diag(self.chol_lower)))))


def build_dictionary(B: np.ndarray) -> Dictionary:
    """Augment a regressor matrix and precompute its column norms.

    Parameters
    ----------
    B : array_like
        Complex regressors, shape ``(N, M)``.

    Raises
    ------
    DimensionMismatchError
        If ``B`` is empty or not two-dimensional.
    ZeroColumnError
        If some column of ``B`` has zero norm.
    """
    B = np.atleast_2d(np.asarray(B, dtype=complex))
    if B.ndim != 2 or B.shape[0] < 1 or B.shape[1] < 1:
        raise DimensionMismatchError("regressor matrix must be N x M with N, M >= 1")
    n, _ = B.shape
    A = np.concatenate([B, np.eye(n, dtype=complex)], axis=1)
    sq_norms = np.sum(np.abs(A) ** 2, axis=0).real
    zero = np.flatnonzero(sq_norms[: B.shape[1]] == 0.0)
    if zero.size:
        raise ZeroColumnError(int(zero[0]))
    return Dictionary(B=B, A=A, column_sq_norms=sq_norms)


def assemble_covariance(dictionary: Dictionary, powers: PowerEstimate) -> np.ndarray:
    """Dense ``R(p) = A diag(p) A^*``, symmetrized against round-off."""
    A = dictionary.A
    R = (A * powers.values) @ A.conj().T
    return 0.5 * (R + R.conj().T)


def factor_covariance(dictionary: Dictionary, powers: PowerEstimate) -> CovarianceFactor:
    """Factorize ``R(p)``, retrying with doubled diagonal jitter on failure.

    Raises
    ------
    NotPositiveDefiniteError
        If the factorization still fails after all jitter retries.
    """
    R = assemble_covariance(dictionary, powers)
    n = dictionary.n
    base = JITTER_SCALE * np.trace(R).real / n
    if base <= 0.0:
        raise NotPositiveDefiniteError("covariance has zero trace")
    jitter = 0.0
    for attempt in range(JITTER_RETRIES + 1):
        try:
            L = cholesky(R + jitter * np.eye(n), lower=True, check_finite=False)
            return CovarianceFactor(chol_lower=L, jitter_applied=jitter)
        except np.linalg.LinAlgError:
            jitter = base * (2.0 ** attempt)
    raise NotPositiveDefiniteError(
        f"covariance not positive definite after {JITTER_RETRIES} jitter retries"
    )


def quad_forms(
    factor: CovarianceFactor, dictionary: Dictionary, data: SnapshotSet
) -> tuple[np.ndarray, np.ndarray]:
    """Per-column quadratic forms against the inverse covariance.

    Returns
    -------
    g : np.ndarray
        For T = 1, the complex vector ``g_k = a_k^* R^{-1} y``.  For T > 1,
        the real vector ``g_k = || a_k^* R^{-1} Rbar ||_2``, which plays the
        role of ``|g_k|`` in every update.
    d : np.ndarray
        Real vector ``d_k = a_k^* R^{-1} a_k``, computed as a squared
        triangular-solve norm so it is exactly real and positive.
    """
    A = dictionary.A
    if A.shape[0] != data.n:
        raise DimensionMismatchError("dictionary and data sample counts differ")
    W = factor.half_solve(A)
    d = np.sum(np.abs(W) ** 2, axis=0)
    if data.t == 1:
        z = factor.half_solve(data.Y[:, 0])
        g = W.conj().T @ z
    else:
        V = factor.solve(data.sample_cov)
        g = np.linalg.norm(A.conj().T @ V, axis=1)
    return g, d


def noise_floor(data: SnapshotSet) -> float:
    """Smallest admissible noise power for this data set.

    Scales with the mean per-sample energy so flooring never visibly
    perturbs estimates.
    """
    return NOISE_FLOOR_SCALE * data.energy() / (data.n * data.t)
