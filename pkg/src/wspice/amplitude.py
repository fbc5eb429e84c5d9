"""Amplitude recovery from converged power estimates.

Two closed-form routes share the same fitted covariance ``R(p)``: the
linear-MMSE formula ``x_k = p_k a_k^* R^{-1} y`` (sparser, smaller MSE) and
the Capon formula ``x_k = (a_k^* R^{-1} y) / (a_k^* R^{-1} a_k)`` (less
biased toward zero, preferred for spectral peaks).  A plain least-squares
refit on a chosen support gives hard K-sparse estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, RankDeficientSupportError
from .linmodel import Dictionary, PowerEstimate, SnapshotSet, factor_covariance

__all__ = [
    "AmplitudeEstimate",
    "SupportSet",
    "lmmse_amplitudes",
    "capon_amplitudes",
    "ls_refit",
    "top_k_support",
]


@dataclass(frozen=True)
class AmplitudeEstimate:
    """Complex amplitudes with the method that produced them.

    ``x`` has shape ``(M,)`` for single-snapshot data and ``(M, T)`` when a
    per-snapshot formula was applied column-wise.
    """

    x: np.ndarray
    method: str  # "lmmse" | "capon" | "ls_refit"


@dataclass(frozen=True)
class SupportSet:
    """Sorted set of selected signal-column indices (0-based)."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.indices))
        if len(set(idx)) != len(idx):
            raise ValueError("support indices must be distinct")
        if idx and idx[0] < 0:
            raise ValueError("support indices must be nonnegative")
        object.__setattr__(self, "indices", idx)

    @property
    def k(self) -> int:
        return len(self.indices)


def lmmse_amplitudes(
    dictionary: Dictionary, data: SnapshotSet, powers: PowerEstimate
) -> AmplitudeEstimate:
    """Linear-MMSE amplitudes ``x = diag(p_sig) B^* R^{-1} Y``.

    Entries with zero signal power are exactly zero.  Applied per snapshot
    column for T > 1.
    """
    factor = factor_covariance(dictionary, powers)
    Z = factor.solve(data.Y)
    X = powers.signal[:, None] * (dictionary.B.conj().T @ Z)
    x = X[:, 0] if data.t == 1 else X
    return AmplitudeEstimate(x=x, method="lmmse")


def capon_amplitudes(
    dictionary: Dictionary, data: SnapshotSet, powers: PowerEstimate
) -> AmplitudeEstimate:
    """Capon amplitudes ``x_k = (a_k^* R^{-1} y) / (a_k^* R^{-1} a_k)``."""
    factor = factor_covariance(dictionary, powers)
    W = factor.half_solve(dictionary.B)
    d = np.sum(np.abs(W) ** 2, axis=0)  # real by construction
    Z = factor.solve(data.Y)
    X = (dictionary.B.conj().T @ Z) / d[:, None]
    x = X[:, 0] if data.t == 1 else X
    return AmplitudeEstimate(x=x, method="capon")


def ls_refit(
    dictionary: Dictionary, data: SnapshotSet, support: SupportSet
) -> AmplitudeEstimate:
    """Least-squares amplitudes on the selected columns, zeros elsewhere.

    Raises
    ------
    RankDeficientSupportError
        If the selected columns are linearly dependent (or exceed N).
    """
    if support.k == 0:
        raise DimensionMismatchError("support set is empty")
    if any(i >= dictionary.m for i in support.indices):
        raise DimensionMismatchError("support index beyond signal columns")
    if support.k > dictionary.n:
        raise RankDeficientSupportError(
            f"support of size {support.k} exceeds {dictionary.n} samples"
        )
    Bs = dictionary.B[:, list(support.indices)]
    sol, _, rank, _ = np.linalg.lstsq(Bs, data.Y, rcond=None)
    if rank < support.k:
        raise RankDeficientSupportError("selected columns are rank deficient")
    shape = (dictionary.m,) if data.t == 1 else (dictionary.m, data.t)
    x = np.zeros(shape, dtype=complex)
    x[list(support.indices)] = sol[:, 0] if data.t == 1 else sol
    return AmplitudeEstimate(x=x, method="ls_refit")


def _local_peaks(p: np.ndarray) -> np.ndarray:
    """Indices of strict local maxima; boundary entries compare to their
    single neighbor."""
    if p.size == 1:
        return np.array([0])
    interior = np.flatnonzero((p[1:-1] > p[:-2]) & (p[1:-1] > p[2:])) + 1
    peaks = list(interior)
    if p[0] > p[1]:
        peaks.insert(0, 0)
    if p[-1] > p[-2]:
        peaks.append(p.size - 1)
    return np.asarray(sorted(peaks), dtype=int)


def top_k_support(
    powers: PowerEstimate, k: int, mode: str = "top_values"
) -> SupportSet:
    """Select K signal indices from a power spectrum.

    ``top_values`` takes the K largest signal powers.  ``local_peaks`` takes
    the K largest strict local maxima of the signal slice, padding with the
    largest remaining values if fewer than K maxima exist.  Ties break toward
    the lowest index.
    """
    p = powers.signal
    if not 1 <= k <= p.size:
        raise ValueError(f"k={k} out of range for {p.size} signal entries")
    if mode not in ("top_values", "local_peaks"):
        raise ValueError(f"unknown selection mode {mode!r}")
    order = np.argsort(-p, kind="stable")  # stable: lowest index wins ties
    if mode == "top_values":
        return SupportSet(tuple(order[:k]))
    peaks = _local_peaks(p)
    peak_order = peaks[np.argsort(-p[peaks], kind="stable")]
    chosen = list(peak_order[:k])
    if len(chosen) < k:
        for idx in order:
            if idx not in chosen:
                chosen.append(int(idx))
            if len(chosen) == k:
                break
    return SupportSet(tuple(chosen))
