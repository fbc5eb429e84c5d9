"""Unified weighted covariance-fit iteration engine.

One multiplicative loop drives four hyperparameter-free estimators that
differ only in their per-column weights:

====== ============================== ==========================
policy weight w_k                     refresh
====== ============================== ==========================
spice  ||a_k||^2                      never (data independent)
likes  a_k^* R^{-1} a_k               every ``likes_refresh`` iterations
slim   1 / p_k                        every iteration
iaa    p_k (a_k^* R^{-1} a_k)^2       every iteration
====== ============================== ==========================

Two step rules are supported: version "a" updates ``p_k <- p_k |g_k| /
sqrt(w_k)`` and version "b" updates ``p_k <- p_k |g_k|^2 / w_k``, where
``g_k = a_k^* R^{-1} y`` (a row-norm variant for multisnapshot data).  Both
rules share stationary points; version "a" is the recommended default.

Policy updates are evaluated in division-safe closed forms so exact zero
signal powers are absorbing under every policy.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, LogOfZeroError, NonpositiveWeightError, ZeroDataError
from .linmodel import (
    CovarianceFactor,
    Dictionary,
    PowerEstimate,
    SnapshotSet,
    factor_covariance,
    noise_floor,
    quad_forms,
)

__all__ = [
    "EstimatorConfig",
    "EstimationTrace",
    "POLICIES",
    "STEP_RULES",
    "matched_filter_init",
    "iterate_once",
    "estimate",
    "estimate_uniform_noise",
    "weighted_cost",
    "surrogate_objective",
]

POLICIES = ("spice", "likes", "slim", "iaa")
STEP_RULES = ("a", "b")
TERMINATIONS = ("converged", "max_iters", "policy_limit")

# Per-iteration observer: monitor(i, powers, g, d, weights).  Exposed so
# tests can certify per-iteration properties without re-running the engine.
Monitor = Callable[[int, np.ndarray, np.ndarray, np.ndarray, np.ndarray], None]


@dataclass(frozen=True)
class EstimatorConfig:
    """Knobs for :func:`estimate`.

    Defaults follow the standard setup: tolerance 1e-3 on the relative l2
    change of the full power vector, at most 1000 iterations, slim capped at
    5 iterations, likes weights refreshed every 30 iterations.

    ``init_powers=None`` selects the matched-filter initialization; the
    ``likes`` policy refuses it and requires powers from a prior spice run.
    """

    policy: str = "spice"
    step: str = "a"
    tol: float = 1e-3
    max_iters: int = 1000
    uniform_noise: bool = False
    likes_refresh: int = 30
    slim_iters: int = 5
    init_powers: Optional[np.ndarray | PowerEstimate] = None

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}")
        if self.step not in STEP_RULES:
            raise ConfigError(f"unknown step rule {self.step!r}")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if self.likes_refresh < 1 or self.slim_iters < 1:
            raise ConfigError("refresh period and slim cap must be at least 1")


@dataclass
class EstimationTrace:
    """Outcome of one estimation run.

    ``cost_history[i]`` is the weighted covariance-fit objective at iterate
    ``i``, evaluated with the weights in force at that iteration; it is
    non-increasing within every fixed-weight window.  ``surrogate_history``
    carries the global objective being descended where one exists (likes:
    Gaussian negative log-likelihood; slim: log-penalized fit), else None.
    """

    powers: PowerEstimate
    iterations_run: int
    termination: str
    cost_history: np.ndarray
    surrogate_history: Optional[np.ndarray]
    wall_time: float
    policy: str = "spice"
    step: str = "a"

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "step": self.step,
            "iterations": self.iterations_run,
            "termination": self.termination,
            "cost_history": [float(c) for c in self.cost_history],
            "surrogate_history": None
            if self.surrogate_history is None
            else [float(s) for s in self.surrogate_history],
            "powers": [float(p) for p in self.powers.values],
            "wall_time_s": self.wall_time,
        }


def matched_filter_init(dictionary: Dictionary, data: SnapshotSet) -> PowerEstimate:
    """Matched-filter power estimates ``|a_k^* y|^2 / ||a_k||^4``.

    For multisnapshot data the per-snapshot values are averaged.  The noise
    slice is clamped to the noise floor.

    Raises
    ------
    ZeroDataError
        If the snapshots are identically zero.
    """
    if data.energy() == 0.0:
        raise ZeroDataError("cannot initialize from all-zero data")
    corr = np.abs(dictionary.A.conj().T @ data.Y) ** 2
    p0 = corr.mean(axis=1) / dictionary.column_sq_norms ** 2
    p0[dictionary.m:] = np.maximum(p0[dictionary.m:], noise_floor(data))
    return PowerEstimate(p0, dictionary.m)


def _floor_noise(values: np.ndarray, m: int, floor: float) -> np.ndarray:
    out = values.copy()
    out[m:] = np.maximum(out[m:], floor)
    return out


def _step_update(p: np.ndarray, abs_g: np.ndarray, w: np.ndarray, step: str) -> np.ndarray:
    """The two shared multiplicative step rules with explicit weights."""
    if step == "a":
        return p * abs_g / np.sqrt(w)
    return p * abs_g ** 2 / w


def iterate_once(
    dictionary: Dictionary,
    data: SnapshotSet,
    powers: PowerEstimate,
    weights: np.ndarray,
    step: str = "a",
) -> PowerEstimate:
    """One multiplicative update with an explicit frozen weight vector.

    For any fixed weights this step never increases the weighted
    covariance-fit objective, under either step rule.  Zero powers are
    absorbing.  The noise slice is re-floored afterwards.

    Raises
    ------
    NonpositiveWeightError
        If some weight is zero or negative.
    """
    weights = np.asarray(weights, dtype=float)
    if weights.shape != powers.values.shape:
        raise ConfigError("weight vector length must match the power vector")
    bad = np.flatnonzero(~(weights > 0))
    if bad.size:
        raise NonpositiveWeightError(int(bad[0]))
    if step not in STEP_RULES:
        raise ConfigError(f"unknown step rule {step!r}")
    factor = factor_covariance(dictionary, powers)
    g, _ = quad_forms(factor, dictionary, data)
    new = _step_update(powers.values, np.abs(g), weights, step)
    return powers.replace(_floor_noise(new, dictionary.m, noise_floor(data)))


def _quad_term(factor: CovarianceFactor, data: SnapshotSet) -> float:
    """Data-fit term of the weighted objective.

    ``y^* R^{-1} y`` for T = 1 and ``tr(Rbar R^{-1} Rbar)`` for T > 1.
    """
    if data.t == 1:
        return factor.quad_y(data.Y[:, 0])
    return factor.quad_cov(data.sample_cov)


def _penalty(weights: np.ndarray, p: np.ndarray) -> float:
    # 0 * inf -> 0 so the slim weights (1/p) are well defined at zero powers
    active = p > 0
    return float(np.sum(weights[active] * p[active]))


def weighted_cost(
    dictionary: Dictionary,
    data: SnapshotSet,
    powers: PowerEstimate,
    weights: np.ndarray,
) -> float:
    """Weighted covariance-fit objective ``quad(R(p)) + sum_k w_k p_k``."""
    factor = factor_covariance(dictionary, powers)
    return _quad_term(factor, data) + _penalty(np.asarray(weights, float), powers.values)


def surrogate_objective(
    dictionary: Dictionary,
    data: SnapshotSet,
    powers: PowerEstimate,
    policy: str,
) -> Optional[float]:
    """Global objective monitored by the adaptive policies, if one exists.

    likes: ``quad + ln|R|`` (Gaussian negative log-likelihood up to a
    constant); slim: ``quad + sum_k ln p_k``.  Returns None for spice (its
    analogue is folded into :func:`weighted_cost`) and for iaa, which
    provably has no objective of this form.

    Raises
    ------
    LogOfZeroError
        For the slim form at a zero power, where the objective is -inf.
    """
    if policy not in POLICIES:
        raise ConfigError(f"unknown policy {policy!r}")
    if policy in ("spice", "iaa"):
        return None
    factor = factor_covariance(dictionary, powers)
    quad = _quad_term(factor, data)
    if policy == "likes":
        return quad + factor.logdet()
    if np.any(powers.values == 0.0):
        raise LogOfZeroError("slim objective diverges at zero powers")
    return quad + float(np.sum(np.log(powers.values)))


class _WeightState:
    """Per-run policy state: constant spice weights and the likes anchor."""

    def __init__(self, policy: str, refresh: int, col_sq_norms: np.ndarray):
        self.policy = policy
        self.refresh = refresh
        self.col_sq_norms = col_sq_norms
        self.anchor_d: Optional[np.ndarray] = None

    def weights(self, i: int, p: np.ndarray, d: np.ndarray) -> np.ndarray:
        if self.policy == "spice":
            return self.col_sq_norms
        if self.policy == "likes":
            if i % self.refresh == 0 or self.anchor_d is None:
                self.anchor_d = d.copy()
            return self.anchor_d
        if self.policy == "slim":
            w = np.full_like(p, np.inf)
            # denormal powers overflow 1/p to inf, which is the right limit
            with np.errstate(divide="ignore", over="ignore"):
                np.divide(1.0, p, out=w, where=p > 0)
            return w
        return p * d ** 2  # iaa


def _policy_update(
    policy: str, step: str, p: np.ndarray, abs_g: np.ndarray, d: np.ndarray,
    w: np.ndarray,
) -> np.ndarray:
    """Division-safe closed forms of the four policy updates."""
    if policy == "slim":
        if step == "a":
            return p ** 1.5 * abs_g
        return (p * abs_g) ** 2
    if policy == "iaa":
        if step == "a":
            return np.sqrt(p) * abs_g / d
        return np.where(p > 0, (abs_g / d) ** 2, 0.0)
    return _step_update(p, abs_g, w, step)  # spice / likes: finite weights


def _surrogate_value(
    policy: str, factor: CovarianceFactor, data: SnapshotSet, p: np.ndarray
) -> float:
    quad = _quad_term(factor, data)
    if policy == "likes":
        return quad + factor.logdet()
    with np.errstate(divide="ignore"):
        return quad + float(np.sum(np.log(p)))


def estimate(
    dictionary: Dictionary,
    data: SnapshotSet,
    config: EstimatorConfig,
    monitor: Optional[Monitor] = None,
) -> EstimationTrace:
    """Run the weighted iteration to convergence.

    The loop terminates when the relative l2 change of the full power vector
    drops below ``config.tol``, when ``config.max_iters`` is reached, or when
    the slim policy hits its iteration cap.  ``monitor``, if given, is called
    once per recorded iterate with ``(i, p, g, d, w)``.

    Raises
    ------
    ConfigError
        If the likes policy is started without explicit initial powers.
    """
    if config.uniform_noise:
        return estimate_uniform_noise(dictionary, data, config, monitor)
    if config.policy == "likes" and config.init_powers is None:
        raise ConfigError("likes must be initialized from spice powers")
    t_start = time.perf_counter()
    m = dictionary.m
    floor = noise_floor(data)
    if config.init_powers is None:
        p = matched_filter_init(dictionary, data).values
    else:
        init = config.init_powers
        if isinstance(init, PowerEstimate):
            init = init.values
        p = np.asarray(init, dtype=float).copy()
        if p.shape != (m + dictionary.n,):
            raise ConfigError("init_powers length must be M + N")
    p = _floor_noise(p, m, floor)

    state = _WeightState(config.policy, config.likes_refresh, dictionary.column_sq_norms)
    track_surrogate = config.policy in ("likes", "slim") and data.t == 1
    cost_history: list[float] = []
    surrogate_history: list[float] = []
    iter_cap = config.max_iters
    if config.policy == "slim":
        iter_cap = min(iter_cap, config.slim_iters)

    i = 0
    converged = False
    termination = "max_iters"
    while True:
        factor = factor_covariance(dictionary, PowerEstimate(p, m))
        g, d = quad_forms(factor, dictionary, data)
        w = state.weights(i, p, d)
        cost_history.append(_quad_term(factor, data) + _penalty(w, p))
        if track_surrogate:
            surrogate_history.append(_surrogate_value(config.policy, factor, data, p))
        if monitor is not None:
            monitor(i, p, g, d, w)
        if converged:
            termination = "converged"
            break
        if i >= iter_cap:
            slim_capped = config.policy == "slim" and config.slim_iters <= config.max_iters
            termination = "policy_limit" if slim_capped else "max_iters"
            break
        p_new = _policy_update(config.policy, config.step, p, np.abs(g), d, w)
        p_new = _floor_noise(p_new, m, floor)
        denom = float(np.linalg.norm(p))
        rel = float(np.linalg.norm(p_new - p)) / denom if denom > 0 else 0.0
        p = p_new
        i += 1
        converged = rel < config.tol

    return EstimationTrace(
        powers=PowerEstimate(p, m),
        iterations_run=i,
        termination=termination,
        cost_history=np.asarray(cost_history),
        surrogate_history=np.asarray(surrogate_history) if track_surrogate else None,
        wall_time=time.perf_counter() - t_start,
        policy=config.policy,
        step=config.step,
    )


def estimate_uniform_noise(
    dictionary: Dictionary,
    data: SnapshotSet,
    config: EstimatorConfig,
    monitor: Optional[Monitor] = None,
) -> EstimationTrace:
    """Covariance-fit iteration under a single shared noise power.

    The model is ``R = B diag(p_sig) B^* + sigma^2 I``.  Signal powers follow
    the spice step rule; the shared noise power has the closed-form update
    ``sigma^2 = ||y - B x|| / w`` with ``w = sqrt(sum of noise weights)`` and
    ``x`` the current linear-MMSE amplitude estimate.  At convergence the
    implied amplitude estimate solves a square-root-LASSO problem.

    Only the spice policy and single-snapshot data are supported; the
    closed-form noise update is specific to that combination.
    """
    if config.policy != "spice":
        raise ConfigError("uniform-noise estimation is defined for the spice policy")
    if data.t != 1:
        raise ConfigError("uniform-noise estimation expects a single snapshot")
    t_start = time.perf_counter()
    m, n = dictionary.m, dictionary.n
    floor = noise_floor(data)
    col_w = dictionary.column_sq_norms
    w_noise = math.sqrt(float(np.sum(col_w[m:])))
    y = data.Y[:, 0]

    if config.init_powers is None:
        p = matched_filter_init(dictionary, data).values
    else:
        init = config.init_powers
        if isinstance(init, PowerEstimate):
            init = init.values
        p = np.asarray(init, dtype=float).copy()
    # collapse the noise slice to its mean: one shared power
    p[m:] = max(float(np.mean(p[m:])), floor)

    cost_history: list[float] = []
    i = 0
    converged = False
    termination = "max_iters"
    while True:
        factor = factor_covariance(dictionary, PowerEstimate(p, m))
        g, d = quad_forms(factor, dictionary, data)
        cost_history.append(_quad_term(factor, data) + _penalty(col_w, p))
        if monitor is not None:
            monitor(i, p, g, d, col_w)
        if converged:
            termination = "converged"
            break
        if i >= config.max_iters:
            break
        x_hat = p[:m] * g[:m]  # linear-MMSE amplitudes at the current powers
        sigma2 = float(np.linalg.norm(y - dictionary.B @ x_hat)) / w_noise
        p_new = p.copy()
        p_new[:m] = _step_update(p[:m], np.abs(g[:m]), col_w[:m], config.step)
        p_new[m:] = max(sigma2, floor)
        denom = float(np.linalg.norm(p))
        rel = float(np.linalg.norm(p_new - p)) / denom if denom > 0 else 0.0
        p = p_new
        i += 1
        converged = rel < config.tol

    return EstimationTrace(
        powers=PowerEstimate(p, m),
        iterations_run=i,
        termination=termination,
        cost_history=np.asarray(cost_history),
        surrogate_history=None,
        wall_time=time.perf_counter() - t_start,
        policy=config.policy,
        step=config.step,
    )
