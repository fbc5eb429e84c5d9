"""Scenario generators and the Monte Carlo benchmark harness.

Two scenarios are provided: sparse regression with IID complex-Gaussian
regressors, and grid-based direction finding on a uniform linear array.
Trials are driven by counter-based RNG streams keyed on ``(seed, trial)``,
so results are bit-identical regardless of execution order or worker count.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .amplitude import SupportSet, capon_amplitudes, lmmse_amplitudes, ls_refit, top_k_support
from .errors import ConfigError
from .estimators import (
    POLICIES,
    STEP_RULES,
    EstimatorConfig,
    estimate,
    matched_filter_init,
)
from .linmodel import Dictionary, PowerEstimate, SnapshotSet, build_dictionary

__all__ = [
    "ExperimentSpec",
    "TrialRecord",
    "AlgorithmSummary",
    "ExperimentReport",
    "ula_steering_matrix",
    "ula_grid_angles",
    "gen_iid_instance",
    "gen_ula_instance",
    "beamformer_baseline",
    "run_experiment",
]

SCENARIOS = ("iid", "ula")
DEFAULT_ALGORITHMS = (("spice", "a"), ("likes", "a"), ("slim", "a"), ("iaa", "a"))


@dataclass(frozen=True)
class ExperimentSpec:
    """Complete definition of one Monte Carlo experiment.

    ``support`` holds 0-based signal indices; ``powers`` the corresponding
    squared amplitudes.  The noise power follows from the SNR definition
    ``sigma^2 = sum(powers) / 10^(snr_db / 10)``.
    """

    scenario: str
    n: int
    m: int
    support: tuple[int, ...]
    powers: tuple[float, ...]
    snr_db: float
    trials: int
    seed: int
    algorithms: tuple[tuple[str, str], ...] = DEFAULT_ALGORITHMS
    snapshots: int = 1
    kappa: float = math.pi
    angle_range_deg: tuple[float, float] = (-90.0, 90.0)
    delta_theta_deg: float = 1.8
    tol: float = 1e-3
    max_iters: int = 1000
    likes_refresh: int = 30
    slim_iters: int = 5

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.n < 1 or self.m < 1 or self.snapshots < 1:
            raise ConfigError("n, m and snapshots must be at least 1")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if len(self.support) != len(self.powers) or not self.support:
            raise ConfigError("support and powers must be nonempty and equal length")
        if any(not 0 <= s < self.m for s in self.support):
            raise ConfigError("support indices must lie in [0, M)")
        if any(p <= 0 for p in self.powers):
            raise ConfigError("source powers must be positive")
        algorithms = tuple((str(p), str(s)) for p, s in self.algorithms)
        for policy, step in algorithms:
            if policy not in POLICIES or step not in STEP_RULES:
                raise ConfigError(f"unknown algorithm {(policy, step)!r}")
        object.__setattr__(self, "support", tuple(int(s) for s in self.support))
        object.__setattr__(self, "powers", tuple(float(p) for p in self.powers))
        object.__setattr__(self, "algorithms", algorithms)
        object.__setattr__(
            self, "angle_range_deg", tuple(float(a) for a in self.angle_range_deg)
        )

    @property
    def k(self) -> int:
        return len(self.support)

    @property
    def noise_power(self) -> float:
        return float(sum(self.powers)) / 10.0 ** (self.snr_db / 10.0)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        raw = json.loads(text)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown spec fields: {sorted(unknown)}")
        if "algorithms" in raw:
            raw["algorithms"] = tuple(tuple(a) for a in raw["algorithms"])
        for key in ("support", "powers", "angle_range_deg"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return cls(**raw)


@dataclass
class TrialRecord:
    """Metrics for one (trial, algorithm) pair; NaN where not applicable."""

    trial: int
    algo: str
    err_sq: float
    sig_sq: float
    support_hit: float
    doa_sq_err: float
    within_delta: float
    wall_time_s: float
    iterations: int
    failed: bool = False

    @property
    def nmse(self) -> float:
        return self.err_sq / self.sig_sq if self.sig_sq > 0 else math.nan


@dataclass
class AlgorithmSummary:
    """Aggregates over completed trials of one algorithm."""

    algo: str
    normalized_mse: float
    pd_support: float
    doa_rmse_deg: float
    pd_within_delta: float
    mean_wall_time_s: float
    mean_iterations: float
    failures: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentReport:
    """Aggregated metrics plus retained trial-level records."""

    spec: ExperimentSpec
    summaries: list[AlgorithmSummary]
    records: list[TrialRecord]
    failure_count: int

    def summary(self, algo: str) -> AlgorithmSummary:
        for s in self.summaries:
            if s.algo == algo:
                return s
        raise KeyError(algo)

    def to_dict(self) -> dict:
        return {
            "spec": asdict(self.spec),
            "failure_count": self.failure_count,
            "algorithms": [s.to_dict() for s in self.summaries],
        }

    def trials_csv(self) -> str:
        """Flat per-trial metric table, one row per (trial, algorithm).

        Contains only deterministic fields, so the bytes are identical for
        any worker count; wall times live in :meth:`timings_csv`.
        """
        lines = ["trial,algo,nmse,pd,doa_sq_err_deg2,within_delta,iters,failed"]
        for r in self.records:
            lines.append(
                f"{r.trial},{r.algo},{r.nmse!r},{r.support_hit!r},{r.doa_sq_err!r},"
                f"{r.within_delta!r},{r.iterations},{int(r.failed)}"
            )
        return "\n".join(lines) + "\n"

    def timings_csv(self) -> str:
        """Per-trial wall times (nondeterministic by nature)."""
        lines = ["trial,algo,wall_time_s"]
        for r in self.records:
            lines.append(f"{r.trial},{r.algo},{r.wall_time_s!r}")
        return "\n".join(lines) + "\n"


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    key = np.array([seed % 2 ** 64, trial % 2 ** 64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _draw_sources(spec: ExperimentSpec, rng: np.random.Generator) -> np.ndarray:
    """K-sparse amplitude matrix (M, T): fixed powers, uniform phases."""
    x = np.zeros((spec.m, spec.snapshots), dtype=complex)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=(spec.k, spec.snapshots))
    amps = np.sqrt(np.asarray(spec.powers))[:, None] * np.exp(1j * phases)
    x[list(spec.support)] = amps
    return x


def _draw_noise(spec: ExperimentSpec, rng: np.random.Generator) -> np.ndarray:
    scale = math.sqrt(spec.noise_power / 2.0)
    return scale * (
        rng.standard_normal((spec.n, spec.snapshots))
        + 1j * rng.standard_normal((spec.n, spec.snapshots))
    )


def gen_iid_instance(
    spec: ExperimentSpec, trial: int
) -> tuple[Dictionary, SnapshotSet, np.ndarray]:
    """Random-regressor instance: B with IID unit-variance complex-Gaussian
    entries, redrawn every trial."""
    rng = _trial_rng(spec.seed, trial)
    B = (
        rng.standard_normal((spec.n, spec.m))
        + 1j * rng.standard_normal((spec.n, spec.m))
    ) / math.sqrt(2.0)
    x = _draw_sources(spec, rng)
    Y = B @ x + _draw_noise(spec, rng)
    return build_dictionary(B), SnapshotSet.from_snapshots(Y), x


def ula_grid_angles(m: int, angle_range_deg: tuple[float, float] = (-90.0, 90.0)) -> np.ndarray:
    """Uniform angle grid in degrees, endpoints included."""
    return np.linspace(angle_range_deg[0], angle_range_deg[1], m)


def ula_steering_matrix(
    n: int, angles_deg: np.ndarray, kappa: float = math.pi
) -> np.ndarray:
    """Steering vectors ``[1, e^{-j kappa sin(theta)}, ...]`` column-wise."""
    theta = np.deg2rad(np.asarray(angles_deg, dtype=float))
    return np.exp(-1j * kappa * np.outer(np.arange(n), np.sin(theta)))


def gen_ula_instance(
    spec: ExperimentSpec, trial: int
) -> tuple[Dictionary, SnapshotSet, np.ndarray, np.ndarray]:
    """Array instance on a fixed steering grid; sources sit on grid points."""
    rng = _trial_rng(spec.seed, trial)
    grid = ula_grid_angles(spec.m, spec.angle_range_deg)
    B = ula_steering_matrix(spec.n, grid, spec.kappa)
    x = _draw_sources(spec, rng)
    Y = B @ x + _draw_noise(spec, rng)
    true_doas = np.sort(grid[list(spec.support)])
    return build_dictionary(B), SnapshotSet.from_snapshots(Y), x, true_doas


def beamformer_baseline(dictionary: Dictionary, data: SnapshotSet) -> PowerEstimate:
    """Standard-beamformer power spectrum (the matched-filter formula)."""
    return matched_filter_init(dictionary, data)


def _engine_config(spec: ExperimentSpec, policy: str, step: str, init=None) -> EstimatorConfig:
    return EstimatorConfig(
        policy=policy,
        step=step,
        tol=spec.tol,
        max_iters=spec.max_iters,
        likes_refresh=spec.likes_refresh,
        slim_iters=spec.slim_iters,
        init_powers=init,
    )


def _doa_metrics(
    est_doas: np.ndarray, true_doas: np.ndarray, delta: float
) -> tuple[float, float]:
    est = np.sort(est_doas)
    err = est - true_doas  # both sorted ascending, paired index-wise
    sq = float(np.sum(err ** 2))
    within = float(np.all(np.abs(err) < delta))
    return sq, within


def _run_algorithm(
    spec: ExperimentSpec,
    dictionary: Dictionary,
    data: SnapshotSet,
    policy: str,
    step: str,
) -> tuple[PowerEstimate, float, int]:
    """Run one algorithm, timing the estimation calls only.

    The likes policy is automatically initialized from a spice run whose
    wall time and iterations are charged to likes.
    """
    t0 = time.perf_counter()
    iters = 0
    init = None
    if policy == "likes":
        pre = estimate(dictionary, data, _engine_config(spec, "spice", "a"))
        iters += pre.iterations_run
        init = pre.powers.values
    trace = estimate(dictionary, data, _engine_config(spec, policy, step, init))
    iters += trace.iterations_run
    return trace.powers, time.perf_counter() - t0, iters


def _failed_record(trial: int, name: str, sig_sq: float) -> TrialRecord:
    return TrialRecord(
        trial, name, math.nan, sig_sq, math.nan, math.nan, math.nan,
        math.nan, 0, failed=True,
    )


def _run_trial(spec: ExperimentSpec, trial: int) -> list[TrialRecord]:
    if spec.scenario == "iid":
        dictionary, data, x_true = gen_iid_instance(spec, trial)
        grid = true_doas = None
    else:
        dictionary, data, x_true, true_doas = gen_ula_instance(spec, trial)
        grid = ula_grid_angles(spec.m, spec.angle_range_deg)
    sig_sq = float(np.sum(np.abs(x_true) ** 2))
    true_support = SupportSet(spec.support)
    records: list[TrialRecord] = []

    def score(powers: PowerEstimate) -> tuple[float, float, float]:
        """Support hit plus angle metrics for the scenario's peak rule."""
        if spec.scenario == "iid":
            sel = top_k_support(powers, spec.k, mode="top_values")
            return float(sel.indices == true_support.indices), math.nan, math.nan
        sel = top_k_support(powers, spec.k, mode="local_peaks")
        est = grid[list(sel.indices)]
        doa_sq, within = _doa_metrics(est, true_doas, spec.delta_theta_deg)
        return float(sel.indices == true_support.indices), doa_sq, within

    for policy, step in spec.algorithms:
        name = f"{policy}_{step}"
        try:
            powers, wall, iters = _run_algorithm(spec, dictionary, data, policy, step)
            if spec.scenario == "iid":
                amp = lmmse_amplitudes(dictionary, data, powers)
            else:
                amp = capon_amplitudes(dictionary, data, powers)
            hit, doa_sq, within = score(powers)
            err_sq = float(np.sum(np.abs(x_true - np.reshape(amp.x, x_true.shape)) ** 2))
            records.append(
                TrialRecord(trial, name, err_sq, sig_sq, hit, doa_sq, within, wall, iters)
            )
        except Exception:
            records.append(_failed_record(trial, name, sig_sq))

    # reference estimators: LS on the true support, and for the array
    # scenario the plain beamformer spectrum
    try:
        t0 = time.perf_counter()
        refit = ls_refit(dictionary, data, true_support)
        wall = time.perf_counter() - t0
        err_sq = float(np.sum(np.abs(x_true - np.reshape(refit.x, x_true.shape)) ** 2))
        records.append(
            TrialRecord(trial, "oracle_ls", err_sq, sig_sq, 1.0, math.nan, math.nan, wall, 0)
        )
    except Exception:
        records.append(_failed_record(trial, "oracle_ls", sig_sq))
    if spec.scenario == "ula":
        try:
            t0 = time.perf_counter()
            bf = beamformer_baseline(dictionary, data)
            wall = time.perf_counter() - t0
            hit, doa_sq, within = score(bf)
            records.append(
                TrialRecord(trial, "beamformer", math.nan, sig_sq, hit, doa_sq, within, wall, 0)
            )
        except Exception:
            records.append(_failed_record(trial, "beamformer", sig_sq))
    return records


def _finite_mean(values: list[float]) -> float:
    arr = np.asarray(values, dtype=float)
    arr = arr[np.isfinite(arr)]
    return float(arr.mean()) if arr.size else math.nan


def _aggregate(spec: ExperimentSpec, records: list[TrialRecord]) -> ExperimentReport:
    order: list[str] = []
    for r in records:
        if r.algo not in order:
            order.append(r.algo)
    summaries = []
    failure_count = 0
    for algo in order:
        rs = [r for r in records if r.algo == algo]
        ok = [r for r in rs if not r.failed]
        failure_count += len(rs) - len(ok)
        err = np.array([r.err_sq for r in ok], dtype=float)
        sig = np.array([r.sig_sq for r in ok], dtype=float)
        good = np.isfinite(err)
        nmse = float(err[good].sum() / sig[good].sum()) if good.any() else math.nan
        doa_ms = _finite_mean([r.doa_sq_err for r in ok])
        summaries.append(
            AlgorithmSummary(
                algo=algo,
                normalized_mse=nmse,
                pd_support=_finite_mean([r.support_hit for r in ok]),
                doa_rmse_deg=math.sqrt(doa_ms / spec.k) if math.isfinite(doa_ms) else math.nan,
                pd_within_delta=_finite_mean([r.within_delta for r in ok]),
                mean_wall_time_s=_finite_mean([r.wall_time_s for r in ok]),
                mean_iterations=_finite_mean([float(r.iterations) for r in ok]),
                failures=len(rs) - len(ok),
            )
        )
    return ExperimentReport(
        spec=spec, summaries=summaries, records=records, failure_count=failure_count
    )


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> ExperimentReport:
    """Run all trials and aggregate.

    ``workers`` only controls scheduling; per-trial RNG streams make the
    report identical for any worker count.  Per-trial failures are recorded
    in the report rather than raised.
    """
    if workers < 1:
        raise ConfigError("workers must be at least 1")
    trials = range(spec.trials)
    if workers == 1 or spec.trials == 1:
        per_trial = [_run_trial(spec, t) for t in trials]
    else:
        chunksize = max(1, spec.trials // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_trial = list(pool.map(
                _run_trial, [spec] * spec.trials, trials, chunksize=chunksize))
    records = [r for batch in per_trial for r in batch]
    return _aggregate(spec, records)
