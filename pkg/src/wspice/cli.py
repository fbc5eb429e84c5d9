"""Command-line surface: estimation, benchmarks, identifiability, verification.

Exit codes
----------
estimate         0 converged or policy-capped, 2 iteration limit, 1 error
benchmark        0 success, 1 spec/validation error
identifiability  0 unique or generically unique, 3 not unique,
                 4 indeterminate, 1 error
verify           0 all checks pass, 5 otherwise
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import verify as verify_mod
from .amplitude import capon_amplitudes, lmmse_amplitudes
from .errors import WspiceError
from .estimators import EstimatorConfig, estimate
from .experiments import ExperimentSpec, run_experiment
from .identifiability import classify_uniqueness
from .linmodel import PowerEstimate, SnapshotSet, build_dictionary
from .matio import MatrixFormatError, read_matrix, write_matrix

WORKERS_ENV = "WSPICE_WORKERS"


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def apply_paper_scale(spec: ExperimentSpec) -> ExperimentSpec:
    """Rescale a desk-scale spec to the full 1000-column, 1000-trial layout,
    moving support indices proportionally."""
    import dataclasses

    scale = 1000 / spec.m
    support = tuple(min(999, int(round(s * scale))) for s in spec.support)
    return dataclasses.replace(spec, m=1000, trials=1000, support=support)


@click.group()
def main():
    """Hyperparameter-free sparse estimation via weighted covariance fitting."""


@main.command("estimate")
@click.option("--algo", type=click.Choice(["spice", "likes", "slim", "iaa"]), default="spice")
@click.option("--step", type=click.Choice(["a", "b"]), default="a")
@click.option("--tol", type=float, default=1e-3, show_default=True)
@click.option("--max-iters", type=int, default=None,
              help="Iteration cap [default: 1000; 5 for slim].")
@click.option("--likes-refresh", type=int, default=30, show_default=True,
              help="Iterations between likes weight refreshes.")
@click.option("--uniform-noise", is_flag=True, help="Single shared noise power.")
@click.option("-B", "--regressors", "b_path", required=True, type=click.Path())
@click.option("-y", "--data", "y_path", required=True, type=click.Path())
@click.option("-o", "--outdir", required=True, type=click.Path())
def cmd_estimate(algo, step, tol, max_iters, likes_refresh, uniform_noise, b_path, y_path, outdir):
    """Estimate powers and amplitudes from matrices B and Y (complex CSV)."""
    try:
        B = read_matrix(b_path)
        Y = read_matrix(y_path)
    except (OSError, MatrixFormatError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    try:
        dictionary = build_dictionary(B)
        data = SnapshotSet.from_snapshots(np.asarray(Y, dtype=complex))
        slim_cap = max_iters if (algo == "slim" and max_iters is not None) else 5
        cap = max_iters if max_iters is not None else 1000
        init = None
        if algo == "likes":
            pre = estimate(dictionary, data, EstimatorConfig(
                policy="spice", step="a", tol=tol, max_iters=cap))
            init = pre.powers.values
        config = EstimatorConfig(
            policy=algo, step=step, tol=tol, max_iters=cap,
            likes_refresh=likes_refresh, slim_iters=slim_cap,
            uniform_noise=uniform_noise, init_powers=init,
        )
        trace = estimate(dictionary, data, config)
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        write_matrix(out / "powers.csv", trace.powers.values)
        write_matrix(out / "x_lmmse.csv", lmmse_amplitudes(dictionary, data, trace.powers).x)
        write_matrix(out / "x_capon.csv", capon_amplitudes(dictionary, data, trace.powers).x)
        (out / "trace.json").write_text(json.dumps(trace.to_dict(), indent=2))
    except WspiceError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"{algo}_{step}: {trace.termination} after {trace.iterations_run} iterations")
    sys.exit(0 if trace.termination in ("converged", "policy_limit") else 2)


@main.command("benchmark")
@click.option("--spec", "spec_path", required=True, type=click.Path())
@click.option("-o", "--outdir", required=True, type=click.Path())
@click.option("--workers", type=int, default=None,
              help=f"Worker processes [default: ${WORKERS_ENV} or 1].")
@click.option("--paper-scale", is_flag=True,
              help="Override grid size to 1000 and trials to 1000.")
def cmd_benchmark(spec_path, outdir, workers, paper_scale):
    """Run a Monte Carlo experiment from a JSON spec."""
    try:
        text = Path(spec_path).read_text()
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    try:
        spec = ExperimentSpec.from_json(text)
        if paper_scale:
            spec = apply_paper_scale(spec)
        report = run_experiment(spec, workers=workers or _default_workers())
    except (WspiceError, ValueError, TypeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2))
    (out / "trials.csv").write_text(report.trials_csv())
    (out / "timings.csv").write_text(report.timings_csv())
    header = f"{'algo':<12}{'nmse':>12}{'pd':>8}{'rmse_deg':>10}{'pd_delta':>10}{'time_s':>10}{'iters':>8}"
    click.echo(header)
    for s in report.summaries:
        click.echo(
            f"{s.algo:<12}{s.normalized_mse:>12.4g}{s.pd_support:>8.3g}"
            f"{s.doa_rmse_deg:>10.4g}{s.pd_within_delta:>10.3g}"
            f"{s.mean_wall_time_s:>10.4g}{s.mean_iterations:>8.1f}"
        )
    if report.failure_count:
        click.echo(f"failed trial runs: {report.failure_count}")
    sys.exit(0)


@main.command("identifiability")
@click.option("-B", "--regressors", "b_path", required=True, type=click.Path())
@click.option("--powers", "p_path", type=click.Path(), default=None,
              help="Optional real CSV of powers for the witness search.")
@click.option("--seed", type=int, default=0, show_default=True)
def cmd_identifiability(b_path, p_path, seed):
    """Classify uniqueness of the covariance parameterization for B."""
    try:
        B = read_matrix(b_path)
        dictionary = build_dictionary(B)
        powers = None
        if p_path is not None:
            values = np.real(read_matrix(p_path)).reshape(-1)
            powers = PowerEstimate(values, dictionary.m)
        report = classify_uniqueness(dictionary, powers, seed=seed)
    except (OSError, MatrixFormatError, WspiceError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(json.dumps(report.to_dict(), indent=2))
    sys.exit({"unique": 0, "generically_unique": 0, "not_unique": 3}.get(report.verdict, 4))


@main.command("verify")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n", type=int, default=8, show_default=True)
@click.option("--m", type=int, default=20, show_default=True)
def cmd_verify(seed, n, m):
    """Run the cross-check battery (bounds, descent, solver equivalences)."""
    results = verify_mod.run_battery(seed=seed, n=n, m=m)
    all_ok = True
    for name, ok, detail in results:
        click.echo(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        all_ok &= ok
    sys.exit(0 if all_ok else 5)


if __name__ == "__main__":
    main()
