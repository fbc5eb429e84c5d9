"""Independent convex reference solvers.

These certify, at desk scale, that the iteration engine lands on the optima
it is supposed to reach: the weighted l1-penalized least-absolute-deviation
problem (equivalent to the nonuniform-noise covariance fit), the square-root
LASSO (equivalent to the uniform-noise variant), the regularized inner
least-squares problem behind the augmented criterion, and the covariance-fit
objective itself minimized by plain projected gradient.

Nothing here calls the iteration engine; the nondifferentiable problems are
solved by smoothing the l1 terms (mu decreasing 1e-2 to 1e-8, a factor of 10
per stage) with accelerated gradient descent at each level, warm-started
across stages.  Intended for N <= 16, M <= 64.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, NotConvergedError
from .linmodel import Dictionary, PowerEstimate

__all__ = [
    "ConvexSolveResult",
    "solve_l1_lad",
    "solve_sqrt_lasso",
    "solve_inner_ls",
    "minimize_spice_direct",
]

MU_START = 1e-2
MU_STOP = 1e-8
MU_FACTOR = 10.0
STAGE_ITER_CAP = 30000
STAGE_TOL = 1e-11
CERT_TOL = 1e-9
# consecutive small relative changes required before a stage is declared done
STALL_RUNS = 10


@dataclass(frozen=True)
class ConvexSolveResult:
    """Solution of one reference convex program.

    ``certificate`` is the final relative objective change; at most 1e-9 on
    a successful solve.
    """

    x: np.ndarray
    objective: float
    iterations: int
    certificate: float


def _smooth_abs(z: np.ndarray, mu: float) -> np.ndarray:
    return np.sqrt(np.abs(z) ** 2 + mu ** 2)


def _accelerated_descent(
    x0: np.ndarray,
    objective: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    lipschitz: float,
    iter_cap: int = STAGE_ITER_CAP,
    tol: float = STAGE_TOL,
    should_stop: Optional[Callable[[], bool]] = None,
) -> tuple[np.ndarray, float, int, float]:
    """Nesterov-accelerated descent with objective-based momentum restarts.

    Returns ``(x, f, iterations, last_relative_change)``; descent in the
    smoothed objective is enforced, so the reported ``f`` never exceeds the
    starting value.
    """
    step = 1.0 / lipschitz
    x = x0.copy()
    v = x.copy()
    f = objective(x)
    t = 1.0
    stall = 0
    rel = np.inf
    it = 0
    for it in range(1, iter_cap + 1):
        cand = v - step * gradient(v)
        f_cand = objective(cand)
        if f_cand > f:
            # momentum overshoot: restart from the best point
            v = x.copy()
            t = 1.0
            cand = x - step * gradient(x)
            f_cand = objective(cand)
            if f_cand > f:
                # cannot descend: the step is already at numerical resolution
                rel = 0.0
                break
        rel = abs(f - f_cand) / max(abs(f), 1e-300)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        v = cand + ((t - 1.0) / t_next) * (cand - x)
        x, f, t = cand, f_cand, t_next
        stall = stall + 1 if rel < tol else 0
        if stall >= STALL_RUNS:
            break
        if should_stop is not None and it % 256 == 0 and should_stop():
            break
    return x, f, it, rel


def _smoothing_schedule() -> list[float]:
    mus = []
    mu = MU_START
    while mu > MU_STOP * (1.0 - 1e-12):
        mus.append(mu)
        mu /= MU_FACTOR
    return mus


def solve_l1_lad(
    dictionary: Dictionary,
    y: np.ndarray,
    w1: np.ndarray,
    w2: np.ndarray,
    should_stop: Optional[Callable[[], bool]] = None,
) -> ConvexSolveResult:
    """Minimize ``||W1^{1/2}(y - Bx)||_1 + ||W2^{1/2} x||_1`` over complex x.

    ``w1`` (length N) weights the residual moduli, ``w2`` (length M) the
    coefficient moduli; both must be strictly positive.

    Raises
    ------
    NotConvergedError
        If the final smoothing stage does not reach its certificate.
    """
    B = dictionary.B
    y = np.asarray(y, dtype=complex).reshape(-1)
    c1 = np.sqrt(np.asarray(w1, dtype=float))
    c2 = np.sqrt(np.asarray(w2, dtype=float))
    if np.any(c1 <= 0) or np.any(c2 <= 0):
        raise ConfigError("LAD weights must be strictly positive")
    bnorm2 = np.linalg.norm(B, 2) ** 2

    def true_objective(x: np.ndarray) -> float:
        r = y - B @ x
        return float(c1 @ np.abs(r) + c2 @ np.abs(x))

    x = np.zeros(B.shape[1], dtype=complex)
    total_iters = 0
    cert = np.inf
    for mu in _smoothing_schedule():

        def f_mu(x: np.ndarray, mu: float = mu) -> float:
            r = y - B @ x
            return float(c1 @ _smooth_abs(r, mu) + c2 @ _smooth_abs(x, mu))

        def g_mu(x: np.ndarray, mu: float = mu) -> np.ndarray:
            r = y - B @ x
            return -(B.conj().T @ (c1 * r / _smooth_abs(r, mu))) + c2 * x / _smooth_abs(x, mu)

        lip = (bnorm2 * c1.max() + c2.max()) / mu
        x, _, its, cert = _accelerated_descent(
            x, f_mu, g_mu, lip, should_stop=should_stop
        )
        total_iters += its
    if cert > CERT_TOL:
        raise NotConvergedError(
            "l1-LAD solve stalled above certificate tolerance",
            {"certificate": cert, "iterations": total_iters},
        )
    return ConvexSolveResult(
        x=x, objective=true_objective(x), iterations=total_iters, certificate=cert
    )


def solve_sqrt_lasso(
    dictionary: Dictionary,
    y: np.ndarray,
    w: float,
    col_weights: np.ndarray,
    should_stop: Optional[Callable[[], bool]] = None,
) -> ConvexSolveResult:
    """Minimize ``w ||y - Bx||_2 + sum_k sqrt(col_weights_k) |x_k|``."""
    B = dictionary.B
    y = np.asarray(y, dtype=complex).reshape(-1)
    c = np.sqrt(np.asarray(col_weights, dtype=float))
    if w <= 0 or np.any(c <= 0):
        raise ConfigError("square-root-LASSO weights must be strictly positive")
    bnorm2 = np.linalg.norm(B, 2) ** 2

    def true_objective(x: np.ndarray) -> float:
        return float(w * np.linalg.norm(y - B @ x) + c @ np.abs(x))

    x = np.zeros(B.shape[1], dtype=complex)
    total_iters = 0
    cert = np.inf
    for mu in _smoothing_schedule():

        def f_mu(x: np.ndarray, mu: float = mu) -> float:
            r = y - B @ x
            res = np.sqrt(float(np.real(np.vdot(r, r))) + mu ** 2)
            return float(w * res + c @ _smooth_abs(x, mu))

        def g_mu(x: np.ndarray, mu: float = mu) -> np.ndarray:
            r = y - B @ x
            res = np.sqrt(float(np.real(np.vdot(r, r))) + mu ** 2)
            return -(B.conj().T @ (w * r / res)) + c * x / _smooth_abs(x, mu)

        lip = (w * bnorm2 + c.max()) / mu
        x, _, its, cert = _accelerated_descent(
            x, f_mu, g_mu, lip, should_stop=should_stop
        )
        total_iters += its
    if cert > CERT_TOL:
        raise NotConvergedError(
            "square-root-LASSO solve stalled above certificate tolerance",
            {"certificate": cert, "iterations": total_iters},
        )
    return ConvexSolveResult(
        x=x, objective=true_objective(x), iterations=total_iters, certificate=cert
    )


def solve_inner_ls(
    dictionary: Dictionary, y: np.ndarray, powers: PowerEstimate
) -> ConvexSolveResult:
    """Minimize ``(y - Bx)^* S^{-1} (y - Bx) + sum_k |x_k|^2 / p_k`` exactly.

    ``S`` is the diagonal of noise powers and ``p`` the signal powers, all
    strictly positive.  Solved through its normal equations; the attained
    objective equals ``y^* R^{-1} y`` identically.
    """
    if np.any(powers.values <= 0):
        raise ConfigError("inner least-squares requires strictly positive powers")
    B = dictionary.B
    y = np.asarray(y, dtype=complex).reshape(-1)
    p_sig = powers.signal
    s_inv = 1.0 / powers.noise
    H = B.conj().T @ (s_inv[:, None] * B) + np.diag(1.0 / p_sig)
    rhs = B.conj().T @ (s_inv * y)
    x = np.linalg.solve(H, rhs)
    r = y - B @ x
    obj = float(np.real(r.conj() @ (s_inv * r)) + np.real(x.conj() @ (x / p_sig)))
    return ConvexSolveResult(x=x, objective=obj, iterations=1, certificate=0.0)


def minimize_spice_direct(
    dictionary: Dictionary,
    y: np.ndarray,
    weights: np.ndarray,
    iter_cap: int = 100000,
    tol: float = 1e-14,
    should_stop: Optional[Callable[[], bool]] = None,
) -> PowerEstimate:
    """Minimize ``y^* R(p)^{-1} y + sum_k w_k p_k`` over ``p >= 0`` directly.

    Projected gradient with Armijo backtracking, using plain LU solves so the
    route shares nothing with the iteration engine.  The noise slice is kept
    a hair above zero to preserve invertibility.

    Raises
    ------
    NotConvergedError
        If the objective has not stalled within ``iter_cap`` iterations.
    """
    A = dictionary.A
    m, n = dictionary.m, dictionary.n
    y = np.asarray(y, dtype=complex).reshape(-1)
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ConfigError("weights must be strictly positive")
    eps_noise = 1e-12 * float(np.real(np.vdot(y, y))) / n

    def project(p: np.ndarray) -> np.ndarray:
        q = np.maximum(p, 0.0)
        q[m:] = np.maximum(q[m:], eps_noise)
        return q

    def f_grad(p: np.ndarray) -> tuple[float, np.ndarray]:
        R = (A * p) @ A.conj().T
        R = 0.5 * (R + R.conj().T)
        z = np.linalg.solve(R, y)
        quad = float(np.real(np.vdot(y, z)))
        corr = A.conj().T @ z
        grad = w - np.abs(corr) ** 2
        return quad + float(w @ p), grad

    p = project(np.abs(A.conj().T @ y) ** 2 / dictionary.column_sq_norms ** 2)
    f, grad = f_grad(p)
    step = 1.0 / max(float(np.linalg.norm(grad)), 1.0)
    stall = 0
    for it in range(1, iter_cap + 1):
        step *= 2.0  # optimistic growth, Armijo shrinks as needed
        while True:
            cand = project(p - step * grad)
            f_cand, grad_cand = f_grad(cand)
            decrease = float(np.real(grad @ (cand - p)))
            if f_cand <= f + 1e-4 * decrease or step < 1e-280:
                break
            step *= 0.5
        rel = abs(f - f_cand) / max(abs(f), 1e-300)
        p, f, grad = cand, f_cand, grad_cand
        stall = stall + 1 if rel < tol else 0
        if stall >= 3:
            return PowerEstimate(np.maximum(p, 0.0), m)
        if should_stop is not None and it % 256 == 0 and should_stop():
            break
    raise NotConvergedError(
        "projected-gradient covariance fit did not stall",
        {"iterations": iter_cap, "objective": f},
    )
