"""Stationary-point finders on the empirical risk.

All constrained methods operate over the weight ball W = {||w||_q <= B}
from the model geometry.  Stationarity at a constrained point is measured
by the projected-gradient norm ||(w - proj(w - eta g)) / eta||_2, with the
raw dual-pair gradient norm reported alongside (the raw gradient need not
vanish on the boundary).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import models as M
from .geometry import norm, project
from .rngtools import as_generator, substream
from .synthdata import Dataset, generate, paired_excess_oracle

__all__ = [
    "OptimizerConfig",
    "OptResult",
    "pgd",
    "sgd",
    "regularized_stationary",
    "mirror_descent",
    "meta_algorithm",
    "regularization_weight",
    "uniform_ball_point",
]


@dataclass
class OptimizerConfig:
    method: str = "pgd"
    step_size: float | str = "auto"  # "auto" -> 1/H from the model constants
    max_steps: int = 5000
    grad_tolerance: float = 1e-6
    lam: float | None = None  # regularized_gd only; None -> formula value
    reg_kappa: float = 1.0  # multiplier on the formula regularization weight
    restarts: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.grad_tolerance <= 0:
            raise ValueError("grad_tolerance must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass
class OptResult:
    w_hat: np.ndarray
    grad_norm_final: float  # projected-gradient norm (the stationarity measure)
    steps_used: int
    empirical_risk: float
    converged: bool
    grad_norm_raw: float = math.nan  # ||grad L_n(w_hat)|| in the primal norm
    restart_index: int = 0
    lam_used: float | None = None
    w_random: np.ndarray | None = None  # randomized output (mirror descent)
    trace: list | None = None  # optional (step, risk, grad_norm) rows


def _resolve_step(model: M.ModelSpec, config: OptimizerConfig) -> float:
    if config.step_size == "auto":
        consts = model.ensure_constants()
        return 1.0 / consts.loss_smoothness_H
    step = float(config.step_size)
    if step < 0:
        raise ValueError("step size must be nonnegative")
    return step


def uniform_ball_point(rng: np.random.Generator, d: int, q: float, B: float) -> np.ndarray:
    """Uniform draw from the ell_q ball of radius B (q in {1, 2})."""
    r = B * rng.random() ** (1.0 / d)
    if q == 2.0:
        z = rng.standard_normal(d)
        return r * z / np.linalg.norm(z)
    if q == 1.0:
        w = rng.dirichlet(np.ones(d)) * rng.choice([-1.0, 1.0], size=d)
        return r * w
    raise ValueError("uniform ball sampling implemented for q in {1, 2}")


def pgd_core(grad_fn, proj, w0, step, tol, max_steps, risk_fn=None, record_trace=False):
    """Projected gradient descent loop; the stopping test runs at every
    iterate including the start point."""
    w = proj(np.asarray(w0, dtype=float))
    trace = [] if record_trace else None
    steps = 0
    while True:
        g = grad_fn(w)
        if step > 0:
            w_next = proj(w - step * g)
            pg = float(np.linalg.norm(w - w_next)) / step
        else:
            w_next, pg = w, float(np.linalg.norm(g))
        if record_trace:
            trace.append((steps, risk_fn(w) if risk_fn else math.nan, pg))
        if pg <= tol or steps >= max_steps or step == 0:
            return w, pg, steps, pg <= tol, trace
        w = w_next
        steps += 1


def pgd(
    model: M.ModelSpec,
    data: Dataset,
    config: OptimizerConfig,
    w0=None,
    record_trace: bool = False,
) -> OptResult:
    """Multi-restart projected gradient descent to a target stationarity.

    Restarts launch from independent uniform ball points; the iterate with
    the smallest final projected-gradient norm wins (ties by restart index).
    """
    if model.family == "relu":
        raise ValueError("pgd requires a smooth family")
    g = model.geometry
    q, B = g.dual_exponent, g.radius_B
    step = _resolve_step(model, config)
    proj = lambda w: project(w, int(q), B)
    grad_fn = lambda w: M.empirical_gradient(model, w, data.X, data.y)
    risk_fn = lambda w: M.empirical_risk(model, w, data.X, data.y)

    starts = []
    if w0 is not None:
        starts.append(np.asarray(w0, dtype=float))
    else:
        for r in range(config.restarts):
            rng = substream(config.seed, f"pgd/restart/{r}")
            starts.append(uniform_ball_point(rng, data.d, q, B))

    best = None
    for idx, start in enumerate(starts):
        w, pg, steps, conv, trace = pgd_core(
            grad_fn, proj, start, step, config.grad_tolerance, config.max_steps,
            risk_fn=risk_fn, record_trace=record_trace,
        )
        cand = OptResult(
            w_hat=w,
            grad_norm_final=pg,
            steps_used=steps,
            empirical_risk=risk_fn(w),
            converged=conv,
            grad_norm_raw=norm(grad_fn(w), g.primal_exponent),
            restart_index=idx,
            trace=trace,
        )
        if best is None or (cand.grad_norm_final, cand.restart_index) < (
            best.grad_norm_final,
            best.restart_index,
        ):
            best = cand
    return best


def sgd(
    model: M.ModelSpec,
    data: Dataset,
    config: OptimizerConfig,
    w0=None,
    sample_order: str = "random",
    log_points: int = 64,
) -> OptResult:
    """Projected single-sample SGD; returns the logged iterate with the
    smallest full-batch gradient norm."""
    if model.family == "relu":
        raise ValueError("sgd requires a smooth family")
    g = model.geometry
    q, B = g.dual_exponent, g.radius_B
    step = _resolve_step(model, config)
    rng = substream(config.seed, "sgd")
    w = project(np.asarray(w0, dtype=float) if w0 is not None else np.zeros(data.d), int(q), B)

    every = max(1, config.max_steps // log_points)
    logged = [w.copy()]
    for t in range(config.max_steps):
        i = int(rng.integers(data.n)) if sample_order == "random" else t % data.n
        gi = M.grad(model, w, data.X[i], data.y[i])
        w = project(w - step * gi, int(q), B)
        if (t + 1) % every == 0 or t + 1 == config.max_steps:
            logged.append(w.copy())

    grads = [norm(M.empirical_gradient(model, wi, data.X, data.y), g.primal_exponent) for wi in logged]
    k = int(np.argmin(grads))
    w_best = logged[k]
    return OptResult(
        w_hat=w_best,
        grad_norm_final=grads[k],
        steps_used=config.max_steps,
        empirical_risk=M.empirical_risk(model, w_best, data.X, data.y),
        converged=grads[k] <= config.grad_tolerance,
        grad_norm_raw=grads[k],
    )


def regularization_weight(model: M.ModelSpec, n: int, delta: float, kappa: float = 1.0) -> float:
    """lambda = kappa * sqrt(R^4 C^6 / c^2 * log(log(C R n)/delta) / n)."""
    consts = model.ensure_constants()
    C, c = consts.C_upper, consts.c_lower
    R = model.geometry.radius_R
    inner = math.log(max(math.log(max(C * R * n, math.e)), math.e) / delta)
    lam = kappa * math.sqrt((R**4 * C**6 / c**2) * inner / n)
    if lam <= 0:
        raise ValueError("regularization weight must be positive")
    return lam


def regularized_stationary(
    model: M.ModelSpec, data: Dataset, delta: float, config: OptimizerConfig, w0=None
) -> OptResult:
    """Unconstrained gradient descent on L_n(w) + (lam/2)||w||_2^2.

    Any exact stationary point of the regularized risk has norm at most
    2 C R / lam, so the objective is coercive and plain descent suffices.
    """
    if model.family == "relu":
        raise ValueError("regularized descent requires a smooth family")
    if model.geometry.dual_exponent != 2.0:
        raise ValueError("regularized stationary points use the l2 geometry")
    consts = model.ensure_constants()
    lam = config.lam if config.lam is not None else regularization_weight(
        model, max(data.n, 2), delta, config.reg_kappa
    )
    if lam <= 0:
        raise ValueError("lambda must be positive")
    step = 1.0 / (consts.loss_smoothness_H + lam)
    grad_fn = lambda w: M.empirical_gradient(model, w, data.X, data.y) + lam * w
    w = np.asarray(w0, dtype=float) if w0 is not None else np.zeros(data.d)
    steps = 0
    gn = float(np.linalg.norm(grad_fn(w)))
    while gn > config.grad_tolerance and steps < config.max_steps:
        w = w - step * grad_fn(w)
        gn = float(np.linalg.norm(grad_fn(w)))
        steps += 1
    return OptResult(
        w_hat=w,
        grad_norm_final=gn,
        steps_used=steps,
        empirical_risk=M.empirical_risk(model, w, data.X, data.y),
        converged=gn <= config.grad_tolerance,
        grad_norm_raw=gn,
        lam_used=lam,
    )


def _mirror_map(w: np.ndarray, q: float) -> np.ndarray:
    # gradient of half the squared ell_q norm
    nq = norm(w, q)
    if nq == 0:
        return np.zeros_like(w)
    return (nq ** (2.0 - q)) * np.sign(w) * np.abs(w) ** (q - 1.0)


def _mirror_map_inverse(theta: np.ndarray, p: float) -> np.ndarray:
    npn = norm(theta, p)
    if npn == 0:
        return np.zeros_like(theta)
    return (npn ** (2.0 - p)) * np.sign(theta) * np.abs(theta) ** (p - 1.0)


def mirror_descent(
    model: M.ModelSpec, data: Dataset, config: OptimizerConfig, p: float
) -> OptResult:
    """Single-pass online mirror descent with the half-squared conjugate
    norm as regularizer ((1/beta)-strongly convex over the dual ball).

    Visits the samples once in the stored order and returns a uniformly
    random visited iterate (the randomized output whose expected excess risk
    the regret bound controls); the best full-batch-gradient iterate is also
    reported for diagnostics.  For the half-squared-norm potential the
    Bregman projection onto the dual-norm ball is radial rescaling.
    """
    if model.family == "relu":
        raise ValueError("mirror descent requires a smooth family")
    if not (2.0 <= p < math.inf):
        raise ValueError("mirror descent needs a finite exponent p >= 2")
    g = model.geometry
    q, B = g.dual_exponent, g.radius_B
    consts = model.ensure_constants()
    if config.step_size == "auto":
        beta = p - 1.0
        G = consts.grad_range_G
        eta = math.sqrt(2.0 * B * B * beta / (G * G * data.n))
    else:
        eta = float(config.step_size)

    w = np.zeros(data.d)
    iterates = []
    for t in range(data.n):
        iterates.append(w.copy())
        gt = M.grad(model, w, data.X[t], data.y[t])
        if p == 2.0:
            w = w - eta * gt  # identity mirror map
        else:
            theta = _mirror_map(w, q) - eta * gt
            w = _mirror_map_inverse(theta, p)
        nq = norm(w, q)
        if nq > B:
            w *= B / nq

    rng = substream(config.seed, "mirror/output")
    k = int(rng.integers(len(iterates)))
    w_rand = iterates[k]
    grads = [
        norm(M.empirical_gradient(model, wi, data.X, data.y), g.primal_exponent)
        for wi in iterates[:: max(1, len(iterates) // 64)]
    ]
    best_i = int(np.argmin(grads)) * max(1, len(iterates) // 64)
    w_best = iterates[min(best_i, len(iterates) - 1)]
    return OptResult(
        w_hat=w_rand,
        grad_norm_final=norm(
            M.empirical_gradient(model, w_rand, data.X, data.y), g.primal_exponent
        ),
        steps_used=data.n,
        empirical_risk=M.empirical_risk(model, w_rand, data.X, data.y),
        converged=True,
        w_random=w_best,  # diagnostics: best-by-gradient iterate
    )


def meta_algorithm(
    model: M.ModelSpec,
    w_star: np.ndarray,
    epsilon: float,
    regime: str,
    seed: int,
    noise=None,
    dist: str = "sphere_uniform",
    oracle_m: int = 100_000,
) -> dict:
    """Sample n = ceil(min(1/eps^2, d/eps)) points, run pgd to 1/sqrt(n),
    and report the oracle excess risk of the returned point."""
    if not (0.0 < epsilon < 1.0) and epsilon != 1.0:
        raise ValueError("epsilon must lie in (0, 1]")
    if regime not in ("high_dim", "low_dim"):
        raise ValueError("regime must be high_dim or low_dim")
    d = len(w_star)
    n = int(math.ceil(min(1.0 / epsilon**2, d / epsilon)))
    data = generate(model, w_star, n, substream(seed, "meta/data"), noise=noise, dist=dist)
    config = OptimizerConfig(grad_tolerance=1.0 / math.sqrt(n), seed=seed)
    result = pgd(model, data, config)
    oracle = paired_excess_oracle(
        model, np.asarray(w_star, float), result.w_hat, oracle_m,
        substream(seed, "meta/oracle"), noise=noise, dist=dist,
    )
    return {
        "result": result,
        "n_used": n,
        "regime": regime,
        "excess_risk_estimate": oracle["excess"],
        "excess_risk_stderr": oracle["excess_stderr"],
    }
