"""Gradient-domination verification and the excess-risk certificate.

The gradient-domination (GD) condition bounds population excess risk by a
power of the population gradient norm,

    L_D(w) - L_D(w*) <= mu * ||grad L_D(w)||^alpha   for all w in W,

with (alpha, mu) pairs determined per model family and geometry regime.
Population quantities are Monte-Carlo estimates; every check carries
propagated standard errors, a 3-sigma slack, and a distinct "inconclusive"
verdict when the oracle noise is too large to call a violation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import models as M
from .geometry import norm, project
from .optimize import OptResult, uniform_ball_point
from .rademacher import RcEstimate
from .rngtools import substream
from .synthdata import CovarianceSummary, Dataset, generate

__all__ = [
    "GdSpec",
    "Certificate",
    "GdReport",
    "gd_constants",
    "verify_gd",
    "excess_risk_certificate",
    "gradient_discrepancy",
    "RegimeUnavailableError",
]

_EIG_THRESHOLD = 1e-10


class RegimeUnavailableError(ValueError):
    """The covariance quantity needed by the requested regime is degenerate."""


@dataclass(frozen=True)
class GdSpec:
    alpha: float
    mu: float
    norm_p: float  # norm applied to grad L_D in the condition
    regime: str  # "norm_based" | "l2_lowdim" | "sparse"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.alpha not in (1.0, 2.0):
            raise ValueError("alpha must be 1 or 2 for the instantiated regimes")
        if self.mu <= 0:
            raise ValueError("mu must be positive")


def gd_constants(
    model: M.ModelSpec,
    cov: CovarianceSummary | None,
    regime: str,
    noise_sampler=None,
    rng=None,
) -> GdSpec:
    """The exact (alpha, mu) pair for the requested regime.

    GLM:  (1, B C/c), (2, C/(4 c^3 lambda_min)), (2, C s/(c^3 psi_min)).
    RR:   (1, B C/c), (2, C/(2 c^2 lambda_min)), (2, 2 C s/(c^2 psi_min)).
    """
    consts = model.ensure_constants(noise_sampler=noise_sampler, rng=rng)
    C, c = consts.C_upper, consts.c_lower
    B = model.geometry.radius_B
    glm = model.family == "glm"
    if model.family == "relu":
        raise ValueError("GD constants are defined for the smooth families")

    if regime == "norm_based":
        mu = B * C / c
        p = model.geometry.primal_exponent
    elif regime == "l2_lowdim":
        if cov is None or cov.lambda_min <= _EIG_THRESHOLD:
            raise RegimeUnavailableError("lambda_min unavailable or below threshold")
        mu = C / (4.0 * c**3 * cov.lambda_min) if glm else C / (2.0 * c**2 * cov.lambda_min)
        p = 2.0
    elif regime == "sparse":
        if cov is None or cov.psi_min_estimate <= _EIG_THRESHOLD:
            raise RegimeUnavailableError("psi_min unavailable or below threshold")
        s = cov.support_S.size
        mu = (C * s / (c**3 * cov.psi_min_estimate) if glm
              else 2.0 * C * s / (c**2 * cov.psi_min_estimate))
        p = math.inf
    else:
        raise ValueError(f"unknown regime {regime!r}")
    alpha = 1.0 if regime == "norm_based" else 2.0
    return GdSpec(alpha=alpha, mu=mu, norm_p=p, regime=regime,
                  provenance={"family": model.family, "C": C, "c": c, "B": B})


@dataclass
class GdReport:
    rows: list  # (probe_id, excess, gradnorm, rhs, slack, verdict)
    violations: int
    inconclusive: int
    worst_slack: float

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("probe_id,excess,gradnorm,rhs,slack,verdict\n")
            for row in self.rows:
                fh.write("{},{:.17g},{:.17g},{:.17g},{:.17g},{}\n".format(*row))


def _probe_points(rng, d: int, q: float, B: float, w_star: np.ndarray, count: int) -> list:
    """60% uniform in the ball, 20% boundary sphere, 20% on [w*, boundary]."""
    probes = []
    n_uniform = int(0.6 * count)
    n_boundary = int(0.2 * count)
    for _ in range(n_uniform):
        probes.append(uniform_ball_point(rng, d, q, B))
    for _ in range(n_boundary):
        w = uniform_ball_point(rng, d, q, B)
        nq = norm(w, q)
        probes.append(w * (B / nq) if nq > 0 else w)
    while len(probes) < count:
        w = uniform_ball_point(rng, d, q, B)
        nq = norm(w, q)
        edge = w * (B / nq) if nq > 0 else w
        t = rng.random()
        probes.append(w_star + t * (edge - w_star))
    return probes


def verify_gd(
    model: M.ModelSpec,
    w_star: np.ndarray,
    gd: GdSpec,
    probe_count: int,
    oracle_m: int,
    seed: int,
    noise=None,
    dist: str = "sphere_uniform",
    oracle_sample: Dataset | None = None,
) -> GdReport:
    """Probe the GD inequality with oracle-estimated population quantities.

    One oracle sample of size oracle_m is shared read-only across probes.
    A probe is a violation only when the excess exceeds the bound by more
    than 3 propagated sigmas *and* the noise is under 10% of the exceedance;
    noisier exceedances are flagged inconclusive.
    """
    g = model.geometry
    w_star = np.asarray(w_star, dtype=float)
    if oracle_sample is None:
        oracle_sample = generate(model, w_star, oracle_m,
                                 substream(seed, "gd/oracle"), noise=noise, dist=dist)
    X, y = oracle_sample.X, oracle_sample.y
    m = X.shape[0]
    loss_star = M.loss_values(model, w_star, X, y)

    rng = substream(seed, "gd/probes")
    probes = _probe_points(rng, w_star.shape[0], g.dual_exponent, g.radius_B,
                           w_star, probe_count)
    if gd.regime == "sparse":
        l1_star = norm(w_star, 1.0)
        probes = [project(w, 1, l1_star) for w in probes]

    rows = []
    violations = inconclusive = 0
    worst_slack = math.inf
    for pid, w in enumerate(probes):
        diff = M.loss_values(model, w, X, y) - loss_star
        excess = float(diff.mean())
        excess_se = float(diff.std(ddof=1) / math.sqrt(m))
        grads = M.per_sample_grads(model, w, X, y)
        ghat = grads.mean(axis=0)
        gn = norm(ghat, gd.norm_p)
        g_se = float(math.sqrt(grads.var(axis=0, ddof=1).sum() / m))
        rhs = gd.mu * gn**gd.alpha
        rhs_se = gd.mu * gd.alpha * gn ** (gd.alpha - 1.0) * g_se if gn > 0 else gd.mu * g_se
        sigma = math.hypot(excess_se, rhs_se)
        slack = rhs + 3.0 * sigma - excess
        if slack >= 0:
            verdict = "holds"
        elif sigma <= 0.1 * (excess - rhs):
            verdict = "violation"
            violations += 1
        else:
            verdict = "inconclusive"
            inconclusive += 1
        worst_slack = min(worst_slack, slack)
        rows.append((pid, excess, gn, rhs, slack, verdict))
    return GdReport(rows=rows, violations=violations, inconclusive=inconclusive,
                    worst_slack=worst_slack)


@dataclass
class Certificate:
    grad_term: float
    rc_term: float
    conf_term: float
    total: float
    delta: float
    constants_used: dict

    def __post_init__(self):
        if min(self.grad_term, self.rc_term, self.conf_term, self.total) < 0:
            raise ValueError("certificate terms must be nonnegative")


def excess_risk_certificate(
    model: M.ModelSpec,
    gd: GdSpec,
    opt: OptResult,
    data: Dataset,
    rc: RcEstimate | float,
    delta: float,
    grad_measure: str = "auto",
) -> Certificate:
    """High-probability excess-risk certificate

        total = 2 mu ( ||grad L_n(w)||^a + (4 RC/n + 4 G log(1/d)/n)^a
                       + (G sqrt(log(1/d)/n))^a ).

    Conventions pinned here: the leading absolute constant is exactly 2;
    the confidence constant c equals the gradient range G; tail terms use
    the one-sided log(1/delta) form.  The raw gradient norm is used at
    interior points and the projected-gradient norm on the boundary.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    consts = model.ensure_constants()
    G = consts.grad_range_G
    n = data.n
    rc_value = rc.value if isinstance(rc, RcEstimate) else float(rc)

    g = model.geometry
    interior = norm(opt.w_hat, g.dual_exponent) < g.radius_B * (1 - 1e-9)
    if grad_measure == "raw" or (grad_measure == "auto" and interior):
        gn = norm(M.empirical_gradient(model, opt.w_hat, data.X, data.y), gd.norm_p)
        measure = "raw"
    else:
        gn = opt.grad_norm_final
        measure = "projected"

    log_term = math.log(1.0 / delta)
    grad_term = gn**gd.alpha
    # every term is the alpha-th power of a gradient-norm-scale quantity
    rc_term = (4.0 * rc_value / n + 4.0 * G * log_term / n) ** gd.alpha
    conf_term = (G * math.sqrt(log_term / n)) ** gd.alpha
    total = 2.0 * gd.mu * (grad_term + rc_term + conf_term)
    return Certificate(
        grad_term=grad_term,
        rc_term=rc_term,
        conf_term=conf_term,
        total=total,
        delta=delta,
        constants_used={
            "mu": gd.mu,
            "alpha": gd.alpha,
            "leading_factor": 2.0,
            "confidence_c": G,
            "rc_value": rc_value,
            "grad_measure": measure,
            "tail_convention": "one-sided log(1/delta)",
        },
    )


def gradient_discrepancy(
    model: M.ModelSpec,
    w_star: np.ndarray,
    data: Dataset,
    oracle_m: int,
    seed: int,
    noise=None,
    dist: str = "sphere_uniform",
    oracle_sample: Dataset | None = None,
    restarts: int = 8,
    steps: int = 200,
    norm_p: float | None = None,
) -> dict:
    """Lower estimate of sup_w ||grad L_n(w) - grad L_D(w)|| by multi-restart
    ascent plus anchor probes, with the oracle noise as standard error."""
    g = model.geometry
    p = g.primal_exponent if norm_p is None else norm_p
    q, B = g.dual_exponent, g.radius_B
    if oracle_sample is None:
        oracle_sample = generate(model, np.asarray(w_star, float), oracle_m,
                                 substream(seed, "disc/oracle"), noise=noise, dist=dist)
    Xn, yn = data.X, data.y
    Xm, ym = oracle_sample.X, oracle_sample.y

    def diff_vec(w):
        return M.empirical_gradient(model, w, Xn, yn) - M.empirical_gradient(model, w, Xm, ym)

    def value(w):
        return norm(diff_vec(w), p)

    smooth = model.family != "relu"

    def grad_of_value(w):
        v = diff_vec(w)
        nv = norm(v, p)
        if nv == 0:
            return np.zeros_like(w)
        if p == 2.0:
            c = v / nv
        else:
            c = np.sign(v) * (np.abs(v) / nv) ** (p - 1.0)
        hn = M.hess_coef(model, Xn @ w, yn)
        hm = M.hess_coef(model, Xm @ w, ym)
        return Xn.T @ (hn * (Xn @ c)) / Xn.shape[0] - Xm.T @ (hm * (Xm @ c)) / Xm.shape[0]

    rng = substream(seed, "disc/ascent")
    d = Xn.shape[1]
    candidates = [np.zeros(d), np.asarray(w_star, dtype=float)]
    for _ in range(restarts):
        w = uniform_ball_point(rng, d, q, B)
        candidates.append(w)
        nq = norm(w, q)
        if nq > 0:
            candidates.append(w * (B / nq))

    best_w, best_v = None, -1.0
    for w0 in candidates:
        w, v = np.asarray(w0, float), value(w0)
        if smooth:
            step = 0.1 * B
            for _ in range(steps):
                w_next = project(w + step * grad_of_value(w), int(q), B)
                v_next = value(w_next)
                if v_next <= v + 1e-14:
                    step *= 0.5
                    if step < 1e-6 * B:
                        break
                else:
                    w, v = w_next, v_next
        if v > best_v:
            best_w, best_v = w, v

    grads = M.per_sample_grads(model, best_w, Xm, ym)
    v = diff_vec(best_w)
    nv = norm(v, p)
    direction = (v / nv) if nv > 0 else np.zeros_like(v)
    var_dir = float(np.var(grads @ direction, ddof=1)) if Xm.shape[0] > 1 else 0.0
    return {
        "value": best_v,
        "stderr": math.sqrt(var_dir / Xm.shape[0]),
        "w_argmax": best_w,
    }
