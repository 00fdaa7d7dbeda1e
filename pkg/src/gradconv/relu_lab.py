"""Non-smooth single-unit machinery: the explicit lower-bound instance
family, its Rademacher quantity, soft-margin classes, and the margin-based
uniform convergence bound.

The lower-bound instance places N identical copies of each row of the
matrix with rows (1 - e_i)/sqrt(d); inverting the row matrix lets any sign
pattern over the rows be realized by a unit-norm weight vector, which is
exactly the adversarial step that makes the signed gradient sum grow like
sqrt(d n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import models as M
from .optimize import uniform_ball_point
from .rngtools import substream
from .synthdata import Dataset

__all__ = [
    "LowerBoundInstance",
    "build_lb_instance",
    "sign_pattern_weight",
    "lb_rc_lower_estimate",
    "khintchine_check",
    "exact_mean_abs_sign_sum",
    "MarginFunction",
    "MarginProfile",
    "margin_profile",
    "soft_margin_member",
    "zeta_gamma",
    "check_phi_convergence",
    "margin_bound_value",
    "margin_discrepancy_estimate",
]


@dataclass
class LowerBoundInstance:
    d: int
    N: int
    X: np.ndarray  # (N*d, d); rows of segment i all equal B_matrix[i]
    y: np.ndarray  # all -1 labels
    B_matrix: np.ndarray
    B_inverse: np.ndarray

    @property
    def n(self) -> int:
        return self.N * self.d


def build_lb_instance(d: int, N: int) -> LowerBoundInstance:
    """Instance with segment blocks x_t = (1 - e_i)/sqrt(d) and labels -1.

    N must be odd so per-segment sign sums never tie; the closed-form
    inverse sqrt(d) ((1/(d-1)) 1 1^T - I) is verified at construction.
    """
    if d < 3:
        raise ValueError("need d >= 3 for a well-conditioned inverse")
    if N < 1 or N % 2 == 0:
        raise ValueError("N must be a positive odd integer")
    ones = np.ones((d, d))
    Bm = (ones - np.eye(d)) / math.sqrt(d)
    Binv = math.sqrt(d) * (ones / (d - 1.0) - np.eye(d))
    if np.max(np.abs(Bm @ Binv - np.eye(d))) > 1e-10:
        raise AssertionError("closed-form inverse check failed")
    X = np.repeat(Bm, N, axis=0)
    return LowerBoundInstance(d=d, N=N, X=X, y=-np.ones(N * d), B_matrix=Bm, B_inverse=Binv)


def sign_pattern_weight(inst: LowerBoundInstance, sigma: np.ndarray) -> np.ndarray:
    """Unit vector w with sgn(<w, B_i>) = sigma_i for every row i."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (inst.d,) or not np.all(np.abs(sigma) == 1.0):
        raise ValueError("sigma must be a +-1 vector of length d")
    wt = inst.B_inverse @ sigma
    nrm = np.linalg.norm(wt)
    assert nrm > 0, "B^{-1} sigma cannot vanish for d >= 3"
    w = wt / nrm
    pattern = inst.B_matrix @ w
    assert np.all(np.sign(pattern) == sigma), "sign pattern not realized"
    return w


def lb_rc_lower_estimate(inst: LowerBoundInstance, draws: int, seed: int = 0) -> dict:
    """Per-draw adversarial lower estimate of the signed-gradient supremum.

    Each draw aggregates the segment sign sums phi_i, picks the weight
    realizing the pattern sgn(phi) (the proof's choice, not a search over
    all 2^d indicator patterns), and evaluates
    || sum_t eps_t grad l(w; x_t, -1) ||_2 = || sum_{phi_i > 0} phi_i B_i ||_2.
    The two-term analytic bound (1/2 - 1/sqrt(d)) sum_i E|phi_i| is
    estimated from the same draws.
    """
    if draws < 1:
        raise ValueError("draws must be >= 1")
    rng = substream(seed, "lb/signs")
    eps = rng.choice([-1.0, 1.0], size=(draws, inst.n))
    phi = eps.reshape(draws, inst.d, inst.N).sum(axis=2)
    assert not np.any(phi == 0), "odd N precludes sign ties"
    pos = phi > 0
    V = (phi * pos) @ inst.B_matrix  # (draws, d)
    values = np.linalg.norm(V, axis=1)
    mean_abs_each = np.abs(phi).mean(axis=0)  # per segment
    analytic_lb = (0.5 - 1.0 / math.sqrt(inst.d)) * float(mean_abs_each.sum())
    return {
        "mc_value": float(values.mean()),
        "stderr": float(values.std(ddof=1) / math.sqrt(draws)) if draws > 1 else 0.0,
        "analytic_lb": analytic_lb,
        "sqrt_dn_ratio": float(values.mean()) / math.sqrt(inst.d * inst.n),
        "sqrt_n_ratio": float(values.mean()) / math.sqrt(inst.n),
        "draws": draws,
    }


def exact_mean_abs_sign_sum(N: int) -> float:
    """E |sum of N signs| in closed form: N 2^(1-N) C(N-1, floor((N-1)/2))."""
    return N * comb(N - 1, (N - 1) // 2) / 2.0 ** (N - 1)


def khintchine_check(N: int, draws: int, seed: int = 0) -> dict:
    """Monte-Carlo E|sum of N signs| against the sqrt(N/2) lower bound."""
    if N % 2 == 0 or N < 1:
        raise ValueError("N must be odd")
    rng = substream(seed, "khintchine")
    # sum of N signs = 2 Binomial(N, 1/2) - N
    sums = 2.0 * rng.binomial(N, 0.5, size=draws) - N
    vals = np.abs(sums)
    mean_abs = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(draws))
    lower = math.sqrt(N / 2.0)
    return {
        "mean_abs": mean_abs,
        "stderr": stderr,
        "lower_bound": lower,
        "holds": mean_abs >= lower - 3.0 * stderr,
    }


# ---------------------------------------------------------------------------
# Soft-margin classes.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarginFunction:
    """Nondecreasing phi: [0, 1] -> [0, 1]."""

    tag: str  # "power" | "table"
    exponent: float = 1.0
    xs: tuple = ()
    ys: tuple = ()

    def __call__(self, gamma):
        gamma = np.clip(np.asarray(gamma, dtype=float), 0.0, None)
        if self.tag == "power":
            return np.minimum(gamma**self.exponent, 1.0)
        return np.interp(gamma, self.xs, self.ys)

    def __post_init__(self):
        grid = np.linspace(0.0, 1.0, 1000)
        vals = self(grid)
        if vals[0] < 0 or vals[-1] > 1 + 1e-12 or np.any(np.diff(vals) < -1e-12):
            raise ValueError("margin function must be nondecreasing from [0,1] to [0,1]")


@dataclass
class MarginProfile:
    """Sorted normalized margins of one weight vector on a sample, and the
    induced empirical margin CDF (right-continuous step function)."""

    sorted_margins: np.ndarray

    def xi(self, gamma) -> np.ndarray:
        gamma = np.asarray(gamma, dtype=float)
        idx = np.searchsorted(self.sorted_margins, gamma, side="right")
        return idx / self.sorted_margins.size


def margin_profile(w: np.ndarray, X: np.ndarray) -> MarginProfile:
    """Normalized margins |<w, x_t>| / (||w|| ||x_t||), zero rows counted 0."""
    w = np.asarray(w, dtype=float)
    nw = np.linalg.norm(w)
    if nw == 0:
        raise ValueError("w must be nonzero")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    xn = np.linalg.norm(X, axis=1)
    m = np.zeros(X.shape[0])
    nz = xn > 0
    m[nz] = np.abs(X[nz] @ w) / (nw * xn[nz])
    m = np.minimum(m, 1.0)
    m.sort()
    return MarginProfile(sorted_margins=m)


def soft_margin_member(profile: MarginProfile, phi: MarginFunction, tol: float = 1e-12) -> bool:
    """xi_hat(w, gamma) <= phi(gamma) for every gamma, checked at the step
    function's breakpoints (enough, since phi is nondecreasing)."""
    m = profile.sorted_margins
    n = m.size
    uniq, counts = np.unique(m, return_counts=True)
    cum = np.cumsum(counts) / n
    return bool(np.all(cum <= phi(uniq) + tol))


def zeta_gamma(t, gamma: float):
    """Lipschitz cap sandwiched between 1{|t| <= gamma} and 1{|t| <= 2 gamma}."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    a = np.abs(np.asarray(t, dtype=float))
    return np.clip(2.0 - a / gamma, 0.0, 1.0)


def _phi_slack(gamma: float, n: int, delta: float) -> float:
    return 4.0 / (gamma * math.sqrt(n)) + math.sqrt(
        2.0 * math.log(math.log2(4.0 / gamma) / delta) / n
    )


def check_phi_convergence(
    w: np.ndarray,
    data: Dataset,
    population_X: np.ndarray,
    gamma_grid,
    delta: float,
) -> dict:
    """Two-sided empirical/population margin-CDF convergence check.

    At every grid gamma:
        xi_pop(gamma)   <= xi_n(2 gamma)   + slack(gamma) + 3 sigma_pop
        xi_n(gamma)     <= xi_pop(2 gamma) + slack(gamma) + 3 sigma_pop
    where slack(gamma) = 4/(gamma sqrt(n)) + sqrt(2 log(log2(4/gamma)/delta)/n)
    and sigma_pop is the binomial noise of the large-sample CDF estimate.
    """
    emp = margin_profile(w, data.X)
    pop = margin_profile(w, np.asarray(population_X, dtype=float))
    n = data.n
    m_pop = np.atleast_2d(population_X).shape[0]
    rows = []
    violations = 0
    for gamma in gamma_grid:
        if not (0.0 < gamma <= 1.0):
            raise ValueError("gamma grid must lie in (0, 1]")
        slack = _phi_slack(gamma, n, delta)
        xi_pop_g = float(pop.xi(gamma))
        xi_pop_2g = float(pop.xi(2.0 * gamma))
        xi_n_g = float(emp.xi(gamma))
        xi_n_2g = float(emp.xi(2.0 * gamma))
        se_g = math.sqrt(max(xi_pop_g * (1 - xi_pop_g), 0.25 / m_pop) / m_pop)
        se_2g = math.sqrt(max(xi_pop_2g * (1 - xi_pop_2g), 0.25 / m_pop) / m_pop)
        ok1 = xi_pop_g <= xi_n_2g + slack + 3.0 * se_g
        ok2 = xi_n_g <= xi_pop_2g + slack + 3.0 * se_2g
        violations += (not ok1) + (not ok2)
        rows.append({"gamma": gamma, "xi_pop": xi_pop_g, "xi_emp": xi_n_g,
                     "slack": slack, "holds_lower": ok1, "holds_upper": ok2})
    return {"rows": rows, "violations": violations}


def margin_bound_value(
    phi: MarginFunction,
    n: int,
    delta: float,
    gamma_grid,
    multiplier: float = 1.0,
) -> tuple[float, float]:
    """min over gamma <= 1/4 of
        sqrt(phi(4 gamma)) + (1/gamma) sqrt(log(1/delta)/n) + 1/(sqrt(gamma) n^(1/4)),
    the hidden polylog factors set to 1 (scaled by `multiplier` if desired).
    Returns (value, minimizing gamma)."""
    gammas = np.asarray([g for g in gamma_grid if 0.0 < g <= 0.25], dtype=float)
    if gammas.size == 0:
        raise ValueError("gamma grid must cover (0, 1/4]")
    log_term = math.sqrt(math.log(1.0 / delta) / n)
    vals = (np.sqrt(phi(4.0 * gammas))
            + log_term / gammas
            + 1.0 / (np.sqrt(gammas) * n**0.25)) * multiplier
    k = int(np.argmin(vals))
    return float(vals[k]), float(gammas[k])


def margin_discrepancy_estimate(
    phi: MarginFunction,
    data: Dataset,
    population: Dataset,
    candidate_count: int,
    seed: int = 0,
) -> dict:
    """Max gradient discrepancy over sampled members of the soft-margin class.

    Candidates mix uniform sphere points with shrinking perturbations of a
    high-margin separator (the instance's w* when available, else the
    label-weighted mean direction); non-members are rejected.  The result
    is a lower estimate of the supremum.
    """
    model = M.relu_model(data.d)
    rng = substream(seed, "margin/candidates")

    anchors = []
    if data.w_star is not None and np.linalg.norm(data.w_star) > 0:
        anchors.append(data.w_star / np.linalg.norm(data.w_star))
    v = (data.y[:, None] * data.X).mean(axis=0)
    if np.linalg.norm(v) > 0:
        anchors.append(v / np.linalg.norm(v))

    candidates = []
    for i in range(candidate_count):
        if anchors and i % 2 == 0:
            base = anchors[(i // 2) % len(anchors)]
            scale = 2.0 ** (-(i % 10))
            w = base + scale * rng.standard_normal(data.d)
        else:
            w = uniform_ball_point(rng, data.d, 2.0, 1.0)
        nw = np.linalg.norm(w)
        if nw > 0:
            candidates.append(w / nw)

    members = [w for w in candidates if soft_margin_member(margin_profile(w, data.X), phi)]
    if not members:
        raise ValueError("no soft-margin members found; phi is too strict for this data")

    best = 0.0
    for w in members:
        diff = (M.empirical_gradient(model, w, data.X, data.y)
                - M.empirical_gradient(model, w, population.X, population.y))
        best = max(best, float(np.linalg.norm(diff)))
    return {"sup_estimate": best, "members_found": len(members)}
