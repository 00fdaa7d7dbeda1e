"""Well-specified synthetic data, population oracles, and covariance summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import models as M
from .geometry import norm, row_norms
from .rngtools import as_generator, substream

__all__ = [
    "UniformNoise",
    "Dataset",
    "CovarianceSummary",
    "sample_covariates",
    "generate",
    "population_oracle",
    "paired_excess_oracle",
    "covariance_summary",
    "sample_cone_direction",
    "save_csv",
    "load_csv",
]

DESIGNS = ("sphere_uniform", "gaussian_clipped", "rademacher_cube")


@dataclass(frozen=True)
class UniformNoise:
    """Symmetric zero-mean noise, uniform on [-half_range, half_range]."""

    half_range: float = 0.3

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(-self.half_range, self.half_range, size=n)


@dataclass
class Dataset:
    X: np.ndarray  # (n, d), every row inside the primal R-ball
    y: np.ndarray  # (n,)
    w_star: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def sample_covariates(dist: str, n: int, d: int, R: float, seed_or_rng) -> np.ndarray:
    """n covariate rows from one of the supported designs.

    sphere_uniform: uniform on the radius-R l2 sphere (E x x^T = (R^2/d) I);
    gaussian_clipped: N(0, R^2/d I) radially clipped to the l2 R-ball;
    rademacher_cube: i.i.d. +-R entries (||x||_inf = R exactly).
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    if R <= 0:
        raise ValueError("R must be positive")
    rng = as_generator(seed_or_rng)
    if dist == "sphere_uniform":
        Z = rng.standard_normal((n, d))
        return R * Z / np.linalg.norm(Z, axis=1, keepdims=True)
    if dist == "gaussian_clipped":
        X = rng.standard_normal((n, d)) * (R / math.sqrt(d))
        nrm = np.linalg.norm(X, axis=1)
        over = nrm > R
        X[over] *= (R / nrm[over])[:, None]
        return X
    if dist == "rademacher_cube":
        return R * rng.choice([-1.0, 1.0], size=(n, d))
    raise ValueError(f"unknown design tag {dist!r}")


def generate(
    model: M.ModelSpec,
    w_star: np.ndarray,
    n: int,
    seed_or_rng,
    noise: UniformNoise | None = None,
    dist: str = "sphere_uniform",
) -> Dataset:
    """Draw a well-specified dataset of size n for the given model.

    GLM: y ~ Bernoulli(sigma(<w*, x>)).  Robust regression: y = <w*, x> + zeta
    with symmetric bounded noise.  ReLU: y = sign(<w*, x>), tie -> +1.
    """
    g = model.geometry
    w_star = np.asarray(w_star, dtype=float)
    if norm(w_star, g.dual_exponent) > g.radius_B * (1 + 1e-12):
        raise ValueError("w_star violates the dual-norm bound B")
    rng = as_generator(seed_or_rng)
    X = sample_covariates(dist, n, w_star.shape[0], g.radius_R, rng)
    u = X @ w_star
    meta = {"family": model.family, "distribution": dist, "n": n, "d": w_star.shape[0]}
    if isinstance(seed_or_rng, (int, np.integer)):
        meta["seed"] = int(seed_or_rng)

    if model.family == "glm":
        y = (rng.random(n) < model.link.value(u)).astype(float)
    elif model.family == "robust_regression":
        if noise is None:
            noise = UniformNoise()
        if model.y_bound < g.radius_B * g.radius_R + noise.half_range - 1e-12:
            raise ValueError("y_bound must cover B*R plus the noise half-range")
        y = u + noise.sample(rng, n)
        meta["noise_half_range"] = noise.half_range
    elif model.family == "relu":
        y = np.where(u >= 0.0, 1.0, -1.0)
    else:
        raise ValueError(f"unknown family {model.family!r}")
    return Dataset(X=X, y=y, w_star=w_star.copy(), meta=meta)


def population_oracle(
    model: M.ModelSpec,
    w_star: np.ndarray,
    w: np.ndarray,
    m: int,
    seed_or_rng,
    noise: UniformNoise | None = None,
    dist: str = "sphere_uniform",
    sample: Dataset | None = None,
) -> dict:
    """Plug-in estimates of L_D(w) and grad L_D(w) from m fresh samples.

    A pre-generated `sample` can be supplied to share one large oracle draw
    across many query points.
    """
    if sample is None:
        if m < 1000:
            raise ValueError("oracle sample count must be >= 1e3")
        sample = generate(model, w_star, m, seed_or_rng, noise=noise, dist=dist)
    X, y = sample.X, sample.y
    m = X.shape[0]
    losses = M.loss_values(model, w, X, y)
    grads = M.per_sample_grads(model, w, X, y)
    gmean = grads.mean(axis=0)
    gvar = grads.var(axis=0, ddof=1).sum()
    return {
        "loss": float(losses.mean()),
        "loss_stderr": float(losses.std(ddof=1) / math.sqrt(m)),
        "grad": gmean,
        "grad_stderr": float(math.sqrt(gvar / m)),
        "m": m,
    }


def paired_excess_oracle(
    model: M.ModelSpec,
    w_star: np.ndarray,
    w: np.ndarray,
    m: int = 0,
    seed_or_rng=None,
    noise: UniformNoise | None = None,
    dist: str = "sphere_uniform",
    sample: Dataset | None = None,
) -> dict:
    """Estimate L_D(w) - L_D(w*) with both losses on one shared sample.

    The common-random-numbers pairing cancels the label noise, so the
    standard error tracks the size of the gap itself rather than the raw
    loss variance.
    """
    if sample is None:
        sample = generate(model, w_star, m, seed_or_rng, noise=noise, dist=dist)
    X, y = sample.X, sample.y
    diff = M.loss_values(model, w, X, y) - M.loss_values(model, w_star, X, y)
    return {
        "excess": float(diff.mean()),
        "excess_stderr": float(diff.std(ddof=1) / math.sqrt(X.shape[0])),
        "m": X.shape[0],
    }


# ---------------------------------------------------------------------------
# Covariance spectrum quantities.
# ---------------------------------------------------------------------------


@dataclass
class CovarianceSummary:
    Sigma_hat: np.ndarray
    lambda_min: float
    psi_min_estimate: float
    psi_min_spread: float
    support_S: np.ndarray  # indices of nonzero w* entries


def sample_cone_direction(rng: np.random.Generator, d: int, support: np.ndarray) -> np.ndarray:
    """Random direction inside the cone {||nu_{S^c}||_1 <= ||nu_S||_1}.

    The on-support block is standard normal; the off-support block carries
    l1 mass u * ||nu_S||_1 with u ~ U[0, 1], spread over random signs and
    random proportions.
    """
    nu = np.zeros(d)
    nu[support] = rng.standard_normal(support.size)
    on_mass = np.abs(nu[support]).sum()
    off = np.setdiff1d(np.arange(d), support)
    if off.size > 0 and on_mass > 0:
        weights = rng.random(off.size)
        weights /= weights.sum()
        signs = rng.choice([-1.0, 1.0], size=off.size)
        nu[off] = signs * weights * rng.random() * on_mass
    return nu


def covariance_summary(
    X: np.ndarray,
    w_star: np.ndarray,
    cone_samples: int = 10_000,
    seed_or_rng=None,
    eig_threshold: float = 1e-10,
) -> CovarianceSummary:
    """Empirical covariance, its smallest nonzero eigenvalue, and a sampled
    restricted-eigenvalue estimate over the support cone of w*.

    psi_min is an infimum over an uncountable cone; the sampled minimum is
    reported as an estimate (never as ground truth), with the spread of the
    ten smallest Rayleigh quotients as a resolution indicator.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if d > 1000:
        raise ValueError("dense eigensolve limited to d <= 1e3")
    Sigma = (X.T @ X) / n
    eigvals = np.linalg.eigvalsh(Sigma)
    nonzero = eigvals[eigvals > eig_threshold]
    if nonzero.size == 0:
        raise ValueError("covariance has no eigenvalue above threshold")
    lam_min = float(nonzero.min())

    support = np.nonzero(np.asarray(w_star, dtype=float) != 0.0)[0]
    if support.size == 0:
        raise ValueError("w_star has empty support; the cone is degenerate")
    rng = as_generator(seed_or_rng)
    quots = np.empty(cone_samples)
    for i in range(cone_samples):
        nu = sample_cone_direction(rng, d, support)
        quots[i] = (nu @ Sigma @ nu) / (nu @ nu)
    quots.sort()
    psi = float(quots[0])
    spread = float(quots[: min(10, cone_samples)].std())
    return CovarianceSummary(
        Sigma_hat=Sigma,
        lambda_min=lam_min,
        psi_min_estimate=max(psi, 0.0),
        psi_min_spread=spread,
        support_S=support,
    )


# ---------------------------------------------------------------------------
# CSV serialization: one metadata comment line, then y,x_1,...,x_d rows.
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def save_csv(dataset: Dataset, path) -> None:
    meta = dataset.meta
    header = "# family={family},d={d},n={n},seed={seed},distribution={dist}".format(
        family=meta.get("family", "?"),
        d=dataset.d,
        n=dataset.n,
        seed=meta.get("seed", ""),
        dist=meta.get("distribution", "?"),
    )
    lines = [header]
    lines.append("# w_star=" + ",".join(_fmt(v) for v in dataset.w_star))
    for i in range(dataset.n):
        lines.append(",".join([_fmt(dataset.y[i])] + [_fmt(v) for v in dataset.X[i]]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_csv(path) -> Dataset:
    meta: dict = {}
    w_star = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("# w_star="):
                w_star = np.array([float(v) for v in line[len("# w_star=") :].split(",")])
            elif line.startswith("#"):
                for item in line[1:].strip().split(","):
                    if "=" in item:
                        k, v = item.split("=", 1)
                        meta[k.strip()] = v.strip()
            else:
                rows.append([float(v) for v in line.split(",")])
    arr = np.array(rows)
    if w_star is None:
        w_star = np.zeros(arr.shape[1] - 1)
    renamed = {"family": meta.get("family"), "distribution": meta.get("distribution")}
    if meta.get("seed"):
        renamed["seed"] = int(meta["seed"])
    return Dataset(X=arr[:, 1:], y=arr[:, 0], w_star=w_star, meta=renamed)
