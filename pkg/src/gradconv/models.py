"""Loss families with exact derivative evaluators and regularity constants.

Three families are supported:

* ``glm``  -- squared-error generalized linear model,
  ``l(w; x, y) = (sigma(<w, x>) - y)^2`` with a logistic or probit link;
* ``robust_regression`` -- ``l(w; x, y) = rho(<w, x> - y)`` with Tukey's
  biweight rho;
* ``relu`` -- ``l(w; x, y) = max(-y <w, x>, 0)`` with the fixed subgradient
  representative ``-y 1{y <w, x> <= 0} x`` (boundary tie resolved to the
  active branch).

All evaluators are exact and vectorized over samples; the composed scalar
derivatives g1/g2/g3 (first, second, third derivative of the scalar loss as
a function of the margin u = <w, x>) feed the complexity estimators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, ndtr

from .geometry import GeometryConfig, row_norms
from .rngtools import as_generator

__all__ = [
    "LinkFunction",
    "RobustRho",
    "ModelSpec",
    "RegularityConstants",
    "glm_model",
    "rr_model",
    "relu_model",
    "loss",
    "grad",
    "hessian",
    "loss_values",
    "grad_coef",
    "hess_coef",
    "third_coef",
    "empirical_risk",
    "empirical_gradient",
    "regularity_constants",
    "DegenerateModelError",
    "TUKEY_DEFAULT_C",
]

_SQRT2PI = math.sqrt(2.0 * math.pi)
TUKEY_DEFAULT_C = 4.685  # classical 95%-efficiency tuning constant


class DegenerateModelError(ValueError):
    """Raised when the extracted lower regularity constant is non-positive."""


@dataclass(frozen=True)
class LinkFunction:
    """A link sigma: R -> [0, 1] with its first three derivatives."""

    kind: str  # "logistic" | "probit"

    def value(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "logistic":
            return expit(s)
        return ndtr(s)

    def d1(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "logistic":
            v = expit(s)
            return v * (1.0 - v)
        return np.exp(-0.5 * s * s) / _SQRT2PI

    def d2(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "logistic":
            v = expit(s)
            return v * (1.0 - v) * (1.0 - 2.0 * v)
        return -s * np.exp(-0.5 * s * s) / _SQRT2PI

    def d3(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "logistic":
            v = expit(s)
            return v * (1.0 - v) * (1.0 - 6.0 * v + 6.0 * v * v)
        return (s * s - 1.0) * np.exp(-0.5 * s * s) / _SQRT2PI

    def __post_init__(self):
        if self.kind not in ("logistic", "probit"):
            raise ValueError(f"unknown link kind {self.kind!r}")


@dataclass(frozen=True)
class RobustRho:
    """Tukey biweight rho with tuning constant c.

    rho(t) = (c^2/6) (1 - (1 - (t/c)^2)^3) for |t| <= c, constant c^2/6
    beyond; rho' is odd and vanishes for |t| >= c.
    """

    kind: str = "tukey_biweight"
    c_param: float = TUKEY_DEFAULT_C

    def __post_init__(self):
        if self.kind != "tukey_biweight":
            raise ValueError(f"unknown rho kind {self.kind!r}")
        if self.c_param <= 0:
            raise ValueError("Tukey c must be positive")

    def value(self, t):
        t = np.asarray(t, dtype=float)
        c = self.c_param
        u2 = np.minimum((t / c) ** 2, 1.0)
        return (c * c / 6.0) * (1.0 - (1.0 - u2) ** 3)

    def d1(self, t):
        t = np.asarray(t, dtype=float)
        c = self.c_param
        u2 = (t / c) ** 2
        inside = u2 <= 1.0
        return np.where(inside, t * (1.0 - np.minimum(u2, 1.0)) ** 2, 0.0)

    def d2(self, t):
        t = np.asarray(t, dtype=float)
        c = self.c_param
        u2 = (t / c) ** 2
        inside = u2 <= 1.0
        v = np.minimum(u2, 1.0)
        return np.where(inside, (1.0 - v) * (1.0 - 5.0 * v), 0.0)

    def d3(self, t):
        t = np.asarray(t, dtype=float)
        c = self.c_param
        u = t / c
        inside = u * u <= 1.0
        return np.where(inside, 4.0 * u * (5.0 * u * u - 3.0) / c, 0.0)


@dataclass(frozen=True)
class RegularityConstants:
    """Derivative bounds over the margin interval S plus derived constants.

    C_upper clamps to >= 1; c_lower is the link-slope floor (GLM) or the
    smoothed-derivative slope h'(0) at the origin (robust regression, a
    Monte-Carlo estimate with standard error).  G bounds ||grad l|| and H
    is the gradient Lipschitz constant of the per-sample loss.
    """

    C_upper: float
    c_lower: float
    interval_S: tuple[float, float]
    grad_range_G: float
    loss_smoothness_H: float
    c_lower_stderr: float = 0.0
    third_deriv_upper: float = 0.0


@dataclass
class ModelSpec:
    family: str  # "glm" | "robust_regression" | "relu"
    geometry: GeometryConfig
    link: LinkFunction | None = None
    rho: RobustRho | None = None
    y_bound: float = 0.0
    constants: RegularityConstants | None = None

    def __post_init__(self):
        g = self.geometry
        if self.family == "glm":
            if self.link is None:
                raise ValueError("glm family needs a link function")
        elif self.family == "robust_regression":
            if self.rho is None:
                raise ValueError("robust_regression family needs a rho")
            if self.y_bound < g.radius_B * g.radius_R:
                raise ValueError("robust regression needs y_bound >= B * R")
        elif self.family == "relu":
            if g.primal_exponent != 2.0 or g.dual_exponent != 2.0:
                raise ValueError("relu family requires the l2/l2 norm pair")
            if g.radius_B != 1.0 or g.radius_R != 1.0:
                raise ValueError("relu family requires B = R = 1")
        else:
            raise ValueError(f"unknown family {self.family!r}")

    @property
    def margin_interval(self) -> tuple[float, float]:
        g = self.geometry
        br = g.radius_B * g.radius_R
        if self.family == "robust_regression":
            return (-(br + self.y_bound), br + self.y_bound)
        return (-br, br)

    def ensure_constants(self, noise_sampler=None, rng=None) -> RegularityConstants:
        if self.constants is None:
            self.constants = regularity_constants(self, noise_sampler=noise_sampler, rng=rng)
        return self.constants


def glm_model(geometry: GeometryConfig, link: str = "logistic") -> ModelSpec:
    return ModelSpec(family="glm", geometry=geometry, link=LinkFunction(link))


def rr_model(
    geometry: GeometryConfig,
    c: float = TUKEY_DEFAULT_C,
    y_bound: float | None = None,
    noise_half_range: float = 0.3,
) -> ModelSpec:
    if y_bound is None:
        y_bound = geometry.radius_B * geometry.radius_R + noise_half_range
    return ModelSpec(
        family="robust_regression",
        geometry=geometry,
        rho=RobustRho(c_param=c),
        y_bound=y_bound,
    )


def relu_model(d: int) -> ModelSpec:
    return ModelSpec(family="relu", geometry=GeometryConfig.make(2.0, d, R=1.0, B=1.0))


# ---------------------------------------------------------------------------
# Evaluators.  u always denotes the margin <w, x> (one value per sample).
# ---------------------------------------------------------------------------


def _margins(w: np.ndarray, X: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != w.shape[0]:
        raise ValueError(f"dimension mismatch: X has d={X.shape[1]}, w has d={w.shape[0]}")
    return X @ w


def loss_values(model: ModelSpec, w: np.ndarray, X: np.ndarray, y) -> np.ndarray:
    u = _margins(w, X)
    y = np.asarray(y, dtype=float)
    if model.family == "glm":
        return (model.link.value(u) - y) ** 2
    if model.family == "robust_regression":
        return model.rho.value(u - y)
    return np.maximum(-u * y, 0.0)


def grad_coef(model: ModelSpec, u: np.ndarray, y) -> np.ndarray:
    """Scalar s.t. grad l(w; x, y) = grad_coef * x."""
    y = np.asarray(y, dtype=float)
    if model.family == "glm":
        sig = model.link
        return 2.0 * (sig.value(u) - y) * sig.d1(u)
    if model.family == "robust_regression":
        return model.rho.d1(u - y)
    # fixed subgradient representative; the tie y u == 0 takes the active branch
    return np.where(y * u <= 0.0, -y, 0.0)


def hess_coef(model: ModelSpec, u: np.ndarray, y) -> np.ndarray:
    """Scalar s.t. hessian l(w; x, y) = hess_coef * x x^T (smooth families)."""
    y = np.asarray(y, dtype=float)
    if model.family == "glm":
        sig = model.link
        v, v1, v2 = sig.value(u), sig.d1(u), sig.d2(u)
        return 2.0 * v1 * v1 + 2.0 * (v - y) * v2
    if model.family == "robust_regression":
        return model.rho.d2(u - y)
    raise ValueError("relu family has no Hessian (non-smooth loss)")


def third_coef(model: ModelSpec, u: np.ndarray, y) -> np.ndarray:
    """Third derivative of the scalar loss in u (smooth families)."""
    y = np.asarray(y, dtype=float)
    if model.family == "glm":
        sig = model.link
        v, v1, v2, v3 = sig.value(u), sig.d1(u), sig.d2(u), sig.d3(u)
        return 6.0 * v1 * v2 + 2.0 * (v - y) * v3
    if model.family == "robust_regression":
        return model.rho.d3(u - y)
    raise ValueError("relu family has no third derivative")


def loss(model: ModelSpec, w: np.ndarray, x: np.ndarray, y: float) -> float:
    return float(loss_values(model, w, np.atleast_2d(x), [y])[0])


def grad(model: ModelSpec, w: np.ndarray, x: np.ndarray, y: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    u = _margins(w, np.atleast_2d(x))
    return float(grad_coef(model, u, [y])[0]) * x


def hessian(model: ModelSpec, w: np.ndarray, x: np.ndarray, y: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    u = _margins(w, np.atleast_2d(x))
    return float(hess_coef(model, u, [y])[0]) * np.outer(x, x)


def per_sample_grads(model: ModelSpec, w: np.ndarray, X: np.ndarray, y) -> np.ndarray:
    """(n, d) array of per-sample gradients."""
    u = _margins(w, X)
    return grad_coef(model, u, y)[:, None] * np.atleast_2d(np.asarray(X, dtype=float))


def empirical_risk(model: ModelSpec, w: np.ndarray, X: np.ndarray, y) -> float:
    if len(np.atleast_1d(y)) == 0:
        return 0.0  # empty-data convention
    return float(np.mean(loss_values(model, w, X, y)))


def empirical_gradient(model: ModelSpec, w: np.ndarray, X: np.ndarray, y) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if len(np.atleast_1d(y)) == 0:
        return np.zeros_like(w)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    u = _margins(w, X)
    c = grad_coef(model, u, y)
    return (X.T @ c) / X.shape[0]


# ---------------------------------------------------------------------------
# Regularity constant extraction.
# ---------------------------------------------------------------------------


def regularity_constants(
    model: ModelSpec,
    noise_sampler=None,
    rng=None,
    grid_points: int = 10_000,
    mc_samples: int = 1_000_000,
    fd_step: float = 0.01,
) -> RegularityConstants:
    """Extract (C, c, S, G, H) for a smooth family.

    Upper constants are grid suprema over S (an under-approximation of the
    true sup by at most the derivative's Lipschitz modulus times the grid
    step).  The robust-regression lower constant is h'(0) for
    h(s) = E rho'(s + zeta), by a central difference over a Monte-Carlo
    average with common noise draws; its standard error is reported.
    """
    g = model.geometry
    lo, hi = model.margin_interval
    s_grid = np.linspace(lo, hi, grid_points) if hi > lo else np.array([0.0])

    if model.family == "glm":
        sig = model.link
        d1, d2, d3 = sig.d1(s_grid), sig.d2(s_grid), sig.d3(s_grid)
        C = max(1.0, float(np.max(np.abs(d1))), float(np.max(np.abs(d2))))
        c = float(np.min(d1))
        if c <= 0:
            raise DegenerateModelError("link slope is not bounded away from zero on S")
        return RegularityConstants(
            C_upper=C,
            c_lower=c,
            interval_S=(lo, hi),
            grad_range_G=2.0 * C * g.radius_R,
            loss_smoothness_H=6.0 * C * C * g.radius_R**2,
            third_deriv_upper=float(np.max(np.abs(d3))),
        )

    if model.family == "robust_regression":
        rho = model.rho
        d1, d2, d3 = rho.d1(s_grid), rho.d2(s_grid), rho.d3(s_grid)
        C = max(1.0, float(np.max(np.abs(d1))), float(np.max(np.abs(d2))))
        if noise_sampler is None:
            c = float(rho.d2(np.array([0.0]))[0])  # noiseless h = rho'
            stderr = 0.0
        else:
            gen = as_generator(rng)
            zeta = np.asarray(noise_sampler.sample(gen, mc_samples), dtype=float)
            diffs = (rho.d1(fd_step + zeta) - rho.d1(-fd_step + zeta)) / (2.0 * fd_step)
            c = float(np.mean(diffs))
            stderr = float(np.std(diffs, ddof=1) / math.sqrt(mc_samples))
        if c <= 0:
            raise DegenerateModelError("h'(0) estimate is not positive")
        return RegularityConstants(
            C_upper=C,
            c_lower=c,
            interval_S=(lo, hi),
            grad_range_G=C * g.radius_R,
            loss_smoothness_H=C * g.radius_R**2,
            c_lower_stderr=stderr,
            third_deriv_upper=float(np.max(np.abs(d3))),
        )

    raise ValueError("regularity constants are defined for smooth families only")
