"""Norm pairs, smoothness constants, and ball projections.

Data vectors live in the ell_p ball of radius R (p >= 2); weight vectors
live in the dual ell_q ball of radius B, 1/p + 1/q = 1.  The infinite
exponent is represented by ``math.inf`` (numpy's own norm-order convention),
never by a numeric sentinel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GeometryConfig",
    "norm",
    "dual_exponent",
    "smoothness_constant",
    "project",
    "dual_norm_witness",
]

_INF = math.inf


def dual_exponent(p: float) -> float:
    """q with 1/p + 1/q = 1, under the convention p = inf <-> q = 1."""
    if p == _INF:
        return 1.0
    if p == 1.0:
        return _INF
    if p <= 1.0:
        raise ValueError(f"exponent must lie in [1, inf], got {p}")
    return p / (p - 1.0)


def norm(v: np.ndarray, p: float) -> float:
    """ell_p norm, (sum |v_i|^p)^(1/p); max |v_i| for p = inf."""
    if p < 1.0:
        raise ValueError(f"norm exponent must be >= 1, got {p}")
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return 0.0
    if p == _INF:
        return float(np.max(np.abs(v)))
    if p == 1.0:
        return float(np.sum(np.abs(v)))
    if p == 2.0:
        return float(np.linalg.norm(v))
    return float(np.sum(np.abs(v) ** p) ** (1.0 / p))


def row_norms(X: np.ndarray, p: float) -> np.ndarray:
    """Per-row ell_p norms of a 2-d array."""
    X = np.asarray(X, dtype=float)
    if p == _INF:
        return np.max(np.abs(X), axis=1)
    if p == 1.0:
        return np.sum(np.abs(X), axis=1)
    if p == 2.0:
        return np.linalg.norm(X, axis=1)
    return np.sum(np.abs(X) ** p, axis=1) ** (1.0 / p)


def smoothness_constant(p: float, d: int) -> float:
    """Smoothness constant beta of half the squared ell_p norm.

    For p in [2, inf) the constant is exactly p - 1.  For p = inf we use the
    ell_q proxy with q = max(2, ln d): the ell_q norm is (q-1)-smooth and
    differs from ell_inf by at most a factor e, so beta = max(2, ln d) - 1.
    This pins the otherwise unspecified O(log d) constant.
    """
    if p < 2.0:
        raise ValueError(f"smooth-norm exponent must be >= 2, got {p}")
    if p == _INF:
        if d < 1:
            raise ValueError("dimension must be positive")
        return max(2.0, math.log(d)) - 1.0
    return p - 1.0


@dataclass
class GeometryConfig:
    """Norm pair (p on data, q on weights), smoothness beta, and radii."""

    primal_exponent: float
    dual_exponent: float
    beta: float
    radius_R: float
    radius_B: float

    def __post_init__(self):
        p, q = self.primal_exponent, self.dual_exponent
        if p < 2.0:
            raise ValueError(f"primal exponent must be >= 2, got {p}")
        expected_q = dual_exponent(p)
        if p == _INF:
            if q != 1.0:
                raise ValueError("p = inf requires q = 1")
        elif abs(q - expected_q) > 1e-12:
            raise ValueError(f"dual exponent {q} does not satisfy 1/p + 1/q = 1")
        if self.beta < 1.0:
            raise ValueError("beta must be >= 1")
        if p != _INF and abs(self.beta - (p - 1.0)) > 1e-12:
            raise ValueError("beta must equal p - 1 for finite p")
        if self.radius_R <= 0 or self.radius_B <= 0:
            raise ValueError("radii must be positive")

    @classmethod
    def make(cls, p: float, d: int, R: float = 1.0, B: float = 1.0) -> "GeometryConfig":
        return cls(
            primal_exponent=p,
            dual_exponent=dual_exponent(p),
            beta=smoothness_constant(p, d),
            radius_R=R,
            radius_B=B,
        )


def _project_l2(v: np.ndarray, radius: float) -> np.ndarray:
    nrm = np.linalg.norm(v)
    if nrm <= radius:
        return v.copy()
    w = v * (radius / nrm)
    # one corrective rescale guards against upward rounding
    nrm2 = np.linalg.norm(w)
    if nrm2 > radius:
        w *= radius / nrm2
    return w


def _project_l1(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto the ell_1 ball, O(d log d) by sorting.

    Ties in |v| are resolved by the stable sort, i.e. by index order.
    """
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    u = np.sort(a, kind="stable")[::-1]
    cssv = np.cumsum(u) - radius
    ks = np.arange(1, len(u) + 1)
    rho = np.nonzero(u > cssv / ks)[0][-1]
    theta = cssv[rho] / (rho + 1.0)
    w = np.sign(v) * np.maximum(a - theta, 0.0)
    s = np.abs(w).sum()
    if s > radius:
        w *= radius / s
    return w


def project(v: np.ndarray, exponent: int, radius: float) -> np.ndarray:
    """Euclidean-metric projection of v onto the ell_exponent ball.

    Idempotent; interior points are returned unchanged (as a copy).
    """
    if radius <= 0:
        raise ValueError("ball radius must be positive")
    v = np.asarray(v, dtype=float)
    if exponent == 2:
        return _project_l2(v, radius)
    if exponent == 1:
        return _project_l1(v, radius)
    raise ValueError(f"unsupported projection exponent {exponent} (expected 1 or 2)")


def dual_norm_witness(v: np.ndarray, p: float) -> np.ndarray:
    """u with ||u||_q <= 1 and <u, v> = ||v||_p, for p in {1, 2, inf}.

    Analytic maximizer of the dual pairing; used to probe norm duality.
    """
    v = np.asarray(v, dtype=float)
    if p == 1.0:
        return np.sign(v)
    if p == 2.0:
        nrm = np.linalg.norm(v)
        return v / nrm if nrm > 0 else np.zeros_like(v)
    if p == _INF:
        u = np.zeros_like(v)
        i = int(np.argmax(np.abs(v)))
        u[i] = np.sign(v[i]) if v[i] != 0 else 1.0
        return u
    raise ValueError("analytic witness implemented for p in {1, 2, inf}")
