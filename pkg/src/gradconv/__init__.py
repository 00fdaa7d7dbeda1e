"""Gradient uniform convergence lab.

Library + CLI for empirically validating gradient uniform convergence in
non-convex learning: loss models with exact derivatives, stationary-point
optimizers, Monte-Carlo Rademacher complexity estimators with brute-force
oracles, gradient-domination certificates, the single-unit lower-bound
construction, and soft-margin convergence machinery.
"""

from . import gdcheck, geometry, harness, models, optimize, rademacher, relu_lab, synthdata
from .geometry import GeometryConfig
from .models import ModelSpec, glm_model, relu_model, rr_model

__version__ = "0.1.0"

__all__ = [
    "geometry",
    "models",
    "synthdata",
    "optimize",
    "rademacher",
    "gdcheck",
    "relu_lab",
    "harness",
    "GeometryConfig",
    "ModelSpec",
    "glm_model",
    "rr_model",
    "relu_model",
]
