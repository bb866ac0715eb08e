"""Convex subproblem engine: problem IR, projections, and barrier solver."""

from .problem import (
    AffineEq,
    AffineIneq,
    Ball,
    ConvexProblem,
    ConvexQuadIneq,
    LogAffine,
    MatQuad,
    PsdCone,
    TraceCap,
    mat_to_rvec,
    rvec_dim,
    rvec_identity,
    rvec_to_mat,
)
from .projections import psd_project, psd_trace_project
from .solver import KktResiduals, Solution, SolverConfig, Status, kkt_residuals, solve

__all__ = [
    "AffineEq",
    "AffineIneq",
    "Ball",
    "ConvexProblem",
    "ConvexQuadIneq",
    "LogAffine",
    "MatQuad",
    "PsdCone",
    "TraceCap",
    "KktResiduals",
    "Solution",
    "SolverConfig",
    "Status",
    "kkt_residuals",
    "mat_to_rvec",
    "psd_project",
    "psd_trace_project",
    "rvec_dim",
    "rvec_identity",
    "rvec_to_mat",
    "solve",
]
