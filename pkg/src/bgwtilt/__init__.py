"""Exponential tilting of multitype Bienaymé-Galton-Watson trees.

Turns a (possibly non-critical) offspring family into a critical one with the
same linearly conditioned tree laws, and provides the tree tooling used to
check that: exact enumeration, conditioned sampling and Kesten-like balls.
"""
from .critical import ContinuationOptions, criticalize, find_critical_tilting, trace_curve
from .field import QuadraticNumber
from .harness import certify_equivalence, local_limit_experiment
from .pgf import OffspringModel, check_assumptions, mean_matrix, spectral_radius
from .tilting import ConditionSpec, TiltParams, apply_tilt, is_good_tilting, rationalize_tilt
from .trees import (
    TypedTree,
    ball,
    build_kesten_spec,
    enumerate_conditioned,
    sample_bgw,
    sample_conditioned,
    sample_kesten_ball,
)

__version__ = "0.1.0"

__all__ = [
    "ConditionSpec",
    "ContinuationOptions",
    "OffspringModel",
    "QuadraticNumber",
    "TiltParams",
    "TypedTree",
    "apply_tilt",
    "ball",
    "build_kesten_spec",
    "certify_equivalence",
    "check_assumptions",
    "criticalize",
    "enumerate_conditioned",
    "find_critical_tilting",
    "is_good_tilting",
    "local_limit_experiment",
    "mean_matrix",
    "rationalize_tilt",
    "sample_bgw",
    "sample_conditioned",
    "sample_kesten_ball",
    "spectral_radius",
    "trace_curve",
]
