"""Finite-level computations around Pink-type large-image statements for SL2(Z_l)^n."""

from .errors import (
    CapExceeded,
    ConstructionFailed,
    DomainError,
    HypothesisUnmet,
    LemmaViolation,
    NonConvergence,
    NotNormalSylow,
    PinkForgeError,
    PrecisionMismatch,
    PreconditionError,
    UnclassifiableError,
)
from .group_engine import FiniteGroup, closure, contains_ball, derived_subgroup
from .modlattice import ModLattice
from .padic_matrix import Ball, D, GroupElement, L, Mat2, R
from .padic_scalar import PadicScalar

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "CapExceeded",
    "ConstructionFailed",
    "D",
    "DomainError",
    "FiniteGroup",
    "GroupElement",
    "HypothesisUnmet",
    "L",
    "LemmaViolation",
    "Mat2",
    "ModLattice",
    "NonConvergence",
    "NotNormalSylow",
    "PadicScalar",
    "PinkForgeError",
    "PrecisionMismatch",
    "PreconditionError",
    "R",
    "UnclassifiableError",
    "__version__",
    "closure",
    "contains_ball",
    "derived_subgroup",
]
