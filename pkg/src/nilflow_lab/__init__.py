"""Numerical laboratory for higher-rank abelian actions on Heisenberg nilmanifolds."""

__version__ = "0.1.0"

from .errors import (
    BudgetExceededError,
    DegenerateFrameError,
    InvalidArgumentError,
    NilflowError,
    NumericSingularityError,
    ToleranceNotMetError,
    TruncationInsufficientError,
)
from .heisenberg import Frame, GroupElement, LieAlgebraVector
from .symplectic import RenormalizationDirection, SiegelPoint, SymplecticMatrix
from .dynamics import Observable, Quadrature, Rectangle, SkewShift
from .spectral import CharacterLabel, DualOrbit
from .experiments import DistributionSummary, ThetaParams, TSequence

__all__ = [
    "BudgetExceededError",
    "CharacterLabel",
    "DegenerateFrameError",
    "DistributionSummary",
    "DualOrbit",
    "Frame",
    "GroupElement",
    "InvalidArgumentError",
    "LieAlgebraVector",
    "NilflowError",
    "NumericSingularityError",
    "Observable",
    "Quadrature",
    "Rectangle",
    "RenormalizationDirection",
    "SiegelPoint",
    "SkewShift",
    "SymplecticMatrix",
    "TSequence",
    "ThetaParams",
    "ToleranceNotMetError",
    "TruncationInsufficientError",
]
