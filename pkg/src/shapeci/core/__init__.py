"""Core data types, geometry and error hierarchy for shapeci."""

from .data import RegressionData, SampleData, integrated_ecdf
from .errors import (
    CharacterizationError,
    ConvergenceError,
    CoverageInvalidError,
    DegenerateGeometryError,
    InvalidInputError,
    InvariantViolationError,
    MissingNuisanceError,
    MissingStatisticError,
    OutOfRangeError,
    ReplicationError,
    ShapeCIError,
)
from .piecewise import (
    LinearPiece,
    ModeBracket,
    PiecewiseLinearFunction,
    Shape,
    Side,
    anti_mode,
    evaluate,
    kinks,
    linear_piece_containing,
    mode_bracket,
    one_sided_derivative,
)

__all__ = [
    "CharacterizationError",
    "ConvergenceError",
    "CoverageInvalidError",
    "DegenerateGeometryError",
    "InvalidInputError",
    "InvariantViolationError",
    "LinearPiece",
    "MissingNuisanceError",
    "MissingStatisticError",
    "ModeBracket",
    "OutOfRangeError",
    "PiecewiseLinearFunction",
    "RegressionData",
    "ReplicationError",
    "SampleData",
    "Shape",
    "ShapeCIError",
    "Side",
    "anti_mode",
    "evaluate",
    "integrated_ecdf",
    "kinks",
    "linear_piece_containing",
    "mode_bracket",
    "one_sided_derivative",
]
