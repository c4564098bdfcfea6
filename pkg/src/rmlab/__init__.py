"""Monte Carlo laboratory for the largest eigenvalue of noncentral sample covariance matrices."""

from .errors import (
    BadRange,
    DegenerateDenominator,
    EmptyInput,
    InvalidParams,
    NoConvergence,
    NonPositiveInput,
    RmlabError,
    SizeExceeded,
)
from .matgen import MatrixParams, SeedStream, center, derive_stream, sample_matrix

__version__ = "0.1.0"

__all__ = [
    "BadRange",
    "DegenerateDenominator",
    "EmptyInput",
    "InvalidParams",
    "MatrixParams",
    "NoConvergence",
    "NonPositiveInput",
    "RmlabError",
    "SeedStream",
    "SizeExceeded",
    "center",
    "derive_stream",
    "sample_matrix",
]
