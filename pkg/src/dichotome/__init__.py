"""Tone dichotomy: the point transform ``k * |x**gamma - x|`` and its tools."""

from .core import (
    Branch,
    DichotomyLut,
    DichotomyParams,
    GoldenSearchConfig,
    build_lut,
    compute_d_max,
    compute_params,
    dichotomy_derivative,
    dichotomy_eval,
    dichotomy_normalized,
    gamma_correct,
    invert_golden,
    invert_lut,
    numeric_slope,
    region_integrals,
)
from .errors import (
    AlreadyGray,
    BranchMismatch,
    ConfigError,
    DegenerateGamma,
    DichotomeError,
    DomainError,
    GeometryMismatch,
    ImageTooSmall,
    NoConvergence,
    RecordMismatch,
    SingularPoint,
)
from .image import (
    PlanarImage,
    SlopeClassMap,
    TransformRecord,
    classify_slopes,
    dequantize,
    enhance,
    invert,
    quantize,
    render_class_map,
    to_grayscale,
)

__version__ = "0.1.0"

__all__ = [
    "AlreadyGray",
    "Branch",
    "BranchMismatch",
    "ConfigError",
    "DegenerateGamma",
    "DichotomeError",
    "DichotomyLut",
    "DichotomyParams",
    "DomainError",
    "GeometryMismatch",
    "GoldenSearchConfig",
    "ImageTooSmall",
    "NoConvergence",
    "PlanarImage",
    "RecordMismatch",
    "SingularPoint",
    "SlopeClassMap",
    "TransformRecord",
    "build_lut",
    "classify_slopes",
    "compute_d_max",
    "compute_params",
    "dequantize",
    "dichotomy_derivative",
    "dichotomy_eval",
    "dichotomy_normalized",
    "enhance",
    "gamma_correct",
    "invert",
    "invert_golden",
    "invert_lut",
    "numeric_slope",
    "quantize",
    "region_integrals",
    "render_class_map",
    "to_grayscale",
]
