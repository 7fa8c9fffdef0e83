"""Projected quantum kernels with inductive bias, plus the tools to study them."""

__version__ = "0.1.0"

from .exceptions import (
    CapacityError,
    DegenerateTargetError,
    InvalidArgumentError,
    SingularSystemError,
    UndefinedAlignmentError,
)
from .kernels import Entangler, FeatureMapConfig, KernelMatrix, ReducedDensityEmbedding, gram
from .learn import QuantumKernelRidge, kernel_target_alignment, task_model_alignment
from .spectral import MeasureSpec, operator_spectrum, second_moment_operator

__all__ = [
    "__version__",
    "CapacityError",
    "DegenerateTargetError",
    "InvalidArgumentError",
    "SingularSystemError",
    "UndefinedAlignmentError",
    "Entangler",
    "FeatureMapConfig",
    "KernelMatrix",
    "ReducedDensityEmbedding",
    "gram",
    "QuantumKernelRidge",
    "kernel_target_alignment",
    "task_model_alignment",
    "MeasureSpec",
    "operator_spectrum",
    "second_moment_operator",
]
