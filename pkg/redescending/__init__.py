"""Annealing redescending M-estimators and their applications."""

from .errors import (
    AllRejectedError,
    DescentError,
    EstimationError,
    ExperimentInterrupted,
    QuadratureError,
    RankDeficiencyError,
)
from .irls import AnnealingSchedule, FitResult, IRLSConfig, estimate_location, fit_linear
from .kernels import EstimatorKernel, KernelKind, KernelValue

__all__ = [
    "AllRejectedError",
    "AnnealingSchedule",
    "DescentError",
    "EstimationError",
    "EstimatorKernel",
    "ExperimentInterrupted",
    "FitResult",
    "IRLSConfig",
    "KernelKind",
    "KernelValue",
    "QuadratureError",
    "RankDeficiencyError",
    "estimate_location",
    "fit_linear",
]
