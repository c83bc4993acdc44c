"""Weight, psi and rho functions of the annealing redescending M-estimators.

Every estimator type is generated by a symmetric standardized density f.
The weight of a standardized residual r at cutoff c and temperature T is

    w_f(r; c, T) = f(r / sqrt(T)) / (f(r / sqrt(T)) + f(c / sqrt(T)))

which is evaluated here as a logistic function of the log-density gap so that
nothing overflows at small T or large |r|. The Welsch kernel is the odd one
out: its weight is the numerator alone and the cutoff is ignored.
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, special

from .errors import QuadratureError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]

LOG_TWO = math.log(2.0)
RHO_ABS_TOL = 1e-10


class KernelKind(str, Enum):
    """Generator density of an estimator."""

    NTYPE = "n"
    HSTYPE = "hs"
    TNU = "t"
    WELSCH = "welsch"


@dataclass(frozen=True)
class EstimatorKernel:
    """An estimator type together with its cutoff and temperature.

    ``c`` is in standardized-residual units. ``nu`` is only read for the
    t-type kernel. The Welsch kernel carries ``c`` for interface uniformity
    but never uses it.
    """

    kind: KernelKind = KernelKind.NTYPE
    c: float = 2.5
    temperature: float = 1.0
    nu: float = 3.0

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if not (math.isfinite(self.c) and self.c > 0):
            raise ValueError(f"cutoff must be a positive finite number, got {self.c}")
        if not (math.isfinite(self.temperature) and self.temperature > 0):
            raise ValueError(f"temperature must be a positive finite number, got {self.temperature}")
        if self.kind is KernelKind.TNU and not self.nu > 2:
            raise ValueError(f"t-type kernel needs nu > 2, got {self.nu}")

    def at_temperature(self, temperature: float) -> "EstimatorKernel":
        return replace(self, temperature=temperature)

    @property
    def has_closed_rho(self) -> bool:
        """True when rho has a closed form (no quadrature needed)."""
        return self.kind in (KernelKind.NTYPE, KernelKind.WELSCH)

    @property
    def max_weight(self) -> float:
        """Weight of a zero residual."""
        return float(weight(self, 0.0))

    def evaluate(self, r: float) -> "KernelValue":
        w = float(weight(self, r))
        return KernelValue(w=w, psi=float(r) * w, rho=float(rho(self, r)))


@dataclass(frozen=True)
class KernelValue:
    w: float
    psi: float
    rho: float


def _residuals(r: ArrayLike) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("residuals must be finite")
    return arr, arr.ndim == 0


def _output(values: np.ndarray, scalar: bool):
    return float(values) if scalar else values


def _logcosh(y: np.ndarray) -> np.ndarray:
    a = np.abs(y)
    return a + np.log1p(np.exp(-2.0 * a)) - LOG_TWO


def _log_density_gap(kernel: EstimatorKernel, r: np.ndarray) -> np.ndarray:
    """log f(c/sqrt(T)) - log f(r/sqrt(T)); the weight is expit of its negative."""
    c, T = kernel.c, kernel.temperature
    if kernel.kind is KernelKind.NTYPE:
        return (r * r - c * c) / (2.0 * T)
    if kernel.kind is KernelKind.HSTYPE:
        scale = math.pi / (2.0 * math.sqrt(T))
        return _logcosh(scale * r) - _logcosh(scale * c)
    if kernel.kind is KernelKind.TNU:
        dof = kernel.nu - 2.0
        return 0.5 * (kernel.nu + 1.0) * (np.log1p(r * r / (T * dof)) - math.log1p(c * c / (T * dof)))
    raise ValueError(f"kernel kind {kernel.kind.value} has no density-ratio weight")


def _weight_array(kernel: EstimatorKernel, r: np.ndarray) -> np.ndarray:
    if kernel.kind is KernelKind.WELSCH:
        return np.exp(-(r * r) / (2.0 * kernel.temperature))
    return special.expit(-_log_density_gap(kernel, r))


def weight(kernel: EstimatorKernel, r: ArrayLike):
    """Weight w(r; c, T) of a standardized residual (scalar or array)."""
    arr, scalar = _residuals(r)
    return _output(_weight_array(kernel, arr), scalar)


def psi(kernel: EstimatorKernel, r: ArrayLike):
    """Score function psi(r) = r * w(r)."""
    arr, scalar = _residuals(r)
    return _output(arr * _weight_array(kernel, arr), scalar)


def integrate_adaptive(
    func: Callable[[float], float],
    a: float,
    b: float,
    points: Optional[Sequence[float]] = None,
    epsabs: float = 1e-10,
    epsrel: float = 1e-10,
    limit: int = 200,
) -> float:
    """Adaptive Gauss-Kronrod quadrature that raises instead of warning."""
    inner = [p for p in (points or ()) if a < p < b]
    result = integrate.quad(
        func, a, b, points=inner or None, epsabs=epsabs, epsrel=epsrel, limit=limit, full_output=1
    )
    value, abserr = result[0], result[1]
    if len(result) > 3:
        tolerance = max(epsabs, epsrel * abs(value))
        if abserr > 100.0 * tolerance:
            raise QuadratureError(
                f"quadrature on [{a:.6g}, {b:.6g}] did not converge: "
                f"estimate {value:.12g}, error {abserr:.3e} ({result[3]})"
            )
        logger.debug(f"quadrature on [{a:.6g}, {b:.6g}] accepted with error {abserr:.3e}")
    return value


def _ntype_rho(kernel: EstimatorKernel, r: np.ndarray) -> np.ndarray:
    c, T = kernel.c, kernel.temperature
    r2 = r * r
    u = (r2 - c * c) / (2.0 * T)
    base = T * np.logaddexp(0.0, -c * c / (2.0 * T))
    inside = 0.5 * r2 - T * np.logaddexp(0.0, u)
    outside = 0.5 * c * c - T * np.logaddexp(0.0, -u)
    return np.where(np.abs(r) < c, inside, outside) + base


def _integrated_rho(kernel: EstimatorKernel, r_abs: float) -> float:
    if r_abs == 0.0:
        return 0.0
    integrand = lambda s: s * float(_weight_array(kernel, np.asarray(s)))
    return integrate_adaptive(integrand, 0.0, r_abs, points=[kernel.c], epsabs=RHO_ABS_TOL)


def rho(kernel: EstimatorKernel, r: ArrayLike):
    """Loss rho(r), anchored so that rho(0) = 0.

    The N-type kernel uses the two-branch stable closed form, the Welsch
    kernel its exact integral, and the HS/t kernels integrate psi
    numerically from 0 to |r|.
    """
    arr, scalar = _residuals(r)
    if kernel.kind is KernelKind.NTYPE:
        values = _ntype_rho(kernel, arr)
    elif kernel.kind is KernelKind.WELSCH:
        values = -kernel.temperature * np.expm1(-(arr * arr) / (2.0 * kernel.temperature))
    else:
        flat = np.abs(arr).ravel()
        values = np.array([_integrated_rho(kernel, float(x)) for x in flat]).reshape(arr.shape)
    return _output(values, scalar)


def limit_weight(kind: KernelKind, c: float, r: ArrayLike, nu: Optional[float] = None):
    """Zero-temperature limit of the weight function.

    Rapidly varying generators (N, HS) converge to the step H(c - r) with
    H(0) = 1/2; the t-type kernel converges to c^(nu+1) / (c^(nu+1) + r^(nu+1)).
    The Welsch weight collapses onto r = 0.
    """
    kind = KernelKind(kind)
    if not c > 0:
        raise ValueError(f"cutoff must be positive, got {c}")
    arr, scalar = _residuals(r)
    if np.any(arr < 0):
        raise ValueError("limit weight is defined for r >= 0")
    if kind is KernelKind.TNU:
        if nu is None or not nu > 2:
            raise ValueError(f"t-type limit needs nu > 2, got {nu}")
        values = 1.0 / (1.0 + (arr / c) ** (nu + 1.0))
    elif kind is KernelKind.WELSCH:
        values = np.where(arr == 0.0, 1.0, 0.0)
    else:
        values = np.where(arr < c, 1.0, np.where(arr == c, 0.5, 0.0))
    return _output(values, scalar)


def generator_density(kind: KernelKind, r: ArrayLike, nu: Optional[float] = None):
    """Standardized generator density f(r) of an estimator type."""
    kind = KernelKind(kind)
    arr, scalar = _residuals(r)
    if kind is KernelKind.HSTYPE:
        values = 0.5 * np.exp(-_logcosh(0.5 * math.pi * arr))
    elif kind is KernelKind.TNU:
        if nu is None or not nu > 2:
            raise ValueError(f"standardized t density needs nu > 2, got {nu}")
        log_norm = (
            special.gammaln(0.5 * (nu + 1.0))
            - special.gammaln(0.5 * nu)
            - 0.5 * math.log(math.pi * (nu - 2.0))
        )
        values = np.exp(log_norm - 0.5 * (nu + 1.0) * np.log1p(arr * arr / (nu - 2.0)))
    else:
        # N-type and Welsch are both built on the standard normal
        values = np.exp(-0.5 * arr * arr) / math.sqrt(2.0 * math.pi)
    return _output(values, scalar)
