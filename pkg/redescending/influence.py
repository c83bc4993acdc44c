"""Influence-function analytics of the N-type estimator at the standard normal model."""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional

import numpy as np
from scipy import optimize
from scipy.stats import norm

from .errors import EstimationError, ExperimentInterrupted
from .kernels import EstimatorKernel, KernelKind, integrate_adaptive, psi, weight

logger = logging.getLogger(__name__)

BRANCH_POINT = -math.exp(-1.0)
MAX_EXPONENT = 700.0
QUAD_ABS_TOL = 1e-10
TAIL_TOL = 1e-12
DEFAULT_THRESHOLD = 1e-3


@dataclass(frozen=True)
class InfluenceProfile:
    """One row of the temperature profile of the N-type estimator."""

    c: float
    T: float
    K: float
    r_max: float
    gamma_star: float
    rho_eff: float
    V: float


def lambert_w0(x: float) -> float:
    """Principal branch of the Lambert W function for real x >= -1/e.

    Halley iteration started from the branch-point series near -1/e and
    from log(x) - log(log(x)) elsewhere.
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"Lambert W argument must be finite, got {x}")
    if x < BRANCH_POINT:
        raise ValueError(f"Lambert W0 is real only for x >= -1/e, got {x}")
    if x == 0.0:
        return 0.0
    if x == BRANCH_POINT:
        return -1.0

    if abs(x - BRANCH_POINT) <= 1.5:
        w = math.sqrt(max(2.0 * math.e * x + 2.0, 0.0)) - 1.0
    else:
        log_x = math.log(x)
        w = log_x - math.log(log_x)

    for _ in range(100):
        ew = math.exp(w)
        residual = w * ew - x
        w1 = w + 1.0
        if w1 == 0.0:
            return -1.0
        step = residual / (ew * w1 - (w + 2.0) * residual / (2.0 * w1))
        w -= step
        if abs(step) < 0.7e-16 * (2.0 + abs(w)):
            break
    return w


def lambert_w0_of_exp(a: float) -> float:
    """W0(exp(a)) without forming exp(a); used once the exponent passes 700."""
    if a <= MAX_EXPONENT:
        return lambert_w0(math.exp(a))
    log_a = math.log(a)
    w = a - log_a + log_a / a
    logger.debug(f"Lambert W asymptotic start {w:.17g} for exponent {a:.6g}")
    # Newton on w + log(w) = a
    for _ in range(50):
        step = (w + math.log(w) - a) / (1.0 + 1.0 / w)
        w -= step
        if abs(step) <= 1e-16 * w:
            break
    return w


def _kernel(c: float, temperature: float) -> EstimatorKernel:
    return EstimatorKernel(KernelKind.NTYPE, c=c, temperature=temperature)


def _omega(c: float, temperature: float) -> float:
    exponent = c * c / (2.0 * temperature) - 0.5 - math.log(2.0)
    return lambert_w0_of_exp(exponent)


def _normal_half_line(integrand: Callable[[float], float], kernel: EstimatorKernel) -> float:
    """2 * integral over [0, inf) of integrand(r) * phi(r), split around the cutoff."""
    c, T = kernel.c, kernel.temperature
    transition = 50.0 * T / c
    upper = c + min(40.0 * math.sqrt(T) + 10.0, 40.0)
    integrand_phi = lambda r: integrand(r) * norm.pdf(r)
    total = integrate_adaptive(
        integrand_phi, 0.0, upper, points=[c - transition, c, c + transition], epsabs=QUAD_ABS_TOL
    )
    while True:
        tail = integrate_adaptive(integrand_phi, upper, 2.0 * upper, epsabs=QUAD_ABS_TOL)
        total += tail
        upper *= 2.0
        if abs(tail) < TAIL_TOL:
            break
    return 2.0 * total


def kernel_normalization(kernel: EstimatorKernel) -> float:
    """K = integral of r * psi(r) * phi(r) over the real line, for any kernel."""
    return _normal_half_line(lambda r: r * r * float(weight(kernel, r)), kernel)


def kernel_asymptotic_variance(kernel: EstimatorKernel, normalization: Optional[float] = None) -> float:
    """V = integral of psi^2 * phi over the real line, divided by K^2."""
    K = kernel_normalization(kernel) if normalization is None else normalization
    numerator = _normal_half_line(lambda r: float(psi(kernel, r)) ** 2, kernel)
    return numerator / (K * K)


def normalization_k(c: float, temperature: float) -> float:
    return kernel_normalization(_kernel(c, temperature))


def low_temperature_normalization(c: float) -> float:
    """Zero-temperature limit of K: the skipped-mean value 2*Phi(c) - 1 - 2*c*phi(c)."""
    return 2.0 * norm.cdf(c) - 1.0 - 2.0 * c * norm.pdf(c)


def r_max(c: float, temperature: float) -> float:
    """Point of maximum influence sqrt(T * (2*omega + 1))."""
    _kernel(c, temperature)
    return math.sqrt(temperature * (2.0 * _omega(c, temperature) + 1.0))


def _peak_psi(c: float, temperature: float) -> float:
    omega = _omega(c, temperature)
    return 2.0 * math.sqrt(temperature) * omega / math.sqrt(2.0 * omega + 1.0)


def gross_error_sensitivity(c: float, temperature: float, normalization: Optional[float] = None) -> float:
    K = normalization_k(c, temperature) if normalization is None else normalization
    return _peak_psi(c, temperature) / K


def effective_rejection_point(
    c: float, temperature: float, epsilon: float = DEFAULT_THRESHOLD, normalization: Optional[float] = None
) -> float:
    """Largest residual whose influence still exceeds epsilon."""
    if not (math.isfinite(epsilon) and epsilon > 0):
        raise ValueError(f"threshold must be positive, got {epsilon}")
    kernel = _kernel(c, temperature)
    K = kernel_normalization(kernel) if normalization is None else normalization
    if epsilon >= _peak_psi(c, temperature) / K:
        raise ValueError("threshold above maximum influence")

    excess = lambda r: float(psi(kernel, r)) / K - epsilon
    lo = r_max(c, temperature)
    hi = max(2.0 * lo, lo + 1.0)
    while excess(hi) > 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise EstimationError(f"no rejection point below {hi:.3g} for c={c}, T={temperature}")
    return optimize.brentq(excess, lo, hi, xtol=1e-10, rtol=1e-14)


def asymptotic_variance(c: float, temperature: float, normalization: Optional[float] = None) -> float:
    return kernel_asymptotic_variance(_kernel(c, temperature), normalization)


def welsch_variance(temperature: float) -> float:
    """Closed-form asymptotic variance of the Welsch estimator at the normal model."""
    if not (math.isfinite(temperature) and temperature > 0):
        raise ValueError(f"temperature must be positive, got {temperature}")
    T = temperature
    return (1.0 + T) ** 3 / ((2.0 + T) ** 1.5 * T ** 1.5)


def influence_profile(c: float, temperature: float, epsilon: float = DEFAULT_THRESHOLD) -> InfluenceProfile:
    K = normalization_k(c, temperature)
    return InfluenceProfile(
        c=c,
        T=temperature,
        K=K,
        r_max=r_max(c, temperature),
        gamma_star=gross_error_sensitivity(c, temperature, normalization=K),
        rho_eff=effective_rejection_point(c, temperature, epsilon, normalization=K),
        V=asymptotic_variance(c, temperature, normalization=K),
    )


def temperature_grid(lowest: float = 1e-4, highest: float = 1e4, per_decade: int = 20) -> np.ndarray:
    """Log-spaced temperatures with a fixed number of points per decade, endpoints included."""
    if not (0 < lowest <= highest) or per_decade < 1:
        raise ValueError("temperature grid needs 0 < lowest <= highest and per_decade >= 1")
    decades = math.log10(highest) - math.log10(lowest)
    count = int(round(decades * per_decade)) + 1
    return np.logspace(math.log10(lowest), math.log10(highest), count)


def profile_grid(
    cutoffs: Iterable[float],
    temperatures: Iterable[float],
    epsilon: float = DEFAULT_THRESHOLD,
    should_stop: Optional[Callable[[], bool]] = None,
) -> List[InfluenceProfile]:
    """Influence profile for every (c, T) pair, c-major."""
    temperatures = list(temperatures)
    rows = []
    for c in cutoffs:
        for T in temperatures:
            if should_stop is not None and should_stop():
                raise ExperimentInterrupted(f"profile sweep stopped at c={c}, T={T}")
            rows.append(influence_profile(float(c), float(T), epsilon))
        logger.debug(f"profile for c={c} done ({len(temperatures)} temperatures)")
    return rows
