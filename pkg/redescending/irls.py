"""Annealed iterated reweighted least squares for location and linear regression."""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.signal import find_peaks

from .errors import AllRejectedError, DescentError, RankDeficiencyError
from .kernels import EstimatorKernel, KernelKind, rho, weight

logger = logging.getLogger(__name__)

MIN_TOTAL_WEIGHT = 1e-30
DESCENT_SLACK = 1e-9

Estimate = Union[float, np.ndarray]


@dataclass(frozen=True)
class AnnealingSchedule:
    """Geometric approach T <- t_end + q * (T - t_end), starting at t0.

    Temperatures are produced while T - t_end >= epsilon; one final pass is
    always made at exactly t_end.
    """

    t0: float = 256.0
    t_end: float = 1.0
    q: float = 0.25
    epsilon: float = 1e-3

    def __post_init__(self):
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if not (math.isfinite(self.t0) and self.t0 >= self.t_end):
            raise ValueError(f"t0 must be >= t_end, got t0={self.t0}, t_end={self.t_end}")
        if not 0 < self.q < 1:
            raise ValueError(f"q must lie in (0, 1), got {self.q}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    @classmethod
    def fixed(cls, temperature: float) -> "AnnealingSchedule":
        """Degenerate schedule: a single pass at one temperature (plain IRLS)."""
        return cls(t0=temperature, t_end=temperature)

    @property
    def is_annealed(self) -> bool:
        return self.t0 > self.t_end

    def temperatures(self) -> Iterator[float]:
        T = self.t0
        while T - self.t_end >= self.epsilon:
            yield T
            T = self.t_end + self.q * (T - self.t_end)
        yield self.t_end

    def __iter__(self) -> Iterator[float]:
        return self.temperatures()


@dataclass(frozen=True)
class IRLSConfig:
    kind: KernelKind = KernelKind.NTYPE
    c: float = 2.5
    nu: float = 3.0
    schedule: AnnealingSchedule = field(default_factory=AnnealingSchedule)
    max_inner_iterations: int = 100
    tol: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if self.max_inner_iterations < 1:
            raise ValueError(f"max_inner_iterations must be >= 1, got {self.max_inner_iterations}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        # validates c and nu up front
        self.kernel(self.schedule.t_end)

    def kernel(self, temperature: float) -> EstimatorKernel:
        return EstimatorKernel(self.kind, c=self.c, temperature=temperature, nu=self.nu)


@dataclass(frozen=True)
class TraceStep:
    """Outcome of the inner minimization at one temperature."""

    temperature: float
    start: Estimate
    estimate: Estimate
    objective: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class InnerSolution:
    estimate: Estimate
    weights: np.ndarray
    objective: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class FitResult:
    estimate: Estimate
    weights: np.ndarray
    objective: float
    trace: Tuple[TraceStep, ...]
    converged: bool
    temperature: float

    @property
    def temperatures(self) -> Tuple[float, ...]:
        return tuple(step.temperature for step in self.trace)


def objective(residuals: Sequence[float], kernel: EstimatorKernel, temperature: Optional[float] = None) -> float:
    """M = sum of rho over standardized residuals."""
    if temperature is not None:
        kernel = kernel.at_temperature(temperature)
    values = np.asarray(residuals, dtype=float)
    if values.size == 0:
        return 0.0
    return float(np.sum(rho(kernel, values)))


def objective_profile(data: Sequence[float], scale: float, kernel: EstimatorKernel, grid: Sequence[float]) -> np.ndarray:
    """M(mu) of a location problem evaluated at every mu of the grid."""
    x = np.asarray(data, dtype=float)
    mu = np.asarray(grid, dtype=float)
    residuals = (x[None, :] - mu[:, None]) / scale
    return np.sum(rho(kernel, residuals), axis=1)


def count_local_minima(values: Sequence[float], prominence: float = 1.0) -> int:
    """Interior local minima of a sampled curve whose prominence reaches the floor."""
    peaks, _ = find_peaks(-np.asarray(values, dtype=float), prominence=prominence)
    return int(len(peaks))


def _descent_slack(value: float, n_obs: int, temperature: float) -> float:
    # the stable rho loses about T * eps per term to cancellation at large T
    return DESCENT_SLACK * max(1.0, abs(value)) + 1e-12 * n_obs * temperature


def _check_descent(previous: float, current: float, n_obs: int, temperature: float, iteration: int) -> None:
    if current > previous + _descent_slack(previous, n_obs, temperature):
        raise DescentError(
            f"objective increased from {previous!r} to {current!r} at T={temperature:g}, inner iteration {iteration}"
        )


def anneal(
    inner_solver: Callable[[float, Any], InnerSolution],
    schedule: AnnealingSchedule,
    start: Any,
) -> FitResult:
    """Run inner_solver at each temperature, feeding every solution forward as the next start."""
    trace = []
    current = start
    solution = None
    for T in schedule.temperatures():
        solution = inner_solver(T, current)
        trace.append(
            TraceStep(
                temperature=T,
                start=current,
                estimate=solution.estimate,
                objective=solution.objective,
                iterations=solution.iterations,
                converged=solution.converged,
            )
        )
        logger.debug(f"T={T:.6g}: {solution.iterations} inner iteration(s), M={solution.objective:.10g}")
        if not solution.converged:
            logger.debug(f"T={T:.6g}: inner loop hit the iteration cap")
        current = solution.estimate

    weights = np.array(solution.weights, dtype=float)
    weights.setflags(write=False)
    return FitResult(
        estimate=solution.estimate,
        weights=weights,
        objective=solution.objective,
        trace=tuple(trace),
        converged=solution.converged,
        temperature=schedule.t_end,
    )


def _finite_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def estimate_location(
    data: Sequence[float],
    scale: float,
    config: IRLSConfig,
    start: Optional[float] = None,
) -> FitResult:
    """Annealed M-estimate of location with a fixed scale.

    At each temperature the weighted mean mu <- sum(w x) / sum(w) is iterated
    until |delta mu| < tol * scale. The default start is the sample mean.
    """
    x = _finite_vector(data, "data").ravel()
    if x.size == 0:
        raise ValueError("location estimate needs at least one observation")
    if not (math.isfinite(scale) and scale > 0):
        raise ValueError(f"scale must be positive, got {scale}")
    mu0 = float(np.mean(x)) if start is None else float(start)

    def solve(temperature: float, mu: float) -> InnerSolution:
        kernel = config.kernel(temperature)
        check = kernel.has_closed_rho
        previous = objective((x - mu) / scale, kernel) if check else None
        converged = False
        iterations = 0
        for iterations in range(1, config.max_inner_iterations + 1):
            w = weight(kernel, (x - mu) / scale)
            total = float(np.sum(w))
            if total < MIN_TOTAL_WEIGHT:
                raise AllRejectedError(total)
            updated = float(np.dot(w, x) / total)
            step = updated - mu
            mu = updated
            if check:
                current = objective((x - mu) / scale, kernel)
                _check_descent(previous, current, x.size, temperature, iterations)
                previous = current
            if abs(step) < config.tol * scale:
                converged = True
                break
        residuals = (x - mu) / scale
        return InnerSolution(
            estimate=mu,
            weights=weight(kernel, residuals),
            objective=objective(residuals, kernel),
            iterations=iterations,
            converged=converged,
        )

    return anneal(solve, config.schedule, mu0)


def weighted_least_squares(
    design: np.ndarray,
    response: np.ndarray,
    sigmas: np.ndarray,
    weights: np.ndarray,
) -> np.ndarray:
    """Solve min sum w_i * ((y_i - a_i . beta) / sigma_i)^2 with a rank check."""
    design = np.asarray(design, dtype=float)
    if design.ndim != 2:
        raise ValueError("design must be a 2-D matrix")
    n_columns = design.shape[1]
    row_scale = np.sqrt(np.asarray(weights, dtype=float)) / np.asarray(sigmas, dtype=float)
    solution, _, rank, _ = np.linalg.lstsq(
        design * row_scale[:, None], np.asarray(response, dtype=float) * row_scale, rcond=None
    )
    if rank < n_columns:
        raise RankDeficiencyError(n_columns - rank, n_columns)
    return solution


def fit_linear(
    design: np.ndarray,
    response: Sequence[float],
    sigmas: Sequence[float],
    config: IRLSConfig,
    start: Optional[Sequence[float]] = None,
) -> FitResult:
    """Annealed M-estimate of a linear model y = A beta with known per-row standard errors.

    Residuals are r_i = (y_i - a_i . beta) / sigma_i. Each inner step solves the
    weighted normal equations with row weight w_i / sigma_i^2 and stops once
    the largest change of a standardized fitted value is below tol. The
    default start is the sigma-weighted least-squares solution.
    """
    A = _finite_vector(design, "design")
    if A.ndim != 2:
        raise ValueError("design must be a 2-D matrix")
    n, p = A.shape
    y = _finite_vector(response, "response").ravel()
    sig = _finite_vector(sigmas, "sigmas").ravel()
    if y.size != n or sig.size != n:
        raise ValueError(f"design has {n} rows but response has {y.size} and sigmas {sig.size}")
    if n < p:
        raise ValueError(f"need at least as many observations ({n}) as parameters ({p})")
    if np.any(sig <= 0):
        raise ValueError("sigmas must be positive")

    if start is None:
        beta0 = weighted_least_squares(A, y, sig, np.ones(n))
    else:
        beta0 = _finite_vector(start, "start").ravel()
        if beta0.size != p:
            raise ValueError(f"start has {beta0.size} entries, expected {p}")

    def solve(temperature: float, beta: np.ndarray) -> InnerSolution:
        kernel = config.kernel(temperature)
        check = kernel.has_closed_rho
        previous = objective((y - A @ beta) / sig, kernel) if check else None
        converged = False
        iterations = 0
        for iterations in range(1, config.max_inner_iterations + 1):
            w = weight(kernel, (y - A @ beta) / sig)
            total = float(np.sum(w))
            if total < MIN_TOTAL_WEIGHT:
                raise AllRejectedError(total)
            updated = weighted_least_squares(A, y, sig, w)
            change = float(np.max(np.abs(A @ (updated - beta) / sig)))
            beta = updated
            if check:
                current = objective((y - A @ beta) / sig, kernel)
                _check_descent(previous, current, n, temperature, iterations)
                previous = current
            if change < config.tol:
                converged = True
                break
        residuals = (y - A @ beta) / sig
        return InnerSolution(
            estimate=beta,
            weights=weight(kernel, residuals),
            objective=objective(residuals, kernel),
            iterations=iterations,
            converged=converged,
        )

    return anneal(solve, config.schedule, beta0)
