"""Tail-index estimation: Hill estimator, Pareto quantile plot and forward search."""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import gaussian_kde

from .errors import EstimationError, ExperimentInterrupted
from .irls import AnnealingSchedule, IRLSConfig, fit_linear, weighted_least_squares
from .kernels import EstimatorKernel, KernelKind, weight

logger = logging.getLogger(__name__)

MIN_PLOT_POINTS = 50
DISCARD_FRACTION = 0.005
EXHAUSTIVE_PAIR_LIMIT = 200
RANDOM_PAIRS = 3000


class StopReason(str, Enum):
    WEIGHTS_COLLAPSED = "weights_collapsed"
    EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class HillEstimate:
    k: int
    inv_alpha: float

    @property
    def alpha(self) -> float:
        return math.inf if self.inv_alpha == 0 else 1.0 / self.inv_alpha


@dataclass(frozen=True)
class ParetoPlot:
    """Points (x_j, y_j) ordered by rank j, i.e. by decreasing x.

    ``n`` is the size of the sample the ranks refer to; it defaults to the
    number of points when a plot is built by hand. ``n_discard`` top order
    statistics precede the first point.
    """

    x: np.ndarray
    y: np.ndarray
    sigmas: np.ndarray
    n: Optional[int] = None
    n_discard: int = 0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        sigmas = np.asarray(self.sigmas, dtype=float)
        if not (x.shape == y.shape == sigmas.shape and x.ndim == 1):
            raise ValueError("plot coordinates and sigmas must be 1-D arrays of one length")
        if np.any(sigmas <= 0):
            raise ValueError("plot sigmas must be positive")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "sigmas", sigmas)
        if self.n_discard < 0:
            raise ValueError(f"n_discard must be >= 0, got {self.n_discard}")
        if self.n is None:
            object.__setattr__(self, "n", int(x.size) + self.n_discard)

    def __len__(self) -> int:
        return int(self.x.size)

    def tail_count(self, n_points: int) -> int:
        """Top order statistics of the sample down to the n_points-th plot point."""
        return self.n_discard + n_points


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    criterion: float


@dataclass(frozen=True)
class ForwardSearchConfig:
    """Forward-search settings; block_size None means one percent of the sample.

    With ``iterate_new_weights`` off, a block keeps the weights it gets from
    the line current at its arrival and the refit is a single weighted solve.
    """

    block_size: Optional[int] = None
    c: float = 2.576
    temperature: float = 1.0
    stop_fraction: float = 0.5
    weight_ratio: float = 0.99
    lms_seed: int = 0
    max_inner_iterations: int = 100
    tol: float = 1e-8
    iterate_new_weights: bool = True

    def __post_init__(self):
        if self.block_size is not None and self.block_size < 3:
            raise ValueError(f"block size must be >= 3, got {self.block_size}")
        if not 0 < self.stop_fraction <= 1:
            raise ValueError(f"stop_fraction must lie in (0, 1], got {self.stop_fraction}")
        if not 0 < self.weight_ratio <= 1:
            raise ValueError(f"weight_ratio must lie in (0, 1], got {self.weight_ratio}")

    def block_for(self, n: int) -> int:
        return self.block_size if self.block_size is not None else max(3, int(round(0.01 * n)))

    def kernel(self) -> EstimatorKernel:
        return EstimatorKernel(KernelKind.NTYPE, c=self.c, temperature=self.temperature)


@dataclass(frozen=True)
class ForwardSearchResult:
    slope: float
    intercept: float
    n_included: int
    frozen_weights: Tuple[float, ...]
    stop_reason: StopReason
    block_size: int

    @property
    def inv_alpha(self) -> float:
        return self.slope


@dataclass(frozen=True)
class TailAnalysis:
    plot: ParetoPlot
    search: ForwardSearchResult
    hill: HillEstimate

    @property
    def alpha(self) -> float:
        return 1.0 / self.search.slope


@dataclass(frozen=True)
class TailRow:
    nu: float
    p_opt: float
    rmse_opt: float
    p_used_mean: float
    p_used_sd: float
    rmse_alg_a: float
    n_failed: int = 0


def _tail_values(sample: Sequence[float], two_sided: bool) -> np.ndarray:
    x = np.asarray(sample, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("sample must be finite")
    return np.abs(x) if two_sided else x


def hill(sample: Sequence[float], k: int, two_sided: bool = True) -> HillEstimate:
    """Hill estimate of 1/alpha from the k largest order statistics."""
    x = np.sort(_tail_values(sample, two_sided))
    n = x.size
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n={n}, got {k}")
    threshold = x[n - k - 1]
    if threshold <= 0:
        raise ValueError(f"order statistic X_(n-k) = {threshold!r} is not positive")
    inv_alpha = float(np.mean(np.log(x[n - k:])) - math.log(threshold))
    return HillEstimate(k=int(k), inv_alpha=inv_alpha)


def hill_path(sample: Sequence[float], ks: Sequence[int], two_sided: bool = True) -> np.ndarray:
    """Hill estimates of 1/alpha for many k at once."""
    descending = np.sort(_tail_values(sample, two_sided))[::-1]
    n = descending.size
    ks = np.asarray(ks, dtype=int)
    if ks.size == 0:
        return np.zeros(0)
    if ks.min() < 1 or ks.max() >= n:
        raise ValueError(f"every k must satisfy 1 <= k < n={n}")
    top = descending[: ks.max() + 1]
    if top[-1] <= 0:
        raise ValueError("order statistics used by the Hill path must be positive")
    logs = np.log(top)
    cumulative = np.cumsum(logs)
    return cumulative[ks - 1] / ks - logs[ks]


def _silverman_factor(values: np.ndarray) -> float:
    """gaussian_kde factor for the bandwidth 0.9 * min(sd, IQR/1.349) * n^(-1/5)."""
    spread = float(np.std(values, ddof=1))
    if not spread > 0:
        raise ValueError("kernel density estimate needs at least two distinct values")
    q25, q75 = np.percentile(values, [25.0, 75.0])
    robust = min(spread, (q75 - q25) / 1.349) if q75 > q25 else spread
    return 0.9 * robust / spread * values.size ** -0.2


def pareto_plot(
    sample: Sequence[float],
    two_sided: bool = True,
    discard_fraction: float = DISCARD_FRACTION,
    kde_on_logs: bool = False,
) -> ParetoPlot:
    """Pareto quantile plot of the positive part of a sample.

    x_j = -log(j/(n+1)) and y_j = log X_(n-j+1); the largest ceil(0.005 n)
    points are dropped. Each y_j gets the asymptotic quantile standard error
    sqrt(p(1-p)/n) / g(y_j), where g is the density of log X. By default g is
    x * f(x) with f a Silverman-bandwidth Gaussian KDE of the sample values;
    ``kde_on_logs`` estimates g from the logs directly instead.
    """
    values = _tail_values(sample, two_sided)
    positive = np.sort(values[values > 0])[::-1]
    n = positive.size
    if n < MIN_PLOT_POINTS:
        raise ValueError(f"Pareto plot needs at least {MIN_PLOT_POINTS} positive values, got {n}")

    logs = np.log(positive)
    ranks = np.arange(1, n + 1)
    n_discard = math.ceil(discard_fraction * n)
    ranks = ranks[n_discard:]
    y = logs[n_discard:]
    x = -np.log(ranks / (n + 1.0))

    support = logs if kde_on_logs else positive
    kde = gaussian_kde(support, bw_method=_silverman_factor(support))
    density = kde(support[n_discard:])
    if not kde_on_logs:
        density = density * positive[n_discard:]
    density = np.maximum(density, np.finfo(float).tiny)
    p = 1.0 - ranks / (n + 1.0)
    sigmas = np.sqrt(p * (1.0 - p) / n) / density
    return ParetoPlot(x=x, y=y, sigmas=sigmas, n=n, n_discard=n_discard)


def lms_line(
    x: Sequence[float],
    y: Sequence[float],
    sigmas: Optional[Sequence[float]] = None,
    seed: int = 0,
) -> LineFit:
    """Least-median-of-squares line through candidate point pairs.

    All pairs are tried for up to 200 points, otherwise 3000 random pairs
    drawn with a fixed seed. The first pair reaching the smallest median
    wins.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 3 or y.size != n:
        raise ValueError(f"LMS line needs at least 3 paired points, got {n}")
    scale = np.ones(n) if sigmas is None else np.asarray(sigmas, dtype=float)

    if n <= EXHAUSTIVE_PAIR_LIMIT:
        first, second = np.triu_indices(n, k=1)
    else:
        rng = np.random.default_rng(seed)
        first = rng.integers(n, size=RANDOM_PAIRS)
        second = (first + 1 + rng.integers(n - 1, size=RANDOM_PAIRS)) % n

    dx = x[second] - x[first]
    usable = dx != 0
    if not np.any(usable):
        raise ValueError("LMS line is undefined when all points share one x")
    first, second, dx = first[usable], second[usable], dx[usable]
    slopes = (y[second] - y[first]) / dx
    intercepts = y[first] - slopes * x[first]

    residuals = (y[None, :] - intercepts[:, None] - slopes[:, None] * x[None, :]) / scale[None, :]
    criteria = np.median(residuals ** 2, axis=1)
    best = int(np.argmin(criteria))
    return LineFit(slope=float(slopes[best]), intercept=float(intercepts[best]), criterion=float(criteria[best]))


def _extend_fit(
    design: np.ndarray,
    y: np.ndarray,
    sigmas: np.ndarray,
    frozen: np.ndarray,
    stop: int,
    beta: np.ndarray,
    kernel: EstimatorKernel,
    config: ForwardSearchConfig,
) -> Tuple[np.ndarray, np.ndarray]:
    """IRLS over rows [len(frozen), stop) with the weights of earlier rows held fixed."""
    block = slice(frozen.size, stop)
    A, b, s = design[:stop], y[:stop], sigmas[:stop]
    if not config.iterate_new_weights:
        new_weights = weight(kernel, (y[block] - design[block] @ beta) / sigmas[block])
        return weighted_least_squares(A, b, s, np.concatenate([frozen, new_weights])), new_weights
    for _ in range(config.max_inner_iterations):
        new_weights = weight(kernel, (y[block] - design[block] @ beta) / sigmas[block])
        updated = weighted_least_squares(A, b, s, np.concatenate([frozen, new_weights]))
        change = float(np.max(np.abs(A @ (updated - beta) / s)))
        beta = updated
        if change < config.tol:
            break
    return beta, weight(kernel, (y[block] - design[block] @ beta) / sigmas[block])


def forward_search(plot: ParetoPlot, config: Optional[ForwardSearchConfig] = None) -> ForwardSearchResult:
    """Grow a robust line fit from the top of the Pareto plot block by block.

    The first block is fitted with the N-type estimator at a fixed
    temperature from an LMS start. Each following block is added with the
    weights of all earlier points frozen, and the fit is iterated on the new
    weights alone. If at least stop_fraction of the converged new weights
    fall below weight_ratio * w_max, the block is rejected, the previous line
    is kept and the search stops.
    """
    config = config or ForwardSearchConfig()
    m = config.block_for(plot.n)
    n_points = len(plot)
    if n_points < 2 * m:
        raise ValueError(f"forward search needs at least {2 * m} points, got {n_points}")

    design = np.column_stack([np.ones(n_points), plot.x])
    y, sigmas = plot.y, plot.sigmas
    kernel = config.kernel()
    threshold = config.weight_ratio * kernel.max_weight

    start = lms_line(plot.x[:m], y[:m], sigmas[:m], seed=config.lms_seed)
    irls = IRLSConfig(
        kind=KernelKind.NTYPE,
        c=config.c,
        schedule=AnnealingSchedule.fixed(config.temperature),
        max_inner_iterations=config.max_inner_iterations,
        tol=config.tol,
    )
    fit = fit_linear(design[:m], y[:m], sigmas[:m], irls, start=[start.intercept, start.slope])
    beta = np.asarray(fit.estimate, dtype=float)
    frozen = np.asarray(fit.weights, dtype=float)
    reason = StopReason.EXHAUSTED

    while frozen.size < n_points:
        stop = min(frozen.size + m, n_points)
        extended, new_weights = _extend_fit(design, y, sigmas, frozen, stop, beta, kernel, config)
        low = int(np.count_nonzero(new_weights < threshold))
        if low >= config.stop_fraction * new_weights.size:
            reason = StopReason.WEIGHTS_COLLAPSED
            logger.debug(f"forward search stopped at {frozen.size} points: {low}/{new_weights.size} low weights")
            break
        frozen = np.concatenate([frozen, new_weights])
        beta = extended

    return ForwardSearchResult(
        slope=float(beta[1]),
        intercept=float(beta[0]),
        n_included=int(frozen.size),
        frozen_weights=tuple(float(w) for w in frozen),
        stop_reason=reason,
        block_size=m,
    )


def analyze_sample(
    sample: Sequence[float], config: Optional[ForwardSearchConfig] = None, two_sided: bool = True
) -> TailAnalysis:
    """Pareto plot, forward search and the Hill estimate over the same top order statistics.

    The Hill k counts the discarded extreme points too and is capped at
    n - 1 when the search exhausts the plot.
    """
    plot = pareto_plot(sample, two_sided=two_sided)
    search = forward_search(plot, config)
    k = min(plot.tail_count(search.n_included), plot.n - 1)
    return TailAnalysis(plot=plot, search=search, hill=hill(sample, k, two_sided=two_sided))


def tail_experiment(
    nu_grid: Sequence[float],
    n: int = 1000,
    n_reps: int = 50,
    seed: int = 0,
    config: Optional[ForwardSearchConfig] = None,
    should_stop: Optional[Callable[[], bool]] = None,
) -> List[TailRow]:
    """Oracle-k Hill versus forward search on |t_nu| samples, whose true 1/alpha is 1/nu.

    Replicate r of grid point i is drawn from default_rng([seed, i, r]).
    """
    if n < MIN_PLOT_POINTS or n_reps < 1:
        raise ValueError(f"need n >= {MIN_PLOT_POINTS} and n_reps >= 1, got n={n}, n_reps={n_reps}")
    config = config or ForwardSearchConfig()
    ks = np.arange(1, n)
    rows = []

    for i, nu in enumerate(nu_grid):
        truth = 1.0 / nu
        hill_errors = np.empty((n_reps, ks.size))
        slope_errors, used = [], []
        for rep in range(n_reps):
            if should_stop is not None and should_stop():
                raise ExperimentInterrupted(f"tail experiment stopped at nu={nu}, replicate {rep}")
            sample = np.abs(np.random.default_rng([seed, i, rep]).standard_t(nu, size=n))
            hill_errors[rep] = hill_path(sample, ks) - truth
            try:
                plot = pareto_plot(sample)
                search = forward_search(plot, config)
            except EstimationError as e:
                logger.debug(f"nu={nu}, replicate {rep}: forward search failed ({e})")
                continue
            slope_errors.append(search.slope - truth)
            used.append(plot.tail_count(search.n_included) / n)

        rmse = np.sqrt(np.mean(hill_errors ** 2, axis=0))
        best = int(np.argmin(rmse))
        used = np.asarray(used)
        slope_errors = np.asarray(slope_errors)
        rows.append(
            TailRow(
                nu=float(nu),
                p_opt=float(ks[best] / n),
                rmse_opt=float(rmse[best]),
                p_used_mean=float(np.mean(used)) if used.size else math.nan,
                p_used_sd=float(np.std(used, ddof=1)) if used.size > 1 else 0.0,
                rmse_alg_a=float(np.sqrt(np.mean(slope_errors ** 2))) if slope_errors.size else math.nan,
                n_failed=n_reps - used.size,
            )
        )
        logger.debug(f"nu={nu}: hill k_opt={ks[best]}, forward search p_used={rows[-1].p_used_mean:.4f}")
    return rows
