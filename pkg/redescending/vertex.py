"""Synthetic vertex fitting with annealed track weights.

A straight track i is summarized by its signed distance from a candidate
vertex v, linearized as d_i(v) = c_i + a_i . v with a unit direction a_i and
a known standard error sigma_i. The vertex minimizes the sum of squared
standardized distances, robustified with the N-type kernel.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import EstimationError, ExperimentInterrupted
from .irls import AnnealingSchedule, FitResult, IRLSConfig, fit_linear
from .kernels import KernelKind

logger = logging.getLogger(__name__)

UNIT_TOLERANCE = 1e-12


class TrackLabel(str, Enum):
    PRIMARY = "primary"
    SECONDARY = "secondary"


class Classification(str, Enum):
    INLIER = "inlier"
    OUTLIER = "outlier"


@dataclass(frozen=True)
class Track:
    offset: float
    direction: Tuple[float, ...]
    sigma: float
    label: TrackLabel = TrackLabel.PRIMARY

    def __post_init__(self):
        a = np.asarray(self.direction, dtype=float)
        if a.ndim != 1 or a.size not in (2, 3):
            raise ValueError(f"track direction must have 2 or 3 components, got {self.direction}")
        if abs(float(np.linalg.norm(a)) - 1.0) > UNIT_TOLERANCE:
            raise ValueError(f"track direction must be a unit vector, norm is {np.linalg.norm(a)!r}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"track sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "direction", tuple(float(v) for v in a))
        object.__setattr__(self, "label", TrackLabel(self.label))

    def distance(self, vertex: Sequence[float]) -> float:
        return self.offset + float(np.dot(self.direction, vertex))


@dataclass(frozen=True)
class VertexEvent:
    tracks: Tuple[Track, ...]
    true_vertex: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(self.tracks))
        object.__setattr__(self, "true_vertex", np.asarray(self.true_vertex, dtype=float))
        dims = {len(track.direction) for track in self.tracks}
        if len(dims) > 1 or (dims and dims != {self.true_vertex.size}):
            raise ValueError("tracks and vertex must share one dimension")

    @property
    def dimension(self) -> int:
        return int(self.true_vertex.size)

    @property
    def directions(self) -> np.ndarray:
        return np.array([track.direction for track in self.tracks], dtype=float).reshape(-1, self.dimension)

    @property
    def offsets(self) -> np.ndarray:
        return np.array([track.offset for track in self.tracks], dtype=float)

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([track.sigma for track in self.tracks], dtype=float)

    @property
    def labels(self) -> Tuple[TrackLabel, ...]:
        return tuple(track.label for track in self.tracks)

    def standardized_distances(self, vertex: Sequence[float]) -> np.ndarray:
        return (self.offsets + self.directions @ np.asarray(vertex, dtype=float)) / self.sigmas


@dataclass(frozen=True)
class VertexSimConfig:
    n_primary: int = 20
    n_secondary: int = 8
    dimension: int = 2
    sigma_track: float = 0.01
    secondary_displacement: float = 0.3
    vertex_spread: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.dimension}")
        if self.n_primary < self.dimension:
            raise ValueError(f"need at least {self.dimension} primary tracks, got {self.n_primary}")
        if self.n_secondary < 0:
            raise ValueError(f"n_secondary must be >= 0, got {self.n_secondary}")
        if not self.sigma_track > 0:
            raise ValueError(f"sigma_track must be positive, got {self.sigma_track}")
        if self.secondary_displacement < 0 or self.vertex_spread < 0:
            raise ValueError("displacement and vertex spread must be non-negative")

    @property
    def tolerance_radius(self) -> float:
        """Five times the ideal least-squares standard error of the primary vertex."""
        return 5.0 * self.sigma_track / math.sqrt(self.n_primary)


@dataclass(frozen=True)
class VertexFit:
    vertex: np.ndarray
    track_weights: np.ndarray
    classification: Tuple[Classification, ...]
    fit: Optional[FitResult] = field(default=None, repr=False)

    @property
    def inliers(self) -> np.ndarray:
        return np.array([cls is Classification.INLIER for cls in self.classification], dtype=bool)


def _unit_vector(rng: np.random.Generator, dimension: int) -> np.ndarray:
    g = rng.standard_normal(dimension)
    return g / np.linalg.norm(g)


def simulate_event(config: VertexSimConfig, index: int = 0) -> VertexEvent:
    """Draw one event; identical (config, index) pairs give identical events."""
    rng = np.random.default_rng([config.seed, index])
    d = config.dimension
    true_vertex = rng.normal(0.0, config.vertex_spread, d) if config.vertex_spread > 0 else np.zeros(d)
    displaced = true_vertex + config.secondary_displacement * _unit_vector(rng, d)

    tracks = []
    for label, count, origin in (
        (TrackLabel.PRIMARY, config.n_primary, true_vertex),
        (TrackLabel.SECONDARY, config.n_secondary, displaced),
    ):
        for _ in range(count):
            a = _unit_vector(rng, d)
            offset = -float(a @ origin) + rng.normal(0.0, config.sigma_track)
            tracks.append(Track(offset=offset, direction=tuple(a), sigma=config.sigma_track, label=label))
    return VertexEvent(tracks=tuple(tracks), true_vertex=true_vertex)


def translate_event(event: VertexEvent, shift: Sequence[float]) -> VertexEvent:
    """Move the whole event by shift; every track keeps its direction."""
    t = np.asarray(shift, dtype=float)
    tracks = tuple(
        Track(offset=track.offset - float(np.dot(track.direction, t)), direction=track.direction,
              sigma=track.sigma, label=track.label)
        for track in event.tracks
    )
    return VertexEvent(tracks=tracks, true_vertex=event.true_vertex + t)


def classify(weights: Sequence[float]) -> Tuple[Classification, ...]:
    """Inlier iff w > 0.5; a weight of exactly one half counts as an outlier."""
    return tuple(Classification.INLIER if w > 0.5 else Classification.OUTLIER for w in weights)


def fit_vertex(event: VertexEvent, config: Optional[IRLSConfig] = None) -> VertexFit:
    """Annealed N-type vertex fit started from the plain least-squares vertex."""
    config = config or IRLSConfig(kind=KernelKind.NTYPE, c=2.5)
    if len(event.tracks) < event.dimension:
        raise ValueError(f"need at least {event.dimension} tracks, got {len(event.tracks)}")
    fit = fit_linear(event.directions, -event.offsets, event.sigmas, config)
    return VertexFit(
        vertex=np.asarray(fit.estimate, dtype=float),
        track_weights=fit.weights,
        classification=classify(fit.weights),
        fit=fit,
    )


@dataclass(frozen=True)
class Scheme:
    name: str
    schedule: AnnealingSchedule


def standard_schemes(t0: float = 256.0, q: float = 0.25, epsilon: float = 1e-3) -> Tuple[Scheme, ...]:
    """Fixed temperatures 1 and 0.01 against annealing from t0 down to each of them."""
    return (
        Scheme("no-anneal T=1", AnnealingSchedule.fixed(1.0)),
        Scheme("no-anneal T=0.01", AnnealingSchedule.fixed(0.01)),
        Scheme("anneal T_end=1", AnnealingSchedule(t0=t0, t_end=1.0, q=q, epsilon=epsilon)),
        Scheme("anneal T_end=0.01", AnnealingSchedule(t0=t0, t_end=0.01, q=q, epsilon=epsilon)),
    )


@dataclass(frozen=True)
class SchemeSummary:
    """One classification-table row; fractions are pooled over all tracks of all events."""

    scheme: str
    primary_w_lt_05: float
    primary_w_gt_05: float
    secondary_w_lt_05: float
    secondary_w_gt_05: float
    n_rec: int
    n_failed: int = 0


class _Tally:
    def __init__(self, scheme: Scheme):
        self.scheme = scheme
        self.primary_in = 0
        self.primary_total = 0
        self.secondary_in = 0
        self.secondary_total = 0
        self.found = 0
        self.failed = 0

    def add(self, event: VertexEvent, inliers: np.ndarray, found: bool) -> None:
        primary = np.array([label is TrackLabel.PRIMARY for label in event.labels], dtype=bool)
        self.primary_in += int(np.count_nonzero(inliers & primary))
        self.primary_total += int(np.count_nonzero(primary))
        self.secondary_in += int(np.count_nonzero(inliers & ~primary))
        self.secondary_total += int(np.count_nonzero(~primary))
        self.found += int(found)

    def summary(self) -> SchemeSummary:
        p_in = self.primary_in / self.primary_total if self.primary_total else 0.0
        s_in = self.secondary_in / self.secondary_total if self.secondary_total else 0.0
        return SchemeSummary(
            scheme=self.scheme.name,
            primary_w_lt_05=1.0 - p_in if self.primary_total else 0.0,
            primary_w_gt_05=p_in,
            secondary_w_lt_05=1.0 - s_in if self.secondary_total else 0.0,
            secondary_w_gt_05=s_in,
            n_rec=self.found,
            n_failed=self.failed,
        )


def table1_experiment(
    n_events: int,
    sim: VertexSimConfig,
    schemes: Optional[Sequence[Scheme]] = None,
    c: float = 2.5,
    tolerance_radius: Optional[float] = None,
    should_stop: Optional[Callable[[], bool]] = None,
) -> List[SchemeSummary]:
    """Fit every simulated event under every scheme and tabulate classification rates.

    A fit that raises an estimation error counts as a vertex not found with
    every track at weight zero.
    """
    if n_events < 1:
        raise ValueError(f"n_events must be >= 1, got {n_events}")
    schemes = standard_schemes() if schemes is None else tuple(schemes)
    radius = sim.tolerance_radius if tolerance_radius is None else tolerance_radius
    configs = [IRLSConfig(kind=KernelKind.NTYPE, c=c, schedule=scheme.schedule) for scheme in schemes]
    tallies = [_Tally(scheme) for scheme in schemes]

    for index in range(n_events):
        if should_stop is not None and should_stop():
            raise ExperimentInterrupted(f"vertex experiment stopped after {index} event(s)")
        event = simulate_event(sim, index)
        for tally, config in zip(tallies, configs):
            try:
                result = fit_vertex(event, config)
            except EstimationError as e:
                logger.debug(f"event {index}, {tally.scheme.name}: fit failed ({e})")
                tally.failed += 1
                tally.add(event, np.zeros(len(event.tracks), dtype=bool), found=False)
                continue
            found = float(np.linalg.norm(result.vertex - event.true_vertex)) < radius
            tally.add(event, result.inliers, found)

    summaries = [tally.summary() for tally in tallies]
    for summary in summaries:
        logger.debug(f"{summary.scheme}: {summary.n_rec} vertices found, {summary.n_failed} failed fit(s)")
    return summaries
