"""Robust location and scale pre-estimates."""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAD_CONSISTENCY = 1.4826
TIE_RELATIVE = 1e-9
TIE_SPREAD = 1e-12


@dataclass(frozen=True)
class ScaleEstimate:
    raw: float
    consistent: float
    center: float


def _sample(data: Sequence[float]) -> np.ndarray:
    x = np.asarray(data, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("sample is empty")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample must be finite")
    return x


def half_sample_mode(data: Sequence[float]) -> float:
    """Recursive shortest-half mode estimate.

    The sorted sample is repeatedly replaced by the contiguous run of
    ceil(n/2) points with the smallest range until at most two points are
    left, whose mean is returned. Ranges equal up to rounding count as ties
    and the leftmost window wins.
    """
    x = np.sort(_sample(data))
    while x.size > 2:
        h = math.ceil(x.size / 2)
        widths = x[h - 1:] - x[: x.size - h + 1]
        narrowest = widths.min()
        tolerance = narrowest * TIE_RELATIVE + TIE_SPREAD * (x[-1] - x[0])
        start = int(np.flatnonzero(widths <= narrowest + tolerance)[0])
        x = x[start:start + h]
    return float(np.mean(x))


def median(data: Sequence[float]) -> float:
    return float(np.median(_sample(data)))


def mad_about(data: Sequence[float], center: float) -> ScaleEstimate:
    """Median absolute deviation about an arbitrary center, with its normal-consistent value."""
    if not math.isfinite(center):
        raise ValueError(f"center must be finite, got {center}")
    raw = float(np.median(np.abs(_sample(data) - center)))
    return ScaleEstimate(raw=raw, consistent=MAD_CONSISTENCY * raw, center=float(center))
