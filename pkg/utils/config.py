"""Configuration management for the estimator experiments."""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np


@dataclass
class Config:
    """Application configuration."""

    # Run settings
    seed: int = 0
    output_dir: str = "results"
    log_level: str = "INFO"

    # Estimator and annealing schedule
    cutoff: float = 2.5
    t0: float = 256.0
    q: float = 0.25
    epsilon_t: float = 1e-3
    tol: float = 1e-8
    max_inner_iterations: int = 100

    # Influence profile
    profile_cutoffs: str = "1.5:0.5:3"
    profile_t_min: float = 1e-4
    profile_t_max: float = 1e4
    profile_per_decade: int = 20
    profile_epsilon: float = 1e-3

    # Kernel dump
    kernel_kind: str = "n"
    kernel_nu: float = 3.0
    kernel_temperatures: str = "10,1,0.01"
    kernel_r_max: float = 6.0
    kernel_r_points: int = 241

    # Location demo (mixture p * N(0,1) + (1-p) * N(m, sigma^2))
    mixture_p: float = 0.7
    mixture_m: float = 6.0
    mixture_sigma: float = 1.0
    mixture_n: int = 500
    demo_t_end: float = 0.1
    demo_scale: Optional[float] = None
    mu_min: float = -4.0
    mu_max: float = 10.0
    mu_points: int = 281

    # Vertex simulation
    n_primary: int = 20
    n_secondary: int = 8
    dimension: int = 2
    sigma_track: float = 0.01
    displacement: float = 0.3
    events: int = 1000

    # Tail index
    tail_n: int = 1000
    reps: int = 50
    nu_grid: str = "1:0.5:10"
    tail_cutoff: float = 2.576
    tail_temperature: float = 1.0
    stop_fraction: float = 0.5
    weight_ratio: float = 0.99
    block_size: Optional[int] = None
    single_refit: bool = False
    tail_input: Optional[str] = None

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)

    @property
    def mu_grid(self) -> np.ndarray:
        return np.linspace(self.mu_min, self.mu_max, self.mu_points)


def parse_grid(text: str) -> List[float]:
    """Parse "start:step:stop" (stop inclusive) or a comma-separated list of numbers."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must look like start:step:stop, got {text!r}")
        start, step, stop = (float(part) for part in parts)
        if not step > 0 or stop < start:
            raise ValueError(f"range needs a positive step and stop >= start, got {text!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [float(v) for v in np.round(start + step * np.arange(count), 12)]
    values = [float(part) for part in text.split(",") if part.strip()]
    if not values:
        raise ValueError(f"empty grid {text!r}")
    return values


def load_config_file(path: str) -> Dict[str, Any]:
    """Read a JSON object of option defaults; keys may use dashes or underscores."""
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ValueError(f"config file {path} must contain a JSON object")
    return {str(key).replace("-", "_"): value for key, value in data.items()}
