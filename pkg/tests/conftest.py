"""Shared fixtures."""

import numpy as np
import pytest


@pytest.fixture
def rng():
    """Seeded generator so every test sees the same draws."""
    return np.random.default_rng(20240517)


@pytest.fixture
def out_dir(tmp_path):
    path = tmp_path / "results"
    return path
