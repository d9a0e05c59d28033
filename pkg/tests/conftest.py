"""Shared fixtures."""

import math

import numpy as np
import pytest

from shom.bathymetry import cosine_bottom
from shom.run_config import RunConfig
from shom.spectral import SlowGrid


@pytest.fixture
def unit_grid() -> SlowGrid:
    """L = 2 pi, 32 points."""
    return SlowGrid(1, 2.0 * math.pi, 32)


@pytest.fixture
def wide_grid() -> SlowGrid:
    """L = 20, 256 points: room for a decaying Gaussian bump."""
    return SlowGrid(1, 20.0, 256)


@pytest.fixture
def cos_bottom():
    return cosine_bottom()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_config(tmp_path) -> RunConfig:
    """Cheap default-shaped config writing into a temporary directory."""
    return RunConfig(nx=64, T=0.05, dt=1e-2, snapshot_every=1, tau=10.0, tau_samples=11,
                     cell_ny=[32, 64], resonance_samples=500, out_dir=str(tmp_path / "run"))
