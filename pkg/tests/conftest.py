"""Shared fixtures: small architectures and point sets that keep unit tests fast."""

import numpy as np
import pytest

from contact_pinn.elasticity import MaterialParams
from contact_pinn.geometry import HertzCounts, PatchCounts, sample_hertz, sample_patch
from contact_pinn.network import Architecture, init_glorot_uniform


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_arch():
    """Two narrow hidden layers: enough nonlinearity for gradient checks."""
    return Architecture(hidden_layers=2, hidden_width=8)


@pytest.fixture
def small_theta(small_arch):
    return init_glorot_uniform(small_arch, seed=7)


@pytest.fixture
def patch_material():
    return MaterialParams(young_modulus=1.33, poisson_ratio=0.33)


@pytest.fixture
def hertz_material():
    return MaterialParams(young_modulus=200.0, poisson_ratio=0.3)


@pytest.fixture
def patch_sets_small():
    counts = PatchCounts(interior=40, contact=9, evaluation_grid=3)
    return sample_patch(counts, seed=3)


@pytest.fixture
def hertz_sets_small():
    counts = HertzCounts(interior=60, curved=20, contact=10, evaluation=5)
    return sample_hertz(counts, seed=2)
