"""Shared helpers for the test suite."""

import numpy as np
import pytest

from multihomodyne import (
    ChannelDecomposition,
    ProbeSpec,
    first_row_decomposition,
    random_haar_unitary,
)


def random_instance(rng, max_modes=8, r_range=(0.05, 2.0), d_max=5.0):
    """A random (unitary, theta, probe, channels) tuple for sweep tests."""
    m = int(rng.integers(1, max_modes + 1))
    u = random_haar_unitary(m, seed=int(rng.integers(2**31)))
    theta = rng.uniform(-np.pi, np.pi, m)
    r = float(rng.uniform(*r_range))
    d = float(rng.uniform(0.0, d_max))
    probe = ProbeSpec.from_resources(r, d)
    ch = first_row_decomposition(u, theta)
    return u, theta, probe, ch


def single_channel(gamma: float, theta: float = 0.0) -> ChannelDecomposition:
    """One-mode channel with unit probability and a chosen relative phase."""
    return ChannelDecomposition(
        probabilities=np.array([1.0]),
        network_phases=np.array([gamma + theta]),
        oscillator_phases=np.array([theta]),
        relative_phases=np.array([gamma]),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
