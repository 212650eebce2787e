import numpy as np
import pytest

from fdjcas.channels import build_channel_set
from fdjcas.geometry import build_scene


@pytest.fixture(scope="session")
def reference_scene():
    """Reference scenario dimensions: 15x10 arrays, 10x10 surface."""
    return build_scene(target_angle=np.deg2rad(20.0))


@pytest.fixture(scope="session")
def small_scene():
    """Reduced dimensions for fast optimizer tests."""
    return build_scene(
        n_bs_tx=6,
        n_bs_rx=4,
        ris_rows=3,
        ris_cols=3,
        target_angle=np.deg2rad(15.0),
    )


@pytest.fixture()
def small_channels(small_scene):
    return build_channel_set(
        small_scene, n_user_antennas=3, nlos_si_power=0.01, seed=0,
        noise_user=0.1, noise_radar=0.1,
    )


def random_unit_modulus(n, rng):
    return np.exp(2j * np.pi * rng.random(n))


def central_difference(fn, x, h=1e-6):
    return (fn(x + h) - fn(x - h)) / (2.0 * h)
