import numpy as np
import pytest

from leoisac.geometry import AnglePair, UpaSpec

TABLE_SAT_KM = [30.0, -30.0, 340.0]
TABLE_TAR_KM = [3.0, 3.0, 5.0]


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def table_scene_m():
    sat = np.array(TABLE_SAT_KM) * 1e3
    tar = np.array(TABLE_TAR_KM) * 1e3
    rx = np.zeros(3)
    return sat, tar, rx


def random_interior_angle(rng, phi_lo=0.05, phi_hi=np.pi / 2 - 0.05) -> AnglePair:
    return AnglePair(
        float(rng.uniform(-np.pi + 0.01, np.pi)),
        float(rng.uniform(phi_lo, phi_hi)),
    )


@pytest.fixture
def tx_upa():
    return UpaSpec(4, 4)


@pytest.fixture
def rx_upa():
    return UpaSpec(8, 8)
