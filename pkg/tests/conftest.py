import math

import numpy as np
import pytest

from surfmimo.channel import AngleRanges, ArrayGeometry, NoiseModel, noise_power_mw

WAVELENGTH = 0.01
SPACING = WAVELENGTH / 2
GAMMA = 100.0 / noise_power_mw(NoiseModel(bandwidth_hz=1e8))  # 108 dB


@pytest.fixture
def ranges():
    return AngleRanges()


@pytest.fixture
def rx16():
    return ArrayGeometry(16, SPACING, WAVELENGTH)


def geom(m: int) -> ArrayGeometry:
    return ArrayGeometry(m, SPACING, WAVELENGTH)


def records_equal(a, b) -> bool:
    """Dataclass equality that treats NaN fields as equal."""
    return [repr(x) for x in a] == [repr(x) for x in b]


def assert_close(actual, expected, rel=1e-9, abs_tol=0.0):
    assert math.isclose(actual, expected, rel_tol=rel, abs_tol=abs_tol), (
        f"{actual} != {expected} (rel {rel})"
    )


def rng_for(case: int, trial: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(case, spawn_key=(trial,)))
