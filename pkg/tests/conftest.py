import numpy as np
import pytest

from ofdmsense.channel import OfdmNumerology, Scatterer, SceneConfig
from ofdmsense.scenes import roi_meters_to_delay


@pytest.fixture
def rng():
    return np.random.default_rng(20240117)


@pytest.fixture
def numerology():
    """Simulation default: N = 256 over 50 MHz, 0.64 us CP, 8-symbol CPI."""
    return OfdmNumerology.from_bandwidth(256, 50e6, 0.64e-6, n_symbols=8)


@pytest.fixture
def two_target_scene(numerology):
    return SceneConfig(
        numerology=numerology,
        scatterers=(Scatterer.from_range(60.9), Scatterer.from_range(90.9)),
        noise_var=0.1,
        roi_bounds=roi_meters_to_delay((-150.0, 150.0)),
    )


@pytest.fixture
def one_target_scene(numerology):
    return SceneConfig(
        numerology=numerology,
        scatterers=(Scatterer.from_range(60.9),),
        noise_var=0.1,
        roi_bounds=roi_meters_to_delay((-150.0, 150.0)),
    )
