import numpy as np
import pytest
from hypothesis import settings

from wpcnplan.scenario import GenerationParams, Obstacle, bundled_scenario, generate_scenario

settings.register_profile("wpcnplan", deadline=None, max_examples=60)
settings.load_profile("wpcnplan")


@pytest.fixture(scope="session")
def bundled():
    return bundled_scenario()


@pytest.fixture(scope="session")
def empty_field():
    """200 uniform devices and no obstacles."""
    return generate_scenario(GenerationParams(n_devices=200, n_obstacles=0, seed=11))


@pytest.fixture(scope="session")
def one_hill():
    hill = Obstacle(250.0, 250.0, 25.0, 50.0, 50.0)
    return generate_scenario(GenerationParams(n_devices=150, seed=5, obstacles=(hill,)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
