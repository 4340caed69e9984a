import pytest
from hypothesis import HealthCheck, settings, strategies as st

from fpplab.lattice import Box, WeightDist, sample_environment
from fpplab.rng import derive_stream

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

ZERO_ONE_TWO = WeightDist.from_mapping({0: "1/5", 1: "2/5", 2: "2/5"})
ONE_TWO = WeightDist.uniform([1, 2])


def random_env(seed, radius=3, dist=ZERO_ONE_TWO, d=2, index=0):
    return sample_environment(Box.cube(d, radius), dist, derive_stream(seed, index))


@pytest.fixture
def env_factory():
    return random_env


seeds = st.integers(min_value=0, max_value=2**32)
