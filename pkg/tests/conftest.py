import numpy as np
import pytest

from swarmchoice.arena import WorldConfig, build_world
from swarmchoice.config import SimConfig


@pytest.fixture(scope="session")
def default_world():
    return build_world(WorldConfig(rng_seed=42))


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


def make_config(n_robots=12, comm_range=0.8, **world_kw):
    return SimConfig.from_dict({"n_robots": n_robots, "world": {"comm_range": comm_range, **world_kw}})


@pytest.fixture()
def small_config():
    return make_config(n_robots=6)
