import numpy as np
import pytest

from scenario import PathSet, Scenario, ScenarioConfig, config_from_mapping, draw_scenario, normalize_by_noise


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow acceptance tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance check (needs --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def make_config(**overrides) -> ScenarioConfig:
    """Config from file keys (dB units) on top of the defaults."""
    return config_from_mapping({key: str(value) for key, value in overrides.items()})


def make_scenario(realization: int = 0, **overrides) -> Scenario:
    return draw_scenario(make_config(**overrides), realization)


def random_paths(rng: np.random.Generator, num_users: int, num_paths: int, scale: float = 1.0):
    """Noise-normalized path sets with O(1) gains."""
    sets = []
    for _ in range(num_users):
        gains = scale * (rng.standard_normal(num_paths) + 1j * rng.standard_normal(num_paths)) / np.sqrt(2)
        angles = rng.uniform(-1.4, 1.4, num_paths)
        sets.append(PathSet(gains=gains, angles=angles, distance=100.0))
    return tuple(sets)


def scenario_with_paths(config: ScenarioConfig, paths) -> Scenario:
    """Scenario whose paths are already noise-normalized."""
    return Scenario(config, 0, tuple(paths), normalize_by_noise(paths, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_scenario():
    """K=2, N_t=4, L=4 lambda, Gamma=5 dB; solves in well under a second per SDP."""
    return make_scenario(k_users=2, n_antennas=4, aperture_lambda=4, sinr_target_db=5,
                         max_outer=8, max_inner=5, pgd_max_iters=30, seed=7)
