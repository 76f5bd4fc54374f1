import numpy as np
import pytest

from rangesurvey.grid import RandomProjectionEncoder, TrigEncoder, build_fibonacci_grid
from rangesurvey.synth import SynthConfig, gen_hypotheses


@pytest.fixture(scope="session")
def trig_grid():
    return build_fibonacci_grid(60, TrigEncoder())


@pytest.fixture(scope="session")
def proj_grid():
    return build_fibonacci_grid(150, RandomProjectionEncoder(seed=3, dim=16))


@pytest.fixture(scope="session")
def proj_hypotheses(proj_grid):
    cfg = SynthConfig(n_cells=150, n_hypotheses=12, feature_dim=16,
                      encoder_seed=3, hypothesis_seed=5, logit_scale=6.0)
    return gen_hypotheses(cfg, proj_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
