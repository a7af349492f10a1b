import numpy as np
import pytest
import torch

from msdcr.data import SyntheticConfig, generate_synthetic, split_leave_one_out

torch.set_num_threads(1)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def small_scenario():
    cfg = SyntheticConfig(num_users=40, num_domains=2, items_per_domain=(150, 150), sparsity=0.04,
                          num_aspects=4, seed=3)
    return generate_synthetic(cfg)


@pytest.fixture(scope="session")
def small_split(small_scenario):
    return split_leave_one_out(small_scenario, seed=11)
