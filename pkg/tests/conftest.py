import os

import numpy as np
import pytest

from lambda_mdp.instances import random_mdp, random_policy, rng_stream
from lambda_mdp.mdp_core import MdpModel, PolicyTable

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data")

# keys for test-only streams, away from the library's own
TEST_KEY = 99


@pytest.fixture
def data_dir():
    return DATA_DIR


@pytest.fixture
def m1():
    """One state, one action, reward 1, gamma 0.5."""
    return MdpModel(1, 1, [[[1.0]]], [[[1.0]]], [1.0], 0.5)


@pytest.fixture
def m2():
    """Deterministic two-state cycle: s0 -> s1 pays 1, s1 -> s0 pays 0."""
    transition = [[[0.0, 1.0]], [[1.0, 0.0]]]
    reward = [[[0.0, 1.0]], [[0.0, 0.0]]]
    return MdpModel(2, 1, transition, reward, [1.0, 0.0], 0.5)


@pytest.fixture
def single_action():
    def make(num_states):
        return PolicyTable(np.ones((num_states, 1)))
    return make


def make_random(seed, num_states, num_actions, gamma=None, reward_low=-1.0, reward_high=1.0):
    rng = rng_stream(seed, TEST_KEY)
    model = random_mdp(rng, num_states, num_actions, gamma=gamma, reward_low=reward_low,
                       reward_high=reward_high)
    return model, random_policy(rng, num_states, num_actions)


@pytest.fixture
def random_instance():
    return make_random
