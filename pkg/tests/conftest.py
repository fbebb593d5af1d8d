import numpy as np
import pytest

from momdp_core import Momdp
from oracle import example2_values
from instance_io import random_instance


@pytest.fixture
def self_loop_mdp():
    """One state, one self-loop action, r = (2, 4), gamma = 0.9: z = (20, 40)."""
    return Momdp(np.ones((1, 1, 1)), np.array([[[2.0, 4.0]]]), 0.9, np.ones(1), name="self-loop")


@pytest.fixture
def two_action_mdp():
    """One state, actions earning (1, 0) and (0, 1), gamma = 0.9."""
    return Momdp(np.ones((1, 2, 1)), np.array([[[1.0, 0.0], [0.0, 1.0]]]), 0.9, np.ones(1))


@pytest.fixture
def four_points():
    """Example 2 at N = 3 as an array: (0,24), (1,22), (2,20), (3,18)."""
    return example2_values(3).values()


@pytest.fixture
def random_mdp():
    def make(seed=1, states=3, actions=2, objectives=2):
        return random_instance(seed, states, actions, objectives)
    return make
