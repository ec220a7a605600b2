import logging

import numpy as np
import pytest

from amilab.schemas.attack import AttackConfig, AttackMethod, DistanceMetric
from amilab.schemas.env import EnvConfig, GatherGridConfig, RendezvousConfig
from amilab.schemas.experiment import VictimTrainingConfig
from amilab.schemas.train import TrainConfig
from amilab.services.victim_service import VictimPolicySet
from amilab.envs.factory import make_env
from amilab.utils.audit import audit


@pytest.fixture(autouse=True)
def _reset_state():
    audit.reset()
    yield
    audit.reset()
    # The CLI entry point detaches the package logger from the root; undo it for caplog.
    package = logging.getLogger("amilab")
    package.handlers.clear()
    package.propagate = True
    package.setLevel(logging.NOTSET)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_train():
    return TrainConfig(parallel_envs=2, hidden_dim=8, ppo_epochs=1, eval_episodes=2)


@pytest.fixture
def grid_env_config():
    return EnvConfig(name="gathergrid", gathergrid=GatherGridConfig(grid_size=4, n_agents=3, max_episode_len=5))


@pytest.fixture
def swarm_env_config():
    return EnvConfig(name="rendezvous", rendezvous=RendezvousConfig(n_agents=3, max_episode_len=4))


@pytest.fixture
def grid_victims(grid_env_config, tiny_train):
    spec = make_env(grid_env_config).spec
    return VictimPolicySet(spec, tiny_train, np.random.default_rng(0)).freeze()


@pytest.fixture
def swarm_victims(swarm_env_config, tiny_train):
    spec = make_env(swarm_env_config).spec
    return VictimPolicySet(spec, tiny_train, np.random.default_rng(0)).freeze()


@pytest.fixture
def victim_config(tiny_train):
    return VictimTrainingConfig(iterations=2, train=tiny_train)


@pytest.fixture
def attack_config(tiny_train):
    return AttackConfig(
        method=AttackMethod.AMI,
        ami_lambda=0.05,
        metric=DistanceMetric.L1,
        iterations=2,
        opp_epochs=1,
        train=tiny_train,
    )
