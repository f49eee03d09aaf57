"""Shared fixtures: models, controllers, episodes and brute-force oracles."""

import itertools
import os
from pathlib import Path

import numpy as np
import pytest

from src.fsc.controller import FscParams, JointFsc, random_controller
from src.inference.episodes import Episode, EpisodeSet
from src.model.dpomdp import DecPomdpModel, RewardBounds
from src.model.parser import load_dpomdp, parse_dpomdp

ROOT = Path(__file__).resolve().parent.parent
BENCH_DIR = ROOT / 'data' / 'benchmarks'

MINIMAL_MODEL = """
agents: 1
discount: 0.9
values: reward
states: 2
actions: 2
observations: 2
start: uniform
T: * : identity
O: * : uniform
R: * : * : * : * : 1.0
"""

CONSTANT_REWARD_MODEL = """
agents: 1
discount: 0.9
values: reward
states: 1
actions: 2
observations: 1
start: uniform
T: * : identity
O: * : uniform
R: * : * : * : * : 1.0
"""

SINGLE_ACTION_MODEL = """
agents: 2
discount: 0.95
values: reward
states: s0 s1
start: uniform
actions:
go
go
observations:
ping pong
ping pong
T: * :
0.7 0.3
0.4 0.6
O: * :
0.5 0.2 0.2 0.1
0.1 0.2 0.2 0.5
R: * : s0 : * : * : 1.0
R: * : s1 : * : * : 0.0
"""


def pytest_collection_modifyitems(config, items):
    if os.environ.get('DEC_SBPR_BENCH') == '1':
        return
    skip = pytest.mark.skip(reason="benchmark gate; set DEC_SBPR_BENCH=1 to run")
    for item in items:
        if 'bench' in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def dectiger():
    return load_dpomdp(BENCH_DIR / 'dectiger.dpomdp')


@pytest.fixture
def minimal_model():
    return parse_dpomdp(MINIMAL_MODEL)


@pytest.fixture
def constant_model():
    return parse_dpomdp(CONSTANT_REWARD_MODEL)


@pytest.fixture
def single_action_model():
    return parse_dpomdp(SINGLE_ACTION_MODEL)


def build_random_model(rng, num_states=2, num_actions=(2, 2), num_observations=(2, 2), discount=0.9):
    A = int(np.prod(num_actions))
    O = int(np.prod(num_observations))
    S = num_states
    return DecPomdpModel(
        state_names=[f"s{i}" for i in range(S)],
        action_names=[[f"a{i}" for i in range(k)] for k in num_actions],
        observation_names=[[f"o{i}" for i in range(k)] for k in num_observations],
        transition=rng.dirichlet(np.ones(S), size=(S, A)),
        observation=rng.dirichlet(np.ones(O), size=(A, S)),
        reward=rng.uniform(-1.0, 2.0, size=(S, A)),
        discount=discount,
        initial_belief=rng.dirichlet(np.ones(S)),
    )


@pytest.fixture
def make_random_model(rng):
    def factory(**kwargs):
        return build_random_model(rng, **kwargs)
    return factory


@pytest.fixture
def make_controller(rng):
    def factory(num_nodes, num_actions, num_observations, deterministic_start=False):
        return random_controller(
            num_nodes, num_actions, num_observations, rng, deterministic_start=deterministic_start
        )
    return factory


@pytest.fixture
def make_episode(rng):
    """Random single- or multi-agent episode with uniform behavior probabilities."""
    def factory(steps, num_actions=(2,), num_observations=(2,), rewards=None, episode_id=0):
        N = len(num_actions)
        actions = np.stack([rng.integers(0, A, size=steps) for A in num_actions], axis=1)
        observations = np.stack(
            [rng.integers(0, O, size=steps - 1) for O in num_observations], axis=1
        ).reshape(steps - 1, N)
        if rewards is None:
            rewards = rng.uniform(0.0, 1.0, size=steps)
        probs = np.tile([1.0 / A for A in num_actions], (steps, 1))
        return Episode(actions, observations, np.asarray(rewards, dtype=float), probs, episode_id)
    return factory


@pytest.fixture
def make_episode_set(make_episode):
    def factory(num_episodes, steps, num_actions=(2,), num_observations=(2,),
                discount=0.9, r_min=0.0, r_max=1.0):
        episodes = [
            make_episode(steps, num_actions, num_observations, episode_id=k)
            for k in range(num_episodes)
        ]
        return EpisodeSet(episodes, discount, RewardBounds(r_min, r_max), num_actions, num_observations)
    return factory


def path_weight(fsc: FscParams, actions, observations, path) -> float:
    """``mu(z_0) pi(z_0, a_0) prod W(z_{tau-1}, a_{tau-1}, o_tau, z_tau) pi(z_tau, a_tau)``"""
    weight = fsc.initial[path[0]] * fsc.policy[path[0], actions[0]]
    for tau in range(1, len(path)):
        weight *= fsc.transition[path[tau - 1], actions[tau - 1], observations[tau - 1], path[tau]]
        weight *= fsc.policy[path[tau], actions[tau]]
    return float(weight)


def enumerate_posteriors(fsc, actions, observations, t):
    """
    Exhaustive node posteriors given ``a_{0:t}, o_{1:t}``.

    Returns:
        ``(likelihood, phi (t+1, Z), xi (t, Z, Z))``
    """
    Z = fsc.num_nodes
    phi = np.zeros((t + 1, Z))
    xi = np.zeros((t, Z, Z))
    total = 0.0
    for path in itertools.product(range(Z), repeat=t + 1):
        w = path_weight(fsc, actions, observations, path)
        total += w
        for tau in range(t + 1):
            phi[tau, path[tau]] += w
        for tau in range(t):
            xi[tau, path[tau], path[tau + 1]] += w
    return total, phi / total, xi / total


@pytest.fixture
def oracle():
    return enumerate_posteriors


@pytest.fixture
def chain_episode_set():
    """Three deterministic single-agent episodes over two actions and two observations."""
    episodes = [
        Episode([[0], [1], [0]], [[0], [1]], [0.0, 0.0, 1.0], [[0.5], [0.5], [0.5]], 0),
        Episode([[1], [1], [0]], [[1], [0]], [0.0, 1.0, 0.0], [[0.5], [0.5], [0.5]], 1),
        Episode([[0], [0], [1]], [[0], [0]], [0.5, 0.0, 0.0], [[0.5], [0.5], [0.5]], 2),
    ]
    return EpisodeSet(episodes, 0.9, RewardBounds(0.0, 1.0), (2,), (2,))


@pytest.fixture
def joint_of():
    def factory(*controllers):
        return JointFsc(tuple(controllers))
    return factory
