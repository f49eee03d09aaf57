"""Episode generation and Monte-Carlo policy evaluation."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from omegaconf import DictConfig
from tqdm import tqdm

from ..errors import DimensionError, InferenceError
from ..explore.behavior import BehaviorPolicy
from ..fsc.controller import FscTables, JointFsc, NodeFilter
from ..inference.episodes import Episode, EpisodeSet
from ..model.dpomdp import DecPomdpModel

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.SeedSequence]


@dataclass(frozen=True)
class SimulationConfig:
    """Episode collection settings (the ``simulation`` config section)."""

    num_episodes: int = 300
    horizon: int = 50
    seed: int = 0
    epsilon: float = 0.0
    batch_size: int = 50
    iterations: int = 10

    def __post_init__(self):
        if self.num_episodes < 1:
            raise ValueError(f"num_episodes must be >= 1, got {self.num_episodes}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")

    @classmethod
    def from_config(cls, config: DictConfig) -> 'SimulationConfig':
        sim = config.simulation
        return cls(
            num_episodes=int(sim.num_episodes),
            horizon=int(sim.horizon),
            seed=int(sim.seed),
            epsilon=float(sim.epsilon),
            batch_size=int(sim.batch_size),
            iterations=int(sim.iterations),
        )


def episode_streams(seed: Seed, count: int) -> List[np.random.Generator]:
    """One independent generator per episode, derived from ``seed``."""
    sequence = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in sequence.spawn(count)]


def _sample(rng: np.random.Generator, probs: np.ndarray) -> int:
    return int(rng.choice(probs.size, p=probs / probs.sum()))


def rollout(
    model: DecPomdpModel,
    controllers: Sequence[FscTables],
    horizon: int,
    rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Simulate one episode of ``horizon`` decision steps.

    Each agent draws its action from the controller's action distribution
    given its local history, which is the node-marginalized FSC policy.

    Returns:
        ``(actions, observations, rewards, probs)`` with shapes
        ``(horizon, N)``, ``(horizon - 1, N)``, ``(horizon,)``, ``(horizon, N)``
    """
    N = model.num_agents
    if len(controllers) != N:
        raise DimensionError(f"{len(controllers)} controllers for {N} agents")
    actions = np.empty((horizon, N), dtype=np.int64)
    observations = np.empty((max(horizon - 1, 0), N), dtype=np.int64)
    rewards = np.empty(horizon)
    probs = np.empty((horizon, N))

    filters = [NodeFilter(fsc) for fsc in controllers]
    state = _sample(rng, model.initial_belief)
    for t in range(horizon):
        for n, node_filter in enumerate(filters):
            p = node_filter.action_probs()
            a = _sample(rng, p)
            probs[t, n] = p[a]
            node_filter.condition(a, t)
            actions[t, n] = a
        joint = model.joint_action_index(actions[t])
        rewards[t] = model.reward[state, joint]
        if t + 1 < horizon:
            state = _sample(rng, model.transition[state, joint])
            joint_obs = _sample(rng, model.observation[joint, state])
            observations[t] = model.split_joint_observation(joint_obs)
            for n, node_filter in enumerate(filters):
                node_filter.advance(int(observations[t, n]))
    return actions, observations, rewards, probs


def discounted_return(rewards: np.ndarray, discount: float) -> float:
    return float(np.sum(discount ** np.arange(rewards.size) * rewards))


def collect_episodes(
    model: DecPomdpModel,
    behaviors: Sequence[BehaviorPolicy],
    num_episodes: int,
    horizon: int,
    seed: Seed = 0,
    show_progress: bool = False
) -> EpisodeSet:
    """
    Sample episodes under per-agent behavior policies.

    Args:
        model: Environment
        behaviors: One behavior policy per agent
        num_episodes: K
        horizon: Decision steps per episode
        seed: Root seed; episode ``k`` uses the ``k``-th spawned stream
        show_progress: Whether to show a progress bar

    Returns:
        EpisodeSet with the model's discount and reward bounds
    """
    controllers = [behavior.as_fsc() for behavior in behaviors]
    JointFsc(tuple(controllers)).check_model(model.num_actions, model.num_observations)

    episodes = []
    streams = episode_streams(seed, num_episodes)
    for k, rng in enumerate(tqdm(streams, desc="Collecting", disable=not show_progress)):
        actions, observations, rewards, probs = rollout(model, controllers, horizon, rng)
        if np.any(probs <= 0.0):
            raise InferenceError(f"episode {k}: sampled an action with zero behavior probability")
        episodes.append(Episode(actions, observations, rewards, probs, k))
    logger.debug("collected %d episodes of %d steps", num_episodes, horizon)
    return EpisodeSet(
        episodes, model.discount, model.reward_bounds(),
        model.num_actions, model.num_observations,
    )


def evaluate_policy(
    model: DecPomdpModel,
    controllers: JointFsc,
    num_episodes: int = 100,
    horizon: int = 1000,
    seed: Optional[Seed] = 12345,
    show_progress: bool = False
) -> Tuple[float, float]:
    """
    Mean discounted return of ``controllers`` over simulated episodes.

    Returns:
        ``(mean, standard error)``
    """
    controllers.check_model(model.num_actions, model.num_observations)
    streams = episode_streams(0 if seed is None else seed, num_episodes)
    returns = np.array([
        discounted_return(rollout(model, list(controllers), horizon, rng)[2], model.discount)
        for rng in tqdm(streams, desc="Evaluating", disable=not show_progress)
    ])
    std_err = float(returns.std(ddof=1) / np.sqrt(num_episodes)) if num_episodes > 1 else 0.0
    return float(returns.mean()), std_err
