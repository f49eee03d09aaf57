"""Building controllers from episodes and from posterior hyperparameters."""

import logging

import numpy as np

from ..errors import EpisodeDataError
from ..inference.episodes import EpisodeSet
from ..sbprior.distributions import gdd_mean
from ..sbprior.posterior import AgentPosterior, SbPosterior
from .controller import FscParams, JointFsc

logger = logging.getLogger(__name__)


def best_episode_index(episodes: EpisodeSet) -> int:
    """Index of the episode with the highest discounted return; ties go to the lowest index."""
    if len(episodes) == 0:
        raise EpisodeDataError("episode set is empty")
    return int(np.argmax(episodes.discounted_returns()))


def init_from_episodes(
    episodes: EpisodeSet,
    agent: int,
    num_nodes: int,
    smoothing: float = 0.05
) -> FscParams:
    """
    Chain controller that replays the best episode's actions.

    Node ``t`` emits the chosen episode's action at step ``t`` (cycling when the
    episode is shorter than ``num_nodes``) and moves to node ``t + 1`` (node
    ``num_nodes - 1`` wraps to node 0). Every policy and transition row is then
    mixed with the uniform distribution at weight ``smoothing``. The start node
    is node 0.

    Args:
        episodes: Training data
        agent: Agent index
        num_nodes: Chain length
        smoothing: Uniform mixing weight in [0, 1]

    Returns:
        Point-valued controller

    Raises:
        EpisodeDataError: If the episode set is empty
    """
    if num_nodes < 1:
        raise ValueError(f"num_nodes must be >= 1, got {num_nodes}")
    if not 0.0 <= smoothing <= 1.0:
        raise ValueError(f"smoothing must lie in [0, 1], got {smoothing}")

    best = best_episode_index(episodes)
    actions = episodes[best].actions[:, agent]
    A = episodes.action_counts()[agent]
    O = episodes.observation_counts()[agent]

    policy = np.zeros((num_nodes, A))
    transition = np.zeros((num_nodes, A, O, num_nodes))
    for node in range(num_nodes):
        policy[node, actions[node % len(actions)]] = 1.0
        transition[node, :, :, (node + 1) % num_nodes] = 1.0
    policy = (1.0 - smoothing) * policy + smoothing / A
    transition = (1.0 - smoothing) * transition + smoothing / num_nodes

    initial = np.zeros(num_nodes)
    initial[0] = 1.0
    logger.debug(
        "agent %d: %d-node chain from episode %d (return %.4f)",
        agent, num_nodes, best, episodes[best].discounted_return(episodes.discount),
    )
    return FscParams(initial=initial, policy=policy, transition=transition)


def pad_controller(fsc: FscParams, num_nodes: int, smoothing: float = 0.0) -> FscParams:
    """
    Embed ``fsc`` into a controller with ``num_nodes`` nodes.

    Active nodes keep their tables, moving to the reserve nodes with total
    probability ``smoothing``. Reserve nodes act and transition uniformly and
    have zero start probability.
    """
    n = fsc.num_nodes
    if num_nodes < n:
        raise ValueError(f"cannot pad {n} nodes down to {num_nodes}")
    if num_nodes == n:
        return fsc
    A, O = fsc.num_actions, fsc.num_observations
    reserve = num_nodes - n

    initial = np.zeros(num_nodes)
    initial[:n] = fsc.initial

    policy = np.full((num_nodes, A), 1.0 / A)
    policy[:n] = fsc.policy

    transition = np.full((num_nodes, A, O, num_nodes), 1.0 / num_nodes)
    transition[:n, :, :, :n] = (1.0 - smoothing) * fsc.transition
    transition[:n, :, :, n:] = smoothing / reserve
    return FscParams(initial=initial, policy=policy, transition=transition)


def agent_point_estimate(posterior: AgentPosterior) -> FscParams:
    """Posterior-mean controller of one agent."""
    if np.any(posterior.rho_hat <= 0):
        raise ValueError("Dirichlet parameters must be positive")
    policy = posterior.rho_hat / posterior.rho_hat.sum(axis=-1, keepdims=True)
    transition = gdd_mean(posterior.sticks())
    initial = np.zeros(posterior.num_nodes)
    initial[0] = 1.0
    return FscParams(initial=initial, policy=policy, transition=transition)


def posterior_point_estimate(posterior: SbPosterior) -> JointFsc:
    """
    Point estimate of every agent's controller.

    Policies are Dirichlet means, transitions are generalized Dirichlet means
    of the stick parameters, and every controller starts in node 0.
    """
    return JointFsc(tuple(agent_point_estimate(agent) for agent in posterior.agents))
