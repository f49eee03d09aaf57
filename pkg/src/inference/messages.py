"""Scaled forward/backward messages over controller nodes.

Messages follow the usual scaled Baum-Welch convention. With
``c_tau = p(a_tau | h_tau)`` the forward message ``alpha_tau`` is the filtered
node distribution and the backward message of target step ``t`` satisfies
``beta_{t,t} = 1 / c_t`` and
``beta_{t,tau} = (W[:, a_tau, o_{tau+1}, :] * pi[:, a_{tau+1}]) @ beta_{t,tau+1} / c_tau``.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Tuple

import numpy as np

from ..errors import DimensionError, InferenceError
from ..fsc.controller import NodeFilter, FscTables
from .episodes import Episode

logger = logging.getLogger(__name__)


@dataclass
class MessageSet:
    """Forward quantities of one (episode, agent) pair and any backward messages computed."""

    alpha: np.ndarray
    step_likelihoods: np.ndarray
    beta: Dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def log_likelihood(self) -> float:
        """``ln p(a_{0:T} | o_{1:T})`` under the controller."""
        return float(np.sum(np.log(self.step_likelihoods)))


def _check_episode(episode: Episode, agent: int, fsc: FscTables) -> Tuple[np.ndarray, np.ndarray]:
    if not 0 <= agent < episode.num_agents:
        raise DimensionError(f"agent {agent} out of range for {episode.num_agents} agents")
    actions, observations = episode.local_history(agent)
    if actions.max() >= fsc.num_actions:
        raise DimensionError(
            f"episode {episode.episode_id}: action {actions.max()} exceeds controller size"
        )
    if observations.size and observations.max() >= fsc.num_observations:
        raise DimensionError(
            f"episode {episode.episode_id}: observation {observations.max()} exceeds controller size"
        )
    return actions, observations


def forward_messages(episode: Episode, agent: int, fsc: FscTables) -> Tuple[np.ndarray, np.ndarray]:
    """
    Filtered node distributions and per-step action likelihoods.

    Args:
        episode: Trajectory
        agent: Agent index
        fsc: Point-valued or under-normalized controller of that agent

    Returns:
        ``alpha`` of shape ``(T + 1, Z)`` with unit row sums, and
        ``step_likelihoods`` of shape ``(T + 1,)``

    Raises:
        InferenceError: If a step has zero likelihood (reported with its index)
    """
    actions, observations = _check_episode(episode, agent, fsc)
    steps = episode.num_steps
    alpha = np.empty((steps, fsc.num_nodes))
    norms = np.empty(steps)
    node_filter = NodeFilter(fsc)
    for tau in range(steps):
        norms[tau] = node_filter.condition(int(actions[tau]), tau)
        alpha[tau] = node_filter.posterior
        if tau + 1 < steps:
            node_filter.advance(int(observations[tau]))
    return alpha, norms


def _transfer(fsc: FscTables, actions: np.ndarray, observations: np.ndarray, tau: int) -> np.ndarray:
    """``W[:, a_tau, o_{tau+1}, :] * pi[:, a_{tau+1}]`` as a (Z, Z) matrix."""
    W = fsc.transition[:, actions[tau], observations[tau], :]
    return W * fsc.policy[:, actions[tau + 1]][None, :]


def reward_steps(episode: Episode, r_min: float) -> List[int]:
    """Steps whose shifted reward ``r_t - r_min`` is positive."""
    return [int(t) for t in np.flatnonzero(episode.rewards - r_min > 0.0)]


def is_terminal_reward(episode: Episode, r_min: float) -> bool:
    """True when only the final step carries reward above ``r_min``."""
    return reward_steps(episode, r_min) in ([], [episode.horizon])


def backward_messages(
    episode: Episode,
    agent: int,
    fsc: FscTables,
    step_likelihoods: np.ndarray,
    targets: Iterable[int]
) -> Dict[int, np.ndarray]:
    """
    Backward messages for each reward-bearing target step.

    Args:
        episode: Trajectory
        agent: Agent index
        fsc: Controller used by the forward pass
        step_likelihoods: Normalizers from :func:`forward_messages`
        targets: Target steps ``t``; in terminal-reward episodes only ``T``

    Returns:
        Mapping ``t -> beta_t`` with ``beta_t`` of shape ``(t + 1, Z)``
    """
    actions, observations = _check_episode(episode, agent, fsc)
    out: Dict[int, np.ndarray] = {}
    for t in sorted(set(targets)):
        if not 0 <= t < episode.num_steps:
            raise DimensionError(f"target step {t} outside episode of {episode.num_steps} steps")
        beta = np.empty((t + 1, fsc.num_nodes))
        beta[t] = 1.0 / step_likelihoods[t]
        for tau in range(t - 1, -1, -1):
            beta[tau] = _transfer(fsc, actions, observations, tau) @ beta[tau + 1] / step_likelihoods[tau]
        out[t] = beta
    return out


def marginals(
    alpha: np.ndarray,
    beta: np.ndarray,
    step_likelihoods: np.ndarray,
    fsc: FscTables,
    episode: Episode,
    agent: int
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Node marginals given the actions up to one target step ``t``.

    Args:
        alpha: Forward messages of the episode
        beta: Backward messages of target ``t``, shape ``(t + 1, Z)``
        step_likelihoods: Forward normalizers
        fsc: Controller of the agent
        episode: Trajectory
        agent: Agent index

    Returns:
        ``xi`` of shape ``(t, Z, Z)`` with ``xi[tau, i, j] = p(z_tau=i, z_{tau+1}=j)`` and
        ``phi`` of shape ``(t + 1, Z)`` with ``phi[tau, i] = p(z_tau=i)``
    """
    actions, observations = _check_episode(episode, agent, fsc)
    t = beta.shape[0] - 1
    if alpha.shape[0] <= t or alpha.shape[1] != beta.shape[1]:
        raise DimensionError(f"alpha shape {alpha.shape} does not cover beta shape {beta.shape}")
    phi = step_likelihoods[:t + 1, None] * alpha[:t + 1] * beta
    xi = np.empty((t, fsc.num_nodes, fsc.num_nodes))
    for tau in range(t):
        xi[tau] = alpha[tau][:, None] * _transfer(fsc, actions, observations, tau) * beta[tau + 1][None, :]
    return xi, phi


def compute_messages(episode: Episode, agent: int, fsc: FscTables, r_min: float) -> MessageSet:
    """Forward pass plus backward messages for every reward-bearing step."""
    alpha, norms = forward_messages(episode, agent, fsc)
    if is_terminal_reward(episode, r_min):
        targets = [episode.horizon]
    else:
        targets = reward_steps(episode, r_min)
    beta = backward_messages(episode, agent, fsc, norms, targets)
    return MessageSet(alpha, norms, beta)


def accumulate_counts(
    episode: Episode,
    agent: int,
    fsc: FscTables,
    alpha: np.ndarray,
    step_likelihoods: np.ndarray,
    weights: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Weighted sum of node marginals over all target steps in one backward sweep.

    The aggregate message ``B_tau = sum_{t >= tau} weights_t * beta_{t,tau}``
    obeys ``B_T = weights_T / c_T`` and
    ``B_tau = (weights_tau + M_tau @ B_{tau+1}) / c_tau``, so the cost is
    O(T |Z|^2) regardless of how many steps carry reward.

    Args:
        episode: Trajectory
        agent: Agent index
        fsc: Controller used by the forward pass
        alpha: Forward messages
        step_likelihoods: Forward normalizers
        weights: Per-step weight of each target (``nu_hat / K``)

    Returns:
        ``rho_counts`` of shape ``(Z, A)`` (node occupancy at every emission) and
        ``zeta_counts`` of shape ``(Z, A, O, Z)`` (node transitions)
    """
    actions, observations = _check_episode(episode, agent, fsc)
    steps = episode.num_steps
    Z = fsc.num_nodes
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (steps,):
        raise DimensionError(f"{weights.shape} weights for {steps} steps")
    if np.any(weights < 0):
        raise InferenceError("negative target weight")

    rho_counts = np.zeros((Z, fsc.num_actions))
    zeta_counts = np.zeros((Z, fsc.num_actions, fsc.num_observations, Z))

    B = weights[-1] / step_likelihoods[-1] * np.ones(Z)
    occupancy = np.empty((steps, Z))
    occupancy[-1] = step_likelihoods[-1] * alpha[-1] * B
    for tau in range(steps - 2, -1, -1):
        M = _transfer(fsc, actions, observations, tau)
        zeta_counts[:, actions[tau], observations[tau], :] += alpha[tau][:, None] * M * B[None, :]
        B = (weights[tau] + M @ B) / step_likelihoods[tau]
        occupancy[tau] = step_likelihoods[tau] * alpha[tau] * B

    np.add.at(rho_counts.T, actions, occupancy)
    return rho_counts, zeta_counts
