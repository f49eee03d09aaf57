"""Importance-weighted empirical value and reweighted rewards."""

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from ..errors import DimensionError, EpisodeDataError
from ..fsc.controller import JointFsc
from .episodes import Episode, EpisodeSet
from .messages import forward_messages, reward_steps

logger = logging.getLogger(__name__)

# terms whose weight relative to the value falls below exp(-700) are dropped
UNDERFLOW_LOG = -700.0


@dataclass
class ReweightedRewards:
    """Per-step weights ``nu_hat`` (summing to K) and the log of the shifted empirical value."""

    nu_hat: List[np.ndarray]
    log_value: float
    underflow: int = 0

    @property
    def value(self) -> float:
        return float(np.exp(self.log_value))

    def total(self) -> float:
        return float(sum(nu.sum() for nu in self.nu_hat))


def step_likelihoods(episode: Episode, controllers: JointFsc) -> Tuple[np.ndarray, List[np.ndarray]]:
    """
    Forward pass of every agent on one episode.

    Returns:
        ``(T + 1, N)`` array of ``p(a_{n,t} | h_{n,t})`` and the per-agent alphas
    """
    if len(controllers) != episode.num_agents:
        raise DimensionError(f"{len(controllers)} controllers for {episode.num_agents} agents")
    likelihoods = np.empty((episode.num_steps, episode.num_agents))
    alphas = []
    for n, fsc in enumerate(controllers):
        alpha, norms = forward_messages(episode, n, fsc)
        likelihoods[:, n] = norms
        alphas.append(alpha)
    return likelihoods, alphas


def log_importance_terms(
    episode: Episode,
    likelihoods: np.ndarray,
    r_min: float,
    discount: float
) -> np.ndarray:
    """
    ``ln[gamma^t (r_t - r_min) prod_{tau<=t} prod_n p_n / q_n]`` for every step.

    Steps with no shifted reward get ``-inf``.
    """
    steps = episode.num_steps
    shifted = episode.rewards - r_min
    with np.errstate(divide='ignore'):
        log_ratio = np.cumsum(np.sum(np.log(likelihoods) - np.log(episode.behavior_probs), axis=1))
        log_reward = np.where(shifted > 0, np.log(np.where(shifted > 0, shifted, 1.0)), -np.inf)
        if discount > 0:
            log_discount = np.arange(steps) * np.log(discount)
        else:
            log_discount = np.where(np.arange(steps) == 0, 0.0, -np.inf)
    return log_discount + log_reward + log_ratio


class WeightedPass(NamedTuple):
    """Forward pass over the part of an episode that carries shifted reward."""

    log_terms: np.ndarray
    episode: Optional[Episode]
    likelihoods: Optional[np.ndarray]
    alphas: Optional[List[np.ndarray]]


def weighted_prefix(episode: Episode, r_min: float) -> Optional[Episode]:
    """Episode cut after its last step with reward above ``r_min``; None when no step has one."""
    steps = reward_steps(episode, r_min)
    if not steps:
        return None
    return episode.prefix(steps[-1] + 1)


def weighted_pass(episode: Episode, controllers: JointFsc, r_min: float, discount: float) -> WeightedPass:
    """
    Importance terms of one episode, running the forward pass only as far as they need.

    Steps after the last reward-bearing step get ``-inf`` and are never
    filtered, so an action the controllers rule out there is not an error.
    """
    terms = np.full(episode.num_steps, -np.inf)
    prefix = weighted_prefix(episode, r_min)
    if prefix is None:
        return WeightedPass(terms, None, None, None)
    likelihoods, alphas = step_likelihoods(prefix, controllers)
    terms[:prefix.num_steps] = log_importance_terms(prefix, likelihoods, r_min, discount)
    return WeightedPass(terms, prefix, likelihoods, alphas)


def reweight(log_terms: Sequence[np.ndarray], num_episodes: int,
             log_value: Optional[float] = None) -> ReweightedRewards:
    """
    Normalize log importance terms into ``nu_hat``.

    Args:
        log_terms: Per-episode arrays from :func:`log_importance_terms`
        num_episodes: K
        log_value: ``ln V_hat``; computed from the terms when omitted

    Raises:
        EpisodeDataError: If no step carries positive shifted reward
    """
    flat = np.concatenate([np.asarray(t, dtype=float) for t in log_terms])
    if not np.any(np.isfinite(flat)):
        raise EpisodeDataError("no step has reward above r_min; the empirical value is zero")
    if log_value is None:
        log_value = float(logsumexp(flat) - np.log(num_episodes))

    nu_hat = []
    underflow = 0
    for terms in log_terms:
        relative = terms - log_value
        dropped = np.isfinite(terms) & (relative < UNDERFLOW_LOG)
        underflow += int(dropped.sum())
        with np.errstate(under='ignore'):
            nu = np.where(np.isfinite(terms) & ~dropped, np.exp(relative), 0.0)
        nu_hat.append(nu)
    if underflow:
        logger.debug("%d reweighted-reward terms underflowed and were zeroed", underflow)
    return ReweightedRewards(nu_hat, log_value, underflow)


def _all_log_terms(episodes: EpisodeSet, controllers: JointFsc) -> List[np.ndarray]:
    if len(controllers) != episodes.num_agents:
        raise DimensionError(f"{len(controllers)} controllers for {episodes.num_agents} agents")
    r_min = episodes.reward_bounds.r_min
    return [weighted_pass(ep, controllers, r_min, episodes.discount).log_terms for ep in episodes]


def empirical_value(episodes: EpisodeSet, controllers: JointFsc) -> float:
    """
    Shifted empirical value of ``controllers`` on off-policy episodes.

    ``V = (1/K) sum_k sum_t gamma^t (r_t - r_min) prod_{tau<=t} prod_n p_n / q_n``,
    accumulated in log space. Returns 0 when no step has reward above ``r_min``.
    """
    terms = _all_log_terms(episodes, controllers)
    flat = np.concatenate(terms)
    if not np.any(np.isfinite(flat)):
        return 0.0
    return float(np.exp(logsumexp(flat) - np.log(len(episodes))))


def reweighted_rewards(
    episodes: EpisodeSet,
    controllers: JointFsc,
    v_hat: Optional[float] = None
) -> ReweightedRewards:
    """
    Reweighted rewards ``nu_hat_t^k`` under ``controllers``.

    Args:
        episodes: Training data
        controllers: Point-valued or under-normalized joint controller
        v_hat: Empirical value under the same controllers (computed when omitted)

    Raises:
        EpisodeDataError: If ``v_hat`` is not positive
    """
    log_value = None
    if v_hat is not None:
        if not v_hat > 0:
            raise EpisodeDataError(f"empirical value must be positive, got {v_hat}")
        log_value = float(np.log(v_hat))
    return reweight(_all_log_terms(episodes, controllers), len(episodes), log_value)


def reward_offset(episodes: EpisodeSet) -> float:
    """``r_min * (1/K) sum_k sum_{t<=T_k} gamma^t``, the value removed by the shift."""
    gamma = episodes.discount
    total = sum(float(np.sum(gamma ** np.arange(ep.num_steps))) for ep in episodes)
    return episodes.reward_bounds.r_min * total / len(episodes)


def unshifted_value(v_hat: float, episodes: EpisodeSet) -> float:
    """Add back the reward shift so the estimate is comparable with the true value."""
    return float(v_hat) + reward_offset(episodes)
