"""Recorded trajectories used as training data."""

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence, Tuple

import numpy as np

from ..errors import EpisodeDataError
from ..model.dpomdp import RewardBounds


@dataclass(frozen=True)
class Episode:
    """
    One trajectory of ``T + 1`` decision steps.

    Attributes:
        actions: ``(T + 1, N)`` per-agent action indices ``a_0 .. a_T``
        observations: ``(T, N)`` per-agent observations ``o_1 .. o_T``
        rewards: ``(T + 1,)`` global rewards ``r_0 .. r_T``
        behavior_probs: ``(T + 1, N)`` probability each agent's behavior policy
            gave to the recorded action
        episode_id: Position in the originating collection
    """

    actions: np.ndarray
    observations: np.ndarray
    rewards: np.ndarray
    behavior_probs: np.ndarray
    episode_id: int = 0

    def __post_init__(self):
        actions = np.asarray(self.actions, dtype=np.int64)
        observations = np.asarray(self.observations, dtype=np.int64)
        rewards = np.asarray(self.rewards, dtype=float)
        probs = np.asarray(self.behavior_probs, dtype=float)
        if actions.ndim != 2 or actions.shape[0] < 1:
            raise EpisodeDataError(f"episode {self.episode_id}: actions must be (T+1, N)")
        steps, agents = actions.shape
        observations = observations.reshape(steps - 1, agents)
        if rewards.shape != (steps,):
            raise EpisodeDataError(
                f"episode {self.episode_id}: {rewards.shape[0]} rewards for {steps} steps"
            )
        if probs.shape != (steps, agents):
            raise EpisodeDataError(
                f"episode {self.episode_id}: behavior probabilities shape {probs.shape}, "
                f"expected {(steps, agents)}"
            )
        if np.any(probs <= 0.0) or np.any(probs > 1.0):
            raise EpisodeDataError(
                f"episode {self.episode_id}: behavior probabilities must lie in (0, 1]"
            )
        if np.any(actions < 0) or np.any(observations < 0):
            raise EpisodeDataError(f"episode {self.episode_id}: negative index")
        for name, value in (('actions', actions), ('observations', observations),
                            ('rewards', rewards), ('behavior_probs', probs)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def num_steps(self) -> int:
        return int(self.actions.shape[0])

    @property
    def horizon(self) -> int:
        """Index of the last step ``T``."""
        return self.num_steps - 1

    @property
    def num_agents(self) -> int:
        return int(self.actions.shape[1])

    def discounted_return(self, discount: float) -> float:
        return float(np.sum(discount ** np.arange(self.num_steps) * self.rewards))

    def local_history(self, agent: int) -> Tuple[np.ndarray, np.ndarray]:
        """Actions ``a_0 .. a_T`` and observations ``o_1 .. o_T`` of one agent."""
        return self.actions[:, agent], self.observations[:, agent]

    def prefix(self, num_steps: int) -> 'Episode':
        """The first ``num_steps`` decision steps."""
        if not 1 <= num_steps <= self.num_steps:
            raise EpisodeDataError(
                f"episode {self.episode_id}: prefix of {num_steps} steps out of {self.num_steps}"
            )
        if num_steps == self.num_steps:
            return self
        return Episode(
            self.actions[:num_steps],
            self.observations[:num_steps - 1],
            self.rewards[:num_steps],
            self.behavior_probs[:num_steps],
            self.episode_id,
        )


@dataclass(frozen=True)
class EpisodeSet:
    """K trajectories sharing agents, discount and reward bounds."""

    episodes: Tuple[Episode, ...]
    discount: float
    reward_bounds: RewardBounds
    num_actions: Optional[Tuple[int, ...]] = None
    num_observations: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        episodes = tuple(self.episodes)
        object.__setattr__(self, 'episodes', episodes)
        if not episodes:
            raise EpisodeDataError("episode set is empty")
        agents = {ep.num_agents for ep in episodes}
        if len(agents) != 1:
            raise EpisodeDataError(f"episodes disagree on the number of agents: {sorted(agents)}")
        if not 0.0 <= self.discount < 1.0:
            raise EpisodeDataError(f"discount must lie in [0, 1), got {self.discount}")

        low = min(float(ep.rewards.min()) for ep in episodes)
        high = max(float(ep.rewards.max()) for ep in episodes)
        tol = 1e-9 * max(1.0, abs(low), abs(high))
        if low < self.reward_bounds.r_min - tol or high > self.reward_bounds.r_max + tol:
            raise EpisodeDataError(
                f"rewards [{low}, {high}] exceed bounds "
                f"[{self.reward_bounds.r_min}, {self.reward_bounds.r_max}]"
            )

        for name in ('num_actions', 'num_observations'):
            declared = getattr(self, name)
            if declared is not None:
                object.__setattr__(self, name, tuple(int(x) for x in declared))
        self._check_indices()

    def _check_indices(self) -> None:
        if self.num_actions is not None:
            top = np.max([ep.actions.max(axis=0) for ep in self.episodes], axis=0)
            if np.any(top >= np.asarray(self.num_actions)):
                raise EpisodeDataError("action index exceeds the declared action count")
        if self.num_observations is not None:
            observed = [ep.observations.max(axis=0) for ep in self.episodes if ep.horizon > 0]
            if observed and np.any(np.max(observed, axis=0) >= np.asarray(self.num_observations)):
                raise EpisodeDataError("observation index exceeds the declared observation count")

    @classmethod
    def from_episodes(
        cls,
        episodes: Iterable[Episode],
        discount: float,
        reward_bounds: Optional[RewardBounds] = None,
        num_actions: Optional[Sequence[int]] = None,
        num_observations: Optional[Sequence[int]] = None
    ) -> 'EpisodeSet':
        """Build a set; reward bounds default to the observed minimum and maximum."""
        episodes = tuple(episodes)
        if not episodes:
            raise EpisodeDataError("episode set is empty")
        if reward_bounds is None:
            reward_bounds = RewardBounds(
                min(float(ep.rewards.min()) for ep in episodes),
                max(float(ep.rewards.max()) for ep in episodes),
            )
        return cls(
            episodes, discount, reward_bounds,
            tuple(num_actions) if num_actions is not None else None,
            tuple(num_observations) if num_observations is not None else None,
        )

    def __len__(self) -> int:
        return len(self.episodes)

    def __iter__(self) -> Iterator[Episode]:
        return iter(self.episodes)

    def __getitem__(self, k: int) -> Episode:
        return self.episodes[k]

    @property
    def num_agents(self) -> int:
        return self.episodes[0].num_agents

    def action_counts(self) -> Tuple[int, ...]:
        """Declared action counts, or one more than the largest recorded index."""
        if self.num_actions is not None:
            return self.num_actions
        top = np.max([ep.actions.max(axis=0) for ep in self.episodes], axis=0)
        return tuple(int(x) + 1 for x in top)

    def observation_counts(self) -> Tuple[int, ...]:
        if self.num_observations is not None:
            return self.num_observations
        observed = [ep.observations.max(axis=0) for ep in self.episodes if ep.horizon > 0]
        if not observed:
            return tuple(1 for _ in range(self.num_agents))
        return tuple(int(x) + 1 for x in np.max(observed, axis=0))

    def merged(self, other: 'EpisodeSet') -> 'EpisodeSet':
        """Concatenate two sets; ids are renumbered and bounds widened."""
        if other.num_agents != self.num_agents or other.discount != self.discount:
            raise EpisodeDataError("cannot merge episode sets with different agents or discount")
        bounds = RewardBounds(
            min(self.reward_bounds.r_min, other.reward_bounds.r_min),
            max(self.reward_bounds.r_max, other.reward_bounds.r_max),
        )
        renumbered = [
            Episode(ep.actions, ep.observations, ep.rewards, ep.behavior_probs, k)
            for k, ep in enumerate(self.episodes + other.episodes)
        ]
        return EpisodeSet(renumbered, self.discount, bounds, self.num_actions, self.num_observations)

    def discounted_returns(self) -> np.ndarray:
        return np.array([ep.discounted_return(self.discount) for ep in self.episodes])
