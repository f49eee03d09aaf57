"""Dec-POMDP model container and joint index helpers."""

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from ..errors import DimensionError, ModelFormatError, StochasticityError

MODEL_TOL = 1e-9


@dataclass(frozen=True)
class RewardBounds:
    """Minimum and maximum reward of a model or an episode set."""

    r_min: float
    r_max: float

    def __post_init__(self):
        if self.r_min > self.r_max:
            raise ValueError(f"r_min ({self.r_min}) exceeds r_max ({self.r_max})")


@dataclass(frozen=True)
class DecPomdpModel:
    """
    Generative Dec-POMDP model.

    Joint actions and joint observations are flattened row-major with agent 0
    as the most significant digit (``numpy.ravel_multi_index`` order).

    Attributes:
        state_names: One name per state
        action_names: Per-agent action names
        observation_names: Per-agent observation names
        transition: ``T[s, a, s']`` over joint actions
        observation: ``O[a, s', o]`` over joint actions and joint observations
        reward: ``r[s, a]``
        discount: Discount factor in [0, 1)
        initial_belief: Distribution over states at step 0
    """

    state_names: List[str]
    action_names: List[List[str]]
    observation_names: List[List[str]]
    transition: np.ndarray
    observation: np.ndarray
    reward: np.ndarray
    discount: float
    initial_belief: np.ndarray
    agent_names: List[str] = field(default_factory=list)

    def __post_init__(self):
        for name in ('transition', 'observation', 'reward', 'initial_belief'):
            array = np.array(getattr(self, name), dtype=float)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        if not self.agent_names:
            object.__setattr__(self, 'agent_names', [str(n) for n in range(self.num_agents)])
        self.validate()

    @property
    def num_agents(self) -> int:
        return len(self.action_names)

    @property
    def num_states(self) -> int:
        return len(self.state_names)

    @property
    def num_actions(self) -> Tuple[int, ...]:
        return tuple(len(names) for names in self.action_names)

    @property
    def num_observations(self) -> Tuple[int, ...]:
        return tuple(len(names) for names in self.observation_names)

    @property
    def num_joint_actions(self) -> int:
        return int(np.prod(self.num_actions))

    @property
    def num_joint_observations(self) -> int:
        return int(np.prod(self.num_observations))

    def joint_action_index(self, actions: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(actions), self.num_actions))

    def split_joint_action(self, index: int) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(index, self.num_actions))

    def joint_observation_index(self, observations: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(observations), self.num_observations))

    def split_joint_observation(self, index: int) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(index, self.num_observations))

    def reward_bounds(self) -> RewardBounds:
        return RewardBounds(float(self.reward.min()), float(self.reward.max()))

    def validate(self, tol: float = MODEL_TOL) -> None:
        """
        Check shapes and stochasticity of every table.

        Raises:
            DimensionError: If a table shape disagrees with the index sets
            StochasticityError: If a distribution does not sum to one
        """
        if self.num_agents < 1:
            raise DimensionError("model must have at least one agent")
        if len(self.observation_names) != self.num_agents:
            raise DimensionError(
                f"{len(self.observation_names)} observation sets for {self.num_agents} agents"
            )

        S, A, O = self.num_states, self.num_joint_actions, self.num_joint_observations
        expected = {
            'transition': (S, A, S),
            'observation': (A, S, O),
            'reward': (S, A),
            'initial_belief': (S,),
        }
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise DimensionError(f"{name} has shape {actual}, expected {shape}")

        if not 0.0 <= self.discount < 1.0:
            raise ModelFormatError(f"discount must lie in [0, 1), got {self.discount}")

        check_distribution(self.initial_belief, 'initial belief', tol)
        check_distribution(self.transition, 'transition', tol)
        check_distribution(self.observation, 'observation', tol)


def check_distribution(table: np.ndarray, name: str, tol: float) -> None:
    """Raise StochasticityError unless the last axis of ``table`` sums to one."""
    if np.any(table < -tol):
        raise StochasticityError(f"{name} has negative entries")
    sums = np.atleast_1d(table.sum(axis=-1))
    bad = np.argwhere(np.abs(sums - 1.0) > tol)
    if bad.size:
        index = tuple(int(i) for i in bad[0])
        raise StochasticityError(
            f"{name} row {index} sums to {float(sums[index]):.10g}"
        )
