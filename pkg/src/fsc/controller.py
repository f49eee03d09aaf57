"""Finite-state controller tables, node filtering and JSON conversion."""

from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DimensionError, InferenceError, StochasticityError
from ..model.dpomdp import check_distribution

FSC_TOL = 1e-9


@dataclass(frozen=True)
class FscTables:
    """Shared storage for point-valued and under-normalized controllers."""

    initial: np.ndarray      # (Z,)
    policy: np.ndarray       # (Z, A)
    transition: np.ndarray   # (Z, A, O, Z)

    def __post_init__(self):
        for name in ('initial', 'policy', 'transition'):
            array = np.array(getattr(self, name), dtype=float)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        self._check_shapes()
        self.validate()

    def _check_shapes(self) -> None:
        if self.initial.ndim != 1 or self.initial.size == 0:
            raise DimensionError("controller needs at least one node")
        Z = self.initial.size
        if self.policy.ndim != 2 or self.policy.shape[0] != Z:
            raise DimensionError(f"policy shape {self.policy.shape} does not match {Z} nodes")
        A = self.policy.shape[1]
        if self.transition.ndim != 4 or self.transition.shape[:2] != (Z, A) \
                or self.transition.shape[3] != Z:
            raise DimensionError(
                f"transition shape {self.transition.shape} does not match (Z={Z}, A={A}, O, Z)"
            )

    def validate(self) -> None:
        raise NotImplementedError

    @property
    def num_nodes(self) -> int:
        return int(self.initial.size)

    @property
    def num_actions(self) -> int:
        return int(self.policy.shape[1])

    @property
    def num_observations(self) -> int:
        return int(self.transition.shape[2])

    def to_dict(self) -> Dict:
        return {
            'num_nodes': self.num_nodes,
            'initial': self.initial.tolist(),
            'policy': self.policy.tolist(),
            'transition': self.transition.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict):
        fsc = cls(
            initial=np.asarray(data['initial'], dtype=float),
            policy=np.asarray(data['policy'], dtype=float),
            transition=np.asarray(data['transition'], dtype=float),
        )
        if 'num_nodes' in data and int(data['num_nodes']) != fsc.num_nodes:
            raise DimensionError(
                f"num_nodes {data['num_nodes']} disagrees with {fsc.num_nodes} table rows"
            )
        return fsc


@dataclass(frozen=True)
class FscParams(FscTables):
    """
    Point-valued stochastic controller of one agent.

    ``policy[z, a]`` is the probability of action ``a`` in node ``z`` and
    ``transition[z, a, o, z']`` the probability of moving to ``z'`` after
    taking ``a`` and observing ``o``.
    """

    def validate(self) -> None:
        for name in ('initial', 'policy', 'transition'):
            table = getattr(self, name)
            if np.any(table < -FSC_TOL) or np.any(table > 1.0 + FSC_TOL):
                raise StochasticityError(f"{name} entries must lie in [0, 1]")
        check_distribution(self.initial, 'controller initial', FSC_TOL)
        check_distribution(self.policy, 'controller policy', FSC_TOL)
        check_distribution(self.transition, 'controller transition', FSC_TOL)


@dataclass(frozen=True)
class UnderNormalizedFsc(FscTables):
    """Controller of geometric-mean parameters; rows may sum to less than one."""

    def validate(self) -> None:
        for name in ('policy', 'transition'):
            table = getattr(self, name)
            if np.any(table < 0.0) or np.any(table > 1.0 + FSC_TOL):
                raise StochasticityError(f"under-normalized {name} entries must lie in [0, 1]")
            if np.any(table.sum(axis=-1) > 1.0 + FSC_TOL):
                raise StochasticityError(f"under-normalized {name} row sums exceed one")


@dataclass(frozen=True)
class JointFsc:
    """One controller per agent."""

    agents: Tuple[FscTables, ...]

    def __post_init__(self):
        object.__setattr__(self, 'agents', tuple(self.agents))
        if not self.agents:
            raise DimensionError("joint controller needs at least one agent")

    def __len__(self) -> int:
        return len(self.agents)

    def __getitem__(self, n: int) -> FscTables:
        return self.agents[n]

    def __iter__(self) -> Iterator[FscTables]:
        return iter(self.agents)

    @property
    def num_agents(self) -> int:
        return len(self.agents)

    @property
    def sizes(self) -> List[int]:
        return [fsc.num_nodes for fsc in self.agents]

    def check_model(self, num_actions: Sequence[int], num_observations: Sequence[int]) -> None:
        """Raise DimensionError unless agent tables match the given per-agent sizes."""
        if len(num_actions) != self.num_agents:
            raise DimensionError(
                f"{self.num_agents} controllers for {len(num_actions)} agents"
            )
        for n, fsc in enumerate(self.agents):
            if fsc.num_actions != num_actions[n] or fsc.num_observations != num_observations[n]:
                raise DimensionError(
                    f"agent {n}: controller has |A|={fsc.num_actions}, |O|={fsc.num_observations}; "
                    f"expected |A|={num_actions[n]}, |O|={num_observations[n]}"
                )

    def to_dict(self) -> Dict:
        return {'agents': [fsc.to_dict() for fsc in self.agents]}

    @classmethod
    def from_dict(cls, data: Dict) -> 'JointFsc':
        return cls(tuple(FscParams.from_dict(agent) for agent in data['agents']))


class NodeFilter:
    """
    Incremental node belief of one controller along a local history.

    ``predictive`` holds the (possibly under-normalized) node weights before
    the next action is conditioned on. Each step costs O(|Z|^2).
    """

    def __init__(self, fsc: FscTables):
        self.fsc = fsc
        self.predictive = fsc.initial.copy()
        self.posterior: Optional[np.ndarray] = None
        self._last_action: Optional[int] = None

    def action_probs(self) -> np.ndarray:
        """Probability of every action given the history so far."""
        return self.predictive @ self.fsc.policy

    def action_prob(self, action: int) -> float:
        _check_index(action, self.fsc.num_actions, 'action')
        return float(self.predictive @ self.fsc.policy[:, action])

    def condition(self, action: int, step: Optional[int] = None) -> float:
        """
        Condition the node belief on ``action``.

        Returns:
            The normalizer ``p(a | h)``

        Raises:
            InferenceError: If the action has zero probability under the filter
        """
        _check_index(action, self.fsc.num_actions, 'action')
        joint = self.predictive * self.fsc.policy[:, action]
        norm = float(joint.sum())
        if not norm > 0.0:
            raise InferenceError(f"zero probability for action {action}", step)
        self.posterior = joint / norm
        self._last_action = action
        return norm

    def advance(self, observation: int) -> np.ndarray:
        """Move the conditioned belief through the node transition for ``observation``."""
        if self.posterior is None:
            raise RuntimeError("advance() called before condition()")
        _check_index(observation, self.fsc.num_observations, 'observation')
        self.predictive = self.posterior @ self.fsc.transition[:, self._last_action, observation, :]
        self.posterior = None
        return self.predictive


def action_prob(
    fsc: FscTables,
    actions: Sequence[int],
    observations: Sequence[int],
    action: int
) -> float:
    """
    Probability of ``action`` given the local history.

    Args:
        fsc: Point-valued or under-normalized controller
        actions: Past actions ``a_0 .. a_{t-1}``
        observations: Observations ``o_1 .. o_t`` (same length as ``actions``)
        action: Query action ``a_t``

    Returns:
        ``p(a_t | h_t)`` computed by forward filtering over nodes
    """
    if len(actions) != len(observations):
        raise DimensionError(
            f"history has {len(actions)} actions but {len(observations)} observations"
        )
    node_filter = NodeFilter(fsc)
    for step, (a, o) in enumerate(zip(actions, observations)):
        node_filter.condition(a, step)
        node_filter.advance(o)
    return node_filter.action_prob(action)


def uniform_controller(num_nodes: int, num_actions: int, num_observations: int) -> FscParams:
    """Controller with uniform initial, policy and transition tables."""
    return FscParams(
        initial=np.full(num_nodes, 1.0 / num_nodes),
        policy=np.full((num_nodes, num_actions), 1.0 / num_actions),
        transition=np.full((num_nodes, num_actions, num_observations, num_nodes), 1.0 / num_nodes),
    )


def random_controller(
    num_nodes: int,
    num_actions: int,
    num_observations: int,
    rng: np.random.Generator,
    concentration: float = 1.0,
    deterministic_start: bool = False
) -> FscParams:
    """Controller whose rows are drawn from a symmetric Dirichlet."""
    if deterministic_start:
        initial = np.zeros(num_nodes)
        initial[0] = 1.0
    else:
        initial = rng.dirichlet(np.full(num_nodes, concentration))
    policy = rng.dirichlet(np.full(num_actions, concentration), size=num_nodes)
    transition = rng.dirichlet(
        np.full(num_nodes, concentration), size=(num_nodes, num_actions, num_observations)
    )
    return FscParams(initial=initial, policy=policy, transition=transition)


def _check_index(index: int, size: int, what: str) -> None:
    if not 0 <= index < size:
        raise IndexError(f"{what} index {index} out of range [0, {size})")
