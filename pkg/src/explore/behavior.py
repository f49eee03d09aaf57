"""Behavior policies mixing a learned controller with uniform exploration."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..errors import DimensionError
from ..fsc.controller import FscParams, JointFsc, action_prob, uniform_controller
from ..inference.vb import SoftCounts

logger = logging.getLogger(__name__)

DEFAULT_U1 = 100.0


@dataclass(frozen=True)
class AuxiliaryFsc:
    """
    Per-node exploitation probabilities sharing the primary controller's nodes.

    Attributes:
        exploit: ``phi_0`` per node; ``1 - exploit`` is the exploration probability
        u0: Accumulated reward mass per node
        u1: Exploration constant
    """

    exploit: np.ndarray
    u0: np.ndarray
    u1: float = DEFAULT_U1

    def __post_init__(self):
        exploit = np.asarray(self.exploit, dtype=float)
        u0 = np.asarray(self.u0, dtype=float)
        if exploit.ndim != 1 or u0.shape != exploit.shape:
            raise DimensionError(f"exploit shape {exploit.shape} and u0 shape {u0.shape} must match")
        if np.any(exploit < 0.0) or np.any(exploit > 1.0):
            raise ValueError("exploitation probabilities must lie in [0, 1]")
        if np.any(u0 < 0.0):
            raise ValueError("reward mass must be nonnegative")
        if not self.u1 > 0:
            raise ValueError(f"u1 must be positive, got {self.u1}")
        object.__setattr__(self, 'exploit', exploit)
        object.__setattr__(self, 'u0', u0)

    @classmethod
    def from_mass(cls, u0: np.ndarray, u1: float = DEFAULT_U1) -> 'AuxiliaryFsc':
        """``phi_0 = u0 / (u0 + u1)``, the mean of ``Beta(u0, u1)``."""
        u0 = np.asarray(u0, dtype=float)
        return cls(u0 / (u0 + u1), u0, u1)

    @classmethod
    def exploring(cls, num_nodes: int, u1: float = DEFAULT_U1) -> 'AuxiliaryFsc':
        return cls.from_mass(np.zeros(num_nodes), u1)

    @property
    def num_nodes(self) -> int:
        return int(self.exploit.size)

    @property
    def explore(self) -> np.ndarray:
        return 1.0 - self.exploit


@dataclass(frozen=True)
class BehaviorPolicy:
    """Primary controller whose action choice is mixed with uniform exploration."""

    primary: FscParams
    auxiliary: AuxiliaryFsc

    def __post_init__(self):
        if self.auxiliary.num_nodes != self.primary.num_nodes:
            raise DimensionError(
                f"auxiliary has {self.auxiliary.num_nodes} nodes, primary has {self.primary.num_nodes}"
            )

    def as_fsc(self) -> FscParams:
        """The behavior policy as a controller: ``phi_0 pi + phi_1 / |A|``, same ``mu`` and ``W``."""
        exploit = self.auxiliary.exploit[:, None]
        policy = exploit * self.primary.policy + (1.0 - exploit) / self.primary.num_actions
        return FscParams(
            initial=self.primary.initial,
            policy=policy,
            transition=self.primary.transition,
        )


def behavior_action_prob(
    policy: BehaviorPolicy,
    actions: Sequence[int],
    observations: Sequence[int],
    action: int
) -> float:
    """Probability the behavior policy gives ``action`` after the local history."""
    return action_prob(policy.as_fsc(), actions, observations, action)


def update_exploration(aux: AuxiliaryFsc, counts: SoftCounts, agent: int) -> AuxiliaryFsc:
    """
    Exploitation probabilities from the reward mass each node received in the last VB run.

    ``u0(z) = sum_{k,t} nu_hat_t^k sum_tau phi_{t,tau}(z)``, i.e. ``K`` times
    the node's action counts; ``phi_0 = u0 / (u0 + u1)``.
    """
    rho_counts = counts.rho_counts[agent]
    if rho_counts.shape[0] != aux.num_nodes:
        raise DimensionError(f"counts cover {rho_counts.shape[0]} nodes, auxiliary has {aux.num_nodes}")
    u0 = counts.num_episodes * rho_counts.sum(axis=1)
    return AuxiliaryFsc.from_mass(u0, aux.u1)


def expert_mix(expert: FscParams, epsilon: float) -> BehaviorPolicy:
    """Follow ``expert`` with probability ``epsilon``, otherwise act uniformly at random."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    Z = expert.num_nodes
    return BehaviorPolicy(expert, AuxiliaryFsc(np.full(Z, float(epsilon)), np.zeros(Z), DEFAULT_U1))


def random_behavior(num_actions: Sequence[int], num_observations: Sequence[int]) -> List[BehaviorPolicy]:
    """Pure uniform exploration for every agent."""
    return [
        expert_mix(uniform_controller(1, A, O), 0.0)
        for A, O in zip(num_actions, num_observations)
    ]


def expert_behavior(expert: Optional[JointFsc], epsilon: float,
                    num_actions: Sequence[int], num_observations: Sequence[int]) -> List[BehaviorPolicy]:
    """Semi-random behavior around ``expert``; uniform when no expert is given."""
    if expert is None:
        return random_behavior(num_actions, num_observations)
    expert.check_model(num_actions, num_observations)
    return [expert_mix(fsc, epsilon) for fsc in expert]


def exploration_rate(policy: BehaviorPolicy) -> float:
    """Exploration probability averaged over nodes by reward mass (plain mean when no node has any)."""
    u0 = policy.auxiliary.u0
    total = float(u0.sum())
    if total <= 0.0:
        return float(policy.auxiliary.explore.mean())
    return float(np.dot(u0, policy.auxiliary.explore) / total)


def joint_exploration_rate(policies: Sequence[BehaviorPolicy]) -> float:
    return float(np.mean([exploration_rate(p) for p in policies]))
