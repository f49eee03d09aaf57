"""Variational posterior over stick-breaking controllers."""

from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..fsc.controller import JointFsc, UnderNormalizedFsc
from .distributions import (
    GammaParams,
    GddParams,
    dirichlet_log_expectation,
    gdd_log_expectations,
    under_normalized_row,
)


@dataclass(frozen=True)
class PriorParams:
    """Prior hyperparameters shared by all agents."""

    rho: float = 0.1
    sigma: float = 1.0
    c: float = 0.1
    d: float = 1e-6

    def __post_init__(self):
        for name in ('rho', 'sigma', 'c', 'd'):
            if not getattr(self, name) > 0:
                raise ValueError(f"prior {name} must be positive")

    @property
    def conjugate(self) -> bool:
        """True when the sticks are ``Beta(1, eta)`` and ``eta`` has a Gamma posterior."""
        return self.sigma == 1.0

    def eta_prior(self) -> GammaParams:
        return GammaParams(self.c, self.d)


@dataclass(frozen=True)
class AgentPosterior:
    """
    Posterior hyperparameters of one agent's controller.

    Attributes:
        rho_hat: Dirichlet parameters of the action policy, ``(Z, A)``
        sigma_hat: First Beta parameter of every stick, ``(Z, A, O, Z - 1)``
        eta_hat: Second Beta parameter of every stick, same shape
        eta_base: Stick concentration that entered ``eta_hat`` (Gamma mean or grid point)
        eta_gamma: Gamma posterior of the concentration (conjugate mode only)
    """

    rho_hat: np.ndarray
    sigma_hat: np.ndarray
    eta_hat: np.ndarray
    eta_base: np.ndarray
    eta_gamma: Optional[GammaParams] = None

    @property
    def num_nodes(self) -> int:
        return int(self.rho_hat.shape[0])

    @property
    def num_actions(self) -> int:
        return int(self.rho_hat.shape[1])

    @property
    def num_observations(self) -> int:
        return int(self.sigma_hat.shape[2])

    def sticks(self) -> GddParams:
        return GddParams(self.sigma_hat, self.eta_hat)

    def under_normalized(self) -> UnderNormalizedFsc:
        """Geometric-mean controller used by the E-step."""
        initial = np.zeros(self.num_nodes)
        initial[0] = 1.0
        lnV, ln1mV = gdd_log_expectations(self.sticks())
        return UnderNormalizedFsc(
            initial=initial,
            policy=dirichlet_log_expectation(self.rho_hat),
            transition=under_normalized_row(lnV, ln1mV),
        )

    def to_dict(self) -> Dict:
        data = {
            'rho_hat': self.rho_hat.tolist(),
            'sigma_hat': self.sigma_hat.tolist(),
            'eta_hat': self.eta_hat.tolist(),
            'eta_base': self.eta_base.tolist(),
        }
        if self.eta_gamma is not None:
            data['eta_shape'] = np.broadcast_to(self.eta_gamma.c, self.eta_hat.shape).tolist()
            data['eta_rate'] = self.eta_gamma.d.tolist()
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'AgentPosterior':
        gamma = None
        if 'eta_shape' in data:
            gamma = GammaParams(np.asarray(data['eta_shape']), np.asarray(data['eta_rate']))
        return cls(
            rho_hat=np.asarray(data['rho_hat'], dtype=float),
            sigma_hat=np.asarray(data['sigma_hat'], dtype=float),
            eta_hat=np.asarray(data['eta_hat'], dtype=float),
            eta_base=np.asarray(data['eta_base'], dtype=float),
            eta_gamma=gamma,
        )


@dataclass(frozen=True)
class SbPosterior:
    """Per-agent posteriors plus the prior they were built from."""

    agents: Tuple[AgentPosterior, ...]
    prior: PriorParams
    truncation: int

    @classmethod
    def from_prior(
        cls,
        num_actions: Sequence[int],
        num_observations: Sequence[int],
        truncation: int,
        prior: Optional[PriorParams] = None,
        eta_bounds: Tuple[float, float] = (1e-4, 1e6)
    ) -> 'SbPosterior':
        """
        Posterior equal to the prior.

        Args:
            num_actions: Per-agent action counts
            num_observations: Per-agent observation counts
            truncation: Node cap ``Z`` of every controller
            prior: Prior hyperparameters (defaults when omitted)
            eta_bounds: Admissible range of a point ``eta`` (non-conjugate mode)
        """
        if truncation < 1:
            raise ValueError(f"truncation must be >= 1, got {truncation}")
        prior = prior or PriorParams()
        Z = truncation
        agents: List[AgentPosterior] = []
        for A, O in zip(num_actions, num_observations):
            stick_shape = (Z, A, O, Z - 1)
            if prior.conjugate:
                gamma = GammaParams(np.full(stick_shape, prior.c), np.full(stick_shape, prior.d))
                base = gamma.mean()
            else:
                gamma = None
                base = np.full(stick_shape, float(np.clip(prior.c / prior.d, *eta_bounds)))
            agents.append(AgentPosterior(
                rho_hat=np.full((Z, A), prior.rho),
                sigma_hat=np.full(stick_shape, prior.sigma),
                eta_hat=base.copy(),
                eta_base=base,
                eta_gamma=gamma,
            ))
        return cls(tuple(agents), prior, truncation)

    @property
    def num_agents(self) -> int:
        return len(self.agents)

    def under_normalized(self) -> JointFsc:
        return JointFsc(tuple(agent.under_normalized() for agent in self.agents))

    def with_agents(self, agents: Sequence[AgentPosterior]) -> 'SbPosterior':
        return replace(self, agents=tuple(agents))

    def to_dict(self) -> Dict:
        return {
            'truncation': self.truncation,
            'prior': {
                'rho': self.prior.rho, 'sigma': self.prior.sigma,
                'c': self.prior.c, 'd': self.prior.d,
            },
            'agents': [agent.to_dict() for agent in self.agents],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'SbPosterior':
        return cls(
            agents=tuple(AgentPosterior.from_dict(a) for a in data['agents']),
            prior=PriorParams(**data['prior']),
            truncation=int(data['truncation']),
        )
