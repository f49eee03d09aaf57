"""Batch variational Bayes learning of stick-breaking controllers."""

import logging
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from omegaconf import DictConfig
from tqdm import tqdm

from ..errors import InferenceError, NonConvergenceError
from ..fsc.construction import init_from_episodes, pad_controller
from ..fsc.controller import FscTables, JointFsc
from ..sbprior.distributions import (
    GddParams,
    gamma_log_density,
    gdd_log_expectations,
    eta_point_estimate_grid,
    eta_update_conjugate,
    kl_beta,
    kl_beta_gamma_prior,
    kl_dirichlet,
    kl_gamma,
    tail_counts,
)
from ..sbprior.posterior import AgentPosterior, PriorParams, SbPosterior
from .episodes import Episode, EpisodeSet
from .messages import accumulate_counts
from .value import reweight, weighted_pass

logger = logging.getLogger(__name__)

MONOTONE_TOL = 1e-8
CONVERGENCE_RULES = ('per_episode', 'relative')


@dataclass(frozen=True)
class VbConfig:
    """Settings of one batch VB run (the ``vb`` config section)."""

    truncation: int = 50
    init_nodes: int = 5
    init_smoothing: float = 0.05
    pad_smoothing: float = 0.0
    tol: float = 1e-3
    max_iter: int = 200
    eta_inner_iters: int = 10
    occupancy_threshold: float = 1e-6
    convergence: str = 'per_episode'
    strict_convergence: bool = False
    threads: int = 1
    grid_points: int = 200
    grid_refine: int = 10
    grid_lower: float = 1e-4
    grid_upper: float = 1e6

    def __post_init__(self):
        if self.truncation < 1:
            raise ValueError(f"truncation must be >= 1, got {self.truncation}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.eta_inner_iters < 1:
            raise ValueError("eta_inner_iters must be >= 1")
        if not 0.0 < self.init_smoothing <= 1.0:
            raise ValueError(f"init_smoothing must lie in (0, 1], got {self.init_smoothing}")
        if self.convergence not in CONVERGENCE_RULES:
            raise ValueError(f"convergence must be one of {CONVERGENCE_RULES}, got {self.convergence}")

    @classmethod
    def from_config(cls, config: DictConfig) -> 'VbConfig':
        vb = config.vb
        return cls(
            truncation=int(vb.truncation),
            init_nodes=int(vb.init_nodes),
            init_smoothing=float(vb.init_smoothing),
            pad_smoothing=float(vb.get('pad_smoothing', 0.0)),
            tol=float(vb.tol),
            max_iter=int(vb.max_iter),
            eta_inner_iters=int(vb.eta_inner_iters),
            occupancy_threshold=float(vb.occupancy_threshold),
            convergence=str(vb.get('convergence', 'per_episode')),
            strict_convergence=bool(vb.strict_convergence),
            threads=int(vb.threads),
            grid_points=int(vb.grid.points),
            grid_refine=int(vb.grid.refine_factor),
            grid_lower=float(vb.grid.lower),
            grid_upper=float(vb.grid.upper),
        )


def prior_from_config(config: DictConfig) -> PriorParams:
    return PriorParams(
        rho=float(config.prior.rho),
        sigma=float(config.prior.sigma),
        c=float(config.prior.c),
        d=float(config.prior.d),
    )


@dataclass
class SoftCounts:
    """
    Output of one E-step.

    Attributes:
        nu_hat: Per-episode reweighted rewards, arrays of shape ``(T_k + 1,)``
        log_value: ``ln V_hat`` under the controllers used by the E-step
        rho_counts: Per-agent ``(Z, A)`` action-emission counts
        zeta_counts: Per-agent ``(Z, A, O, Z)`` node-transition counts
        underflow: Number of importance terms zeroed for underflow
    """

    nu_hat: List[np.ndarray]
    log_value: float
    rho_counts: List[np.ndarray]
    zeta_counts: List[np.ndarray]
    underflow: int = 0

    @property
    def num_episodes(self) -> int:
        return len(self.nu_hat)

    @property
    def value(self) -> float:
        return float(np.exp(self.log_value))

    def nu_total(self) -> float:
        return float(sum(nu.sum() for nu in self.nu_hat))


def _episode_counts(
    episode: Optional[Episode],
    controllers: JointFsc,
    alphas: Optional[List[np.ndarray]],
    likelihoods: Optional[np.ndarray],
    weights: np.ndarray
) -> List[Tuple[np.ndarray, np.ndarray]]:
    if episode is None:
        return [(np.zeros((fsc.num_nodes, fsc.num_actions)), np.zeros(fsc.transition.shape))
                for fsc in controllers]
    weights = weights[:episode.num_steps]
    out = []
    for n, fsc in enumerate(controllers):
        out.append(accumulate_counts(episode, n, fsc, alphas[n], likelihoods[:, n], weights))
    return out


def e_step(episodes: EpisodeSet, controllers: JointFsc, threads: int = 1) -> SoftCounts:
    """
    Reweighted rewards and soft counts under ``controllers``.

    The forward pass of every (episode, agent) pair gives the importance
    weights; the weighted backward pass then accumulates counts per episode.
    Both stop at the last step of an episode with reward above ``r_min``.
    Episodes are mapped in parallel when ``threads > 1`` and always reduced in
    episode order, so results do not depend on scheduling.

    Args:
        episodes: Training data
        controllers: Under-normalized (VB) or point-valued (EM) joint controller
        threads: Worker threads for the per-episode map

    Returns:
        SoftCounts of the iteration
    """
    controllers.check_model(episodes.action_counts(), episodes.observation_counts())
    K = len(episodes)
    r_min = episodes.reward_bounds.r_min

    forward = [weighted_pass(ep, controllers, r_min, episodes.discount) for ep in episodes]
    weighted = reweight([f.log_terms for f in forward], K)

    jobs = [
        delayed(_episode_counts)(f.episode, controllers, f.alphas, f.likelihoods, nu / K)
        for f, nu in zip(forward, weighted.nu_hat)
    ]
    if threads > 1:
        per_episode = Parallel(n_jobs=threads, prefer='threads')(jobs)
    else:
        per_episode = [fn(*args, **kwargs) for fn, args, kwargs in jobs]

    rho_counts = [np.zeros((fsc.num_nodes, fsc.num_actions)) for fsc in controllers]
    zeta_counts = [np.zeros(fsc.transition.shape) for fsc in controllers]
    for agent_counts in per_episode:
        for n, (rho, zeta) in enumerate(agent_counts):
            rho_counts[n] += rho
            zeta_counts[n] += zeta

    for n in range(len(controllers)):
        if np.any(rho_counts[n] < 0) or np.any(zeta_counts[n] < 0):
            raise InferenceError(f"agent {n}: negative soft count")
    return SoftCounts(weighted.nu_hat, weighted.log_value, rho_counts, zeta_counts, weighted.underflow)


def _update_agent(
    previous: AgentPosterior,
    prior: PriorParams,
    rho_counts: np.ndarray,
    zeta_counts: np.ndarray,
    config: VbConfig
) -> AgentPosterior:
    rho_hat = prior.rho + rho_counts
    sigma_hat = prior.sigma + zeta_counts[..., :-1]
    tail = tail_counts(zeta_counts)
    eta_prior = prior.eta_prior()

    if prior.conjugate:
        gamma = previous.eta_gamma if previous.eta_gamma is not None else eta_prior
        for _ in range(config.eta_inner_iters):
            _, ln1mV = gdd_log_expectations(GddParams(sigma_hat, gamma.mean() + tail))
            gamma = eta_update_conjugate(eta_prior, ln1mV)
        base = np.broadcast_to(gamma.mean(), tail.shape).copy()
        return AgentPosterior(rho_hat, sigma_hat, base + tail, base, gamma)

    point = previous.eta_base
    for _ in range(config.eta_inner_iters):
        _, ln1mV = gdd_log_expectations(GddParams(sigma_hat, point + tail))
        point = eta_point_estimate_grid(
            prior.sigma, ln1mV, eta_prior,
            lower=config.grid_lower, upper=config.grid_upper,
            points=config.grid_points, refine_factor=config.grid_refine,
            current=point,
        )
    return AgentPosterior(rho_hat, sigma_hat, point + tail, point, None)


def update_hyperparameters(
    posterior: SbPosterior,
    counts: SoftCounts,
    config: Optional[VbConfig] = None
) -> SbPosterior:
    """
    M-step: posterior hyperparameters from the soft counts of one E-step.

    ``rho_hat = rho + rho_counts``, ``sigma_hat = sigma + zeta_j`` and
    ``eta_hat = eta + sum_{l>j} zeta_l``. With ``sigma = 1`` the stick
    concentration has a Gamma posterior and ``eta`` is its mean; q(V) and
    q(eta) are updated alternately ``eta_inner_iters`` times. Otherwise
    ``eta`` is a grid-searched point estimate.
    """
    config = config or VbConfig()
    if len(counts.rho_counts) != posterior.num_agents:
        raise InferenceError(
            f"soft counts for {len(counts.rho_counts)} agents, posterior has {posterior.num_agents}"
        )
    agents = [
        _update_agent(prev, posterior.prior, counts.rho_counts[n], counts.zeta_counts[n], config)
        for n, prev in enumerate(posterior.agents)
    ]
    return posterior.with_agents(agents)


def lower_bound(posterior: SbPosterior, counts: SoftCounts) -> float:
    """
    Variational lower bound on ``ln V_hat`` after an E-step under ``posterior``.

    ``counts`` must come from the under-normalized controller of the same
    posterior; the bound is then ``ln V_hat(theta~)`` minus the divergences
    of the parameter posteriors from their priors.
    """
    prior = posterior.prior
    eta_prior = prior.eta_prior()
    bound = counts.log_value
    for agent in posterior.agents:
        bound -= float(kl_dirichlet(agent.rho_hat, prior.rho).sum())
        if agent.sigma_hat.size == 0:
            continue
        if prior.conjugate:
            gamma = agent.eta_gamma if agent.eta_gamma is not None else eta_prior
            bound -= float(kl_beta_gamma_prior(agent.sigma_hat, agent.eta_hat, gamma).sum())
            bound -= float(kl_gamma(gamma, eta_prior).sum())
        else:
            bound -= float(kl_beta(agent.sigma_hat, agent.eta_hat, prior.sigma, agent.eta_base).sum())
            bound += float(gamma_log_density(agent.eta_base, eta_prior).sum())
    return bound


def infer_controller_sizes(posterior: SbPosterior, threshold: float = 1e-6) -> List[int]:
    """Number of nodes per agent that received more than ``threshold`` action mass (at least 1)."""
    sizes = []
    for agent in posterior.agents:
        occupancy = (agent.rho_hat - posterior.prior.rho).sum(axis=1)
        sizes.append(max(1, int(np.count_nonzero(occupancy > threshold))))
    return sizes


def relative_change(current: float, previous: float) -> float:
    """``(current - previous) / |previous|``; ``+inf`` from ``-inf``, absolute change from 0."""
    if previous == -math.inf:
        return math.inf
    if previous == 0.0:
        return current - previous
    return (current - previous) / abs(previous)


def bound_change(current: float, previous: float, num_episodes: int, rule: str = 'per_episode') -> float:
    """
    Stopping statistic of the VB loop.

    ``per_episode`` is the bound increase per episode. ``relative`` is
    ``(LB - LB_prev) / |LB_prev|``, whose denominator includes the divergence
    of every unused stick. Both are ``+inf`` on the first iteration.
    """
    if rule == 'relative':
        return relative_change(current, previous)
    if previous == -math.inf:
        return math.inf
    return (current - previous) / max(1, num_episodes)


@dataclass
class LowerBoundTrace:
    """Per-iteration record of a VB run."""

    lb: List[float] = field(default_factory=list)
    delta: List[float] = field(default_factory=list)
    value_estimates: List[float] = field(default_factory=list)
    sizes: List[List[int]] = field(default_factory=list)
    nu_sums: List[float] = field(default_factory=list)
    underflow: List[int] = field(default_factory=list)
    converged: bool = False

    def __len__(self) -> int:
        return len(self.lb)

    def append(self, lb: float, delta: float, value: float, sizes: Sequence[int],
               nu_sum: float, underflow: int = 0) -> None:
        self.lb.append(float(lb))
        self.delta.append(float(delta))
        self.value_estimates.append(float(value))
        self.sizes.append([int(z) for z in sizes])
        self.nu_sums.append(float(nu_sum))
        self.underflow.append(int(underflow))

    def is_monotone(self, tol: float = MONOTONE_TOL) -> bool:
        return all(b >= a - tol * max(1.0, abs(a)) for a, b in zip(self.lb, self.lb[1:]))

    def rows(self) -> List[dict]:
        """One dict per iteration with keys ``iter, lb, delta_lb, value_estimate, sizes``."""
        return [
            {
                'iter': i + 1,
                'lb': self.lb[i],
                'delta_lb': self.delta[i],
                'value_estimate': self.value_estimates[i],
                'sizes': self.sizes[i],
            }
            for i in range(len(self))
        ]


class VbResult(NamedTuple):
    posterior: SbPosterior
    sizes: List[int]
    trace: LowerBoundTrace
    counts: SoftCounts


def initial_controllers(episodes: EpisodeSet, config: VbConfig) -> JointFsc:
    """Best-episode chains, padded to the truncation level; single-action agents get one node."""
    agents: List[FscTables] = []
    for n, num_actions in enumerate(episodes.action_counts()):
        nodes = 1 if num_actions == 1 else min(config.init_nodes, config.truncation)
        chain = init_from_episodes(episodes, n, nodes, config.init_smoothing)
        agents.append(pad_controller(chain, config.truncation, config.pad_smoothing))
    return JointFsc(tuple(agents))


def run_vb(
    episodes: EpisodeSet,
    config: Optional[VbConfig] = None,
    prior: Optional[PriorParams] = None,
    init: Optional[JointFsc] = None,
    show_progress: bool = False
) -> VbResult:
    """
    Learn stick-breaking controller posteriors from off-policy episodes.

    The first E-step runs under ``init`` (default :func:`initial_controllers`).
    Every later E-step uses the under-normalized controller of the current
    posterior, after which the lower bound is recorded; the loop stops once
    :func:`bound_change` falls below ``config.tol``.

    Args:
        episodes: Training data
        config: VB settings
        prior: Prior hyperparameters
        init: Controllers for the first E-step, with ``truncation`` nodes each
        show_progress: Whether to show a progress bar

    Returns:
        VbResult with the posterior, inferred sizes, trace and last soft counts

    Raises:
        NonConvergenceError: If ``strict_convergence`` is set and ``max_iter`` is reached
    """
    config = config or VbConfig()
    prior = prior or PriorParams()
    num_actions = episodes.action_counts()
    num_observations = episodes.observation_counts()
    posterior = SbPosterior.from_prior(
        num_actions, num_observations, config.truncation, prior,
        eta_bounds=(config.grid_lower, config.grid_upper),
    )
    if init is None:
        init = initial_controllers(episodes, config)
    elif init.sizes != [config.truncation] * len(init):
        raise ValueError(f"initial controllers have sizes {init.sizes}, expected {config.truncation}")

    logger.info(
        "VB: K=%d episodes, N=%d agents, truncation=%d, %s eta update",
        len(episodes), episodes.num_agents, config.truncation,
        'conjugate' if prior.conjugate else 'grid',
    )
    counts = e_step(episodes, init, config.threads)
    posterior = update_hyperparameters(posterior, counts, config)

    trace = LowerBoundTrace()
    previous = -math.inf
    iterations = tqdm(range(config.max_iter), desc="VB", disable=not show_progress)
    for _ in iterations:
        counts = e_step(episodes, posterior.under_normalized(), config.threads)
        bound = lower_bound(posterior, counts)
        delta = bound_change(bound, previous, len(episodes), config.convergence)
        sizes = infer_controller_sizes(posterior, config.occupancy_threshold)
        trace.append(bound, delta, counts.value, sizes, counts.nu_total(), counts.underflow)
        iterations.set_postfix(lb=f"{bound:.4f}", sizes=sizes)
        logger.debug("iter %d: LB=%.8f dLB=%.3e sizes=%s", len(trace), bound, delta, sizes)

        if bound < previous - MONOTONE_TOL * max(1.0, abs(previous)):
            logger.warning("lower bound decreased at iteration %d: %.10f -> %.10f",
                           len(trace), previous, bound)
        if delta < config.tol:
            trace.converged = True
            break
        posterior = update_hyperparameters(posterior, counts, config)
        previous = bound

    sizes = infer_controller_sizes(posterior, config.occupancy_threshold)
    if not trace.converged:
        message = f"VB did not converge in {config.max_iter} iterations"
        if config.strict_convergence:
            raise NonConvergenceError(message, trace)
        logger.warning(message)
    logger.info("VB finished after %d iterations: LB=%.6f, sizes=%s", len(trace), trace.lb[-1], sizes)
    return VbResult(posterior, sizes, trace, counts)
