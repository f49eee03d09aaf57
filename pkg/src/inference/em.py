"""Fixed-size EM baseline over point-valued controllers."""

import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence, Union

import numpy as np
from omegaconf import DictConfig
from tqdm import tqdm

from ..errors import NonConvergenceError
from ..fsc.construction import init_from_episodes
from ..fsc.controller import FscParams, FscTables, JointFsc
from .episodes import EpisodeSet
from .vb import SoftCounts, e_step, relative_change

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmConfig:
    num_nodes: int = 5
    tol: float = 1e-6
    max_iter: int = 200
    init_smoothing: float = 0.05
    strict_convergence: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.num_nodes < 1:
            raise ValueError(f"num_nodes must be >= 1, got {self.num_nodes}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        # a one-hot chain gives zero likelihood to any episode that leaves it
        if not 0.0 < self.init_smoothing <= 1.0:
            raise ValueError(f"init_smoothing must lie in (0, 1], got {self.init_smoothing}")

    @classmethod
    def from_config(cls, config: DictConfig) -> 'EmConfig':
        em = config.em
        return cls(
            num_nodes=int(em.num_nodes),
            tol=float(em.tol),
            max_iter=int(em.max_iter),
            init_smoothing=float(em.init_smoothing),
            strict_convergence=bool(em.strict_convergence),
            threads=int(config.vb.threads),
        )


@dataclass
class EmTrace:
    """Empirical value before each M-step."""

    values: List[float] = field(default_factory=list)
    delta: List[float] = field(default_factory=list)
    converged: bool = False

    def __len__(self) -> int:
        return len(self.values)

    def is_monotone(self, tol: float = 1e-8) -> bool:
        return all(b >= a - tol * max(1.0, abs(a)) for a, b in zip(self.values, self.values[1:]))

    def rows(self) -> List[dict]:
        return [
            {'iter': i + 1, 'lb': float('nan'), 'delta_lb': self.delta[i], 'value_estimate': v}
            for i, v in enumerate(self.values)
        ]


class EmResult(NamedTuple):
    controllers: JointFsc
    trace: EmTrace


def _normalize_rows(counts: np.ndarray, previous: np.ndarray) -> np.ndarray:
    totals = counts.sum(axis=-1, keepdims=True)
    with np.errstate(invalid='ignore', divide='ignore'):
        table = counts / totals
    return np.where(totals > 0, table, previous)


def em_m_step(controllers: JointFsc, counts: SoftCounts) -> JointFsc:
    """Normalized soft counts; rows without evidence keep their previous values."""
    agents = []
    for n, fsc in enumerate(controllers):
        agents.append(FscParams(
            initial=fsc.initial,
            policy=_normalize_rows(counts.rho_counts[n], fsc.policy),
            transition=_normalize_rows(counts.zeta_counts[n], fsc.transition),
        ))
    return JointFsc(tuple(agents))


def run_em_fixed(
    episodes: EpisodeSet,
    num_nodes: Union[int, Sequence[int]],
    config: Optional[EmConfig] = None,
    init: Optional[JointFsc] = None,
    show_progress: bool = False
) -> EmResult:
    """
    Maximize the empirical value over controllers of fixed size.

    Args:
        episodes: Training data
        num_nodes: Node count, shared or per agent
        config: EM settings
        init: Starting controllers (default: best-episode chains)
        show_progress: Whether to show a progress bar

    Returns:
        EmResult with the final controllers and the value trace

    Raises:
        NonConvergenceError: If ``strict_convergence`` is set and ``max_iter`` is reached
    """
    config = config or EmConfig()
    if isinstance(num_nodes, int):
        num_nodes = [num_nodes] * episodes.num_agents
    if len(num_nodes) != episodes.num_agents:
        raise ValueError(f"{len(num_nodes)} node counts for {episodes.num_agents} agents")

    if init is None:
        agents: List[FscTables] = [
            init_from_episodes(episodes, n, int(z), config.init_smoothing)
            for n, z in enumerate(num_nodes)
        ]
        controllers = JointFsc(tuple(agents))
    else:
        controllers = init

    trace = EmTrace()
    previous = -np.inf
    for _ in tqdm(range(config.max_iter), desc="EM", disable=not show_progress):
        counts = e_step(episodes, controllers, config.threads)
        value = counts.value
        delta = relative_change(value, previous)
        trace.values.append(value)
        trace.delta.append(delta)
        logger.debug("EM iter %d: V=%.8f", len(trace), value)
        if abs(delta) < config.tol:
            trace.converged = True
            break
        controllers = em_m_step(controllers, counts)
        previous = value

    if not trace.converged:
        message = f"EM did not converge in {config.max_iter} iterations"
        if config.strict_convergence:
            raise NonConvergenceError(message, trace)
        logger.warning(message)
    logger.info("EM sizes=%s finished after %d iterations: V=%.6f",
                list(num_nodes), len(trace), trace.values[-1])
    return EmResult(controllers, trace)
