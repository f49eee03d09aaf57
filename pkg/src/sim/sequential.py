"""Sequential batch learning and node-count sweeps."""

import logging
import time
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from ..explore.behavior import (
    AuxiliaryFsc,
    BehaviorPolicy,
    DEFAULT_U1,
    joint_exploration_rate,
    random_behavior,
    update_exploration,
)
from ..fsc.construction import posterior_point_estimate
from ..inference.em import EmConfig, run_em_fixed
from ..inference.episodes import EpisodeSet
from ..inference.value import empirical_value, unshifted_value
from ..inference.vb import VbConfig, run_vb
from ..model.dpomdp import DecPomdpModel
from ..sbprior.posterior import PriorParams
from .simulator import SimulationConfig, collect_episodes, evaluate_policy

logger = logging.getLogger(__name__)


@dataclass
class CurvePoint:
    iteration: int
    dataset_size: int
    test_value: float
    std_err: float
    mean_inferred_z: float
    exploration_rate: float

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class SweepPoint:
    num_nodes: int
    seed: int
    empirical_value: float
    test_value: float
    std_err: float
    wall_time: float

    def to_dict(self) -> Dict:
        return asdict(self)


def sequential_batch_learn(
    model: DecPomdpModel,
    sim_config: SimulationConfig,
    vb_config: Optional[VbConfig] = None,
    prior: Optional[PriorParams] = None,
    u1: float = DEFAULT_U1,
    eval_episodes: int = 100,
    eval_horizon: int = 1000,
    eval_seed: int = 12345,
    show_progress: bool = False
) -> List[CurvePoint]:
    """
    Alternate data collection and batch VB learning.

    Each iteration collects ``batch_size`` episodes under the current behavior
    policies, relearns from the whole dataset, evaluates the point-estimate
    controllers and rebuilds the behavior policies from the node reward mass.
    The first batch is collected by uniform exploration.

    Returns:
        One CurvePoint per iteration; ``exploration_rate`` is the rate of the
        policies that collected that iteration's batch
    """
    vb_config = vb_config or VbConfig()
    behaviors: List[BehaviorPolicy] = random_behavior(model.num_actions, model.num_observations)
    batch_seeds = np.random.SeedSequence(sim_config.seed).spawn(sim_config.iterations)
    dataset: Optional[EpisodeSet] = None
    curve: List[CurvePoint] = []

    for i, batch_seed in enumerate(tqdm(batch_seeds, desc="Learning", disable=not show_progress), 1):
        rate = joint_exploration_rate(behaviors)
        batch = collect_episodes(model, behaviors, sim_config.batch_size, sim_config.horizon, batch_seed)
        dataset = batch if dataset is None else dataset.merged(batch)

        result = run_vb(dataset, vb_config, prior)
        controllers = posterior_point_estimate(result.posterior)
        value, std_err = evaluate_policy(model, controllers, eval_episodes, eval_horizon, eval_seed)

        behaviors = [
            BehaviorPolicy(
                fsc,
                update_exploration(AuxiliaryFsc.exploring(fsc.num_nodes, u1), result.counts, n),
            )
            for n, fsc in enumerate(controllers)
        ]
        point = CurvePoint(i, len(dataset), value, std_err, float(np.mean(result.sizes)), rate)
        curve.append(point)
        logger.info(
            "iteration %d: %d episodes, value %.4f +- %.4f, sizes %s, exploration %.3f",
            i, len(dataset), value, std_err, result.sizes, rate,
        )
    return curve


def node_count_sweep(
    model: DecPomdpModel,
    node_counts: Sequence[int],
    seeds: Sequence[int],
    sim_config: SimulationConfig,
    behaviors: Sequence[BehaviorPolicy],
    em_config: Optional[EmConfig] = None,
    eval_episodes: int = 100,
    eval_horizon: int = 1000,
    eval_seed: int = 12345,
    show_progress: bool = False
) -> List[SweepPoint]:
    """
    EM baseline value as a function of the fixed controller size.

    For every seed one training set is collected; EM is then run for every
    entry of ``node_counts`` on that set and the result evaluated by
    simulation.
    """
    em_config = em_config or EmConfig()
    points: List[SweepPoint] = []
    for seed in seeds:
        episodes = collect_episodes(model, behaviors, sim_config.num_episodes, sim_config.horizon, seed)
        for num_nodes in tqdm(node_counts, desc=f"Sweep seed {seed}", disable=not show_progress):
            start = time.perf_counter()
            result = run_em_fixed(episodes, int(num_nodes), em_config)
            wall_time = time.perf_counter() - start
            v_hat = unshifted_value(empirical_value(episodes, result.controllers), episodes)
            value, std_err = evaluate_policy(
                model, result.controllers, eval_episodes, eval_horizon, eval_seed
            )
            points.append(SweepPoint(int(num_nodes), int(seed), v_hat, value, std_err, wall_time))
            logger.info("|Z|=%d seed=%d: value %.4f", num_nodes, seed, value)
    return points
