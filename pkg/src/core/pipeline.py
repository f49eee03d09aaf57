"""Experiment pipelines behind the command-line tool."""

import logging
import time
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from omegaconf import DictConfig

from ..explore.behavior import expert_behavior
from ..fsc.construction import posterior_point_estimate
from ..fsc.controller import JointFsc
from ..inference.em import EmConfig, run_em_fixed
from ..inference.episodes import EpisodeSet
from ..inference.value import empirical_value, unshifted_value
from ..inference.vb import VbConfig, prior_from_config, run_vb
from ..model.dpomdp import DecPomdpModel
from ..model.evaluation import exact_fsc_value
from ..model.parser import load_dpomdp
from ..sim.sequential import node_count_sweep, sequential_batch_learn
from ..sim.simulator import SimulationConfig, collect_episodes, evaluate_policy
from ..storage.controller_store import ControllerStore
from ..storage.csv_manager import CSVManager
from ..storage.episode_store import EpisodeStore

logger = logging.getLogger(__name__)

MODES = ('sb', 'dp', 'em')


class ExperimentRunner:
    """Run training, evaluation and benchmark experiments from one configuration."""

    def __init__(self, config: DictConfig, output_dir: Optional[str] = None):
        """
        Initialize the runner.

        Args:
            config: OmegaConf configuration object
            output_dir: Artifact directory (default ``output.directory``)
        """
        self.config = config
        self.output_dir = Path(output_dir or config.output.directory)
        self.csv_manager = CSVManager(self.output_dir)
        self.episode_store = EpisodeStore()
        self.controller_store = ControllerStore(self.output_dir)

    def load_model(self, path: Optional[str] = None) -> DecPomdpModel:
        model_path = path or self.config.model.path
        model = load_dpomdp(model_path, tol=float(self.config.model.stochasticity_tol))
        logger.info(
            "loaded %s: %d agents, %d states, joint actions %d",
            model_path, model.num_agents, model.num_states, model.num_joint_actions,
        )
        return model

    def load_controllers(self, path: str) -> JointFsc:
        """Read a joint controller JSON file written by ``train`` or by hand."""
        return self.controller_store.load(path)

    def simulate(
        self,
        model: DecPomdpModel,
        expert: Optional[JointFsc] = None,
        out: Optional[str] = None,
        show_progress: bool = True
    ) -> Tuple[EpisodeSet, str]:
        """Collect episodes under the semi-random expert policy and save them as JSONL."""
        sim = SimulationConfig.from_config(self.config)
        behaviors = expert_behavior(expert, sim.epsilon, model.num_actions, model.num_observations)
        episodes = collect_episodes(model, behaviors, sim.num_episodes, sim.horizon, sim.seed, show_progress)
        path = self.episode_store.save(episodes, out or self.output_dir / 'episodes.jsonl')
        return episodes, path

    def _vb_prior(self, mode: str):
        prior = prior_from_config(self.config)
        if mode == 'dp':
            prior = replace(prior, sigma=1.0)
        return prior

    def train(
        self,
        episodes: EpisodeSet,
        mode: str = 'sb',
        em_nodes: Optional[int] = None,
        show_progress: bool = True
    ) -> Dict:
        """
        Learn controllers and write ``controllers.json``, ``trace.csv`` and (VB) ``posterior.json``.

        Args:
            episodes: Training data
            mode: ``sb`` (configured stick prior), ``dp`` (``sigma = 1``) or ``em``
            em_nodes: Controller size for ``em`` (default ``em.num_nodes``)
            show_progress: Whether to show progress bars

        Returns:
            Summary dictionary
        """
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode}")
        start = time.perf_counter()
        if mode == 'em':
            em_config = EmConfig.from_config(self.config)
            result = run_em_fixed(
                episodes, int(em_nodes or em_config.num_nodes), em_config, show_progress=show_progress
            )
            controllers = result.controllers
            rows = result.trace.rows()
            sizes = controllers.sizes
            converged = result.trace.converged
            posterior_path = None
        else:
            vb_result = run_vb(
                episodes, VbConfig.from_config(self.config), self._vb_prior(mode),
                show_progress=show_progress,
            )
            controllers = posterior_point_estimate(vb_result.posterior)
            rows = vb_result.trace.rows()
            sizes = vb_result.sizes
            converged = vb_result.trace.converged
            posterior_path = self.controller_store.save_posterior(vb_result.posterior)
        wall_time = time.perf_counter() - start

        v_hat = unshifted_value(empirical_value(episodes, controllers), episodes)
        return {
            'mode': mode,
            'iterations': len(rows),
            'converged': converged,
            'sizes': list(sizes),
            'empirical_value': v_hat,
            'wall_time': wall_time,
            'controllers': controllers,
            'controllers_path': self.controller_store.save(controllers),
            'trace_path': self.csv_manager.save_trace(rows, episodes.num_agents),
            'posterior_path': posterior_path,
        }

    def evaluate(self, model: DecPomdpModel, controllers: JointFsc,
                 num_episodes: Optional[int] = None, horizon: Optional[int] = None,
                 seed: Optional[int] = None, show_progress: bool = True) -> Tuple[float, float]:
        """
        Monte-Carlo discounted value of a joint controller.

        Args:
            model: Environment to roll out in
            controllers: Joint controller under test
            num_episodes: Rollouts (default ``evaluation.num_episodes``)
            horizon: Steps per rollout (default ``evaluation.horizon``)
            seed: Simulation seed (default ``evaluation.seed``)
            show_progress: Whether to show a progress bar

        Returns:
            Mean discounted return and its standard error
        """
        evaluation = self.config.evaluation
        return evaluate_policy(
            model, controllers,
            int(num_episodes or evaluation.num_episodes),
            int(horizon or evaluation.horizon),
            int(evaluation.seed if seed is None else seed),
            show_progress,
        )

    def exact(self, model: DecPomdpModel, controllers: JointFsc) -> float:
        """Infinite-horizon value of the controllers from the model's start distribution."""
        return exact_fsc_value(model, controllers)

    def bench_expert(self, folder: Path, model: DecPomdpModel, name: str) -> Optional[JointFsc]:
        """Expert controller listed under ``bench.experts`` for a benchmark, if its file exists."""
        experts = self.config.bench.get('experts', None) or {}
        entry = experts.get(name)
        if not entry:
            return None
        path = Path(entry)
        if not path.is_absolute():
            path = folder / path
        if not path.exists():
            logger.warning("%s: expert controller %s not found, using uniform behavior", name, path)
            return None
        return self.load_controllers(str(path))

    def bench(self, directory: Optional[str] = None, show_progress: bool = True) -> Tuple[List[Dict], str]:
        """
        Run the training pipeline on every ``.dpomdp`` file of a directory.

        Each benchmark is trained ``bench.runs`` times on freshly collected
        episodes (seeds ``simulation.seed + r``) of ``bench.horizon`` steps.
        Episodes follow the benchmark's expert controller with probability
        ``bench.epsilon`` and act uniformly otherwise. The best evaluated run
        is reported.

        Returns:
            Table rows and the CSV path
        """
        bench = self.config.bench
        folder = Path(directory or bench.directory)
        files = sorted(folder.glob('*.dpomdp')) if folder.exists() else []
        sim = SimulationConfig.from_config(self.config)
        horizon = int(bench.get('horizon', sim.horizon))
        epsilon = float(bench.get('epsilon', sim.epsilon))
        references = bench.get('references', {}) or {}
        rows: List[Dict] = []
        for path in files:
            model = self.load_model(str(path))
            expert = self.bench_expert(folder, model, path.stem)
            behaviors = expert_behavior(expert, epsilon, model.num_actions, model.num_observations)
            best: Optional[Dict] = None
            for run in range(int(bench.runs)):
                start = time.perf_counter()
                episodes = collect_episodes(
                    model, behaviors, int(bench.num_episodes), horizon, sim.seed + run
                )
                result = run_vb(episodes, VbConfig.from_config(self.config), self._vb_prior('sb'))
                controllers = posterior_point_estimate(result.posterior)
                wall_time = time.perf_counter() - start
                value, std_err = self.evaluate(model, controllers, show_progress=False)
                logger.info("%s run %d: value %.4f, sizes %s", path.stem, run, value, result.sizes)
                if best is None or value > best['value']:
                    best = {
                        'benchmark': path.stem,
                        'num_agents': model.num_agents,
                        'num_states': model.num_states,
                        'value': value,
                        'std_err': std_err,
                        'inferred_sizes': result.sizes,
                        'wall_time': wall_time,
                        'reference_value': references.get(path.stem, ''),
                    }
            if best is not None:
                rows.append(best)
        csv_path = self.csv_manager.save_bench_rows(rows)
        return rows, csv_path

    def sweep(self, model: DecPomdpModel, expert: Optional[JointFsc] = None,
              show_progress: bool = True) -> Tuple[List[Dict], str]:
        """EM value against fixed controller size; writes ``sweep.csv``."""
        sim = SimulationConfig.from_config(self.config)
        behaviors = expert_behavior(expert, sim.epsilon, model.num_actions, model.num_observations)
        evaluation = self.config.evaluation
        seeds = [sim.seed + r for r in range(int(self.config.bench.runs))]
        points = node_count_sweep(
            model, list(self.config.bench.sweep_nodes), seeds, sim, behaviors,
            EmConfig.from_config(self.config),
            int(evaluation.num_episodes), int(evaluation.horizon), int(evaluation.seed),
            show_progress,
        )
        rows = [point.to_dict() for point in points]
        return rows, self.csv_manager.save_sweep(rows)

    def learn(self, model: DecPomdpModel, show_progress: bool = True) -> Tuple[List[Dict], str]:
        """Sequential batch learning with exploration; writes ``learning_curve.csv``."""
        evaluation = self.config.evaluation
        curve = sequential_batch_learn(
            model,
            SimulationConfig.from_config(self.config),
            VbConfig.from_config(self.config),
            self._vb_prior('sb'),
            float(self.config.exploration.u1),
            int(evaluation.num_episodes), int(evaluation.horizon), int(evaluation.seed),
            show_progress,
        )
        rows = [point.to_dict() for point in curve]
        return rows, self.csv_manager.save_learning_curve(rows)
