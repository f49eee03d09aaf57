#!/usr/bin/env python3
"""Dec-SBPR command-line tool: parse models, simulate, train, evaluate and benchmark."""

import sys
import os
import argparse
import logging

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.config.config_loader import configure_logging, load_config, load_flat_config
from src.core.pipeline import MODES, ExperimentRunner
from src.errors import (
    ConfigError,
    DimensionError,
    EpisodeDataError,
    ModelFormatError,
    NonConvergenceError,
    StochasticityError,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NONCONVERGENCE = 3

DATA_ERRORS = (ModelFormatError, StochasticityError, DimensionError, EpisodeDataError, FileNotFoundError)

# flag attribute -> dotted config keys it overrides
FLAG_KEYS = {
    'model': ['model.path'],
    'out': ['output.directory'],
    'truncation': ['vb.truncation'],
    'c': ['prior.c'],
    'd': ['prior.d'],
    'tol': ['vb.tol', 'em.tol'],
    'max_iter': ['vb.max_iter', 'em.max_iter'],
    'seed': ['simulation.seed'],
    'em_nodes': ['em.num_nodes'],
    'epsilon': ['simulation.epsilon'],
    'u1': ['exploration.u1'],
    'threads': ['vb.threads'],
    'batch_size': ['simulation.batch_size'],
    'iterations': ['simulation.iterations'],
    'num_episodes': ['simulation.num_episodes'],
    'horizon': ['simulation.horizon'],
    'eval_episodes': ['evaluation.num_episodes'],
    'eval_horizon': ['evaluation.horizon'],
}


class UsageParser(argparse.ArgumentParser):
    """ArgumentParser that exits with the usage-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_overrides(args) -> list:
    """Flat config file first, then ``--set`` entries, then explicit flags."""
    overrides = []
    if args.flat_config:
        overrides.extend(load_flat_config(args.flat_config))
    overrides.extend(args.set or [])
    for attr, keys in FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides.extend(f"{key}={value}" for key in keys)
    if args.command == 'evaluate' and args.seed is not None:
        overrides.append(f"evaluation.seed={args.seed}")
    return overrides


def cmd_parse(runner, args):
    """Validate a model file and print its dimensions."""
    model = runner.load_model()
    bounds = model.reward_bounds()
    print("\nModel:")
    print("=" * 50)
    print(f"Agents:            {model.num_agents}")
    print(f"States:            {model.num_states}")
    print(f"Actions:           {list(model.num_actions)}")
    print(f"Observations:      {list(model.num_observations)}")
    print(f"Discount:          {model.discount}")
    print(f"Reward range:      [{bounds.r_min}, {bounds.r_max}]")
    print("Stochasticity:     ok")
    print("=" * 50)


def cmd_simulate(runner, args):
    """Collect episodes under the semi-random behavior policy."""
    model = runner.load_model()
    expert = runner.load_controllers(args.expert) if args.expert else None
    episodes, path = runner.simulate(model, expert, args.episodes)
    returns = episodes.discounted_returns()
    print(f"\n✓ Collected {len(episodes)} episodes -> {path}")
    print(f"  Mean discounted return: {returns.mean():.4f}")


def cmd_train(runner, args):
    """Learn controllers from an episode file."""
    if not args.episodes:
        print("Error: --episodes parameter required", file=sys.stderr)
        return EXIT_USAGE
    episodes = runner.episode_store.load(args.episodes)
    summary = runner.train(episodes, args.mode or 'sb', args.em_nodes)
    print("\nTraining Summary:")
    print("=" * 50)
    print(f"Mode:              {summary['mode']}")
    print(f"Iterations:        {summary['iterations']}")
    print(f"Converged:         {summary['converged']}")
    print(f"Controller sizes:  {summary['sizes']}")
    print(f"Empirical value:   {summary['empirical_value']:.4f}")
    print(f"Wall time:         {summary['wall_time']:.2f}s")
    print("=" * 50)
    print(f"✓ Controllers: {summary['controllers_path']}")
    print(f"✓ Trace:       {summary['trace_path']}")
    if summary['posterior_path']:
        print(f"✓ Posterior:   {summary['posterior_path']}")


def cmd_evaluate(runner, args):
    """Monte-Carlo value of saved controllers."""
    if not args.controllers:
        print("Error: --controllers parameter required", file=sys.stderr)
        return EXIT_USAGE
    model = runner.load_model()
    controllers = runner.load_controllers(args.controllers)
    mean, std_err = runner.evaluate(model, controllers)
    print(f"\nValue: {mean:.4f} +- {std_err:.4f}")


def cmd_exact(runner, args):
    """Exact value of saved controllers."""
    if not args.controllers:
        print("Error: --controllers parameter required", file=sys.stderr)
        return EXIT_USAGE
    model = runner.load_model()
    controllers = runner.load_controllers(args.controllers)
    print(f"\nExact value: {runner.exact(model, controllers):.10f}")


def cmd_bench(runner, args):
    """Run the benchmark suite and write the results table."""
    rows, path = runner.bench(args.bench_dir)
    if not rows:
        print("No benchmark files found.")
    else:
        print("\nBenchmark Results:")
        print("=" * 80)
        for row in rows:
            reference = row['reference_value']
            reference = f"{reference:8.2f}" if reference != '' else "       -"
            print(
                f"{row['benchmark']:20} | value {row['value']:9.3f} +- {row['std_err']:6.3f} | "
                f"|Z| {str(row['inferred_sizes']):12} | ref {reference} | {row['wall_time']:7.1f}s"
            )
        print("=" * 80)
    print(f"✓ Table: {path}")


def cmd_sweep(runner, args):
    """EM value against fixed controller size."""
    model = runner.load_model()
    expert = runner.load_controllers(args.expert) if args.expert else None
    rows, path = runner.sweep(model, expert)
    print(f"\n✓ {len(rows)} sweep points -> {path}")


def cmd_learn(runner, args):
    """Sequential batch learning with exploration."""
    model = runner.load_model()
    rows, path = runner.learn(model)
    if rows:
        last = rows[-1]
        print(f"\nFinal value {last['test_value']:.4f} after {last['dataset_size']} episodes")
    print(f"✓ Learning curve: {path}")


def main(argv=None):
    """Main CLI entry point."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=None, help='Config directory or YAML file')
    common.add_argument('--set', action='append', metavar='KEY=VALUE', help='Config override (repeatable)')
    common.add_argument('--flat-config', default=None, help='Flat key=value config file')
    common.add_argument('--model', default=None, help='.dpomdp model file')
    common.add_argument('--episodes', default=None, help='Episode JSONL file (input, or output of simulate)')
    common.add_argument('--controllers', default=None, help='Controller JSON file')
    common.add_argument('--expert', default=None, help='Controller JSON followed with probability epsilon')
    common.add_argument('--out', default=None, help='Output directory')
    common.add_argument('--truncation', type=int, default=None, help='Node truncation level')
    common.add_argument('--c', type=float, default=None, help='Gamma shape of the eta prior')
    common.add_argument('--d', type=float, default=None, help='Gamma rate of the eta prior')
    common.add_argument('--tol', type=float, default=None, help='Convergence tolerance')
    common.add_argument('--max-iter', type=int, default=None, help='Iteration cap')
    common.add_argument('--seed', type=int, default=None, help='Random seed')
    common.add_argument('--mode', choices=MODES, default=None, help='sb, dp (sigma=1) or em')
    common.add_argument('--em-nodes', type=int, default=None, help='Controller size for em mode')
    common.add_argument('--epsilon', type=float, default=None, help='Probability of following the expert')
    common.add_argument('--u1', type=float, default=None, help='Exploration constant')
    common.add_argument('--threads', type=int, default=None, help='E-step worker threads')
    common.add_argument('--batch-size', type=int, default=None, help='Episodes per learning iteration')
    common.add_argument('--iterations', type=int, default=None, help='Sequential learning iterations')
    common.add_argument('--num-episodes', type=int, default=None, help='Episodes to simulate')
    common.add_argument('--horizon', type=int, default=None, help='Steps per simulated episode')
    common.add_argument('--eval-episodes', type=int, default=None, help='Evaluation episodes')
    common.add_argument('--eval-horizon', type=int, default=None, help='Evaluation horizon')
    common.add_argument('--bench-dir', default=None, help='Directory of benchmark .dpomdp files')

    parser = UsageParser(
        description='Dec-SBPR: learning stick-breaking controllers for Dec-POMDPs',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Check a model file
  python run_sbpr.py parse --model data/benchmarks/dectiger.dpomdp

  # Collect 300 random episodes
  python run_sbpr.py simulate --model data/benchmarks/dectiger.dpomdp --num-episodes 300 --out runs/tiger

  # Learn controllers
  python run_sbpr.py train --episodes runs/tiger/episodes.jsonl --truncation 50 --out runs/tiger

  # Evaluate them
  python run_sbpr.py evaluate --model data/benchmarks/dectiger.dpomdp --controllers runs/tiger/controllers.json
  python run_sbpr.py exact --model data/benchmarks/dectiger.dpomdp --controllers runs/tiger/controllers.json

  # Benchmark table, node-count sweep, learning curve
  python run_sbpr.py bench --bench-dir data/benchmarks
  python run_sbpr.py sweep --model data/benchmarks/dectiger.dpomdp
  python run_sbpr.py learn --model data/benchmarks/dectiger.dpomdp --iterations 10
        """
    )
    subparsers = parser.add_subparsers(dest='command', help='Available commands')
    subparsers.add_parser('parse', parents=[common], help='Validate a model file')
    subparsers.add_parser('simulate', parents=[common], help='Collect episodes')
    subparsers.add_parser('train', parents=[common], help='Learn controllers from episodes')
    subparsers.add_parser('evaluate', parents=[common], help='Monte-Carlo controller value')
    subparsers.add_parser('exact', parents=[common], help='Exact controller value')
    subparsers.add_parser('bench', parents=[common], help='Run the benchmark suite')
    subparsers.add_parser('sweep', parents=[common], help='EM value against controller size')
    subparsers.add_parser('learn', parents=[common], help='Sequential batch learning curve')

    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_OK

    commands = {
        'parse': cmd_parse,
        'simulate': cmd_simulate,
        'train': cmd_train,
        'evaluate': cmd_evaluate,
        'exact': cmd_exact,
        'bench': cmd_bench,
        'sweep': cmd_sweep,
        'learn': cmd_learn,
    }

    try:
        config = load_config(args.config, overrides=build_overrides(args))
        configure_logging(config)
        runner = ExperimentRunner(config)
        return commands[args.command](runner, args) or EXIT_OK

    except NonConvergenceError as e:
        print(f"\nError: {e}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except DATA_ERRORS as e:
        print(f"\nError: {e}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, ValueError) as e:
        print(f"\nError: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        logging.getLogger(__name__).exception("unexpected failure")
        print(f"\nError: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
