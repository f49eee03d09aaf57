"""Configuration loader using OmegaConf."""

import logging
import os
from omegaconf import OmegaConf, DictConfig
from pathlib import Path
from typing import List, Optional, Sequence

from ..errors import ConfigError

LOG_ENV_VAR = "DEC_SBPR_LOG"


class ConfigLoader:
    """Load and manage configuration using OmegaConf."""

    REQUIRED_SECTIONS = (
        'model', 'prior', 'vb', 'em', 'simulation',
        'evaluation', 'exploration', 'bench', 'logging',
    )

    def __init__(self, config_dir: str = "config"):
        """
        Initialize config loader.

        Args:
            config_dir: Directory containing configuration files
        """
        self.config_dir = Path(config_dir)

    def load(self, env: str = "default") -> DictConfig:
        """
        Load configuration from YAML file.

        Args:
            env: Environment name (default, bench, etc.)

        Returns:
            OmegaConf DictConfig object
        """
        default_config_path = self.config_dir / "default.yaml"

        if not default_config_path.exists():
            raise FileNotFoundError(f"Default config not found: {default_config_path}")

        config = OmegaConf.load(default_config_path)

        # Environment-specific config overrides the defaults
        if env != "default":
            env_config_path = self.config_dir / f"{env}.yaml"
            if env_config_path.exists():
                env_config = OmegaConf.load(env_config_path)
                config = OmegaConf.merge(config, env_config)

        return config

    def validate(self, config: DictConfig) -> bool:
        """
        Validate configuration structure and numeric ranges.

        Args:
            config: Configuration to validate

        Returns:
            True if valid

        Raises:
            ConfigError: If configuration is invalid
        """
        for key in self.REQUIRED_SECTIONS:
            if key not in config:
                raise ConfigError(f"Missing required config section: {key}")

        prior = config.prior
        for key in ('rho', 'sigma', 'c', 'd'):
            if key not in prior:
                raise ConfigError(f"Missing prior config key: {key}")
            if not prior[key] > 0:
                raise ConfigError(f"prior.{key} must be positive, got {prior[key]}")

        vb = config.vb
        if int(vb.truncation) < 1:
            raise ConfigError(f"vb.truncation must be >= 1, got {vb.truncation}")
        if int(vb.init_nodes) < 1:
            raise ConfigError(f"vb.init_nodes must be >= 1, got {vb.init_nodes}")
        if not 0.0 < float(vb.init_smoothing) <= 1.0:
            raise ConfigError(f"vb.init_smoothing must lie in (0, 1], got {vb.init_smoothing}")
        if not float(vb.tol) > 0:
            raise ConfigError(f"vb.tol must be positive, got {vb.tol}")
        if int(vb.max_iter) < 1:
            raise ConfigError(f"vb.max_iter must be >= 1, got {vb.max_iter}")
        if vb.get('convergence', 'per_episode') not in ('per_episode', 'relative'):
            raise ConfigError(f"vb.convergence must be per_episode or relative, got {vb.convergence}")

        em = config.em
        if int(em.num_nodes) < 1:
            raise ConfigError(f"em.num_nodes must be >= 1, got {em.num_nodes}")
        if not 0.0 < float(em.init_smoothing) <= 1.0:
            raise ConfigError(f"em.init_smoothing must lie in (0, 1], got {em.init_smoothing}")
        if not float(em.tol) > 0:
            raise ConfigError(f"em.tol must be positive, got {em.tol}")
        if int(em.max_iter) < 1:
            raise ConfigError(f"em.max_iter must be >= 1, got {em.max_iter}")

        sim = config.simulation
        if int(sim.num_episodes) < 1 or int(sim.horizon) < 1:
            raise ConfigError("simulation.num_episodes and simulation.horizon must be >= 1")
        if not 0.0 <= float(sim.epsilon) <= 1.0:
            raise ConfigError(f"simulation.epsilon must lie in [0, 1], got {sim.epsilon}")
        if int(sim.batch_size) < 1:
            raise ConfigError(f"simulation.batch_size must be >= 1, got {sim.batch_size}")

        if not float(config.exploration.u1) > 0:
            raise ConfigError(f"exploration.u1 must be positive, got {config.exploration.u1}")

        bench = config.bench
        if int(bench.get('horizon', 1)) < 1:
            raise ConfigError(f"bench.horizon must be >= 1, got {bench.horizon}")
        if not 0.0 <= float(bench.get('epsilon', 0.0)) <= 1.0:
            raise ConfigError(f"bench.epsilon must lie in [0, 1], got {bench.epsilon}")

        return True


def load_flat_config(path: str) -> List[str]:
    """
    Read a flat ``key=value`` file into dotted override strings.

    Args:
        path: Path to the file. Blank lines and ``#`` comments are skipped.

    Returns:
        List of ``key=value`` strings suitable for ``OmegaConf.from_dotlist``
    """
    file_path = Path(path)
    if not file_path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")

    overrides = []
    with open(file_path, 'r', encoding='utf-8') as f:
        for number, raw in enumerate(f, start=1):
            line = raw.split('#')[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ConfigError(f"{path}:{number}: expected key=value, got '{line}'")
            key, value = (part.strip() for part in line.split('=', 1))
            overrides.append(f"{key}={value}")
    return overrides


def load_config(
    config_path: Optional[str] = None,
    env: str = "default",
    overrides: Optional[Sequence[str]] = None
) -> DictConfig:
    """
    Convenience function to load configuration.

    Args:
        config_path: Path to config directory or config file (default: "config")
        env: Environment name
        overrides: Dotted ``key=value`` strings merged last

    Returns:
        Configuration dict
    """
    if config_path is None:
        # Try to find config directory relative to current file
        config_path = Path(__file__).parent.parent.parent / "config"
    else:
        config_path = Path(config_path)
        # A file other than default.yaml is merged on top of the defaults beside it
        if config_path.is_file() or config_path.suffix == '.yaml':
            if config_path.stem != 'default':
                env = config_path.stem
            config_path = config_path.parent

    loader = ConfigLoader(str(config_path))
    config = loader.load(env)

    if overrides:
        config = OmegaConf.merge(config, OmegaConf.from_dotlist(list(overrides)))

    loader.validate(config)

    return config


def configure_logging(config: Optional[DictConfig] = None) -> None:
    """
    Configure the root logger.

    The ``DEC_SBPR_LOG`` environment variable wins over ``logging.level``.

    Args:
        config: Loaded configuration (optional)
    """
    level_name = os.environ.get(LOG_ENV_VAR)
    log_file = None
    if config is not None and 'logging' in config:
        level_name = level_name or config.logging.get('level', 'INFO')
        log_file = config.logging.get('file')
    level_name = (level_name or 'INFO').upper()

    level = logging.getLevelName(level_name)
    if not isinstance(level, int):
        raise ConfigError(f"Unknown log level: {level_name}")

    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file, encoding='utf-8'))

    logging.basicConfig(
        level=level,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        handlers=handlers,
        force=True,
    )
