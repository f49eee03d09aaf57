"""Configuration loading and logging setup."""

from .config_loader import ConfigLoader, configure_logging, load_config, load_flat_config

__all__ = ['ConfigLoader', 'configure_logging', 'load_config', 'load_flat_config']
