"""Tests for configuration loading, validation and logging setup."""

import logging
import shutil

import pytest

from src.config import ConfigLoader, configure_logging, load_config, load_flat_config
from src.errors import ConfigError
from src.inference.em import EmConfig
from src.inference.vb import VbConfig, prior_from_config
from src.sim.simulator import SimulationConfig

from conftest import ROOT


@pytest.fixture
def config_dir(tmp_path):
    shutil.copy(ROOT / 'config' / 'default.yaml', tmp_path / 'default.yaml')
    return tmp_path


class TestLoadConfig:
    """Defaults, overrides and environment files."""

    def test_defaults(self):
        config = load_config()
        assert config.vb.truncation == 50
        assert config.prior.sigma == 1.0
        assert config.vb.occupancy_threshold == pytest.approx(1e-6)
        assert config.evaluation.horizon == 1000

    def test_dotted_overrides(self):
        config = load_config(overrides=['vb.truncation=7', 'prior.sigma=0.5'])
        assert config.vb.truncation == 7
        assert config.prior.sigma == 0.5

    def test_environment_file_is_merged(self, config_dir):
        (config_dir / 'fast.yaml').write_text("vb:\n  truncation: 3\n  max_iter: 5\n")
        config = load_config(str(config_dir / 'fast.yaml'))
        assert config.vb.truncation == 3
        assert config.vb.tol == pytest.approx(1e-3)

    def test_missing_default(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            ConfigLoader(str(tmp_path)).load()

    @pytest.mark.parametrize('override', [
        'prior.rho=-1',
        'vb.truncation=0',
        'vb.init_smoothing=1.5',
        'vb.init_smoothing=0',
        'em.init_smoothing=0',
        'em.tol=0',
        'em.max_iter=0',
        'simulation.epsilon=2.0',
        'exploration.u1=0',
    ])
    def test_invalid_values(self, override):
        with pytest.raises(ConfigError):
            load_config(overrides=[override])

    def test_missing_section(self, config_dir):
        text = (config_dir / 'default.yaml').read_text()
        (config_dir / 'default.yaml').write_text(text.replace('exploration:', 'unused:'))
        with pytest.raises(ConfigError, match="exploration"):
            load_config(str(config_dir))


class TestFlatConfig:
    """``key=value`` files."""

    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / 'run.cfg'
        path.write_text("# experiment\nvb.tol = 1e-4  # tighter\n\nprior.sigma=0.5\n")
        assert load_flat_config(str(path)) == ['vb.tol=1e-4', 'prior.sigma=0.5']

    def test_line_without_equals(self, tmp_path):
        path = tmp_path / 'run.cfg'
        path.write_text("vb.tol=1e-4\ntruncation\n")
        with pytest.raises(ConfigError, match=":2:"):
            load_flat_config(str(path))

    def test_flat_overrides_apply(self, tmp_path):
        path = tmp_path / 'run.cfg'
        path.write_text("em.num_nodes=3\n")
        config = load_config(overrides=load_flat_config(str(path)))
        assert EmConfig.from_config(config).num_nodes == 3


class TestSectionConfigs:
    """Typed views of the config sections."""

    def test_vb_config(self):
        vb = VbConfig.from_config(load_config())
        assert vb == VbConfig()

    def test_simulation_config(self):
        sim = SimulationConfig.from_config(load_config(overrides=['simulation.horizon=20']))
        assert sim.horizon == 20
        assert sim.num_episodes == 300

    def test_prior(self):
        prior = prior_from_config(load_config(overrides=['prior.sigma=0.5']))
        assert not prior.conjugate

    def test_vb_config_rejects_bad_values(self):
        with pytest.raises(ValueError):
            VbConfig(tol=0.0)


class TestLogging:
    """Root logger setup."""

    def test_environment_variable_wins(self, monkeypatch):
        monkeypatch.setenv('DEC_SBPR_LOG', 'debug')
        configure_logging(load_config())
        assert logging.getLogger().level == logging.DEBUG

    def test_config_level(self, monkeypatch):
        monkeypatch.delenv('DEC_SBPR_LOG', raising=False)
        configure_logging(load_config(overrides=['logging.level=WARNING']))
        assert logging.getLogger().level == logging.WARNING

    def test_unknown_level(self, monkeypatch):
        monkeypatch.setenv('DEC_SBPR_LOG', 'chatty')
        with pytest.raises(ConfigError):
            configure_logging()

    def test_log_file(self, monkeypatch, tmp_path):
        monkeypatch.delenv('DEC_SBPR_LOG', raising=False)
        log_file = tmp_path / 'logs' / 'run.log'
        configure_logging(load_config(overrides=[f'logging.file={log_file}']))
        logging.getLogger('src.test').warning("written")
        for handler in logging.getLogger().handlers:
            handler.flush()
        assert 'written' in log_file.read_text(encoding='utf-8')
