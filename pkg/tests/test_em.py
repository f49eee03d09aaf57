"""Tests for the fixed-size EM baseline."""

import numpy as np
import pytest

from src.errors import NonConvergenceError
from src.explore.behavior import random_behavior
from src.fsc.controller import JointFsc, random_controller
from src.inference.em import EmConfig, em_m_step, run_em_fixed
from src.inference.value import empirical_value
from src.inference.vb import SoftCounts, e_step
from src.sim.simulator import collect_episodes


class TestEmStep:
    """Normalized soft counts."""

    def test_rows_without_evidence_keep_previous(self, rng):
        fsc = random_controller(2, 2, 2, rng)
        rho = np.array([[3.0, 1.0], [0.0, 0.0]])
        zeta = np.zeros((2, 2, 2, 2))
        zeta[0, 1, 0] = [1.0, 1.0]
        counts = SoftCounts([np.ones(2)], 0.0, [rho], [zeta])
        updated = em_m_step(JointFsc((fsc,)), counts)[0]
        np.testing.assert_allclose(updated.policy[0], [0.75, 0.25])
        np.testing.assert_allclose(updated.policy[1], fsc.policy[1])
        np.testing.assert_allclose(updated.transition[0, 1, 0], [0.5, 0.5])
        np.testing.assert_allclose(updated.transition[1], fsc.transition[1])
        np.testing.assert_array_equal(updated.initial, fsc.initial)


class TestRunEm:
    """End-to-end EM runs."""

    def test_value_never_decreases(self, make_episode_set):
        episodes = make_episode_set(20, 6)
        result = run_em_fixed(episodes, 3, EmConfig(max_iter=30, tol=1e-10))
        assert result.trace.is_monotone()
        assert result.controllers.sizes == [3]

    def test_final_value_matches_trace(self, make_episode_set):
        episodes = make_episode_set(10, 5)
        result = run_em_fixed(episodes, 2, EmConfig(max_iter=1000, tol=1e-6))
        assert result.trace.converged
        assert empirical_value(episodes, result.controllers) == pytest.approx(result.trace.values[-1])

    def test_single_action_converges_immediately(self, single_action_model):
        behaviors = random_behavior(single_action_model.num_actions, single_action_model.num_observations)
        episodes = collect_episodes(single_action_model, behaviors, num_episodes=10, horizon=20, seed=5)
        result = run_em_fixed(episodes, 1, EmConfig(max_iter=10))
        assert result.trace.converged
        assert len(result.trace) <= 2

    def test_per_agent_node_counts(self, make_episode_set):
        episodes = make_episode_set(5, 4, num_actions=(2, 2), num_observations=(2, 2))
        result = run_em_fixed(episodes, [2, 3], EmConfig(max_iter=5))
        assert result.controllers.sizes == [2, 3]

    def test_node_count_per_agent_mismatch(self, make_episode_set):
        episodes = make_episode_set(3, 4)
        with pytest.raises(ValueError):
            run_em_fixed(episodes, [2, 2])

    def test_strict_non_convergence(self, make_episode_set):
        episodes = make_episode_set(5, 5)
        with pytest.raises(NonConvergenceError):
            run_em_fixed(episodes, 2, EmConfig(max_iter=1, strict_convergence=True))

    def test_custom_init(self, make_episode_set, rng):
        episodes = make_episode_set(5, 5)
        init = JointFsc((random_controller(4, 2, 2, rng),))
        result = run_em_fixed(episodes, 4, EmConfig(max_iter=3), init=init)
        first = e_step(episodes, init).value
        assert result.trace.values[0] == pytest.approx(first)

    def test_rows_for_csv(self, make_episode_set):
        result = run_em_fixed(make_episode_set(4, 4), 2, EmConfig(max_iter=2))
        rows = result.trace.rows()
        assert [row['iter'] for row in rows] == list(range(1, len(rows) + 1))


class TestEmConfig:
    """Field validation of the EM settings."""

    @pytest.mark.parametrize('field, value', [
        ('init_smoothing', 0.0),
        ('init_smoothing', 1.5),
        ('tol', 0.0),
        ('tol', -1e-6),
        ('max_iter', 0),
        ('num_nodes', 0),
    ])
    def test_rejects_bad_values(self, field, value):
        with pytest.raises(ValueError, match=field):
            EmConfig(**{field: value})

    def test_full_smoothing_is_allowed(self, make_episode_set):
        result = run_em_fixed(make_episode_set(4, 4), 2, EmConfig(max_iter=2, init_smoothing=1.0))
        assert len(result.trace) >= 1
