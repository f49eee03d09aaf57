"""Tests for controller tables, filtering and construction."""

import numpy as np
import pytest

from src.errors import DimensionError, EpisodeDataError, InferenceError, StochasticityError
from src.fsc.construction import (
    best_episode_index,
    init_from_episodes,
    pad_controller,
    posterior_point_estimate,
)
from src.fsc.controller import (
    FscParams,
    JointFsc,
    NodeFilter,
    action_prob,
    random_controller,
    uniform_controller,
)
from src.inference.episodes import Episode, EpisodeSet
from src.model.dpomdp import RewardBounds
from src.sbprior.posterior import AgentPosterior, PriorParams, SbPosterior


def single_episode_set(actions, rewards, num_actions=2, num_observations=1):
    steps = len(actions)
    episode = Episode(
        np.asarray(actions).reshape(steps, 1),
        np.zeros((steps - 1, 1), dtype=int),
        rewards,
        np.full((steps, 1), 0.5),
    )
    return EpisodeSet((episode,), 0.9, RewardBounds(min(rewards), max(rewards)),
                      (num_actions,), (num_observations,))


class TestControllerTables:
    """Validation of point-valued controllers."""

    def test_rows_must_sum_to_one(self):
        with pytest.raises(StochasticityError):
            FscParams(
                initial=[1.0],
                policy=[[0.6, 0.6]],
                transition=np.ones((1, 2, 1, 1)),
            )

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            FscParams(
                initial=[0.5, 0.5],
                policy=[[1.0, 0.0]],
                transition=np.ones((1, 2, 1, 1)),
            )

    def test_dict_round_trip(self, rng):
        joint = JointFsc((random_controller(3, 2, 2, rng), random_controller(2, 3, 1, rng)))
        again = JointFsc.from_dict(joint.to_dict())
        assert again.sizes == [3, 2]
        np.testing.assert_array_equal(again[0].transition, joint[0].transition)

    def test_num_nodes_disagreement(self, rng):
        data = random_controller(3, 2, 2, rng).to_dict()
        data['num_nodes'] = 4
        with pytest.raises(DimensionError):
            FscParams.from_dict(data)

    def test_check_model(self, rng):
        joint = JointFsc((random_controller(2, 3, 2, rng),))
        joint.check_model((3,), (2,))
        with pytest.raises(DimensionError):
            joint.check_model((2,), (2,))

    def test_tables_are_read_only(self, rng):
        fsc = random_controller(2, 2, 2, rng)
        with pytest.raises(ValueError):
            fsc.policy[0, 0] = 1.0


class TestActionProb:
    """Node-marginalized action probabilities."""

    def test_single_node_deterministic(self):
        fsc = FscParams(initial=[1.0], policy=[[1.0, 0.0]], transition=np.ones((1, 2, 2, 1)))
        assert action_prob(fsc, [0, 0, 0], [1, 0, 1], 0) == pytest.approx(1.0)

    def test_uniform_symmetry(self):
        fsc = uniform_controller(2, 3, 2)
        for action in range(3):
            assert action_prob(fsc, [0, 2], [1, 1], action) == pytest.approx(1.0 / 3.0)

    def test_matches_path_enumeration(self, rng, oracle):
        fsc = random_controller(3, 2, 2, rng)
        actions = rng.integers(0, 2, size=6)
        observations = rng.integers(0, 2, size=5)
        joint, _, _ = oracle(fsc, actions, observations, 5)
        history, _, _ = oracle(fsc, actions[:5], observations[:4], 4)
        expected = joint / history
        assert action_prob(fsc, actions[:5], observations, actions[5]) == pytest.approx(expected, abs=1e-12)

    def test_probabilities_sum_to_one(self, rng):
        for _ in range(20):
            fsc = random_controller(int(rng.integers(1, 5)), 3, 2, rng)
            length = int(rng.integers(0, 11))
            actions = rng.integers(0, 3, size=length)
            observations = rng.integers(0, 2, size=length)
            total = sum(action_prob(fsc, actions, observations, a) for a in range(3))
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_history_lengths_must_match(self, rng):
        with pytest.raises(DimensionError):
            action_prob(random_controller(2, 2, 2, rng), [0, 1], [1], 0)

    def test_zero_probability_reports_step(self):
        fsc = FscParams(initial=[1.0], policy=[[1.0, 0.0]], transition=np.ones((1, 2, 1, 1)))
        node_filter = NodeFilter(fsc)
        with pytest.raises(InferenceError) as excinfo:
            node_filter.condition(1, step=4)
        assert excinfo.value.step == 4

    def test_advance_requires_condition(self, rng):
        with pytest.raises(RuntimeError):
            NodeFilter(random_controller(2, 2, 2, rng)).advance(0)


class TestConstruction:
    """Initial controllers and posterior point estimates."""

    def test_chain_from_single_episode(self):
        episodes = single_episode_set([1, 0, 1], [0.0, 0.0, 1.0])
        fsc = init_from_episodes(episodes, 0, 3, smoothing=0.0)
        np.testing.assert_array_equal(fsc.initial, [1.0, 0.0, 0.0])
        np.testing.assert_array_equal(fsc.policy, [[0, 1], [1, 0], [0, 1]])
        assert fsc.transition[0, 1, 0, 1] == 1.0
        assert fsc.transition[1, 0, 0, 2] == 1.0
        assert fsc.transition[2, 1, 0, 0] == 1.0

    def test_full_smoothing_is_uniform(self):
        episodes = single_episode_set([1, 0, 1], [0.0, 0.0, 1.0])
        fsc = init_from_episodes(episodes, 0, 3, smoothing=1.0)
        np.testing.assert_allclose(fsc.policy, 0.5)
        np.testing.assert_allclose(fsc.transition, 1.0 / 3.0)

    def test_best_episode_is_chosen(self):
        episodes = EpisodeSet(
            (
                Episode([[0]], np.zeros((0, 1)), [5.0], [[1.0]], 0),
                Episode([[1]], np.zeros((0, 1)), [7.0], [[1.0]], 1),
            ),
            0.9, RewardBounds(5.0, 7.0), (2,), (1,),
        )
        assert best_episode_index(episodes) == 1
        fsc = init_from_episodes(episodes, 0, 2, smoothing=0.0)
        np.testing.assert_array_equal(fsc.policy, [[0, 1], [0, 1]])

    def test_empty_episode_set(self):
        with pytest.raises(EpisodeDataError):
            EpisodeSet((), 0.9, RewardBounds(0.0, 1.0))

    def test_pad_controller_keeps_active_nodes(self, rng):
        fsc = random_controller(2, 2, 2, rng, deterministic_start=True)
        padded = pad_controller(fsc, 5, smoothing=0.1)
        assert padded.num_nodes == 5
        np.testing.assert_array_equal(padded.initial, [1, 0, 0, 0, 0])
        np.testing.assert_allclose(padded.transition[:2, :, :, :2], 0.9 * fsc.transition)
        np.testing.assert_allclose(padded.transition[:2, :, :, 2:].sum(axis=-1), 0.1)
        np.testing.assert_allclose(padded.policy[2:], 0.5)

    def test_pad_controller_cannot_shrink(self, rng):
        with pytest.raises(ValueError):
            pad_controller(random_controller(3, 2, 2, rng), 2)

    def test_point_estimate_means(self):
        agent = AgentPosterior(
            rho_hat=np.ones((3, 2)),
            sigma_hat=np.ones((3, 2, 1, 2)),
            eta_hat=np.ones((3, 2, 1, 2)),
            eta_base=np.ones((3, 2, 1, 2)),
        )
        posterior = SbPosterior((agent,), PriorParams(), 3)
        fsc = posterior_point_estimate(posterior)[0]
        np.testing.assert_allclose(fsc.policy, 0.5)
        np.testing.assert_allclose(fsc.transition[0, 0, 0], [0.5, 0.25, 0.25])
        np.testing.assert_array_equal(fsc.initial, [1.0, 0.0, 0.0])

    def test_point_estimate_concentrated_policy(self):
        agent = AgentPosterior(
            rho_hat=np.array([[100.0, 0.001]]),
            sigma_hat=np.ones((1, 2, 1, 0)),
            eta_hat=np.ones((1, 2, 1, 0)),
            eta_base=np.ones((1, 2, 1, 0)),
        )
        fsc = posterior_point_estimate(SbPosterior((agent,), PriorParams(), 1))[0]
        np.testing.assert_allclose(fsc.policy[0], [1.0, 0.0], atol=1e-3)
        np.testing.assert_allclose(fsc.transition, 1.0)
