"""Tests for episode, controller and CSV persistence."""

import io
import json

import numpy as np
import pytest

from src.errors import DimensionError, EpisodeDataError
from src.fsc.controller import JointFsc, random_controller
from src.sbprior.posterior import PriorParams, SbPosterior
from src.storage import ControllerStore, CSVManager, EpisodeStore


class TestEpisodeStore:
    """JSON Lines episode files."""

    def test_round_trip(self, make_episode_set, tmp_path):
        episodes = make_episode_set(4, 5, num_actions=(2, 3), num_observations=(2, 2))
        store = EpisodeStore()
        path = store.save(episodes, tmp_path / 'data' / 'episodes.jsonl')
        again = store.load(path)
        assert len(again) == 4
        assert again.num_actions == (2, 3)
        assert again.discount == episodes.discount
        for a, b in zip(again, episodes):
            np.testing.assert_array_equal(a.actions, b.actions)
            np.testing.assert_array_equal(a.observations, b.observations)
            np.testing.assert_allclose(a.rewards, b.rewards)
            np.testing.assert_allclose(a.behavior_probs, b.behavior_probs)

    def test_line_layout(self, chain_episode_set):
        stream = io.StringIO()
        EpisodeStore().dump(chain_episode_set, stream)
        lines = stream.getvalue().splitlines()
        header = json.loads(lines[0])
        assert header['K'] == 3 and header['N'] == 1
        first = json.loads(lines[1])
        assert first['steps'][0] == {'a': [0], 'r': 0.0, 'q': [0.5], 'o_next': [0]}
        assert 'o_next' not in first['steps'][-1]

    def test_single_step_episode(self):
        lines = [
            json.dumps({'K': 1, 'N': 2, 'gamma': 0.9, 'r_min': 0.0, 'r_max': 1.0}),
            json.dumps({'id': 0, 'steps': [{'a': [0, 1], 'r': 1.0, 'q': [0.5, 0.5]}]}),
        ]
        episodes = EpisodeStore().loads(lines)
        assert episodes[0].horizon == 0
        assert episodes[0].observations.shape == (0, 2)

    def test_count_mismatch(self):
        lines = [
            json.dumps({'K': 2, 'N': 1, 'gamma': 0.9, 'r_min': 0.0, 'r_max': 1.0}),
            json.dumps({'id': 0, 'steps': [{'a': [0], 'r': 1.0, 'q': [0.5]}]}),
        ]
        with pytest.raises(EpisodeDataError):
            EpisodeStore().loads(lines)

    def test_invalid_json_reports_line(self):
        lines = [json.dumps({'K': 1, 'N': 1, 'gamma': 0.9, 'r_min': 0.0, 'r_max': 1.0}), '{"id": 0,']
        with pytest.raises(EpisodeDataError, match="line 2"):
            EpisodeStore().loads(lines)

    def test_zero_behavior_probability(self):
        lines = [
            json.dumps({'K': 1, 'N': 1, 'gamma': 0.9, 'r_min': 0.0, 'r_max': 1.0}),
            json.dumps({'id': 0, 'steps': [{'a': [0], 'r': 1.0, 'q': [0.0]}]}),
        ]
        with pytest.raises(EpisodeDataError):
            EpisodeStore().loads(lines)

    def test_final_step_with_observation(self):
        lines = [
            json.dumps({'K': 1, 'N': 1, 'gamma': 0.9, 'r_min': 0.0, 'r_max': 1.0}),
            json.dumps({'id': 0, 'steps': [{'a': [0], 'r': 1.0, 'q': [0.5], 'o_next': [1]}]}),
        ]
        with pytest.raises(EpisodeDataError):
            EpisodeStore().loads(lines)

    def test_empty_file(self):
        with pytest.raises(EpisodeDataError):
            EpisodeStore().loads(['', '  '])

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            EpisodeStore().load(tmp_path / 'absent.jsonl')


class TestControllerStore:
    """Controller and posterior documents."""

    def test_controller_round_trip(self, rng, tmp_path):
        joint = JointFsc((random_controller(3, 3, 2, rng), random_controller(1, 3, 2, rng)))
        store = ControllerStore(tmp_path)
        path = store.save(joint, 'controllers.json')
        again = store.load(path)
        assert again.sizes == [3, 1]
        np.testing.assert_allclose(again[0].policy, joint[0].policy)

    def test_malformed_document(self, tmp_path):
        (tmp_path / 'bad.json').write_text(json.dumps({'agents': [{'policy': [[1.0]]}]}))
        with pytest.raises(DimensionError):
            ControllerStore(tmp_path).load('bad.json')

    def test_missing_controller(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            ControllerStore(tmp_path).load('nothing.json')

    @pytest.mark.parametrize('sigma', [1.0, 0.5])
    def test_posterior_round_trip(self, sigma, tmp_path):
        posterior = SbPosterior.from_prior((2, 3), (2, 2), 4, PriorParams(sigma=sigma))
        store = ControllerStore(tmp_path)
        again = store.load_posterior(store.save_posterior(posterior))
        assert again.truncation == 4
        assert again.prior == posterior.prior
        np.testing.assert_allclose(again.agents[1].eta_hat, posterior.agents[1].eta_hat)
        assert (again.agents[0].eta_gamma is None) == (sigma != 1.0)


class TestCSVManager:
    """CSV artifacts."""

    def test_trace_columns(self, tmp_path):
        manager = CSVManager(tmp_path)
        rows = [
            {'iter': 1, 'lb': -3.0, 'delta_lb': float('inf'), 'value_estimate': 0.2, 'sizes': [2, 3]},
            {'iter': 2, 'lb': -2.5, 'delta_lb': 0.16, 'value_estimate': 0.25, 'sizes': [2, 2]},
        ]
        manager.save_trace(rows, num_agents=2)
        loaded = manager.load_rows()
        assert list(loaded[0]) == ['iter', 'lb', 'delta_lb', 'value_estimate', 'size_1', 'size_2']
        assert loaded[1]['size_2'] == '2'

    def test_learning_curve_columns(self, tmp_path):
        manager = CSVManager(tmp_path)
        row = {'iteration': 1, 'dataset_size': 50, 'test_value': -30.0, 'std_err': 1.0,
               'mean_inferred_z': 2.5, 'exploration_rate': 1.0}
        path = manager.save_learning_curve([row])
        loaded = manager.load_rows(path)
        assert loaded[0]['mean_inferred_Z'] == '2.5'
        assert loaded[0]['iter'] == '1'

    def test_bench_rows_append(self, tmp_path):
        manager = CSVManager(tmp_path)
        row = {'benchmark': 'dectiger', 'num_agents': 2, 'num_states': 2, 'value': -20.0,
               'std_err': 0.5, 'inferred_sizes': [3, 4], 'wall_time': 1.0, 'reference_value': -18.63}
        manager.save_bench_rows([row])
        manager.save_bench_rows([row], append=True)
        loaded = manager.load_rows(filename='bench.csv')
        assert len(loaded) == 2
        assert loaded[0]['inferred_sizes'] == '3;4'

    def test_missing_csv(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            CSVManager(tmp_path).load_rows(filename='absent.csv')
