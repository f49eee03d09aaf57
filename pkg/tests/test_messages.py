"""Forward/backward messages checked against exhaustive node-path enumeration."""

import numpy as np
import pytest

from src.errors import DimensionError, InferenceError
from src.fsc.controller import FscParams, random_controller, uniform_controller
from src.inference.episodes import Episode
from src.inference.messages import (
    accumulate_counts,
    backward_messages,
    compute_messages,
    forward_messages,
    is_terminal_reward,
    marginals,
    reward_steps,
)
from src.sbprior.posterior import SbPosterior


def local_episode(actions, observations, rewards=None):
    steps = len(actions)
    if rewards is None:
        rewards = np.ones(steps)
    return Episode(
        np.asarray(actions).reshape(steps, 1),
        np.asarray(observations).reshape(steps - 1, 1),
        rewards,
        np.full((steps, 1), 0.5),
    )


def random_case(rng, max_nodes=3, max_steps=6, num_actions=2, num_observations=2):
    Z = int(rng.integers(1, max_nodes + 1))
    steps = int(rng.integers(1, max_steps + 1))
    fsc = random_controller(Z, num_actions, num_observations, rng)
    actions = rng.integers(0, num_actions, size=steps)
    observations = rng.integers(0, num_observations, size=steps - 1)
    return fsc, local_episode(actions, observations), actions, observations


class TestForward:
    """Filtered node distributions."""

    def test_single_node(self, rng):
        fsc = random_controller(1, 2, 2, rng)
        alpha, norms = forward_messages(local_episode([0, 1, 1], [1, 0]), 0, fsc)
        np.testing.assert_allclose(alpha, 1.0)
        np.testing.assert_allclose(norms, fsc.policy[0, [0, 1, 1]])

    def test_uniform_two_nodes(self):
        alpha, norms = forward_messages(local_episode([0, 2, 1, 1], [1, 0, 1]), 0, uniform_controller(2, 3, 2))
        np.testing.assert_allclose(alpha, 0.5)
        np.testing.assert_allclose(norms, 1.0 / 3.0)

    def test_matches_enumeration(self, rng, oracle):
        for _ in range(200):
            fsc, episode, actions, observations = random_case(rng)
            alpha, norms = forward_messages(episode, 0, fsc)
            for tau in range(episode.num_steps):
                likelihood, phi, _ = oracle(fsc, actions[:tau + 1], observations[:tau], tau)
                np.testing.assert_allclose(alpha[tau], phi[tau], atol=1e-10)
                assert np.prod(norms[:tau + 1]) == pytest.approx(likelihood, rel=1e-9)

    def test_zero_likelihood_reports_step(self):
        fsc = FscParams(initial=[1.0], policy=[[1.0, 0.0]], transition=np.ones((1, 2, 2, 1)))
        with pytest.raises(InferenceError) as excinfo:
            forward_messages(local_episode([0, 0, 1], [0, 1]), 0, fsc)
        assert excinfo.value.step == 2

    def test_action_out_of_range(self, rng):
        with pytest.raises(DimensionError):
            forward_messages(local_episode([0, 3], [0]), 0, random_controller(2, 2, 2, rng))


class TestBackward:
    """Backward messages and pairwise marginals."""

    def test_base_case(self, rng):
        fsc = random_controller(3, 2, 2, rng)
        episode = local_episode([0, 1, 0, 1], [1, 1, 0])
        _, norms = forward_messages(episode, 0, fsc)
        beta = backward_messages(episode, 0, fsc, norms, [3])[3]
        np.testing.assert_allclose(beta[3], 1.0 / norms[3])

    def test_single_node_scaling(self, rng):
        fsc = random_controller(1, 2, 2, rng)
        episode = local_episode([0, 1, 0, 1], [1, 1, 0])
        _, norms = forward_messages(episode, 0, fsc)
        beta = backward_messages(episode, 0, fsc, norms, [3])[3]
        # future likelihood cancels against the scaling except for the own step
        np.testing.assert_allclose(beta[:, 0], 1.0 / norms)

    def test_target_outside_episode(self, rng):
        fsc = random_controller(2, 2, 2, rng)
        episode = local_episode([0, 1], [1])
        _, norms = forward_messages(episode, 0, fsc)
        with pytest.raises(DimensionError):
            backward_messages(episode, 0, fsc, norms, [2])

    def test_marginals_match_enumeration(self, rng, oracle):
        for _ in range(200):
            fsc, episode, actions, observations = random_case(rng)
            alpha, norms = forward_messages(episode, 0, fsc)
            targets = list(range(episode.num_steps))
            betas = backward_messages(episode, 0, fsc, norms, targets)
            for t in targets:
                xi, phi = marginals(alpha, betas[t], norms, fsc, episode, 0)
                _, phi_ref, xi_ref = oracle(fsc, actions[:t + 1], observations[:t], t)
                np.testing.assert_allclose(phi, phi_ref, atol=1e-9)
                np.testing.assert_allclose(xi, xi_ref, atol=1e-9)

    def test_marginal_consistency(self, rng):
        fsc = random_controller(3, 2, 2, rng)
        episode = local_episode([0, 1, 1, 0, 1], [0, 1, 1, 0])
        alpha, norms = forward_messages(episode, 0, fsc)
        beta = backward_messages(episode, 0, fsc, norms, [4])[4]
        xi, phi = marginals(alpha, beta, norms, fsc, episode, 0)
        np.testing.assert_allclose(xi.sum(axis=2), phi[:-1], atol=1e-12)
        np.testing.assert_allclose(xi.sum(axis=1), phi[1:], atol=1e-12)
        np.testing.assert_allclose(phi.sum(axis=1), 1.0, atol=1e-12)

    def test_single_node_marginals(self, rng):
        fsc = random_controller(1, 2, 2, rng)
        episode = local_episode([0, 1, 1], [1, 0])
        alpha, norms = forward_messages(episode, 0, fsc)
        beta = backward_messages(episode, 0, fsc, norms, [2])[2]
        xi, phi = marginals(alpha, beta, norms, fsc, episode, 0)
        np.testing.assert_allclose(xi, 1.0)
        np.testing.assert_allclose(phi, 1.0)

    def test_under_normalized_controller(self, rng, oracle):
        posterior = SbPosterior.from_prior((2,), (2,), 3)
        fsc = posterior.under_normalized()[0]
        actions = np.array([0, 1, 1, 0])
        observations = np.array([1, 0, 1])
        episode = local_episode(actions, observations)
        alpha, norms = forward_messages(episode, 0, fsc)
        beta = backward_messages(episode, 0, fsc, norms, [3])[3]
        xi, phi = marginals(alpha, beta, norms, fsc, episode, 0)
        likelihood, phi_ref, xi_ref = oracle(fsc, actions, observations, 3)
        assert np.prod(norms) == pytest.approx(likelihood, rel=1e-9)
        np.testing.assert_allclose(phi, phi_ref, atol=1e-9)
        np.testing.assert_allclose(xi, xi_ref, atol=1e-9)


class TestRewardSteps:
    """Selection of backward targets."""

    def test_reward_steps(self):
        episode = local_episode([0, 0, 0, 0], [0, 0, 0], rewards=[0.0, 2.0, 0.0, 1.0])
        assert reward_steps(episode, 0.0) == [1, 3]
        assert not is_terminal_reward(episode, 0.0)

    def test_terminal_reward(self):
        episode = local_episode([0, 0, 0], [0, 0], rewards=[-1.0, -1.0, 3.0])
        assert is_terminal_reward(episode, -1.0)
        messages = compute_messages(episode, 0, uniform_controller(2, 2, 2), -1.0)
        assert list(messages.beta) == [2]

    def test_log_likelihood(self, rng):
        fsc = random_controller(2, 2, 2, rng)
        episode = local_episode([0, 1, 1], [1, 0])
        messages = compute_messages(episode, 0, fsc, 0.0)
        assert messages.log_likelihood == pytest.approx(np.sum(np.log(messages.step_likelihoods)))
        assert sorted(messages.beta) == [0, 1, 2]


class TestAccumulateCounts:
    """One-sweep weighted counts against per-target marginals."""

    def test_matches_sum_of_marginals(self, rng):
        for _ in range(50):
            fsc, episode, actions, observations = random_case(rng, max_steps=7)
            alpha, norms = forward_messages(episode, 0, fsc)
            weights = rng.uniform(0.0, 2.0, size=episode.num_steps)
            weights[rng.uniform(size=episode.num_steps) < 0.3] = 0.0
            rho, zeta = accumulate_counts(episode, 0, fsc, alpha, norms, weights)

            rho_ref = np.zeros_like(rho)
            zeta_ref = np.zeros_like(zeta)
            betas = backward_messages(episode, 0, fsc, norms, range(episode.num_steps))
            for t, beta in betas.items():
                xi, phi = marginals(alpha, beta, norms, fsc, episode, 0)
                for tau in range(t + 1):
                    rho_ref[:, actions[tau]] += weights[t] * phi[tau]
                for tau in range(t):
                    zeta_ref[:, actions[tau], observations[tau], :] += weights[t] * xi[tau]
            np.testing.assert_allclose(rho, rho_ref, atol=1e-10)
            np.testing.assert_allclose(zeta, zeta_ref, atol=1e-10)

    def test_count_totals_telescope(self, rng):
        fsc = random_controller(3, 2, 2, rng)
        episode = local_episode([0, 1, 1, 0, 1], [0, 1, 1, 0])
        alpha, norms = forward_messages(episode, 0, fsc)
        weights = np.array([0.5, 0.0, 1.0, 0.25, 2.0])
        rho, zeta = accumulate_counts(episode, 0, fsc, alpha, norms, weights)
        steps = np.arange(5)
        assert rho.sum() == pytest.approx(np.sum(weights * (steps + 1)))
        assert zeta.sum() == pytest.approx(np.sum(weights * steps))

    def test_negative_weight_rejected(self, rng):
        fsc = random_controller(2, 2, 2, rng)
        episode = local_episode([0, 1], [1])
        alpha, norms = forward_messages(episode, 0, fsc)
        with pytest.raises(InferenceError):
            accumulate_counts(episode, 0, fsc, alpha, norms, np.array([1.0, -1.0]))
