"""Exact controller value under transformations of the model."""

from dataclasses import replace

import pytest

from src.fsc.controller import JointFsc, random_controller
from src.model.evaluation import exact_fsc_value, fsc_value_table


class TestRewardShift:
    """Adding a constant to every reward adds its discounted sum to the value."""

    @pytest.mark.parametrize('shift', [-101.0, 0.5, 20.0])
    def test_dectiger(self, dectiger, rng, shift):
        controllers = JointFsc((random_controller(3, 3, 2, rng), random_controller(2, 3, 2, rng)))
        shifted = replace(dectiger, reward=dectiger.reward + shift)
        expected = exact_fsc_value(dectiger, controllers) + shift / (1.0 - dectiger.discount)
        assert exact_fsc_value(shifted, controllers) == pytest.approx(expected, abs=1e-6)

    def test_every_entry_of_the_table_moves(self, make_random_model, rng):
        model = make_random_model(discount=0.8)
        controllers = JointFsc((random_controller(2, 2, 2, rng), random_controller(3, 2, 2, rng)))
        base = fsc_value_table(model, controllers, tol=1e-12)
        moved = fsc_value_table(replace(model, reward=model.reward * 2.0 - 1.0), controllers, tol=1e-12)
        doubled = fsc_value_table(replace(model, reward=model.reward * 2.0), controllers, tol=1e-12)
        assert moved == pytest.approx(doubled - 1.0 / 0.2, abs=1e-8)
        assert doubled == pytest.approx(2.0 * base, abs=1e-8)
