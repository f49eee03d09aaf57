"""Exact evaluation of a joint controller on a known model."""

import logging
from typing import Optional

import numpy as np

from ..errors import DimensionError, InferenceError
from ..fsc.controller import FscParams, JointFsc
from .dpomdp import DecPomdpModel

logger = logging.getLogger(__name__)

VALUE_TOL = 1e-10


def fsc_value_table(
    model: DecPomdpModel,
    controllers: JointFsc,
    tol: float = VALUE_TOL,
    max_iter: Optional[int] = None
) -> np.ndarray:
    """
    Solve the Bellman system of the joint chain over (state, node_1, ..., node_N).

    Fixed-point iteration runs until the sup-norm change drops below ``tol``.

    Args:
        model: Dec-POMDP model
        controllers: Point-valued joint controller
        tol: Residual threshold
        max_iter: Iteration cap (derived from the discount when omitted)

    Returns:
        Array ``V[s, z_1, ..., z_N]``

    Raises:
        DimensionError: If controllers do not fit the model
        InferenceError: If the iteration fails to reach ``tol``
    """
    _check(model, controllers)
    N = model.num_agents
    S = model.num_states
    gamma = model.discount
    shape = (S,) + tuple(controllers.sizes)

    if max_iter is None:
        scale = max(1.0, float(np.abs(model.reward).max()) / max(1e-12, 1.0 - gamma))
        max_iter = 10 + int(np.ceil(np.log(tol / scale) / np.log(gamma))) if gamma > 0 else 2
        max_iter = max(max_iter * 2, 100)

    # Per joint action: outer product of node policies and the reward broadcast over nodes.
    joint_actions = [model.split_joint_action(a) for a in range(model.num_joint_actions)]
    joint_obs = [model.split_joint_observation(o) for o in range(model.num_joint_observations)]
    policy_weights = []
    for acts in joint_actions:
        weight = np.ones(())
        for n, a_n in enumerate(acts):
            weight = np.multiply.outer(weight, controllers[n].policy[:, a_n])
        policy_weights.append(weight)

    V = np.zeros(shape)
    for iteration in range(1, max_iter + 1):
        V_new = np.zeros(shape)
        for a, acts in enumerate(joint_actions):
            # G[s', z] = sum_o O(o|s',a) * (W-contracted V)[s', z]
            G = np.zeros(shape)
            for o, obs in enumerate(joint_obs):
                o_weight = model.observation[a, :, o]
                if not o_weight.any():
                    continue
                Y = V
                for n in range(N):
                    W = controllers[n].transition[:, acts[n], obs[n], :]
                    Y = np.moveaxis(np.tensordot(W, Y, axes=([1], [n + 1])), 0, n + 1)
                G += o_weight.reshape((S,) + (1,) * N) * Y
            future = np.tensordot(model.transition[:, a, :], G, axes=([1], [0]))
            Q = model.reward[:, a].reshape((S,) + (1,) * N) + gamma * future
            V_new += policy_weights[a][None, ...] * Q
        residual = float(np.abs(V_new - V).max())
        V = V_new
        if residual < tol:
            logger.debug("value table converged after %d sweeps (residual %.3e)", iteration, residual)
            return V

    raise InferenceError(f"value iteration did not reach residual {tol} in {max_iter} sweeps")


def exact_fsc_value(
    model: DecPomdpModel,
    controllers: JointFsc,
    belief: Optional[np.ndarray] = None,
    tol: float = VALUE_TOL
) -> float:
    """
    Expected discounted return of ``controllers`` from ``belief``.

    Args:
        model: Dec-POMDP model
        controllers: Point-valued joint controller
        belief: Start distribution over states (model's ``b0`` by default)
        tol: Residual threshold for the value table

    Returns:
        Sum over states and start nodes of ``b(s) * prod_n mu_n(z_n) * V[s, z]``
    """
    if belief is None:
        belief = model.initial_belief
    belief = np.asarray(belief, dtype=float)
    if belief.shape != (model.num_states,):
        raise DimensionError(f"belief shape {belief.shape}, expected ({model.num_states},)")

    V = fsc_value_table(model, controllers, tol)
    weighted = np.tensordot(belief, V, axes=([0], [0]))
    for fsc in controllers:
        # contracts the leading remaining node axis each time
        weighted = np.tensordot(fsc.initial, weighted, axes=([0], [0]))
    return float(weighted)


def _check(model: DecPomdpModel, controllers: JointFsc) -> None:
    for n, fsc in enumerate(controllers):
        if not isinstance(fsc, FscParams):
            raise DimensionError(f"agent {n}: exact evaluation needs a point-valued controller")
    controllers.check_model(model.num_actions, model.num_observations)
