"""Stick-breaking, generalized Dirichlet, Dirichlet and Gamma mathematics.

All functions are vectorized over leading axes; the last axis indexes sticks
(or categories).
"""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.special import gammaln, psi

from ..errors import InferenceError


@dataclass(frozen=True)
class GddParams:
    """Beta parameters ``(v, w)`` of the sticks of a generalized Dirichlet distribution."""

    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if v.shape != w.shape:
            raise ValueError(f"v shape {v.shape} differs from w shape {w.shape}")
        if np.any(v <= 0) or np.any(w <= 0):
            raise ValueError("GDD parameters must be positive")
        object.__setattr__(self, 'v', v)
        object.__setattr__(self, 'w', w)

    @property
    def num_sticks(self) -> int:
        return int(self.v.shape[-1])


@dataclass(frozen=True)
class GammaParams:
    """Gamma distribution with shape ``c`` and rate ``d`` (scalars or arrays)."""

    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        d = np.asarray(self.d, dtype=float)
        if np.any(c <= 0) or np.any(d <= 0):
            raise ValueError("Gamma shape and rate must be positive")
        object.__setattr__(self, 'c', c)
        object.__setattr__(self, 'd', d)

    def mean(self) -> np.ndarray:
        return self.c / self.d

    def log_mean(self) -> np.ndarray:
        """``E[ln eta]``"""
        return psi(self.c) - np.log(self.d)


def stick_break_weights(v_samples: np.ndarray) -> np.ndarray:
    """
    Turn stick proportions into categorical weights.

    ``p_j = V_j * prod_{m<j} (1 - V_m)`` and the last of the ``d + 1``
    entries takes the remainder ``prod_m (1 - V_m)``.

    Raises:
        ValueError: If an entry lies outside [0, 1]
    """
    V = np.asarray(v_samples, dtype=float)
    if np.any(V < 0.0) or np.any(V > 1.0):
        raise ValueError("stick proportions must lie in [0, 1]")
    remainder = np.cumprod(1.0 - V, axis=-1)
    before = np.concatenate([np.ones(V.shape[:-1] + (1,)), remainder[..., :-1]], axis=-1)
    return np.concatenate([V * before, remainder[..., -1:]], axis=-1)


def gdd_log_expectations(params: GddParams) -> Tuple[np.ndarray, np.ndarray]:
    """``(E[ln V], E[ln(1 - V)])`` of every stick ``V ~ Beta(v, w)``."""
    total = psi(params.v + params.w)
    return psi(params.v) - total, psi(params.w) - total


def _compose_sticks(head: np.ndarray, tail: np.ndarray, log_space: bool) -> np.ndarray:
    """Combine per-stick terms into ``d + 1`` outcome terms along the last axis."""
    if log_space:
        running = np.cumsum(tail, axis=-1)
        start = np.zeros(tail.shape[:-1] + (1,))
    else:
        running = np.cumprod(tail, axis=-1)
        start = np.ones(tail.shape[:-1] + (1,))
    if tail.shape[-1] == 0:
        return start
    before = np.concatenate([start, running[..., :-1]], axis=-1)
    combine = np.add if log_space else np.multiply
    return np.concatenate([combine(head, before), running[..., -1:]], axis=-1)


def under_normalized_row(lnV: np.ndarray, ln1mV: np.ndarray) -> np.ndarray:
    """
    Geometric-mean weights ``exp<ln W_j>`` of a stick-breaking row.

    Entry ``j`` is ``exp(lnV_j + sum_{m<j} ln1mV_m)``; the last entry is
    ``exp(sum_m ln1mV_m)``. Rows sum to at most one.
    """
    lnV = np.asarray(lnV, dtype=float)
    ln1mV = np.asarray(ln1mV, dtype=float)
    if lnV.shape != ln1mV.shape:
        raise ValueError(f"lnV shape {lnV.shape} differs from ln1mV shape {ln1mV.shape}")
    return np.exp(_compose_sticks(lnV, ln1mV, log_space=True))


def dirichlet_log_expectation(rho_hat: np.ndarray) -> np.ndarray:
    """``exp(psi(rho_a) - psi(sum rho))`` along the last axis."""
    rho_hat = np.asarray(rho_hat, dtype=float)
    if np.any(rho_hat <= 0):
        raise ValueError("Dirichlet parameters must be positive")
    return np.exp(psi(rho_hat) - psi(rho_hat.sum(axis=-1, keepdims=True)))


def tail_counts(counts: np.ndarray) -> np.ndarray:
    """``sum_{l>j} counts_l`` for ``j = 0 .. d-1`` given ``d + 1`` outcome counts."""
    counts = np.asarray(counts, dtype=float)
    return np.flip(np.cumsum(np.flip(counts[..., 1:], axis=-1), axis=-1), axis=-1)


def gdd_posterior_update(prior: GddParams, counts: np.ndarray) -> GddParams:
    """
    Conjugate update of a GDD with (soft) outcome counts.

    Args:
        prior: Stick parameters, ``d`` sticks
        counts: Nonnegative counts over the ``d + 1`` outcomes

    Returns:
        ``v' = v + counts_j`` and ``w' = w + sum_{l>j} counts_l``
    """
    counts = np.asarray(counts, dtype=float)
    if counts.shape[-1] != prior.num_sticks + 1:
        raise ValueError(f"{counts.shape[-1]} counts for {prior.num_sticks} sticks")
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    return GddParams(prior.v + counts[..., :-1], prior.w + tail_counts(counts))


def gdd_mean(params: GddParams) -> np.ndarray:
    """Expected weights ``E[p_j] = v_j prod_{l<j} w_l / prod_{l<=j} (v_l + w_l)``."""
    total = params.v + params.w
    return _compose_sticks(params.v / total, params.w / total, log_space=False)


def gdd_variance(params: GddParams) -> np.ndarray:
    """Variance of each weight, from the Beta second moments of independent sticks."""
    v, w = params.v, params.w
    denom = (v + w) * (v + w + 1.0)
    second = _compose_sticks(v * (v + 1.0) / denom, w * (w + 1.0) / denom, log_space=False)
    return second - gdd_mean(params) ** 2


def sample_stick_breaking(
    v: np.ndarray,
    w: np.ndarray,
    size: int,
    rng: np.random.Generator
) -> np.ndarray:
    """Draw ``size`` weight vectors by sampling ``V_j ~ Beta(v_j, w_j)``."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    sticks = rng.beta(v, w, size=(size,) + v.shape)
    return stick_break_weights(sticks)


def eta_update_conjugate(prior: GammaParams, ln1mV: np.ndarray) -> GammaParams:
    """
    Posterior of the stick concentration ``eta`` when the first Beta parameter is one.

    ``q(eta) ∝ Gamma(eta; c, d) * eta * exp(eta * E[ln(1 - V)])`` since
    ``Gamma(1 + eta) / Gamma(eta) = eta``, giving ``Gamma(c + 1, d - E[ln(1 - V)])``.

    Raises:
        InferenceError: If the posterior rate is not positive
    """
    ln1mV = np.asarray(ln1mV, dtype=float)
    rate = prior.d - ln1mV
    if np.any(rate <= 0):
        raise InferenceError("non-positive Gamma rate in eta update")
    shape = np.broadcast_to(prior.c + 1.0, rate.shape)
    return GammaParams(shape.copy(), rate)


def wendel_bounds(a: float, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Lower and upper bounds ``x (x + a)^(a - 1) <= Gamma(x + a) / Gamma(x) <= x^a`` for ``0 < a < 1``."""
    if not 0.0 < a < 1.0:
        raise ValueError(f"bounds hold for 0 < a < 1, got {a}")
    x = np.asarray(x, dtype=float)
    return x * (x + a) ** (a - 1.0), x ** a


def grid_maximize(
    objective: Callable[[np.ndarray], np.ndarray],
    lower: np.ndarray,
    upper: np.ndarray,
    points: int = 200,
    refine_factor: int = 10,
    extra: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Maximize ``objective`` over log-spaced grids, elementwise over the bound arrays.

    A coarse grid of ``points`` values between ``lower`` and ``upper`` is
    followed by one pass at ``refine_factor`` times the resolution around the
    best coarse point. ``extra`` candidates (same shape as the bounds) always
    compete with the grid.

    Args:
        objective: Maps candidates of shape ``(P,) + bounds.shape`` to values
        lower: Positive lower bounds
        upper: Upper bounds, ``>= lower``

    Returns:
        Best candidate per element

    Raises:
        ValueError: If a bound pair is empty or not positive
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(lower <= 0) or np.any(upper < lower):
        raise ValueError("grid bounds must satisfy 0 < lower <= upper")
    if points < 2:
        raise ValueError("grid needs at least two points")

    steps = np.linspace(0.0, 1.0, points).reshape((points,) + (1,) * lower.ndim)
    log_lo, log_hi = np.log(lower), np.log(upper)
    grid = np.exp(log_lo + steps * (log_hi - log_lo))
    best_index = np.argmax(objective(grid), axis=0)

    # refine between the neighbours of the coarse maximizer
    lo_idx = np.clip(best_index - 1, 0, points - 1)
    hi_idx = np.clip(best_index + 1, 0, points - 1)
    fine_lo = np.take_along_axis(grid, lo_idx[None, ...], axis=0)[0]
    fine_hi = np.take_along_axis(grid, hi_idx[None, ...], axis=0)[0]
    fine_points = 2 * refine_factor + 1
    fine_steps = np.linspace(0.0, 1.0, fine_points).reshape((fine_points,) + (1,) * lower.ndim)
    fine = np.exp(np.log(fine_lo) + fine_steps * (np.log(fine_hi) - np.log(fine_lo)))

    candidates = fine if extra is None else np.concatenate(
        [fine, np.asarray(extra, dtype=float)[None, ...]], axis=0
    )
    values = objective(candidates)
    choice = np.argmax(values, axis=0)
    return np.take_along_axis(candidates, choice[None, ...], axis=0)[0]


def eta_log_objective(eta: np.ndarray, sigma: float, ln1mV: np.ndarray, prior: GammaParams) -> np.ndarray:
    """Unnormalized log posterior of a point ``eta`` for ``V ~ Beta(sigma, eta)``, ``eta ~ Gamma(c, d)``."""
    return (
        (prior.c - 1.0) * np.log(eta) - prior.d * eta
        + gammaln(sigma + eta) - gammaln(eta) + (eta - 1.0) * ln1mV
    )


def eta_search_interval(
    sigma: float,
    ln1mV: np.ndarray,
    prior: GammaParams,
    lower: float,
    upper: float,
    widen: float = 10.0
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Bracket the maximizer of :func:`eta_log_objective`.

    For ``0 < sigma < 1`` the Gamma ratio is replaced by each side of Wendel's
    inequality; the two surrogate maximizers, widened by ``widen``, bound the
    search. Otherwise the configured ``[lower, upper]`` range is returned.
    """
    ln1mV = np.asarray(ln1mV, dtype=float)
    lo = np.full(ln1mV.shape, float(lower))
    hi = np.full(ln1mV.shape, float(upper))
    if not 0.0 < sigma < 1.0:
        return lo, hi

    c = float(prior.c)
    rate = float(prior.d) - ln1mV
    # upper surrogate x^sigma: maximizer (c - 1 + sigma) / rate
    upper_arg = (c - 1.0 + sigma) / rate
    # lower surrogate x (x + sigma)^(sigma - 1): c/x + (sigma - 1)/(x + sigma) = rate
    qa = rate
    qb = rate * sigma - c - (sigma - 1.0)
    qc = -c * sigma
    lower_arg = (-qb + np.sqrt(qb * qb - 4.0 * qa * qc)) / (2.0 * qa)

    valid = (upper_arg > 0) & np.isfinite(lower_arg) & (lower_arg > 0)
    a = np.where(valid, np.minimum(upper_arg, lower_arg) / widen, lo)
    b = np.where(valid, np.maximum(upper_arg, lower_arg) * widen, hi)
    a = np.clip(a, lower, upper)
    b = np.clip(b, lower, upper)
    return np.minimum(a, b), np.maximum(a, b)


def eta_point_estimate_grid(
    sigma: float,
    ln1mV: np.ndarray,
    prior: GammaParams,
    lower: float = 1e-4,
    upper: float = 1e6,
    points: int = 200,
    refine_factor: int = 10,
    current: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Point estimate of ``eta`` for every stick when ``sigma != 1``.

    Args:
        sigma: First Beta parameter of the sticks
        ln1mV: ``E[ln(1 - V)]`` per stick
        prior: Gamma prior on ``eta``
        lower: Smallest admissible ``eta``
        upper: Largest admissible ``eta``
        points: Coarse grid size
        refine_factor: Resolution multiplier of the refinement pass
        current: Present estimate, kept when nothing on the grid beats it

    Returns:
        Array of ``eta`` shaped like ``ln1mV``
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    ln1mV = np.asarray(ln1mV, dtype=float)
    lo, hi = eta_search_interval(sigma, ln1mV, prior, lower, upper)
    return grid_maximize(
        lambda eta: eta_log_objective(eta, sigma, ln1mV, prior),
        lo, hi, points, refine_factor, extra=current,
    )


def kl_dirichlet(alpha_q: np.ndarray, alpha_p: np.ndarray) -> np.ndarray:
    """``KL(Dir(alpha_q) || Dir(alpha_p))`` along the last axis."""
    alpha_q = np.asarray(alpha_q, dtype=float)
    alpha_p = np.broadcast_to(np.asarray(alpha_p, dtype=float), alpha_q.shape)
    q0 = alpha_q.sum(axis=-1)
    p0 = alpha_p.sum(axis=-1)
    return (
        gammaln(q0) - gammaln(alpha_q).sum(axis=-1)
        - gammaln(p0) + gammaln(alpha_p).sum(axis=-1)
        + ((alpha_q - alpha_p) * (psi(alpha_q) - psi(q0)[..., None])).sum(axis=-1)
    )


def kl_beta(a_q, b_q, a_p, b_p) -> np.ndarray:
    """Elementwise ``KL(Beta(a_q, b_q) || Beta(a_p, b_p))``."""
    a_q, b_q, a_p, b_p = (np.asarray(x, dtype=float) for x in (a_q, b_q, a_p, b_p))
    total_q = psi(a_q + b_q)
    return (
        gammaln(a_q + b_q) - gammaln(a_q) - gammaln(b_q)
        - gammaln(a_p + b_p) + gammaln(a_p) + gammaln(b_p)
        + (a_q - a_p) * (psi(a_q) - total_q)
        + (b_q - b_p) * (psi(b_q) - total_q)
    )


def kl_beta_gamma_prior(v_hat, w_hat, eta: GammaParams) -> np.ndarray:
    """
    ``E_q[ln q(V) - ln p(V | eta)]`` for ``p(V | eta) = Beta(1, eta)`` and ``eta ~ q(eta)``.

    Uses ``E[ln p(V | eta)] = E[ln eta] + (E[eta] - 1) E[ln(1 - V)]``.
    """
    v_hat = np.asarray(v_hat, dtype=float)
    w_hat = np.asarray(w_hat, dtype=float)
    lnV, ln1mV = gdd_log_expectations(GddParams(v_hat, w_hat))
    neg_entropy = (
        gammaln(v_hat + w_hat) - gammaln(v_hat) - gammaln(w_hat)
        + (v_hat - 1.0) * lnV + (w_hat - 1.0) * ln1mV
    )
    cross = eta.log_mean() + (eta.mean() - 1.0) * ln1mV
    return neg_entropy - cross


def kl_gamma(q: GammaParams, p: GammaParams) -> np.ndarray:
    """Elementwise ``KL(Gamma(q.c, q.d) || Gamma(p.c, p.d))`` (shape, rate)."""
    return (
        (q.c - p.c) * psi(q.c) - gammaln(q.c) + gammaln(p.c)
        + p.c * (np.log(q.d) - np.log(p.d))
        + q.c * (p.d - q.d) / q.d
    )


def gamma_log_density(x: np.ndarray, prior: GammaParams) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return prior.c * np.log(prior.d) - gammaln(prior.c) + (prior.c - 1.0) * np.log(x) - prior.d * x
