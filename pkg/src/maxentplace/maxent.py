"""Layer 1: accuracy-constrained minimum-KL reweighting via exponential tilting.

The reweighting solves

    min_w  KL(w || w_prior)   s.t.   sum_i w_i g_i <= eps^2,  w on the simplex

where g_i is the sliced-Wasserstein projection cost of particle i against a
point target at the cloud's weighted mean. The unique solution is the
exponential tilt w_i ~ w_prior_i * exp(-lambda g_i); the multiplier is found by
bisection on the monotone tilted cost h(lambda) = sum_i w_i(lambda) g_i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .particle_filter import ParticleCloud, weighted_mean

# Multiplier cap for unreachable targets (min_i g_i on the prior's support
# above eps^2): the tilt saturates and the solver returns the capped solution
# with a diagnostic flag instead of looping.
LAMBDA_MAX = 1e6

_MAX_BISECT_ITERS = 200


@dataclass(frozen=True)
class TiltSolution:
    """Result of the constrained reweighting for one source.

    ``active`` is False exactly when the prior already met the budget
    (lambda == 0). ``capped`` marks the unreachable-target fallback at
    LAMBDA_MAX, where ``achieved_cost`` still exceeds the budget.
    """

    weights: np.ndarray
    lambda_: float
    active: bool
    kl_divergence: float
    achieved_cost: float
    capped: bool = False


def sample_directions(rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` unit directions drawn uniformly on the circle, shape (L, 2)."""
    if count < 1:
        raise ValueError("direction count must be >= 1")
    theta = rng.uniform(0.0, 2.0 * np.pi, size=count)
    return np.column_stack([np.cos(theta), np.sin(theta)])


def target_mean(cloud: ParticleCloud) -> np.ndarray:
    """Weighted mean of the cloud under its current (prior) weights, shape (2,).

    This is the point target of the reweighting and is held fixed while the
    weights are optimized.
    """
    return weighted_mean(cloud)


def projection_costs(cloud: ParticleCloud, mean, directions: np.ndarray) -> np.ndarray:
    """Per-particle squared projection cost about ``mean``, shape (N,).

    g_i = (1/L) sum_l <x_i - mean, d_l>^2: against a point target the sliced
    Wasserstein cost is the weighted second moment sum_i w_i g_i, linear in w.
    """
    centered = cloud.positions - np.asarray(mean, dtype=float)
    proj = centered @ np.asarray(directions, dtype=float).T  # (N, L)
    return np.mean(proj * proj, axis=1)


def _tilt(prior: np.ndarray, costs: np.ndarray, lam: float):
    """Tilted weights, log-partition, and tilted cost for one lambda."""
    if lam == 0.0:
        w = prior / prior.sum() if abs(prior.sum() - 1.0) > 1e-12 else prior.copy()
        return w, 0.0, float(w @ costs)
    support = prior > 0.0
    g_min = float(np.min(costs[support]))
    # Shift by the support minimum so the largest exponent is exactly 0;
    # lambda * g can exceed 700 and underflow every weight at once otherwise.
    expo = np.minimum(-lam * (costs - g_min), 0.0)
    unnorm = prior * np.exp(expo)
    z_shifted = float(unnorm.sum())
    w = unnorm / z_shifted
    log_z = np.log(z_shifted) - lam * g_min
    return w, log_z, float(w @ costs)


def exponential_tilt(prior: np.ndarray, costs: np.ndarray, lam: float) -> np.ndarray:
    """w_i = prior_i exp(-lam g_i) / Z(lam), computed with a max-shift."""
    if lam < 0.0:
        raise ValueError("lambda must be >= 0")
    return _tilt(np.asarray(prior, dtype=float), np.asarray(costs, dtype=float), lam)[0]


def _kl_of_tilt(lam: float, log_z: float, achieved_cost: float) -> float:
    # KL(w || prior) = sum_i w_i (-lam g_i - log Z) = -lam h(lam) - log Z.
    return max(-lam * achieved_cost - log_z, 0.0)


def solve_lambda(prior: np.ndarray, costs: np.ndarray, epsilon: float) -> TiltSolution:
    """Solve the budgeted reweighting for one cost vector.

    Feasible priors (sum_i prior_i g_i <= eps^2) return lambda = 0 with the
    prior unchanged. Otherwise the multiplier bracketing doubles from 1 until
    the tilted cost drops below eps^2 and bisection drives |h - eps^2| to a
    1e-12 relative tolerance (capped at 200 iterations). Unreachable targets
    return the LAMBDA_MAX solution flagged ``capped``.
    """
    prior = np.asarray(prior, dtype=float)
    costs = np.asarray(costs, dtype=float)
    eps_sq = float(epsilon) * float(epsilon)
    prior_cost = float(prior @ costs)
    if prior_cost <= eps_sq:
        return TiltSolution(prior.copy(), 0.0, False, 0.0, prior_cost)

    hi = 1.0
    _, _, h_hi = _tilt(prior, costs, hi)
    while h_hi > eps_sq and hi < LAMBDA_MAX:
        hi = min(2.0 * hi, LAMBDA_MAX)
        _, _, h_hi = _tilt(prior, costs, hi)
    if h_hi > eps_sq:
        w, log_z, achieved = _tilt(prior, costs, LAMBDA_MAX)
        kl = _kl_of_tilt(LAMBDA_MAX, log_z, achieved)
        return TiltSolution(w, LAMBDA_MAX, True, kl, achieved, capped=True)

    lo = 0.0
    lam = hi
    tol = 1e-12 * eps_sq
    for _ in range(_MAX_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        _, _, h_mid = _tilt(prior, costs, mid)
        lam = mid
        if abs(h_mid - eps_sq) <= tol:
            break
        if h_mid > eps_sq:
            lo = mid
        else:
            hi = mid
    w, log_z, achieved = _tilt(prior, costs, lam)
    return TiltSolution(w, lam, True, _kl_of_tilt(lam, log_z, achieved), achieved)


def maxent_reweight(
    cloud: ParticleCloud, epsilon: float, n_directions: int, rng: np.random.Generator
) -> TiltSolution:
    """One Layer-1 solve: mean target, fresh directions, costs, then the dual.

    Directions are drawn fresh from ``rng`` (the dedicated direction stream)
    on every call. The sensor model plays no part here.
    """
    mean = target_mean(cloud)
    directions = sample_directions(rng, n_directions)
    costs = projection_costs(cloud, mean, directions)
    return solve_lambda(cloud.weights, costs, epsilon)
