"""Per-source particle representation and the sequential importance-weight update.

Each source is tracked by its own weighted particle cloud. Weight arithmetic is
done in log space with max-shift normalization because a single iteration can
accumulate hundreds of nats between the best and worst particles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DomainBox, NoiseModel, wrap_angle


@dataclass
class ParticleCloud:
    """N particle positions, shape (N, 2), with a simplex weight vector, shape (N,)."""

    positions: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return len(self.weights)


def init_cloud(rng: np.random.Generator, n: int, domain: DomainBox) -> ParticleCloud:
    """Uniform prior cloud: n i.i.d. positions over the box, weights 1/n."""
    if n < 1:
        raise ValueError("particle count must be >= 1")
    positions = domain.sample_uniform(rng, n)
    return ParticleCloud(positions, np.full(n, 1.0 / n))


def _normalize_log_weights(log_weights: np.ndarray) -> np.ndarray:
    shift = np.max(log_weights)
    w = np.exp(log_weights - shift)
    return w / w.sum()


def update_weights(
    cloud: ParticleCloud,
    bearings: np.ndarray,
    sensors: np.ndarray,
    noise: NoiseModel,
) -> np.ndarray:
    """Multiplicative Bayesian weight update for one source.

    ``bearings`` holds one measurement per sensor (aligned index-wise with the
    (R, 2) ``sensors`` array); measurements are conditionally independent given
    the source position, so their log-likelihoods add. Returns new simplex
    weights; the cloud is not modified.
    """
    bearings = np.asarray(bearings, dtype=float)
    sensors = np.asarray(sensors, dtype=float).reshape(-1, 2)
    if len(bearings) != len(sensors):
        raise ValueError("one bearing per sensor required")
    if len(bearings) == 0:
        return cloud.weights.copy()
    dx = cloud.positions[:, 0][None, :] - sensors[:, 0][:, None]  # (R, N)
    dy = cloud.positions[:, 1][None, :] - sensors[:, 1][:, None]
    predicted = np.arctan2(dy, dx)
    dtheta = wrap_angle(bearings[:, None] - predicted)
    log_lik = (-0.5 / noise.sigma**2) * np.sum(dtheta * dtheta, axis=0)  # (N,)
    with np.errstate(divide="ignore"):
        log_prior = np.log(cloud.weights)
    return _normalize_log_weights(log_prior + log_lik)


def effective_sample_size(weights: np.ndarray) -> float:
    """ESS = 1 / sum(w_i^2), in [1, N] for simplex weights."""
    w = np.asarray(weights, dtype=float)
    return 1.0 / float(np.dot(w, w))


def _compensated_cumsum(x: np.ndarray) -> np.ndarray:
    # Kahan summation: keeps the final cumulative value at 1 within 1e-12 so
    # the resampling stride alignment at the upper boundary is exact.
    out = np.empty(len(x))
    total = 0.0
    comp = 0.0
    for i, v in enumerate(x):
        y = float(v) - comp
        t = total + y
        comp = (t - total) - y
        total = t
        out[i] = total
    return out


def systematic_resample(rng: np.random.Generator, cloud: ParticleCloud) -> ParticleCloud:
    """Low-variance resampling with one uniform offset and strides of 1/N.

    Offspring counts satisfy |n_i - N w_i| < 1. Weights reset to 1/N.
    """
    n = cloud.n
    cum = _compensated_cumsum(cloud.weights)
    cum[-1] = 1.0
    points = rng.uniform(0.0, 1.0 / n) + np.arange(n) / n
    idx = np.searchsorted(cum, points, side="right")
    return ParticleCloud(cloud.positions[idx].copy(), np.full(n, 1.0 / n))


def weighted_mean(cloud: ParticleCloud) -> np.ndarray:
    """Weighted particle mean, shape (2,)."""
    return cloud.positions.T @ cloud.weights
