"""Planar bearing geometry: angles, wrapping, likelihoods, simulated measurements.

Bearings are azimuths measured with atan2 and kept in (-pi, pi]. All angular
quantities are raw radians in double precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

# Sensor-particle distances below this are clamped before any division:
# the bearing Fisher information blows up like 1/rho^4 at coincidence.
RHO_MIN = 1e-3


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean Gaussian bearing noise with standard deviation ``sigma`` (radians)."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class DomainBox:
    """Axis-aligned rectangular domain [x_min, x_max] x [y_min, y_max]."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate domain box: {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def center(self) -> np.ndarray:
        return np.array([0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max)])

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.x_min, self.y_min])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.x_max, self.y_max])

    def contains(self, points: np.ndarray) -> bool:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return bool(
            np.all(p[:, 0] >= self.x_min)
            and np.all(p[:, 0] <= self.x_max)
            and np.all(p[:, 1] >= self.y_min)
            and np.all(p[:, 1] <= self.y_max)
        )

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` i.i.d. uniform points over the box, shape (n, 2)."""
        return rng.uniform(self.lower, self.upper, size=(n, 2))


def wrap_angle(theta):
    """Wrap an angle (scalar or array) to (-pi, pi].

    Inputs congruent to pi map to +pi; -pi is never produced.
    """
    return theta - TWO_PI * np.ceil((theta - np.pi) / TWO_PI)


def bearing(sensor, target):
    """Azimuth from ``sensor`` to ``target`` via atan2, wrapped to (-pi, pi].

    Both arguments are arrays with a trailing axis of length 2 and broadcast
    against each other, so a (R, 1, 2) sensor block against a (M, 2) target
    block yields an (R, M) bearing matrix.
    """
    d = np.asarray(target, dtype=float) - np.asarray(sensor, dtype=float)
    return wrap_angle(np.arctan2(d[..., 1], d[..., 0]))


def log_likelihood(particle, measurement, sensor, noise: NoiseModel):
    """Bearing log-likelihood -dtheta^2 / (2 sigma^2), constant term dropped.

    ``dtheta`` is the wrapped difference between the measurement and the
    bearing predicted at ``particle``. Always <= 0.
    """
    dtheta = wrap_angle(measurement - bearing(sensor, particle))
    return -0.5 * (dtheta / noise.sigma) ** 2


def simulate_measurement(rng: np.random.Generator, true_source, sensor, noise: NoiseModel):
    """Draw one noisy bearing from ``sensor`` to ``true_source``, wrapped."""
    return wrap_angle(bearing(sensor, true_source) + rng.normal(0.0, noise.sigma))
