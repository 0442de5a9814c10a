"""Layer 2: multi-start bound-constrained ascent of the D-optimal objective.

Each restart runs L-BFGS-B on the negated objective with the closed-form
gradient, with per-coordinate bounds from the domain box. Restart inits are
drawn up front from the caller's RNG stream, so the result is deterministic
regardless of how restarts are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .fim import dopt_objective, objective_and_gradient
from .geometry import DomainBox, NoiseModel

PG_TOL = 1e-6
MAX_ITERS = 500


@dataclass(frozen=True)
class PlacementResult:
    """Best sensor configuration found, with optimizer diagnostics."""

    sensors: np.ndarray
    objective: float
    restart_index: int
    iterations: int
    converged: bool


def local_ascent(
    init: np.ndarray, clouds, noise: NoiseModel, domain: DomainBox
) -> PlacementResult:
    """Bound-constrained quasi-Newton ascent from one starting configuration.

    Stops when the projected-gradient infinity norm drops below PG_TOL or
    after MAX_ITERS iterations. The returned objective never falls below the
    objective at ``init``.
    """
    init = np.asarray(init, dtype=float).reshape(-1, 2)
    n_sensors = len(init)
    f_init = dopt_objective(init, clouds, noise)

    def negated(x):
        phi, grad = objective_and_gradient(x.reshape(n_sensors, 2), clouds, noise)
        return -phi, -grad.ravel()

    bounds = [(domain.x_min, domain.x_max), (domain.y_min, domain.y_max)] * n_sensors
    res = minimize(
        negated,
        init.ravel(),
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": MAX_ITERS, "gtol": PG_TOL},
    )
    sensors = res.x.reshape(n_sensors, 2)
    objective = dopt_objective(sensors, clouds, noise)
    if not np.isfinite(objective) or objective < f_init:
        # Diagnostic failure of this start, not of the call.
        return PlacementResult(init.copy(), f_init, 0, int(res.nit), False)
    return PlacementResult(sensors, objective, 0, int(res.nit), bool(res.success))


def optimize_placement(
    clouds,
    noise: NoiseModel,
    domain: DomainBox,
    n_sensors: int,
    restarts: int,
    rng: np.random.Generator,
) -> PlacementResult:
    """Best of ``restarts`` local ascents from uniform inits over the box.

    Ties keep the lowest restart index.
    """
    if restarts < 1:
        raise ValueError("restart count must be >= 1")
    inits = rng.uniform(domain.lower, domain.upper, size=(restarts, n_sensors, 2))
    best = None
    for k in range(restarts):
        result = replace(local_ascent(inits[k], clouds, noise, domain), restart_index=k)
        if best is None or result.objective > best.objective:
            best = result
    return best
