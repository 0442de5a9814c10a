"""Weighted bearing Fisher information and the D-optimal log-det objective.

For one sensor at s and a weighted cloud {(x_i, w_i)}, with d_i = x_i - s and
rho_i = |d_i| (clamped below at RHO_MIN):

    F = sum_i w_i / (sigma^2 rho_i^4) * [[dy_i^2,   -dx_i dy_i],
                                         [-dx_i dy_i, dx_i^2  ]]

Each term is a rank-one outer product perpendicular to the line of sight,
scaled by inverse-square range. The joint information across sources is
block-diagonal, so the objective is a per-source sum of 2x2 log-dets and is
never materialized as a 2M x 2M matrix; all 2x2 determinants and inverses are
closed-form.
"""

from __future__ import annotations

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is an optional accelerator
    numba = None

from .geometry import RHO_MIN, NoiseModel
from .particle_filter import ParticleCloud

# Regularizer added to each per-source FIM before det/inverse: point-mass
# clouds and collinear geometry make the raw FIM rank-deficient.
JITTER = 1e-9

_RHO_MIN_SQ = RHO_MIN * RHO_MIN


def per_sensor_fim(positions, weights, sensor, noise: NoiseModel) -> np.ndarray:
    """FIM contribution of a single sensor for one cloud, shape (2, 2)."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    w = np.asarray(weights, dtype=float)
    d = positions - np.asarray(sensor, dtype=float)
    r2 = np.maximum(d[:, 0] ** 2 + d[:, 1] ** 2, _RHO_MIN_SQ)
    c = w / (noise.sigma**2 * r2 * r2)
    f11 = float(np.sum(c * d[:, 1] * d[:, 1]))
    f12 = float(-np.sum(c * d[:, 0] * d[:, 1]))
    f22 = float(np.sum(c * d[:, 0] * d[:, 0]))
    return np.array([[f11, f12], [f12, f22]])


def total_source_fim(positions, weights, sensors, noise: NoiseModel) -> np.ndarray:
    """Sum of per-sensor FIMs over the (R, 2) sensor array, shape (2, 2)."""
    sensors = np.asarray(sensors, dtype=float).reshape(-1, 2)
    total = np.zeros((2, 2))
    for s in sensors:
        total += per_sensor_fim(positions, weights, s, noise)
    return total


def _source_objective_terms(positions, weights, sensors, inv_sigma2):
    """Entry sums of one source's total FIM: (f11, f12, f22)."""
    dx = positions[:, 0][None, :] - sensors[:, 0][:, None]  # (R, N)
    dy = positions[:, 1][None, :] - sensors[:, 1][:, None]
    r2 = np.maximum(dx * dx + dy * dy, _RHO_MIN_SQ)
    c = (inv_sigma2 * weights)[None, :] / (r2 * r2)
    f11 = float(np.sum(c * dy * dy))
    f12 = float(-np.sum(c * dx * dy))
    f22 = float(np.sum(c * dx * dx))
    return f11, f12, f22


def _per_sensor_fim_derivative(positions, weights, sensor, noise: NoiseModel):
    """Closed-form d F_r / d s for one sensor, as two (2, 2) arrays (x and y).

    With c_i = w_i / (sigma^2 rho_i^4) and t_i = 4 / rho_i^2 (zero where the
    range clamp is active, since the clamped rho no longer varies with s):

        dF/ds_x = sum_i c_i [[t dx dy^2,      dy (1 - t dx^2)],
                             [dy (1 - t dx^2), dx (t dx^2 - 2)]]
        dF/ds_y = sum_i c_i [[dy (t dy^2 - 2), dx (1 - t dy^2)],
                             [dx (1 - t dy^2), t dy dx^2      ]]

    obtained by the product rule on c_i * outer-product entries, using
    d(dx)/ds_x = -1 and d(rho^2)/ds_x = -2 dx.
    """
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    w = np.asarray(weights, dtype=float)
    d = positions - np.asarray(sensor, dtype=float)
    dx, dy = d[:, 0], d[:, 1]
    raw_r2 = dx * dx + dy * dy
    r2 = np.maximum(raw_r2, _RHO_MIN_SQ)
    c = w / (noise.sigma**2 * r2 * r2)
    t = np.where(raw_r2 < _RHO_MIN_SQ, 0.0, 4.0 / r2)
    tdx2 = t * dx * dx
    tdy2 = t * dy * dy
    gx = np.array(
        [
            [np.sum(c * t * dx * dy * dy), np.sum(c * dy * (1.0 - tdx2))],
            [np.sum(c * dy * (1.0 - tdx2)), np.sum(c * dx * (tdx2 - 2.0))],
        ]
    )
    gy = np.array(
        [
            [np.sum(c * dy * (tdy2 - 2.0)), np.sum(c * dx * (1.0 - tdy2))],
            [np.sum(c * dx * (1.0 - tdy2)), np.sum(c * t * dy * dx * dx)],
        ]
    )
    return gx, gy


def _stack_clouds(clouds):
    """(M, N, 2) positions and (M, N) weights when all clouds share N, else None."""
    sizes = {len(c.weights) for c in clouds}
    if len(sizes) != 1:
        return None
    return (
        np.stack([c.positions for c in clouds]),
        np.stack([c.weights for c in clouds]),
    )


def objective_and_gradient(sensors, clouds, noise: NoiseModel):
    """D-optimal objective and its gradient with respect to sensor positions.

    Returns ``(phi, grad)`` where phi = sum_m log det(F^(m) + JITTER I) and
    grad has shape (R, 2). Uses d log det A = tr(A^{-1} dA); only sensor r's
    own contribution F_r^(m) depends on s_r. Clouds sharing a particle count
    (the common case in trials) go through the JIT-compiled kernel when numba
    is available; the numpy path is the reference implementation.
    """
    sensors = np.asarray(sensors, dtype=float).reshape(-1, 2)
    stacked = _stack_clouds(clouds)
    if stacked is not None:
        x, w = stacked  # (M, N, 2), (M, N)
        if _kernel_jit is not None:
            total, grad = _kernel_jit(
                np.ascontiguousarray(x), np.ascontiguousarray(w),
                np.ascontiguousarray(sensors),
                1.0 / noise.sigma**2, _RHO_MIN_SQ, JITTER,
            )
            return float(total), grad
        dx = x[:, None, :, 0] - sensors[None, :, 0, None]  # (M, R, N)
        dy = x[:, None, :, 1] - sensors[None, :, 1, None]
        return _kernel(dx, dy, w[:, None, :], noise, sensors.shape)
    total = 0.0
    grad = np.zeros_like(sensors)
    for cloud in clouds:
        dx = cloud.positions[None, None, :, 0] - sensors[None, :, 0, None]
        dy = cloud.positions[None, None, :, 1] - sensors[None, :, 1, None]
        phi, g = _kernel(dx, dy, cloud.weights[None, None, :], noise, sensors.shape)
        total += phi
        grad += g
    return total, grad


def _kernel_loops(x, w, sensors, inv_sigma2, rho_min_sq, jitter):
    n_sources, n_particles = w.shape
    n_sensors = sensors.shape[0]
    total = 0.0
    grad = np.zeros((n_sensors, 2))
    bx11 = np.empty(n_sensors)
    bx12 = np.empty(n_sensors)
    bx22 = np.empty(n_sensors)
    by11 = np.empty(n_sensors)
    by12 = np.empty(n_sensors)
    by22 = np.empty(n_sensors)
    for m in range(n_sources):
        f11 = jitter
        f12 = 0.0
        f22 = jitter
        for r in range(n_sensors):
            sx = sensors[r, 0]
            sy = sensors[r, 1]
            a11 = 0.0
            a12 = 0.0
            a22 = 0.0
            gx11 = 0.0
            gx12 = 0.0
            gx22 = 0.0
            gy11 = 0.0
            gy12 = 0.0
            gy22 = 0.0
            for i in range(n_particles):
                dx = x[m, i, 0] - sx
                dy = x[m, i, 1] - sy
                rr = dx * dx + dy * dy
                if rr < rho_min_sq:
                    r2 = rho_min_sq
                    t = 0.0
                else:
                    r2 = rr
                    t = 4.0 / r2
                c = inv_sigma2 * w[m, i] / (r2 * r2)
                cdx = c * dx
                cdy = c * dy
                a11 += cdy * dy
                a12 -= cdx * dy
                a22 += cdx * dx
                tdx2 = t * dx * dx
                tdy2 = t * dy * dy
                gx11 += cdx * tdy2
                gx12 += cdy - cdy * tdx2
                gx22 += cdx * tdx2 - 2.0 * cdx
                gy11 += cdy * tdy2 - 2.0 * cdy
                gy12 += cdx - cdx * tdy2
                gy22 += cdy * tdx2
            f11 += a11
            f12 += a12
            f22 += a22
            bx11[r] = gx11
            bx12[r] = gx12
            bx22[r] = gx22
            by11[r] = gy11
            by12[r] = gy12
            by22[r] = gy22
        det = f11 * f22 - f12 * f12
        total += np.log(det)
        i11 = f22 / det
        i22 = f11 / det
        i12 = -f12 / det
        for r in range(n_sensors):
            grad[r, 0] += i11 * bx11[r] + 2.0 * i12 * bx12[r] + i22 * bx22[r]
            grad[r, 1] += i11 * by11[r] + 2.0 * i12 * by12[r] + i22 * by22[r]
    return total, grad


_kernel_jit = None
if numba is not None:
    _kernel_jit = numba.njit(cache=True, fastmath=False)(_kernel_loops)


def _kernel(dx, dy, w, noise, grad_shape):
    # dx, dy: (M, R, N); w broadcastable to them. Entry sums per source give
    # the 2x2 FIMs; per-sensor derivative sums feed tr(A^{-1} dF).
    inv_sigma2 = 1.0 / noise.sigma**2
    raw_r2 = dx * dx + dy * dy
    clamped = raw_r2 < _RHO_MIN_SQ
    r2 = np.where(clamped, _RHO_MIN_SQ, raw_r2)
    c = (inv_sigma2 * w) / (r2 * r2)
    cdx = c * dx
    cdy = c * dy
    f11 = np.einsum("mrn,mrn->m", cdy, dy) + JITTER  # (M,)
    f12 = -np.einsum("mrn,mrn->m", cdx, dy)
    f22 = np.einsum("mrn,mrn->m", cdx, dx) + JITTER
    det = f11 * f22 - f12 * f12
    total = float(np.sum(np.log(det)))
    i11 = f22 / det
    i22 = f11 / det
    i12 = -f12 / det

    t = np.where(clamped, 0.0, 4.0 / r2)
    tdx2 = t * dx * dx
    tdy2 = t * dy * dy
    cdx_tdy2 = cdx * tdy2
    cdy_tdx2 = cdy * tdx2
    sum_cdx = cdx.sum(axis=2)  # (M, R)
    sum_cdy = cdy.sum(axis=2)
    dfx11 = cdx_tdy2.sum(axis=2)
    dfx12 = sum_cdy - cdy_tdx2.sum(axis=2)
    dfx22 = (cdx * tdx2).sum(axis=2) - 2.0 * sum_cdx
    dfy11 = (cdy * tdy2).sum(axis=2) - 2.0 * sum_cdy
    dfy12 = sum_cdx - cdx_tdy2.sum(axis=2)
    dfy22 = cdy_tdx2.sum(axis=2)
    grad = np.empty(grad_shape)
    # tr(A^{-1} dF) with both matrices symmetric, summed over sources.
    grad[:, 0] = (i11[:, None] * dfx11 + 2.0 * i12[:, None] * dfx12
                  + i22[:, None] * dfx22).sum(axis=0)
    grad[:, 1] = (i11[:, None] * dfy11 + 2.0 * i12[:, None] * dfy12
                  + i22[:, None] * dfy22).sum(axis=0)
    return total, grad


def dopt_objective(sensors, clouds, noise: NoiseModel) -> float:
    """sum_m log det(F^(m) + JITTER I); finite for all inputs."""
    sensors = np.asarray(sensors, dtype=float).reshape(-1, 2)
    inv_sigma2 = 1.0 / noise.sigma**2
    total = 0.0
    for cloud in clouds:
        f11, f12, f22 = _source_objective_terms(
            cloud.positions, cloud.weights, sensors, inv_sigma2
        )
        total += np.log((f11 + JITTER) * (f22 + JITTER) - f12 * f12)
    return float(total)


def dopt_gradient(sensors, clouds, noise: NoiseModel) -> np.ndarray:
    """Gradient of ``dopt_objective`` with respect to sensor positions, shape (R, 2)."""
    return objective_and_gradient(sensors, clouds, noise)[1]
