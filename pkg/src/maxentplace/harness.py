"""Sequential two-layer placement trials, Monte-Carlo sweeps, and persistence.

One trial runs T iterations of: Layer-1 reweighting per source (skipped by the
D-optimal baseline), Layer-2 placement, measurement simulation from the true
sources at the new sensors, the Bayesian weight update, and a conditional
systematic resample. The master seed splits into five named substreams
(particle-init, measurement-noise, directions, restarts, resampling) so that
consuming from one stream never advances another; this is what makes the
huge-budget MaxEnt run reproduce the baseline bit-for-bit rather than only
statistically.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import DomainBox, NoiseModel, bearing, wrap_angle
from .maxent import maxent_reweight
from .particle_filter import (
    ParticleCloud,
    effective_sample_size,
    init_cloud,
    systematic_resample,
    update_weights,
    weighted_mean,
)
from .placement import optimize_placement

METHOD_DOPT = "dopt_baseline"
METHOD_MAXENT = "maxent"
METHODS = (METHOD_DOPT, METHOD_MAXENT)

DEFAULT_DOMAIN = DomainBox(0.0, 20.0, 0.0, 20.0)

# Initial sensors are jittered uniformly in [0, 0.5]^2 off the domain's
# lower-left corner.
SENSOR_INIT_JITTER = 0.5


@dataclass(frozen=True)
class Scenario:
    """Full configuration of one (method, seed) trial."""

    n_sources: int
    n_sensors: int
    sigma: float  # bearing noise std, radians
    n_iterations: int
    n_particles: int
    epsilon: float  # sliced-Wasserstein budget, length units
    n_directions: int
    n_restarts: int
    domain: DomainBox
    seed: int
    method: str

    def __post_init__(self):
        for name in ("n_sources", "n_sensors", "n_iterations", "n_particles",
                     "n_directions", "n_restarts"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")


@dataclass
class TrialRecord:
    """Per-iteration trajectories and diagnostics for one trial."""

    rmse_per_iteration: np.ndarray  # (T+1,)
    final_estimates: np.ndarray  # (M, 2)
    sensor_history: np.ndarray  # (T+1, R, 2)
    ess_history: np.ndarray  # (T, M)
    layer1_active_history: np.ndarray  # (T, M) bool
    layer1_capped_history: np.ndarray  # (T, M) bool
    mean_history: np.ndarray  # (T+1, M, 2)
    cov_trace_history: np.ndarray  # (T+1, M)
    truths: np.ndarray  # (M, 2)
    seed: int
    scenario: Scenario


@dataclass
class RngStreams:
    particle_init: np.random.Generator
    measurement_noise: np.random.Generator
    directions: np.random.Generator
    restarts: np.random.Generator
    resampling: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "RngStreams":
        children = np.random.SeedSequence(seed).spawn(5)
        return cls(*(np.random.default_rng(c) for c in children))


def source_layout(n_sources: int, domain: DomainBox) -> np.ndarray:
    """Deterministic well-separated ring of true source positions, shape (M, 2).

    Sources sit at radius 0.35 * min(width, height) around the box center, at
    angles 2 pi k / M + pi / 2.
    """
    if n_sources < 1:
        raise ValueError("source count must be >= 1")
    radius = 0.35 * min(domain.width, domain.height)
    angles = 2.0 * np.pi * np.arange(n_sources) / n_sources + 0.5 * np.pi
    return domain.center + radius * np.column_stack([np.cos(angles), np.sin(angles)])


def rmse(estimates: np.ndarray, truths: np.ndarray) -> float:
    """Root-mean-square position error across sources."""
    estimates = np.asarray(estimates, dtype=float).reshape(-1, 2)
    truths = np.asarray(truths, dtype=float).reshape(-1, 2)
    if len(estimates) != len(truths):
        raise ValueError(
            f"estimate/truth length mismatch: {len(estimates)} vs {len(truths)}"
        )
    return float(np.sqrt(np.mean(np.sum((estimates - truths) ** 2, axis=1))))


def _cov_trace(cloud: ParticleCloud, mean: np.ndarray) -> float:
    centered = cloud.positions - mean
    return float(np.sum(cloud.weights * np.sum(centered * centered, axis=1)))


def run_trial(scenario: Scenario) -> TrialRecord:
    """Execute the sequential procedure for one (scenario, method, seed) cell."""
    m_sources = scenario.n_sources
    r_sensors = scenario.n_sensors
    t_iters = scenario.n_iterations
    noise = NoiseModel(scenario.sigma)
    domain = scenario.domain
    streams = RngStreams.from_seed(scenario.seed)

    truths = source_layout(m_sources, domain)
    clouds = [init_cloud(streams.particle_init, scenario.n_particles, domain)
              for _ in range(m_sources)]
    sensors = domain.lower + streams.particle_init.uniform(
        0.0, SENSOR_INIT_JITTER, size=(r_sensors, 2)
    )

    rmse_hist = np.zeros(t_iters + 1)
    sensor_hist = np.zeros((t_iters + 1, r_sensors, 2))
    ess_hist = np.zeros((t_iters, m_sources))
    active_hist = np.zeros((t_iters, m_sources), dtype=bool)
    capped_hist = np.zeros((t_iters, m_sources), dtype=bool)
    mean_hist = np.zeros((t_iters + 1, m_sources, 2))
    cov_hist = np.zeros((t_iters + 1, m_sources))

    def record_state(t_index: int) -> None:
        means = np.array([weighted_mean(c) for c in clouds])
        mean_hist[t_index] = means
        cov_hist[t_index] = [_cov_trace(c, means[i]) for i, c in enumerate(clouds)]
        rmse_hist[t_index] = rmse(means, truths)
        sensor_hist[t_index] = sensors

    record_state(0)

    half_n = scenario.n_particles / 2.0
    for t in range(t_iters):
        if scenario.method == METHOD_MAXENT:
            tilts = [
                maxent_reweight(c, scenario.epsilon, scenario.n_directions,
                                streams.directions)
                for c in clouds
            ]
            active_hist[t] = [s.active for s in tilts]
            capped_hist[t] = [s.capped for s in tilts]
            layer2_clouds = [
                ParticleCloud(c.positions, s.weights) for c, s in zip(clouds, tilts)
            ]
        else:
            layer2_clouds = clouds

        placed = optimize_placement(
            layer2_clouds, noise, domain, r_sensors, scenario.n_restarts,
            streams.restarts,
        )
        sensors = placed.sensors

        # One noise draw per (sensor, source) regardless of sensor positions,
        # so paired methods see the same eta values.
        eta = streams.measurement_noise.normal(0.0, scenario.sigma,
                                               size=(r_sensors, m_sources))
        measured = wrap_angle(bearing(sensors[:, None, :], truths[None, :, :]) + eta)

        for m in range(m_sources):
            weights = update_weights(clouds[m], measured[:, m], sensors, noise)
            ess_hist[t, m] = effective_sample_size(weights)
            updated = ParticleCloud(clouds[m].positions, weights)
            if ess_hist[t, m] < half_n:
                updated = systematic_resample(streams.resampling, updated)
            clouds[m] = updated

        record_state(t + 1)

    return TrialRecord(
        rmse_per_iteration=rmse_hist,
        final_estimates=mean_hist[-1].copy(),
        sensor_history=sensor_hist,
        ess_history=ess_hist,
        layer1_active_history=active_hist,
        layer1_capped_history=capped_hist,
        mean_history=mean_hist,
        cov_trace_history=cov_hist,
        truths=truths,
        seed=scenario.seed,
        scenario=scenario,
    )


def trial_records_equal(a: TrialRecord, b: TrialRecord) -> bool:
    """Exact (bit-for-bit) equality of trial data, ignoring the configs."""
    return (
        a.seed == b.seed
        and np.array_equal(a.rmse_per_iteration, b.rmse_per_iteration)
        and np.array_equal(a.final_estimates, b.final_estimates)
        and np.array_equal(a.sensor_history, b.sensor_history)
        and np.array_equal(a.ess_history, b.ess_history)
        and np.array_equal(a.layer1_active_history, b.layer1_active_history)
        and np.array_equal(a.layer1_capped_history, b.layer1_capped_history)
        and np.array_equal(a.mean_history, b.mean_history)
        and np.array_equal(a.cov_trace_history, b.cov_trace_history)
        and np.array_equal(a.truths, b.truths)
    )


# ---------------------------------------------------------------------------
# Monte-Carlo sweeps


@dataclass(frozen=True)
class SweepGrid:
    """Grid specification for a paired-method Monte-Carlo sweep."""

    sources: tuple
    sensors: tuple
    sigmas_deg: tuple
    seeds: tuple
    n_iterations: int = 10
    n_particles: int = 1000
    epsilon: float = 0.5
    n_directions: int = 50
    n_restarts: int = 3
    domain: DomainBox = DEFAULT_DOMAIN

    def __post_init__(self):
        if not (self.sources and self.sensors and self.sigmas_deg and self.seeds):
            raise ValueError("sweep grid must be nonempty in every dimension")

    def cells(self):
        for m in self.sources:
            for r in self.sensors:
                for sigma_deg in self.sigmas_deg:
                    for seed in self.seeds:
                        yield m, r, sigma_deg, seed

    def scenario(self, m, r, sigma_deg, seed, method) -> Scenario:
        return Scenario(
            n_sources=m,
            n_sensors=r,
            sigma=math.radians(sigma_deg),
            n_iterations=self.n_iterations,
            n_particles=self.n_particles,
            epsilon=self.epsilon,
            n_directions=self.n_directions,
            n_restarts=self.n_restarts,
            domain=self.domain,
            seed=seed,
            method=method,
        )


@dataclass
class SweepResult:
    """Aggregated sweep output: per-trial rows plus the summary grids."""

    rows: list  # dicts with keys M, R, sigma_deg, method, seed, rmse (tuple)
    n_iterations: int
    means: dict = field(default_factory=dict)  # (M, R, sigma_deg, method) -> float
    stds: dict = field(default_factory=dict)
    improvements: dict = field(default_factory=dict)  # (M, R, sigma_deg) -> percent
    savings: dict = field(default_factory=dict)  # (M, sigma_deg) -> int


def _run_cell(args):
    m, r, sigma_deg, seed, method, grid = args
    record = run_trial(grid.scenario(m, r, sigma_deg, seed, method))
    return {
        "M": m,
        "R": r,
        "sigma_deg": sigma_deg,
        "method": method,
        "seed": seed,
        "rmse": tuple(float(v) for v in record.rmse_per_iteration),
    }


def aggregate_rows(rows, n_iterations: int) -> SweepResult:
    """Mean/std per (M, R, sigma, method), paired improvement, sensor savings."""
    result = SweepResult(rows=sorted(rows, key=_row_key), n_iterations=n_iterations)
    finals = {}
    for row in result.rows:
        key = (row["M"], row["R"], row["sigma_deg"], row["method"])
        finals.setdefault(key, []).append(row["rmse"][-1])
    for key, values in finals.items():
        arr = np.asarray(values)
        result.means[key] = float(arr.mean())
        result.stds[key] = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    for (m, r, sigma_deg, method) in list(result.means):
        if method != METHOD_DOPT:
            continue
        maxent_key = (m, r, sigma_deg, METHOD_MAXENT)
        if maxent_key in result.means:
            dopt = result.means[(m, r, sigma_deg, METHOD_DOPT)]
            result.improvements[(m, r, sigma_deg)] = (
                100.0 * (dopt - result.means[maxent_key]) / dopt
            )
    m_values = sorted({k[0] for k in result.improvements})
    sigma_values = sorted({k[2] for k in result.improvements})
    for m in m_values:
        for sigma_deg in sigma_values:
            if any(k[0] == m and k[2] == sigma_deg for k in result.improvements):
                result.savings[(m, sigma_deg)] = sensor_saving(result, m, sigma_deg)
    return result


def _row_key(row):
    return (row["M"], row["R"], row["sigma_deg"], row["method"], row["seed"])


def run_sweep(grid: SweepGrid, workers: int = 1) -> SweepResult:
    """Run every (M, R, sigma, seed) cell with both methods, paired by seed.

    Cells are independent; ``workers`` > 1 distributes them over a process
    pool. Each trial rebuilds its RNG streams from its own seed, so results
    are identical regardless of scheduling.
    """
    tasks = [
        (m, r, sigma_deg, seed, method, grid)
        for (m, r, sigma_deg, seed) in grid.cells()
        for method in METHODS
    ]
    if workers <= 1:
        rows = [_run_cell(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, tasks, chunksize=1))
    return aggregate_rows(rows, grid.n_iterations)


def sensor_saving(sweep: SweepResult, n_sources: int, sigma_deg: float) -> int:
    """Largest R_f - R_m with MaxEnt at R_m no worse than the baseline at R_f.

    0 when no sensor-count pair qualifies.
    """
    r_values = sorted(
        {
            k[1]
            for k in sweep.means
            if k[0] == n_sources and k[2] == sigma_deg and k[3] == METHOD_MAXENT
            and (n_sources, k[1], sigma_deg, METHOD_DOPT) in sweep.means
        }
    )
    best = 0
    for r_full in r_values:
        dopt = sweep.means[(n_sources, r_full, sigma_deg, METHOD_DOPT)]
        for r_reduced in r_values:
            if sweep.means[(n_sources, r_reduced, sigma_deg, METHOD_MAXENT)] <= dopt:
                best = max(best, r_full - r_reduced)
    return best


# ---------------------------------------------------------------------------
# Persistence (CSV / JSON); floats carry 17 significant digits.


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def trial_csv_columns(n_iterations: int) -> list:
    return ["M", "R", "sigma_deg", "method", "seed", "rmse_final"] + [
        f"rmse_t{t}" for t in range(n_iterations + 1)
    ]


def write_trials_csv(path, rows, n_iterations: int) -> None:
    """One row per (M, R, sigma_deg, method, seed) with the full RMSE trajectory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(trial_csv_columns(n_iterations))
        for row in sorted(rows, key=_row_key):
            writer.writerow(
                [row["M"], row["R"], _fmt(float(row["sigma_deg"])), row["method"],
                 row["seed"], _fmt(row["rmse"][-1])]
                + [_fmt(v) for v in row["rmse"]]
            )


def read_trials_csv(path):
    """Inverse of ``write_trials_csv``."""
    rows = []
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise ValueError(f"empty trials file: {path}")
        t_columns = [c for c in reader.fieldnames if c.startswith("rmse_t")]
        t_columns.sort(key=lambda c: int(c[len("rmse_t"):]))
        for entry in reader:
            rows.append(
                {
                    "M": int(entry["M"]),
                    "R": int(entry["R"]),
                    "sigma_deg": float(entry["sigma_deg"]),
                    "method": entry["method"],
                    "seed": int(entry["seed"]),
                    "rmse": tuple(float(entry[c]) for c in t_columns),
                }
            )
    return rows


SUMMARY_COLUMNS = ["M", "R", "sigma_deg", "dopt_mean", "dopt_std", "maxent_mean",
                   "maxent_std", "improvement_pct"]


def write_summary_csv(path, sweep: SweepResult) -> None:
    """Aggregated mean/std per method and paired improvement, keyed (M, R, sigma)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    keys = sorted(sweep.improvements)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SUMMARY_COLUMNS)
        for (m, r, sigma_deg) in keys:
            writer.writerow(
                [m, r, _fmt(float(sigma_deg))]
                + [
                    _fmt(sweep.means[(m, r, sigma_deg, METHOD_DOPT)]),
                    _fmt(sweep.stds[(m, r, sigma_deg, METHOD_DOPT)]),
                    _fmt(sweep.means[(m, r, sigma_deg, METHOD_MAXENT)]),
                    _fmt(sweep.stds[(m, r, sigma_deg, METHOD_MAXENT)]),
                    _fmt(sweep.improvements[(m, r, sigma_deg)]),
                ]
            )


def write_saving_csv(path, sweep: SweepResult) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["M", "sigma_deg", "saving"])
        for (m, sigma_deg) in sorted(sweep.savings):
            writer.writerow([m, _fmt(float(sigma_deg)), sweep.savings[(m, sigma_deg)]])


def trial_record_jsonable(record: TrialRecord, sigma_deg: float) -> dict:
    scenario = record.scenario
    return {
        "method": scenario.method,
        "seed": record.seed,
        "M": scenario.n_sources,
        "R": scenario.n_sensors,
        "sigma_deg": sigma_deg,
        "epsilon": scenario.epsilon,
        "n_iterations": scenario.n_iterations,
        "n_particles": scenario.n_particles,
        "rmse_per_iteration": record.rmse_per_iteration.tolist(),
        "final_estimates": record.final_estimates.tolist(),
        "sensor_history": record.sensor_history.tolist(),
        "ess_history": record.ess_history.tolist(),
        "layer1_active_history": record.layer1_active_history.tolist(),
        "layer1_capped_history": record.layer1_capped_history.tolist(),
        "truths": record.truths.tolist(),
    }


def write_trial_json(path, record: TrialRecord, sigma_deg: float) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as handle:
        json.dump(trial_record_jsonable(record, sigma_deg), handle, indent=1)
        handle.write("\n")


def filmstrip_documents(record: TrialRecord, sigma_deg: float) -> list:
    """One JSON-ready snapshot per iteration: truths, estimates, sensors."""
    docs = []
    for t in range(len(record.mean_history)):
        docs.append(
            {
                "iteration": t,
                "method": record.scenario.method,
                "seed": record.seed,
                "sigma_deg": sigma_deg,
                "sources": record.truths.tolist(),
                "estimates": [
                    {
                        "mean": record.mean_history[t, m].tolist(),
                        "cov_trace": float(record.cov_trace_history[t, m]),
                    }
                    for m in range(record.scenario.n_sources)
                ],
                "sensors": record.sensor_history[t].tolist(),
            }
        )
    return docs


def write_filmstrip(directory, record: TrialRecord, sigma_deg: float) -> list:
    """Write one snapshot document per iteration; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for doc in filmstrip_documents(record, sigma_deg):
        path = directory / f"{record.scenario.method}_seed{record.seed}_t{doc['iteration']:02d}.json"
        with open(path, "w") as handle:
            json.dump(doc, handle, indent=1)
            handle.write("\n")
        paths.append(path)
    return paths
