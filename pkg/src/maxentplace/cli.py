"""Command-line entry point: single trials, grid sweeps, and report generation.

Noise is configured in degrees on the command line (matching the usual 8/15
degree operating points) and converted to radians internally. Exit codes:
0 success, 2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from .geometry import DomainBox
from .harness import (
    DEFAULT_DOMAIN,
    METHOD_DOPT,
    METHOD_MAXENT,
    METHODS,
    SweepGrid,
    aggregate_rows,
    read_trials_csv,
    run_sweep,
    run_trial,
    write_filmstrip,
    write_saving_csv,
    write_summary_csv,
    write_trial_json,
    write_trials_csv,
)

QUICK_SOURCES = (3, 5)
QUICK_SENSORS = (3, 10)
QUICK_SEEDS = 5


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Effective configuration written beside results for provenance."""

    command: str
    sources: tuple
    sensors: tuple
    sigmas_deg: tuple
    seeds: tuple
    iterations: int
    particles: int
    epsilon: float
    projections: int
    restarts: int
    method: str
    workers: int
    out: str
    domain: tuple  # (x_min, x_max, y_min, y_max)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        for key in ("sources", "sensors", "sigmas_deg", "seeds", "domain"):
            data[key] = tuple(data[key])
        return cls(**data)

    @property
    def domain_box(self) -> DomainBox:
        return DomainBox(*self.domain)

    def grid(self) -> SweepGrid:
        return SweepGrid(
            sources=self.sources,
            sensors=self.sensors,
            sigmas_deg=self.sigmas_deg,
            seeds=self.seeds,
            n_iterations=self.iterations,
            n_particles=self.particles,
            epsilon=self.epsilon,
            n_directions=self.projections,
            n_restarts=self.restarts,
            domain=self.domain_box,
        )


def _parse_int_list(text: str, flag: str) -> tuple:
    """Accept ``a..b`` ranges and comma-separated values."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            values = tuple(range(int(lo), int(hi) + 1))
        else:
            values = tuple(int(v) for v in text.split(","))
    except ValueError as err:
        raise ConfigError(f"{flag}: cannot parse {text!r}") from err
    if not values:
        raise ConfigError(f"{flag}: empty range")
    return values


def _parse_float_list(text: str, flag: str) -> tuple:
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError as err:
        raise ConfigError(f"{flag}: cannot parse {text!r}") from err
    if not values:
        raise ConfigError(f"{flag}: empty list")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maxentplace",
        description="Two-layer MaxEnt / D-optimal sensor placement experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, grid: bool):
        if grid:
            p.add_argument("--sources", default="3..10",
                           help="source counts, e.g. 3..10 or 3,5,8")
            p.add_argument("--sensors", default="3..10",
                           help="sensor counts, e.g. 3..10 or 3,10")
            p.add_argument("--sigma-deg", default="8,15",
                           help="noise levels in degrees, comma separated")
            p.add_argument("--seeds", type=int, default=20,
                           help="number of Monte-Carlo seeds (0..n-1)")
        else:
            p.add_argument("--sources", type=int, default=4)
            p.add_argument("--sensors", type=int, default=10)
            p.add_argument("--sigma-deg", type=float, default=8.0)
            p.add_argument("--seed", type=int, default=1)
        p.add_argument("--iterations", type=int, default=10)
        p.add_argument("--particles", type=int, default=1000)
        p.add_argument("--epsilon", type=float, default=0.5)
        p.add_argument("--projections", type=int, default=50)
        p.add_argument("--restarts", type=int, default=3)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", default="results")

    trial = sub.add_parser("trial", help="run one paired trial")
    common(trial, grid=False)
    trial.add_argument("--method", choices=list(METHODS) + ["both"], default="both")

    sweep = sub.add_parser("sweep", help="run a Monte-Carlo grid sweep")
    common(sweep, grid=True)
    sweep.add_argument("--quick", action="store_true",
                       help="desk-scale preset: M in {3,5}, R in {3,10}, 5 seeds")

    report = sub.add_parser("report", help="summarize a results directory")
    report.add_argument("results_dir")
    return parser


def _write_config(out_dir: Path, config: RunConfig) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(config.to_json() + "\n")


def cmd_trial(args) -> int:
    methods = METHODS if args.method == "both" else (args.method,)
    config = RunConfig(
        command="trial",
        sources=(args.sources,),
        sensors=(args.sensors,),
        sigmas_deg=(args.sigma_deg,),
        seeds=(args.seed,),
        iterations=args.iterations,
        particles=args.particles,
        epsilon=args.epsilon,
        projections=args.projections,
        restarts=args.restarts,
        method=args.method,
        workers=args.workers,
        out=args.out,
        domain=(DEFAULT_DOMAIN.x_min, DEFAULT_DOMAIN.x_max,
                DEFAULT_DOMAIN.y_min, DEFAULT_DOMAIN.y_max),
    )
    grid = config.grid()
    out_dir = Path(args.out)
    _write_config(out_dir, config)

    rows = []
    for method in methods:
        scenario = grid.scenario(args.sources, args.sensors, args.sigma_deg,
                                 args.seed, method)
        record = run_trial(scenario)
        rows.append({
            "M": args.sources, "R": args.sensors, "sigma_deg": args.sigma_deg,
            "method": method, "seed": args.seed,
            "rmse": tuple(float(v) for v in record.rmse_per_iteration),
        })
        write_trial_json(out_dir / f"trial_{method}.json", record, args.sigma_deg)
        write_filmstrip(out_dir / "filmstrip", record, args.sigma_deg)
        print(f"{method} final RMSE: {record.rmse_per_iteration[-1]:.6f}")
    write_trials_csv(out_dir / "trials.csv", rows, args.iterations)
    return 0


def cmd_sweep(args) -> int:
    if args.quick:
        sources, sensors = QUICK_SOURCES, QUICK_SENSORS
        seeds = tuple(range(QUICK_SEEDS))
    else:
        sources = _parse_int_list(args.sources, "--sources")
        sensors = _parse_int_list(args.sensors, "--sensors")
        seeds = tuple(range(args.seeds))
    sigmas = _parse_float_list(args.sigma_deg, "--sigma-deg")
    if not seeds:
        raise ConfigError("--seeds: need at least one seed")
    config = RunConfig(
        command="sweep",
        sources=sources,
        sensors=sensors,
        sigmas_deg=sigmas,
        seeds=seeds,
        iterations=args.iterations,
        particles=args.particles,
        epsilon=args.epsilon,
        projections=args.projections,
        restarts=args.restarts,
        method="both",
        workers=args.workers,
        out=args.out,
        domain=(DEFAULT_DOMAIN.x_min, DEFAULT_DOMAIN.x_max,
                DEFAULT_DOMAIN.y_min, DEFAULT_DOMAIN.y_max),
    )
    out_dir = Path(args.out)
    _write_config(out_dir, config)

    n_cells = len(sources) * len(sensors) * len(sigmas) * len(seeds)
    print(f"sweep: {n_cells} cells x 2 methods on {args.workers} worker(s)")
    result = run_sweep(config.grid(), workers=args.workers)
    write_trials_csv(out_dir / "trials.csv", result.rows, args.iterations)
    write_summary_csv(out_dir / "summary.csv", result)
    write_saving_csv(out_dir / "saving.csv", result)
    _print_summary(result)
    return 0


def _print_summary(result) -> None:
    sigmas = sorted({k[2] for k in result.improvements})
    for sigma_deg in sigmas:
        print(f"\nsigma = {sigma_deg:g} deg")
        print(f"{'M':>3} {'R':>3} {'dopt':>16} {'maxent':>16} {'improve':>9}")
        for (m, r, sd) in sorted(result.improvements):
            if sd != sigma_deg:
                continue
            dopt_mean = result.means[(m, r, sd, METHOD_DOPT)]
            dopt_std = result.stds[(m, r, sd, METHOD_DOPT)]
            max_mean = result.means[(m, r, sd, METHOD_MAXENT)]
            max_std = result.stds[(m, r, sd, METHOD_MAXENT)]
            print(f"{m:>3} {r:>3} {dopt_mean:>8.3f} ±{dopt_std:<6.3f} "
                  f"{max_mean:>8.3f} ±{max_std:<6.3f} "
                  f"{result.improvements[(m, r, sd)]:>+8.1f}%")
    if result.savings:
        print("\nequivalent sensor saving")
        for (m, sigma_deg) in sorted(result.savings):
            print(f"  M={m:<3} sigma={sigma_deg:g} deg: {result.savings[(m, sigma_deg)]}")


def cmd_report(args) -> int:
    results_dir = Path(args.results_dir)
    trials_path = results_dir / "trials.csv"
    missing = [str(p) for p in (results_dir, trials_path) if not p.exists()]
    if missing:
        print("missing inputs: " + ", ".join(missing), file=sys.stderr)
        return 3
    rows = read_trials_csv(trials_path)
    if not rows:
        print(f"no trial rows in {trials_path}", file=sys.stderr)
        return 3
    n_iterations = len(rows[0]["rmse"]) - 1
    result = aggregate_rows(rows, n_iterations)
    write_summary_csv(results_dir / "summary.csv", result)
    write_saving_csv(results_dir / "saving.csv", result)
    _print_summary(result)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "trial":
            return cmd_trial(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_report(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except ValueError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
