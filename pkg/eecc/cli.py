"""Command line front end: `eecc {track,synth,eval,bench,selftest}`.

Exit codes are 0 on success, 1 on a runtime failure and 2 on a usage or
input error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .base.misc import ConfigError, EECCError, StreamParseError
from .core.engine import track_seeds
from .core.solver import SolverMode
from .io.config import Config, load_config
from .io.streams import (
    StreamHeader,
    parse_seeds,
    parse_tracks,
    read_sharpness,
    write_bench,
    write_cdf,
    write_events,
    write_metrics,
    write_seeds,
    write_summary,
    write_track,
    write_tracks,
)
from .mpi import MPI_UTILS
from .selftest import run_selftest
from .synth.bench import benchmark_solver_modes
from .synth.evaluation import evaluate_tracks
from .synth.generator import (
    generate_synthetic_events,
    ground_truth_records,
    scenario_seeds,
)
from .synth.scene import load_scenario
from .utilities import bash_colors, output_profile, profile_run

logger = logging.getLogger("eecc")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

EVENTS_FILE = "events.txt"
SEEDS_FILE = "seeds.txt"
GT_FILE = "gt.csv"
SUMMARY_FILE = "summary.csv"
METRICS_FILE = "metrics.csv"
CDF_FILE = "cdf.csv"
BENCH_FILE = "bench.csv"


class InputError(EECCError):
    """A missing or unreadable input file"""


def track_filename(index: int) -> str:
    return f"track_{index:04d}.csv"


def _require_file(path, what: str) -> Path:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{what} file {str(path)!r} not found")
    return path


def _print_summary(title: str, lines: List[str]) -> None:
    if MPI_UTILS.rank != 0:
        return
    bc = bash_colors()
    print(
        f"\n{bc.header('--' * 13)} {bc.header(bc.bold(title))} {bc.header('--' * 13)}"
    )
    for line in lines:
        print(bc.blue(bc.bold(line)))
    print(bc.header(f"{'--' * 40}"))


def _load_config(path, strict_timestamps: bool = False) -> Config:
    config = load_config(None if path is None else _require_file(path, "config"))
    if strict_timestamps:
        config = config.with_overrides(strict_timestamps=True)
    return config


def run_track(
    events,
    seeds,
    out,
    config=None,
    strict_timestamps: bool = False,
    nthreads: Optional[int] = None,
) -> int:
    """Tracks every seed over the event file and writes one track CSV per
    seed plus `summary.csv`.

    Returns
    -------
    int
        0 when every seed initialised, 1 otherwise
    """
    config = _load_config(config, strict_timestamps)
    events = _require_file(events, "events")
    header = StreamHeader(width=config.width, height=config.height)
    seed_list = parse_seeds(_require_file(seeds, "seeds"), header=header)

    results = track_seeds(events, seed_list, config=config, nthreads=nthreads)
    records = [result.record for result in results]

    if MPI_UTILS.rank == 0:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        for result in results:
            write_track(out / track_filename(result.index), result.record)
        write_summary(
            out / SUMMARY_FILE,
            records,
            sharpness={r.index: r.template_sharpness for r in results},
        )

    starved = [r.index for r in results if not r.initialized]
    _print_summary(
        "Track Summary",
        [
            f"Tracked {len(results)} seeds with N={config.patch_radius} and "
            f"{config.buffer_events} buffered events ({config.solver_mode.name.lower()})",
            f"{sum(r.accepted for r in results)} events produced a state, "
            f"{sum(r.clamped_steps for r in results)} updates were clamped",
            f"Seeds without initialisation: {starved if starved else 'none'}",
        ],
    )
    return EXIT_OK if not starved else EXIT_FAILURE


def run_synth(scenario, out, rng_seed: Optional[int] = None) -> int:
    """Writes `events.txt`, `seeds.txt` and the ground truth `gt.csv` of a
    scenario"""
    scenario = load_scenario(
        None if scenario is None else _require_file(scenario, "scenario")
    )
    seed = scenario.rng_seed if rng_seed is None else rng_seed
    packet, truth = generate_synthetic_events(scenario.scene, scenario.motion, seed=seed)
    seeds = scenario_seeds(scenario)
    gt = ground_truth_records(
        truth, seeds, end_s=scenario.duration, step_s=scenario.gt_step_s
    )

    if MPI_UTILS.rank == 0:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        write_events(out / EVENTS_FILE, packet)
        write_seeds(out / SEEDS_FILE, seeds)
        write_tracks(out / GT_FILE, gt)

    _print_summary(
        "Synth Summary",
        [
            f"Generated {len(packet)} events over {scenario.duration:.3f} s "
            f"on a {scenario.scene.width}x{scenario.scene.height} sensor",
            f"{len(seeds)} seeds with ground truth every {scenario.gt_step_s} s",
        ],
    )
    return EXIT_OK


def _track_files(tracks) -> List[Path]:
    tracks = Path(tracks)
    if tracks.is_dir():
        files = sorted(tracks.glob("track_*.csv"))
        if not files:
            raise InputError(f"no track_*.csv file in {str(tracks)!r}")
        return files
    return [_require_file(tracks, "tracks")]


def run_eval(tracks, gt, out, config=None, horizon_s: Optional[float] = None) -> int:
    """Compares tracks with ground truth and writes `metrics.csv` and the
    outlier CDF `cdf.csv`. Template sharpness comes from the `summary.csv`
    next to the tracks when `tracks` is a directory holding one.

    Returns
    -------
    int
        1 when some ids are missing on either side or lack overlap
    """
    config = _load_config(config)
    records = [record for path in _track_files(tracks) for record in parse_tracks(path)]
    truth = parse_tracks(_require_file(gt, "ground truth"))
    summary = Path(tracks) / SUMMARY_FILE
    sharpness = read_sharpness(summary) if summary.is_file() else None

    report = evaluate_tracks(
        records,
        truth,
        threshold_px=config.outlier_px,
        horizon_s=horizon_s,
        sharpness=sharpness,
    )

    if MPI_UTILS.rank == 0:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        write_metrics(out / METRICS_FILE, report.evaluations)
        write_cdf(out / CDF_FILE, report.grid, report.cdf)

    _print_summary(
        "Eval Summary",
        [
            f"Evaluated {len(report.evaluations)} features at {report.threshold_px} px",
            f"Mean position error {report.mean_error_px:.4f} px, "
            f"outlier fraction {report.outlier_fraction:.3f}",
            f"Survival over {report.horizon_s:.3f} s: {report.survival_fraction:.3f}",
            f"Mean template sharpness {report.mean_sharpness:.3f}",
        ],
    )
    if report.missing_ids:
        logger.error("unmatched feature ids: %s", report.missing_ids)
        return EXIT_FAILURE
    return EXIT_OK


def run_bench(
    out=None, config=None, mode: str = "both", events: int = 5000, rng_seed: int = 0
) -> int:
    """Times the solver modes on the single-star workload and writes
    `bench.csv`, or prints it when `out` is `None`"""
    config = _load_config(config)
    modes = (
        (SolverMode.INCREMENTAL, SolverMode.FULL)
        if mode == "both"
        else (SolverMode[mode.upper()],)
    )
    rows = benchmark_solver_modes(config, modes=modes, events=events, rng_seed=rng_seed)

    if MPI_UTILS.rank == 0:
        if out is None:
            write_bench(sys.stdout, rows)
        else:
            out = Path(out)
            out.mkdir(parents=True, exist_ok=True)
            write_bench(out / BENCH_FILE, rows)

    _print_summary(
        "Bench Summary",
        [
            f"{row.mode}: {row.events} steps, mean {row.mean_us:.1f} us, "
            f"median {row.median_us:.1f} us"
            for row in rows
        ],
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eecc",
        description="Event-by-event feature tracking with closed-form ECC steps.",
    )
    parser.add_argument(
        "--verbose", action="store_true", help="Log at DEBUG level"
    )
    parser.add_argument(
        "--profile",
        action="store_true",
        help="Profile the subcommand with cProfile and print the report",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    track = commands.add_parser("track", help="Track seeds over an event file")
    track.add_argument("--events", required=True, help="`t x y p` event file")
    track.add_argument("--seeds", required=True, help="`t x y [label]` seed file")
    track.add_argument("--config", default=None, help="`key = value` config file")
    track.add_argument("--out", required=True, help="Output directory")
    track.add_argument(
        "--strict-timestamps",
        action="store_true",
        help="Fail on decreasing timestamps instead of skipping them",
    )
    track.add_argument(
        "--threads",
        type=int,
        default=None,
        help="Worker threads per process (default: EECC_THREADS or 1)",
    )

    synth = commands.add_parser("synth", help="Generate a synthetic scenario")
    synth.add_argument("--scenario", default=None, help="Scenario file")
    synth.add_argument("--out", required=True, help="Output directory")
    synth.add_argument(
        "--rng-seed", type=int, default=None, help="Overrides the scenario rng_seed"
    )

    evaluate = commands.add_parser("eval", help="Evaluate tracks against ground truth")
    evaluate.add_argument(
        "--tracks", required=True, help="Track CSV or directory of track_*.csv files"
    )
    evaluate.add_argument("--gt", required=True, help="Ground-truth track CSV")
    evaluate.add_argument("--config", default=None, help="`key = value` config file")
    evaluate.add_argument("--out", required=True, help="Output directory")
    evaluate.add_argument(
        "--horizon",
        type=float,
        default=None,
        help="CDF horizon in seconds (default: ground-truth duration)",
    )

    bench = commands.add_parser("bench", help="Time the solver modes")
    bench.add_argument("--config", default=None, help="`key = value` config file")
    bench.add_argument(
        "--mode", choices=["incremental", "full", "both"], default="both"
    )
    bench.add_argument("--events", type=int, default=5000, help="Timed steps per mode")
    bench.add_argument("--rng-seed", type=int, default=0)
    bench.add_argument("--out", default=None, help="Output directory")

    selftest = commands.add_parser("selftest", help="Run the numerical self checks")
    selftest.add_argument(
        "--quick", action="store_true", help="Smaller instance counts"
    )
    selftest.add_argument("--rng-seed", type=int, default=0)
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "track":
        return run_track(
            args.events,
            args.seeds,
            args.out,
            config=args.config,
            strict_timestamps=args.strict_timestamps,
            nthreads=args.threads,
        )
    if args.command == "synth":
        return run_synth(args.scenario, args.out, rng_seed=args.rng_seed)
    if args.command == "eval":
        return run_eval(
            args.tracks, args.gt, args.out, config=args.config, horizon_s=args.horizon
        )
    if args.command == "bench":
        return run_bench(
            out=args.out,
            config=args.config,
            mode=args.mode,
            events=args.events,
            rng_seed=args.rng_seed,
        )
    results = run_selftest(quick=args.quick, rng_seed=args.rng_seed)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILURE


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_OK if err.code == 0 else EXIT_USAGE

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    pr = profile_run() if args.profile else None
    if pr is not None:
        pr.enable()
    try:
        return _dispatch(args)
    except (InputError, ConfigError, StreamParseError, OSError) as err:
        logger.error("%s", err)
        return EXIT_USAGE
    except (EECCError, ValueError) as err:
        logger.error("%s", err)
        return EXIT_FAILURE
    finally:
        if pr is not None:
            pr.disable()
            if MPI_UTILS.rank == 0:
                output_profile(pr, stream=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
