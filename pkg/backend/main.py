"""
Live Allocation Engine CLI

Command-line entry point: generate workloads, train the demand predictor,
solve single periods, simulate full runs across delay thresholds and check
the optimizer against the brute-force oracle.

    python -m backend simulate --trace out/trace.ndjson --thresholds 8.8,371
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Tuple

from pydantic import ValidationError

from backend.config import Settings, load_settings
from backend.core import (
    AllocationError,
    EncoderConfig,
    GeneratorConfig,
    SimConfig,
    generate,
    load_trace,
    save_trace,
)
from backend.schemas import ErrorResponse
from backend.services import allocation_service, predictor_service, region_service, simulation_service


logger = logging.getLogger(__name__)


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _depth_list(text: str) -> List[Optional[int]]:
    depths: List[Optional[int]] = []
    for part in text.split(","):
        part = part.strip().lower()
        if not part:
            continue
        if part == "none":
            depths.append(None)
            continue
        try:
            depths.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected integers or 'none', got '{text}'")
    return depths


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON settings file")
    common.add_argument("--regions", help="regions JSON (list of {id, name, lat, lon})")
    common.add_argument("--rtt", help="measured RTT matrix (JSON, CSV or XLSX, ms)")
    common.add_argument("--prices", help="price catalog or raw CostParams JSON")
    common.add_argument("--thresholds", type=_float_list, help="delay thresholds in ms, e.g. 8.8,60,371")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--jobs", type=int, help="parallel workers")
    common.add_argument("--out-dir", default="out", help="output directory (default: out)")
    common.add_argument("--verbose", "-v", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(
        prog="python -m backend",
        description="Proactive replica placement for crowdsourced live streaming.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("generate", parents=[common], help="write a synthetic trace")
    p.add_argument("--periods", type=int, help="number of periods T")
    p.add_argument("--rate", type=float, help="mean videos per period")
    p.add_argument("--locality", type=float, help="share of viewers in the broadcaster region")
    p.add_argument("--popularity", type=float, help="heavy-tail exponent (> 1)")
    p.add_argument("--out", help="trace path (default: <out-dir>/trace.ndjson)")

    p = sub.add_parser("train", parents=[common], help="fit the demand predictor and report R²")
    p.add_argument("--trace", required=True, help="training trace (.ndjson)")
    p.add_argument("--test-trace", help="unseen trace evaluated with the selected model")
    p.add_argument("--trees", type=_int_list, help="forest sizes to try, e.g. 10,30")
    p.add_argument("--max-depth", type=_depth_list, help="depth limits to try, e.g. 8,16,none")
    p.add_argument("--model-out", help="model path (default: <out-dir>/model.json)")

    p = sub.add_parser("solve", parents=[common], help="solve one period from an instances file")
    p.add_argument("--instances", required=True, help="instances JSON")
    p.add_argument("--threshold", type=float, help="override the file's delay threshold (ms)")

    p = sub.add_parser("simulate", parents=[common], help="run the period simulation for every threshold")
    p.add_argument("--trace", required=True, help="trace (.ndjson)")
    p.add_argument("--model", help="trained model JSON (default: use actual viewers)")
    p.add_argument("--periods", type=int, help="number of periods T")
    p.add_argument("--xlsx", action="store_true", help="also write simulation.xlsx")

    p = sub.add_parser("oracle-check", parents=[common], help="compare the solver with brute force")
    p.add_argument("--count", type=int, default=1000, help="random instances (default: 1000)")
    p.add_argument("--max-regions", type=int, default=5)
    p.add_argument("--max-viewer-regions", type=int, default=4)

    return parser


def _settings_for(args: argparse.Namespace) -> Settings:
    overrides = {
        "REGIONS_PATH": args.regions,
        "RTT_PATH": args.rtt,
        "PRICES_PATH": args.prices,
        "THRESHOLDS_MS": args.thresholds,
        "SEED": args.seed,
        "JOBS": args.jobs,
        "PERIODS": getattr(args, "periods", None),
        "LOG_LEVEL": "DEBUG" if args.verbose else None,
    }
    return load_settings(args.config, **overrides)


def _missing_inputs(settings: Settings) -> List[Tuple[str, str]]:
    """Region, RTT and price paths that were given but do not exist."""
    given = {"regions": settings.REGIONS_PATH, "rtt": settings.RTT_PATH, "prices": settings.PRICES_PATH}
    return [(name, path) for name, path in given.items() if path is not None and not Path(path).is_file()]


def _emit_error(error: str, detail: str, details: Optional[dict] = None) -> None:
    body = ErrorResponse(error=error, detail=detail, details=details or {})
    print(json.dumps(body.model_dump(), sort_keys=True), file=sys.stderr)


def _environment(settings: Settings):
    regions = region_service.region_set(
        settings.REGIONS_PATH, settings.RTT_PATH, settings.BASE_RTT_MS, settings.RTT_MS_PER_KM
    )
    prices = region_service.load_prices(
        regions, settings.PRICES_PATH, settings.PERIOD_LENGTH_HOURS, settings.HOURS_PER_MONTH
    )
    return regions, prices


def cmd_generate(args: argparse.Namespace, settings: Settings) -> int:
    regions = region_service.region_set(
        settings.REGIONS_PATH, settings.RTT_PATH, settings.BASE_RTT_MS, settings.RTT_MS_PER_KM
    )
    cfg = GeneratorConfig(
        n_videos_per_period=args.rate if args.rate is not None else settings.GEN_VIDEOS_PER_PERIOD,
        popularity=args.popularity if args.popularity is not None else settings.GEN_POPULARITY,
        locality=args.locality if args.locality is not None else settings.GEN_LOCALITY,
        seed=settings.SEED,
        n_broadcasters=settings.GEN_BROADCASTERS,
        min_viewers=settings.GEN_MIN_VIEWERS,
        max_viewers=settings.GEN_MAX_VIEWERS,
        noise=settings.GEN_NOISE,
        period_length_hours=settings.PERIOD_LENGTH_HOURS,
        duration_periods=settings.VIDEO_DURATION_PERIODS,
        size_gb=settings.video_size_gb,
    )
    records = generate(cfg, settings.PERIODS, regions)
    path = save_trace(args.out or Path(args.out_dir) / "trace.ndjson", records, regions.n)
    print(f"Wrote {len(records)} videos over {settings.PERIODS} periods to {path}")
    return 0


def cmd_train(args: argparse.Namespace, settings: Settings) -> int:
    regions = region_service.region_set(
        settings.REGIONS_PATH, settings.RTT_PATH, settings.BASE_RTT_MS, settings.RTT_MS_PER_KM
    )
    records = load_trace(args.trace, regions.n)
    test_records = load_trace(args.test_trace, regions.n) if args.test_trace else None
    encoder = EncoderConfig(
        hash_dim_name=settings.HASH_DIM_NAME,
        hash_dim_category=settings.HASH_DIM_CATEGORY,
        hash_seed=settings.HASH_SEED,
    )

    model, report = predictor_service.train(
        records, regions,
        encoder=encoder,
        n_trees_grid=args.trees or [settings.FOREST_TREES],
        max_depth_grid=args.max_depth or [settings.FOREST_MAX_DEPTH],
        min_samples_leaf=settings.FOREST_MIN_SAMPLES_LEAF,
        feature_subsample=settings.feature_subsample,
        train_fraction=settings.TRAIN_FRACTION,
        seed=settings.SEED,
        jobs=settings.JOBS,
        test_records=test_records,
    )

    out_dir = Path(args.out_dir)
    model_path = predictor_service.save_model(model, args.model_out or out_dir / "model.json")
    csv_path = predictor_service.write_report_csv(report, out_dir / "r2.csv")
    (out_dir / "train_report.json").write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")

    print(f"{'region':<12} {'RF R2':>8} {'DT R2':>8}")
    for score in report.regions:
        rf = f"{score.rf_r2:.4f}" if score.rf_r2 is not None else "n/a"
        dt = f"{score.dt_r2:.4f}" if score.dt_r2 is not None else "n/a"
        print(f"{score.region:<12} {rf:>8} {dt:>8}")
    print(f"{'pooled':<12} {report.pooled_rf_r2:>8.4f} {report.pooled_dt_r2:>8.4f}")
    print(f"Model ({report.n_trees} trees) saved to {model_path}; R² table in {csv_path}")
    return 0


def cmd_solve(args: argparse.Namespace, settings: Settings) -> int:
    regions, prices = _environment(settings)
    reports, D, elapsed_ms = allocation_service.solve_file(
        args.instances, regions, prices,
        threshold_ms=args.threshold,
        jobs=settings.JOBS,
        knapsack_resolution_ms=settings.KNAPSACK_RESOLUTION_MS,
        max_refinements=settings.KNAPSACK_MAX_REFINEMENTS,
        charge_broadcaster_migration=settings.CHARGE_BROADCASTER_MIGRATION,
    )
    json_path, csv_path = allocation_service.write_reports(reports, args.out_dir)
    total = sum(r.total_cost for r in reports)
    print(f"Solved {len(reports)} videos at D={D:g} ms, total cost {total:.6f} ({elapsed_ms} ms)")
    print(f"Reports: {json_path}, {csv_path}")
    return 0


def cmd_simulate(args: argparse.Namespace, settings: Settings) -> int:
    regions, prices = _environment(settings)
    trace = load_trace(args.trace, regions.n)
    model = predictor_service.load_model(args.model) if args.model else None

    cfg = SimConfig(
        regions=regions,
        prices=prices,
        T=settings.PERIODS,
        period_length_hours=settings.PERIOD_LENGTH_HOURS,
        thresholds_ms=settings.THRESHOLDS_MS,
        predictor=args.model or "oracle",
        knapsack_resolution_ms=settings.KNAPSACK_RESOLUTION_MS,
        knapsack_max_refinements=settings.KNAPSACK_MAX_REFINEMENTS,
        charge_broadcaster_migration=settings.CHARGE_BROADCASTER_MIGRATION,
        jobs=settings.JOBS,
    )
    results = simulation_service.sweep(trace, cfg, model)
    simulation_service.write_outputs(results, trace, regions, args.out_dir, xlsx=args.xlsx)

    print(f"{'D (ms)':>8} {'system total':>14} {'mean hits %':>12}")
    for summary in simulation_service.summaries(results):
        hits = f"{summary.mean_hits_pct:.1f}" if summary.mean_hits_pct is not None else "n/a"
        print(f"{summary.threshold_ms:>8g} {summary.system_total_cost:>14.6f} {hits:>12}")
    return 0


def cmd_oracle_check(args: argparse.Namespace, settings: Settings) -> int:
    summary = allocation_service.oracle_check(
        n_instances=args.count,
        seed=settings.SEED,
        max_regions=args.max_regions,
        max_viewer_regions=args.max_viewer_regions,
        knapsack_resolution_ms=settings.KNAPSACK_RESOLUTION_MS,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "oracle_check.json").write_text(summary.model_dump_json(indent=2) + "\n", encoding="utf-8")
    print(
        f"{summary.n_instances} instances, {summary.n_infeasible} infeasible, "
        f"{summary.n_mismatches} mismatches, max relative gap {summary.max_relative_gap:.3g} "
        f"({summary.elapsed_ms} ms)"
    )
    return 0 if summary.n_mismatches == 0 else 1


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "oracle-check": cmd_oracle_check,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2

    try:
        settings = _settings_for(args)
    except (OSError, ValueError) as e:
        _emit_error(type(e).__name__, str(e), {"config": args.config})
        return 2

    missing = _missing_inputs(settings)
    if missing:
        parser.print_usage(sys.stderr)
        _emit_error("FileNotFoundError", f"Input file not found: {missing[0][1]}", dict(missing))
        return 2

    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format="[%(levelname)s] %(message)s",
        stream=sys.stderr,
        force=True,
    )

    try:
        return COMMANDS[args.command](args, settings)
    except AllocationError as e:
        print(json.dumps(e.to_dict(), sort_keys=True, default=str), file=sys.stderr)
        return 1
    except (OSError, ValidationError, ValueError) as e:
        _emit_error(type(e).__name__, str(e))
        return 1


if __name__ == "__main__":
    sys.exit(main())
