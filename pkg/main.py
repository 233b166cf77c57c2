"""
homobound command line.

    python main.py solve configs/square_S_odd.json --out results --format both
    python main.py schema
"""

import argparse
import json
import logging
import logging.config
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from bounds import BoundsReport
from driver import FORMATS, emit_reports, load_config, run_experiment
from errors import ConfigError, HomoboundError
from models import ExperimentConfig, Settings, get_settings

logger = logging.getLogger("homobound")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2

STATUS_ICON = {"ok": "✅", "not_converged": "⚠️", "failed": "❌"}


def configure_logging(settings: Settings):
    path = Path(settings.log_config)
    if not path.is_absolute() and not path.exists():
        path = Path(__file__).parent / path
    if path.exists():
        logging.config.fileConfig(path, disable_existing_loggers=False)
    else:
        logging.basicConfig(format="%(levelname)-5.5s [%(name)s] %(message)s")
    level = settings.log_level.upper()
    for name in ("", "solver", "bounds"):
        logging.getLogger(name).setLevel(level)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="homobound", description="Guaranteed bounds on homogenized matrices by FFT-based GaNi"
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    solve = subparsers.add_parser("solve", help="Run an experiment configuration")
    solve.add_argument("config", type=Path, help="Experiment configuration (JSON)")
    solve.add_argument("--out", type=Path, help="Output directory")
    solve.add_argument("--format", choices=sorted(FORMATS), help="Report formats (default: from config)")
    solve.add_argument("--jobs", type=int, default=1, help="Grids solved concurrently")
    solve.add_argument("--tol", type=float, help="Override the CG tolerance")

    subparsers.add_parser("schema", help="Print the JSON schema of experiment configurations")
    return parser


def print_summary(reports: Sequence[BoundsReport], paths: Sequence[Path]):
    print("\n📊 HOMOGENIZATION SUMMARY")
    print("=" * 60)
    for r in reports:
        label = "x".join(str(n) for n in r.grid["N"])
        icon = STATUS_ICON.get(r.status, "❓")
        line = f"{icon} N={label:<12} {r.status}"
        if r.A_upper is not None:
            line += f"  A11 in [{r.B_lower_inv[0, 0]:.7f}, {r.A_upper[0, 0]:.7f}]  D11={r.D[0, 0]:.3e}"
        elif r.A_gani is not None:
            line += f"  A_gani11={r.A_gani[0, 0]:.7f}"
        if r.error:
            line += f"  ({r.error})"
        print(line)
    print("=" * 60)
    ok = sum(r.status == "ok" for r in reports)
    print(f"Total: {len(reports)}  OK: {ok}  Problems: {len(reports) - ok}")
    for p in paths:
        print(f"📁 {p}")


def cmd_solve(args, settings: Settings) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"❌ Invalid configuration {args.config}:")
        for error in exc.errors:
            print(f"   - {error}")
        return EXIT_CONFIG
    if args.tol is not None:
        if not args.tol > 0:
            print(f"❌ --tol must be positive, got {args.tol}")
            return EXIT_CONFIG
        cfg = cfg.model_copy(update={"solver": cfg.solver.model_copy(update={"tol": args.tol})})
    if args.jobs < 1:
        print(f"❌ --jobs must be >= 1, got {args.jobs}")
        return EXIT_CONFIG

    try:
        reports = run_experiment(cfg, settings, jobs=args.jobs)
    except HomoboundError as exc:
        print(f"❌ Experiment {cfg.name} could not start: {exc}")
        return EXIT_CONFIG

    out_dir = args.out or Path(cfg.output.directory or settings.output_dir)
    formats: List[str] = [args.format] if args.format else list(cfg.output.formats)
    paths = emit_reports(reports, formats, out_dir, cfg.name)
    print_summary(reports, paths)
    return EXIT_OK if all(r.status == "ok" for r in reports) else EXIT_PARTIAL


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT_CONFIG

    settings = get_settings()
    configure_logging(settings)

    if args.command == "schema":
        print(json.dumps(ExperimentConfig.model_json_schema(), indent=2))
        return EXIT_OK
    return cmd_solve(args, settings)


if __name__ == "__main__":
    sys.exit(main())
