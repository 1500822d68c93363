"""
Main entry point for philab
Runs experiment configs, writes CSV reports and maps outcomes to exit codes
"""
import argparse
import os
import sys
import uuid
from typing import List, Optional

from dotenv import load_dotenv

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from app.experiments.registry import EXPERIMENT_DEFINITIONS, run_experiment
from app.services.config import get_chunk_size, get_workers, load_experiments
from app.services.errors import ConfigError, DomainError, NumericFailureError, UnsupportedSamplerError
from app.services.report import emit_report
from app.services.run_tracker import end_tracking_run, start_tracking_run

load_dotenv()

EXIT_PASS = 0
EXIT_CHECK_FAIL = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def default_out_path(config_path: str) -> str:
    return os.path.splitext(config_path)[0] + ".csv"


def fail(message: str, code: int) -> int:
    print(f"❌ {message}", file=sys.stderr)
    return code


# ==================== COMMANDS ====================

def run_command(args) -> int:
    """Run every section of a config file, then write one CSV"""
    try:
        configs = load_experiments(args.config, overrides=args.set or [], seed=args.seed)
        workers = get_workers()
        chunk_size = get_chunk_size()
    except ConfigError as e:
        return fail(f"Invalid config: {e}", EXIT_CONFIG)

    run_id = uuid.uuid4().hex
    if not args.quiet:
        print(f"📊 {len(configs)} experiment(s) from {args.config} "
              f"(workers={workers}, chunk_size={chunk_size})")

    rows = []
    all_passed = True
    for config in configs:
        tracker = start_tracking_run(
            run_id, config.name, config.kind,
            config_path=args.config,
            settings=config.model_dump(mode="json"),
            seed=config.seed,
            chunk_size=chunk_size,
            workers=workers,
            quiet=args.quiet,
        )
        try:
            report, section_rows = run_experiment(config, workers=workers, chunk_size=chunk_size)
        except NumericFailureError as e:
            tracker.set_error(f"numeric failure: {e}")
            end_tracking_run(config.name)
            return fail(f"{config.name}: numeric failure: {e}", EXIT_NUMERIC)
        except (DomainError, UnsupportedSamplerError) as e:
            tracker.set_error(f"invalid parameters: {e}")
            end_tracking_run(config.name)
            return fail(f"{config.name}: invalid parameters: {e}", EXIT_CONFIG)

        tracker.set_report(report, section_rows)
        end_tracking_run(config.name, record=args.record)
        rows.extend(section_rows)
        all_passed = all_passed and report.passed

    out_path = args.out or default_out_path(args.config)
    try:
        emit_report(rows, out_path)
    except OSError as e:
        return fail(f"Could not write report {out_path}: {e}", EXIT_IO)

    code = EXIT_PASS if all_passed else EXIT_CHECK_FAIL
    if args.expect_fail:
        code = EXIT_CHECK_FAIL if code == EXIT_PASS else EXIT_PASS
    if not args.quiet:
        verdict = "all checks passed" if all_passed else "some checks failed"
        expectation = " (failure expected)" if args.expect_fail else ""
        marker = "✅" if code == EXIT_PASS else "❌"
        print(f"{marker} {verdict}{expectation}; report written to {out_path}")
    return code


def list_experiments_command(args) -> int:
    for definition in EXPERIMENT_DEFINITIONS:
        print(f"{definition['name']:<16} [{definition['schedule']}] {definition['description']}")
        print(f"{'':<16} keys: {', '.join(definition['keys'])}")
    return EXIT_PASS


def history_command(args) -> int:
    """Most recent recorded runs, newest first"""
    from app.services.database import ExperimentRun, get_db, init_db

    try:
        init_db()
    except Exception as e:
        return fail(f"Could not open run ledger: {e}", EXIT_IO)

    db = get_db()
    try:
        runs = db.query(ExperimentRun).order_by(ExperimentRun.id.desc()).limit(args.limit).all()
        if not runs:
            print("No recorded runs yet (use `philab run ... --record`)")
        for run in runs:
            marker = "✅" if run.passed else "❌"
            finished = run.finished_at.strftime("%Y-%m-%d %H:%M:%S") if run.finished_at else "-"
            print(f"{marker} {finished} {run.run_id[:8]} {run.experiment:<24} {run.kind:<15} "
                  f"distance={run.final_distance:.3e} tol={run.tolerance:.3e} seed={run.seed}")
        return EXIT_PASS
    except Exception as e:
        return fail(f"Could not read run ledger: {e}", EXIT_IO)
    finally:
        db.close()


# ==================== ARGUMENT PARSING ====================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="philab",
        description="Convergence checks for random-sum and random-max limit laws"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run the experiments of a config file")
    run.add_argument("config", help="INI experiment file, one section per experiment")
    run.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override a key in every section (or SECTION.KEY=VALUE); repeatable")
    run.add_argument("--seed", type=int, help="master seed for every section")
    run.add_argument("--out", help="CSV path (default: config path with .csv)")
    run.add_argument("--expect-fail", action="store_true",
                     help="exit 0 when a check fails and 1 when all pass")
    run.add_argument("--record", action="store_true", help="store the run in the ledger")
    run.add_argument("--quiet", action="store_true", help="no progress output")
    run.set_defaults(handler=run_command)

    listing = commands.add_parser("list-experiments", help="list experiment kinds")
    listing.set_defaults(handler=list_experiments_command)

    history = commands.add_parser("history", help="show recorded runs")
    history.add_argument("--limit", type=int, default=20)
    history.set_defaults(handler=history_command)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
