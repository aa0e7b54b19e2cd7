"""
Main entry point for the MoCDMA link simulator.
Parses the command line, loads scenarios and dispatches to the harness,
writing result files and recording runs.
"""
import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional

import numpy as np

import codes
import config
import database
import emission
import harness
import utils
from export_manager import ExportManager

logger = utils.get_logger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=config.APP_NAME,
        description="Molecular CDMA link simulator: BER sweeps for linear detectors")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    parser.add_argument("--version", action="version", version=f"%(prog)s {config.APP_VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True, help="Command to run")

    run_parser = subparsers.add_parser("run", help="Run the BER sweep of a scenario")
    run_parser.add_argument("config", help="Scenario JSON file")
    run_parser.add_argument("--seed", type=int, help="Override run.seed")
    run_parser.add_argument("--out-dir", default=config.DEFAULT_OUT_DIR, help="Directory for result files")
    run_parser.add_argument("--workers", type=int, help="Worker processes (results do not depend on it)")
    run_parser.add_argument("--noise", choices=["on", "off"], default="on",
                            help="'off' removes the counting noise from the simulated observations")
    run_parser.add_argument("--excel", action="store_true", help="Also write a styled .xlsx workbook")
    run_parser.add_argument("--db", default=config.DB_NAME, help="Run registry file")

    self_parser = subparsers.add_parser("selftest", help="Check model representations and detector identities")
    self_parser.add_argument("config", nargs="?", help="Scenario JSON file (default scenario if omitted)")

    em_parser = subparsers.add_parser("emission-summary", help="Molecules emitted per bit by each NM")
    em_parser.add_argument("config", help="Scenario JSON file")
    em_parser.add_argument("--out-dir", help="Also write emission_summary.csv here")

    codes_parser = subparsers.add_parser("codes", help="Spreading code tools")
    codes_sub = codes_parser.add_subparsers(dest="codes_command", required=True)
    dump_parser = codes_sub.add_parser("dump", help="Print the codes assigned to each NM")
    dump_parser.add_argument("config", help="Scenario JSON file")

    history_parser = subparsers.add_parser("history", help="List recorded runs")
    history_parser.add_argument("--db", default=config.DB_NAME, help="Run registry file")
    history_parser.add_argument("--digest", default="", help="Only runs of this config digest")
    history_action = history_parser.add_mutually_exclusive_group()
    history_action.add_argument("--show", type=int, metavar="RUN_ID", help="Print the sweep points of one run")
    history_action.add_argument("--delete", type=int, metavar="RUN_ID", help="Delete a run and its sweep points")
    return parser


def _cli_overrides(seed: Optional[int], workers: Optional[int], noise: str) -> Dict[str, Any]:
    run: Dict[str, Any] = {}
    if seed is not None:
        run['seed'] = seed
    if workers is not None:
        run['workers'] = workers
    if noise == "off":
        run['noise_scale'] = 0.0
    return {'run': run} if run else {}


def _metadata(cfg: config.ScenarioConfig, report: harness.BerReport) -> Dict[str, Any]:
    sweep = [p.Q for p in report.points]
    return {
        'app': config.APP_NAME,
        'version': config.APP_VERSION,
        'schema': config.RESULT_SCHEMA_VERSION,
        'name': report.name,
        'digest': report.digest,
        'seed': report.seed,
        'wall_time_s': report.wall_time,
        'config': utils.to_document(cfg),
        'emission_summary': emission.emission_summary(
            cfg.emission, sweep, cfg.timing.N, cfg.distances, cfg.medium.D),
        'savings_fraction': emission.savings_fraction(cfg.distances),
        'post_sinr': [{'Q': p.Q, 'sinr': list(p.sinr)} for p in report.points],
    }


def run_experiment(cfg: config.ScenarioConfig, out_dir: str = config.DEFAULT_OUT_DIR,
                   excel: bool = False, db_path: Optional[str] = config.DB_NAME) -> List[str]:
    """Run every variant of the scenario; returns the result CSV paths"""
    utils.FileHelper.ensure_dir(out_dir)
    if db_path:
        database.init_db(db_path)
    written = []
    for variant in utils.expand_variants(cfg):
        report = harness.run_ber(variant)
        stem = os.path.join(out_dir, utils.FileHelper.safe_name(variant.name))
        rows = report.rows()
        if not ExportManager.export_results_csv(f"{stem}.csv", rows, report.digest, report.seed):
            raise utils.SimulationError(f"could not write {stem}.csv")
        if not ExportManager.export_metadata_json(f"{stem}.meta.json", _metadata(variant, report)):
            raise utils.SimulationError(f"could not write {stem}.meta.json")
        if excel:
            emission_rows = emission.emission_summary(
                variant.emission, variant.sweep.values(), variant.timing.N,
                variant.distances, variant.medium.D)
            ExportManager.export_to_excel(f"{stem}.xlsx", rows, emission_rows, title=variant.name)
        if db_path:
            database.record_report(report, variant.emission.value, f"{stem}.csv", db_path=db_path)
        logger.info(f"Variant '{variant.name}' done in {report.wall_time:.1f}s")
        written.append(f"{stem}.csv")
    return written


def emit_emission_summary(cfg: config.ScenarioConfig, out_dir: Optional[str] = None) -> List[Dict[str, Any]]:
    """Print (and optionally write) per-NM molecules per bit for every sweep point"""
    rows = emission.emission_summary(cfg.emission, cfg.sweep.values(), cfg.timing.N,
                                     cfg.distances, cfg.medium.D)
    print(f"{'Q':>12} {'NM':>3} {'d (um)':>8} {'molecules/bit':>15} {'delay (s)':>12}")
    for r in rows:
        print(f"{r['Q']:>12.6g} {r['nm_index']:>3} {r['distance_um']:>8.3f} "
              f"{r['molecules_per_bit']:>15.6g} {r['To_s']:>12.4e}")
    if cfg.emission == config.EmissionStrategy.CHANNEL_INVERSE:
        print(f"Savings vs uniform emission: {emission.savings_fraction(cfg.distances):.2%}")
    if out_dir:
        utils.FileHelper.ensure_dir(out_dir)
        ExportManager.export_emission_summary(os.path.join(out_dir, "emission_summary.csv"), rows)
    return rows


def dump_codes(cfg: config.ScenarioConfig) -> None:
    """Print each NM's code, transition count and worst periodic cross-correlation"""
    assignment = codes.build_family(cfg)
    for k, code in enumerate(assignment.codes):
        others = [c for l, c in enumerate(assignment.codes) if l != k]
        worst = max((int(np.max(np.abs(codes.periodic_correlation(code, o)))) for o in others), default=0)
        chips = "".join('+' if c > 0 else '-' for c in code.chips)
        print(f"NM {k + 1} d={cfg.distances[k] / config.MICROMETRE:.3f}um {code.describe()}")
        print(f"    {chips}  transitions={codes.count_transitions(code)}  max|xcorr|={worst}")


def run_selftest(cfg: Optional[config.ScenarioConfig]) -> bool:
    report = harness.run_matrix_selftest(cfg)
    for check in report.checks:
        print(f"{check.name:<24} {check.deviation:.3e}  {'PASS' if check.passed else 'FAIL'}")
    return report.passed


def show_history(db_path: str, digest: str = '', show: Optional[int] = None,
                 delete: Optional[int] = None) -> bool:
    """List recorded runs, print one run's sweep points, or delete a run"""
    if not os.path.exists(db_path):
        print("No runs recorded yet")
        return show is None and delete is None
    if delete is not None:
        if not database.delete_run(delete, db_path=db_path):
            print(f"No run #{delete}")
            return False
        print(f"Deleted run #{delete}")
        return True
    if show is not None:
        points = database.get_sweep_points(show, db_path=db_path)
        if not points:
            print(f"No run #{show}")
            return False
        print(f"{'Q':>12} {'NM':>3} {'BER':>10} {'95% CI':>23} {'errors':>8} {'bits':>9}")
        for p in points:
            print(f"{p['Q']:>12.6g} {p['nm_index']:>3} {p['ber']:>10.3e} "
                  f"[{p['ci_low']:.3e}, {p['ci_high']:.3e}] {p['errors']:>8} {p['bits']:>9}")
        return True
    for run in database.get_runs(digest, db_path=db_path):
        print(f"#{run['id']:<4} {run['created_at']}  {run['name']:<24} {run['scheme']:<12} "
              f"{run['emission']:<16} seed={run['seed']} digest={run['digest']} "
              f"{run['wall_time']:.1f}s  {run['csv_path']}")
    return True


def _error_record(e: Exception) -> Dict[str, Any]:
    if isinstance(e, utils.ConfigError):
        return e.to_record()
    return {'error': type(e).__name__, 'message': str(e)}


def _write_error(record: Dict[str, Any], out_dir: Optional[str]):
    print(json.dumps(record), file=sys.stderr)
    if out_dir:
        try:
            utils.FileHelper.ensure_dir(out_dir)
            with open(os.path.join(out_dir, "error.json"), 'w', encoding='utf-8') as f:
                json.dump(record, f, indent=2)
        except OSError as e:
            logger.error(f"Could not write error record: {e}")


def main(argv: Optional[List[str]] = None) -> int:
    """Main application entry point"""
    args = build_parser().parse_args(argv)
    utils.setup_logging(config.LOG_DIR, logging.DEBUG if args.verbose else logging.INFO)
    out_dir = getattr(args, 'out_dir', None)

    try:
        if args.command == "run":
            cfg = utils.load_config(args.config)
            overrides = _cli_overrides(args.seed, args.workers, args.noise)
            if overrides:
                cfg = utils.with_overrides(cfg, overrides)
            for path in run_experiment(cfg, out_dir, excel=args.excel, db_path=args.db):
                print(path)
            return 0

        if args.command == "selftest":
            cfg = utils.load_config(args.config) if args.config else None
            return 0 if run_selftest(cfg) else 1

        if args.command == "emission-summary":
            emit_emission_summary(utils.load_config(args.config), out_dir)
            return 0

        if args.command == "codes":
            dump_codes(utils.load_config(args.config))
            return 0

        if args.command == "history":
            return 0 if show_history(args.db, args.digest, args.show, args.delete) else 1

    except (utils.SimulationError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        _write_error(_error_record(e), out_dir)
        return 1
    except Exception as e:
        logger.error(f"Fatal error: {e}", exc_info=True)
        _write_error(_error_record(e), out_dir)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
