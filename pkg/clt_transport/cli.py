#!/usr/bin/env python3
"""
clt-transport CLI - distances, class certificates and acceptance sweeps

Law specs: rademacher, rademacher_sum:n, bernoulli:p, binomial:n[,p],
poisson:lam, dirac:c, gaussian[:mean,variance], grid:step[,variance],
file:path; prefix with center: or normalize: to standardize a lattice.

Example usage:
  # Distance between a normalized binomial and its Gaussian companion
  python -m clt_transport.cli dist normalize:binomial:100 gaussian --metric wpsi

  # Statulevicius certificate of a centered Poisson law
  python -m clt_transport.cli certify center:poisson:10 --class stat --tau 0.34

  # Tilt to a target mean
  python -m clt_transport.cli tilt center:poisson:4 --target-mean 2

  # Run one sweep and lock its empirical constants
  python -m clt_transport.cli sweep poisson_wpsi.yaml --lock

  # Run every bundled acceptance sweep
  python -m clt_transport.cli run-all --workers 4
"""

import argparse
import logging
import sys
import time
from datetime import datetime
from pathlib import Path
from typing import List, Optional

import yaml
from dotenv import load_dotenv
from rich.console import Console
from rich.markup import escape

from . import bounds
from . import cumulants as cu
from . import dist_core as dc
from . import sweeps
from . import tilt
from . import transport as tr
from .exceptions import CLTTransportError
from .printer import Printer, checks_table, summary_table
from .settings import BASE_DIR, CONFIG_DIR, get_settings
from .utils.debug import dump_object

logger = logging.getLogger(__name__)

FAMILIES_FILE = CONFIG_DIR / "families.yaml"


def setup_logging(debug: bool = False, log_dir: Optional[str] = None, name: str = "clt_transport",
                  stream=sys.stdout) -> Path:
    """Log to a timestamped file under log_dir and to the console."""
    log_dir = Path(log_dir or get_settings().log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)
    log_filename = log_dir / f'{name}_{datetime.now().strftime("%Y%m%d_%H%M%S")}.log'
    logging.basicConfig(
        level=logging.DEBUG if debug else logging.INFO,
        format="%(asctime)s [%(levelname)s] %(message)s",
        handlers=[
            logging.FileHandler(log_filename),
            logging.StreamHandler(stream),
        ],
        force=True,
    )
    return log_filename


def load_family_catalogue(path: Path = FAMILIES_FILE) -> dict:
    with open(path, "r") as f:
        return yaml.safe_load(f).get("families", {})


def _emit(console: Console, model, as_json: bool, dump_dir: Optional[str], name: str) -> None:
    if dump_dir:
        dump_object(model, name, dump_dir)
    if as_json:
        print(model.model_dump_json(indent=2))
    else:
        console.print(model)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_list(args, console: Console) -> int:
    console.print("[bold]Families:[/bold]")
    for name, entry in load_family_catalogue().items():
        console.print(f"  {name}: {entry['description']} (parameter: {entry['parameter']})")
    console.print("[bold]Checks:[/bold]")
    for check in sweeps.CHECKS.values():
        suffix = " [lockable]" if check.lockable else ""
        console.print(f"  {check.name}: {check.description}{suffix}")
    console.print("[bold]Bundled sweeps:[/bold]")
    for path in sweeps.bundled_sweeps():
        console.print(f"  {path.name}")
    return 0


def cmd_dist(args, console: Console) -> int:
    f = sweeps.parse_law_spec(args.left)
    g = sweeps.parse_law_spec(args.right)
    if args.metric == "rho":
        result = tr.kolmogorov_distance(f, g)
    elif args.metric == "levy":
        result = tr.levy_distance(f, g)
    elif args.metric == "w1":
        result = tr.w1_distance(f, g)
    elif args.metric == "wp":
        result = tr.wp_distance(f, g, args.p)
    else:
        psi = tr.OrliczCost(args.psi, args.p if args.psi == "pow" else 1.0)
        if psi.kind == "exp":
            # full tails for the lattice side of a lattice-Gaussian pair
            if isinstance(g, dc.GaussianLaw) and not isinstance(f, dc.GaussianLaw):
                f = sweeps.parse_tail_law(args.left) or f
            elif isinstance(f, dc.GaussianLaw) and not isinstance(g, dc.GaussianLaw):
                g = sweeps.parse_tail_law(args.right) or g
        result = tr.orlicz_wasserstein(f, g, psi)
    _emit(console, result, args.json, args.dump_dir, f"dist_{args.metric}")
    return 0


def cmd_certify(args, console: Console) -> int:
    d = sweeps.parse_law_spec(args.law)
    if args.cls == "stat":
        result = cu.statulevicius_tau(d, args.order, holds_at=args.tau)
    elif args.cls == "bern":
        result = cu.bernstein_tau_1d(d, args.order, holds_at=args.tau)
    elif args.cls == "sakh":
        result = cu.sakhanenko_tau(d, holds_at=args.tau)
    else:
        tau = args.tau if args.tau is not None else cu.statulevicius_tau(d, args.order).tau_estimate
        result = cu.a1_grid_check(d, tau)
    _emit(console, result, args.json, args.dump_dir, f"certify_{args.cls}")
    return 0 if result.holds is not False else 1


def cmd_tilt(args, console: Console) -> int:
    d = sweeps.parse_law_spec(args.law)
    report = tilt.tilt_solution_report(d, args.target_mean, args.tau)
    _emit(console, report, args.json, args.dump_dir, "tilt")
    return 0


def cmd_bands(args, console: Console) -> int:
    d = sweeps.parse_law_spec(args.law)
    tau = args.tau if args.tau is not None else cu.statulevicius_tau(d).tau_estimate
    result = bounds.coupling_band_report(d, tau, args.c10 or bounds.DEFAULT_C10)
    if args.json:
        print(result.model_dump_json(indent=2))
        return 0
    console.print(f"tau = {tau:.6g}, sigma = {result.sigma:.6g}, c7 = {result.c7}")
    for key, value in result.c11.items():
        console.print(f"  c11[c10={key}] = {value}")
    console.print(bounds.band_report_frame(result.inner).to_string(max_rows=20))
    return 0


def _run_one_sweep(path: Path, args, console: Console) -> bool:
    config = sweeps.load_sweep_config(path)
    if args.output_dir:
        config = config.model_copy(update={"output_dir": args.output_dir})
    with Printer(console) as printer:
        printer.update_item(config.name, f"Running {config.name} over {len(config.parameters)} parameters")
        rows, summary = sweeps.run_sweep(
            config,
            workers=args.workers,
            progress=lambda row: printer.row_done(config.name, row),
            base=path.parent,
        )
        printer.mark_item_done(config.name, f"{config.name}: {'passed' if summary.passed else 'FAILED'}")
    sweeps.emit_report(rows, summary, config)
    console.print(summary_table(summary))
    if summary.checks:
        console.print(checks_table(f"{config.name} checks", summary.checks))
    if getattr(args, "lock", False):
        sweeps.write_locks(summary)
    return summary.passed


def cmd_check(args, console: Console) -> int:
    names = args.names or [c.name for c in sweeps.CHECKS.values() if not c.needs_rows]
    for name in names:
        if sweeps.CHECKS.get(name) is not None and sweeps.CHECKS[name].needs_rows:
            console.print(f"[red]Error:[/red] {name} runs on sweep rows; use a sweep config that lists it")
            return 2
    results = [sweeps.run_check(name) for name in names]
    console.print(checks_table("Checks", results))
    return 0 if all(r.passed for r in results) else 1


def cmd_sweep(args, console: Console) -> int:
    return 0 if _run_one_sweep(Path(args.config), args, console) else 1


def cmd_run_all(args, console: Console) -> int:
    start = time.time()
    results = {}
    for path in sweeps.bundled_sweeps():
        try:
            results[path.stem] = _run_one_sweep(path, args, console)
        except CLTTransportError as e:
            logger.error(f"Sweep {path.name} failed: {e}", exc_info=True)
            results[path.stem] = False
    standalone = [sweeps.run_check(c.name) for c in sweeps.CHECKS.values() if not c.needs_rows]
    console.print(checks_table("Standalone checks", standalone))
    passed = all(results.values()) and all(c.passed for c in standalone)
    runtime = time.time() - start
    console.print(f"{len(results)} sweeps, {sum(results.values())} passed; total runtime "
                  f"{int(runtime // 60)} minutes and {int(runtime % 60)} seconds")
    console.print("[green]All checks passed[/green]" if passed else "[red]Some checks failed[/red]")
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clt-transport",
        description="Optimal-transport distances and CLT bounds for one-dimensional laws",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    parser.add_argument("--debug", action="store_true", help="Log at DEBUG level")
    parser.add_argument("--log-dir", type=str, help="Directory for log files (default: settings.log_dir)")
    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    def add_output_args(p):
        p.add_argument("--json", action="store_true", help="Print the result as JSON")
        p.add_argument("--dump-dir", type=str, help="Also dump the result object to this directory")

    subparsers.add_parser("list", help="List families, checks and bundled sweeps")

    dist_parser = subparsers.add_parser("dist", help="Distance between two laws")
    dist_parser.add_argument("left", help="First law spec")
    dist_parser.add_argument("right", help="Second law spec")
    dist_parser.add_argument("--metric", choices=["rho", "levy", "w1", "wp", "wpsi"], default="w1")
    dist_parser.add_argument("--p", type=float, default=2.0, help="Order for wp and for --psi pow (default: 2)")
    dist_parser.add_argument("--psi", choices=["exp", "abs", "pow"], default="exp", help="Orlicz cost for wpsi")
    add_output_args(dist_parser)

    certify_parser = subparsers.add_parser("certify", help="Class parameter certificate of a centered law")
    certify_parser.add_argument("law", help="Law spec")
    certify_parser.add_argument("--class", dest="cls", choices=["stat", "bern", "sakh", "a1"], required=True)
    certify_parser.add_argument("--tau", type=float, help="Candidate tau to test")
    certify_parser.add_argument("--order", type=int, default=8, help="Highest cumulant/moment order (default: 8)")
    add_output_args(certify_parser)

    tilt_parser = subparsers.add_parser("tilt", help="Solve the Esscher tilt for a target mean")
    tilt_parser.add_argument("law", help="Law spec (centered lattice)")
    tilt_parser.add_argument("--target-mean", type=float, required=True)
    tilt_parser.add_argument("--tau", type=float, help="Class parameter (default: Statulevicius estimate)")
    add_output_args(tilt_parser)

    bands_parser = subparsers.add_parser("bands", help="Quantile-coupling band constants against the companion")
    bands_parser.add_argument("law", help="Law spec (centered lattice)")
    bands_parser.add_argument("--tau", type=float, help="Class parameter (default: Statulevicius estimate)")
    bands_parser.add_argument("--c10", type=float, nargs="+", help="Outer-region multipliers")
    bands_parser.add_argument("--json", action="store_true", help="Print the result as JSON")

    def add_sweep_args(p):
        p.add_argument("--workers", type=int, help="Worker processes (default: config, then settings)")
        p.add_argument("--output-dir", type=str, help="Override the config's output directory")

    sweep_parser = subparsers.add_parser("sweep", help="Run one sweep config (YAML or INI)")
    sweep_parser.add_argument("config", help="Config file, or a bundled sweep name")
    sweep_parser.add_argument("--lock", action="store_true", help="Write observed constants to the lock file")
    add_sweep_args(sweep_parser)

    check_parser = subparsers.add_parser("check", help="Run standalone checks (default: all of them)")
    check_parser.add_argument("names", nargs="*", help="Check names, see list")

    run_all_parser = subparsers.add_parser("run-all", help="Run every bundled acceptance sweep and check")
    add_sweep_args(run_all_parser)
    return parser


COMMANDS = {
    "list": cmd_list,
    "dist": cmd_dist,
    "certify": cmd_certify,
    "tilt": cmd_tilt,
    "bands": cmd_bands,
    "check": cmd_check,
    "sweep": cmd_sweep,
    "run-all": cmd_run_all,
}


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv(BASE_DIR / ".env")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 1

    # keep stdout clean for JSON output
    quiet = getattr(args, "json", False)
    setup_logging(args.debug, args.log_dir, name=args.command.replace("-", "_"),
                  stream=sys.stderr if quiet else sys.stdout)
    console = Console()
    try:
        return COMMANDS[args.command](args, console)
    except CLTTransportError as e:
        logger.error(f"{args.command} failed: {e}")
        console.print("[red]Error:[/red]", escape(str(e)))
        return 2


if __name__ == "__main__":
    sys.exit(main())
