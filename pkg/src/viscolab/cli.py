"""Command line front end: ``viscolab <subcommand> [--config F] [--out DIR] [--seed N] [--quiet]``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional

from . import io
from .littlewood_paley import BesovSpec, besov_norm, build_partition
from .monitor import NormSeries, assemble_report, boundedness_report
from .simulation import SimConfig, run_simulation, sample_block_norms
from .verify import Check, constraint_suite, green_suite, lp_suite

log = logging.getLogger("viscolab")

SUBCOMMANDS = ("simulate", "verify-green", "verify-lp", "verify-constraints", "norms", "report")
HELP = {
    "simulate": "run the nonlinear solver and write block norms, diagnostics, report and final snapshot",
    "verify-green": "closed-form propagator against the RK4 oracle and the semigroup law",
    "verify-lp": "partition of unity, Bony reconstruction and Bernstein windows on the config grid",
    "verify-constraints": "constraint residuals of the initial data and their dt-halving ratios",
    "norms": "Besov norms of a saved snapshot",
    "report": "assemble the functionals from a simulate directory and check boundedness",
}


class Run:
    """Per-command context: config, output directory and manifest."""

    def __init__(self, args, command: str):
        self.args = args
        self.command = command
        config = io.load_config(args.config) if args.config else SimConfig()
        if args.seed is not None:
            config = replace(config, seed=args.seed)
        self.config = config
        self.out = Path(args.out) if args.out else None
        self.manifest = io.RunManifest.start(config, command)
        if self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)
            (self.out / "config.txt").write_text(io.serialize_config(config), encoding="utf-8")
            self.manifest.outputs.append("config.txt")
            self.manifest.write(self.out / "manifest.json")

    def path(self, name: str) -> Optional[Path]:
        if self.out is None:
            return None
        self.manifest.outputs.append(name)
        return self.out / name

    def finish(self, ok: bool, message: str = "") -> int:
        self.manifest.finish("ok" if ok else "failed", message)
        if self.out is not None:
            self.manifest.write(self.out / "manifest.json")
        return 0 if ok else 1


def _report_checks(run: Run, checks: List[Check], csv_name: str) -> int:
    for c in checks:
        log.info(c.line())
    target = run.path(csv_name)
    if target is not None:
        with io._open_for_write(target) as fh:
            w = io._writer(fh)
            w.writerow(("suite", "name", "value", "limit", "passed"))
            for c in checks:
                w.writerow((c.suite, c.name, io.fmt(c.value), io.fmt(c.limit), int(c.passed)))
    failed = [c for c in checks if not c.passed]
    log.info("%d checks, %d failed", len(checks), len(failed))
    return run.finish(not failed, f"{len(failed)} failed checks")


def cmd_simulate(run: Run) -> int:
    cfg = run.config
    result = run_simulation(cfg, keep_snapshots=False)
    report = assemble_report(result.series, cfg.s, cfg.r, cfg.threshold, (cfg.p1, cfg.p2), cfg.dim, result.residuals)
    if run.out is not None:
        io.write_series_csv(result.series, run.path("blocks.csv"))
        io.write_table_csv(
            {
                "t": result.series.times,
                "grad_v_inf": result.series.grad_v_inf,
                "U_tilde": result.series.U_tilde,
                "energy": result.energy,
                **result.residuals,
                "stress_gap": result.stress_gap,
            },
            run.path("diagnostics.csv"),
        )
        io.write_report_csv(report, run.path("report.csv"), (cfg.p1, cfg.p2))
        io.write_snapshot(result.final, run.path("final.snap"))
    log.info("t_end=%g  energy %.6e -> %.6e  U_tilde=%.4e", result.final.t, result.energy[0], result.energy[-1], result.series.U_tilde[-1])
    for name, series in result.residuals.items():
        log.info("max %s = %.3e", name, series.max())
    if result.aborted:
        log.error(result.message)
    return run.finish(not result.aborted, result.message)


def cmd_verify_green(run: Run) -> int:
    return _report_checks(run, green_suite(), "green_checks.csv")


def cmd_verify_lp(run: Run) -> int:
    return _report_checks(run, lp_suite(run.config.grid(), seed=run.config.seed), "lp_checks.csv")


def cmd_verify_constraints(run: Run) -> int:
    return _report_checks(run, constraint_suite(run.config), "constraint_checks.csv")


def cmd_norms(run: Run) -> int:
    if not run.args.snapshot:
        log.error("norms needs --snapshot <path>")
        return run.finish(False, "missing snapshot")
    state = io.read_snapshot(run.args.snapshot)
    cfg = run.config
    part = build_partition(state.grid, cfg.q_min, cfg.q_max)
    ps = cfg.ps
    norms = sample_block_norms(state, part, ps)
    for name, f in (("v", state.v), ("E", state.E), ("c", state.c())):
        for p in ps:
            val = besov_norm(f, BesovSpec(cfg.s, p, cfg.r), part)
            log.info("||%s||_B^%g_{%g,%g} = %.10e", name, cfg.s, p, cfg.r, val)
    target = run.path("snapshot_blocks.csv")
    if target is not None:
        io.write_series_csv(NormSeries([state.t], part.q_values, {k: v[None] for k, v in norms.items()}, [0.0]), target)
    return run.finish(True)


def cmd_report(run: Run) -> int:
    cfg = run.config
    src = Path(run.args.run_dir) if run.args.run_dir else run.out
    if src is None:
        log.error("report needs --run-dir or --out pointing at a simulate output directory")
        return run.finish(False, "no run directory")
    diag = io.read_table_csv(src / "diagnostics.csv")
    series = io.read_series_csv(src / "blocks.csv", diag["grad_v_inf"], diag["U_tilde"])
    residuals = {k: diag[k] for k in ("r_det", "r_divT", "r_compat")}
    report = assemble_report(series, cfg.s, cfg.r, cfg.threshold, (cfg.p1, cfg.p2), cfg.dim, residuals)
    verdicts = boundedness_report(report, cfg.lambda1, p2=cfg.p2)
    ok = True
    for v in verdicts.values():
        log.info(v.describe())
        if not v.rest_state:
            ok &= bool(v.passed) and v.hypothesis_held
    target = run.path("report.csv")
    if target is not None:
        io.write_report_csv(report, target, (cfg.p1, cfg.p2))
    return run.finish(ok)


COMMANDS: Dict[str, Callable[[Run], int]] = {
    "simulate": cmd_simulate,
    "verify-green": cmd_verify_green,
    "verify-lp": cmd_verify_lp,
    "verify-constraints": cmd_verify_constraints,
    "norms": cmd_norms,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file (defaults apply to missing keys)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--quiet", action="store_true", help="only print errors")
    parser = argparse.ArgumentParser(prog="viscolab", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="subcommand")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common], help=HELP[name], description=HELP[name])
        if name == "norms":
            p.add_argument("--snapshot", help="snapshot file written by simulate")
        if name == "report":
            p.add_argument("--run-dir", help="directory written by simulate (default: --out)")
    return parser


def dispatch(command: str, argv_rest: Optional[List[str]] = None) -> int:
    return main([command] + list(argv_rest or []))


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if argv and argv[0] in ("-h", "--help"):
        parser.print_help()
        return 0
    if not argv or argv[0] not in COMMANDS:
        parser.print_usage(sys.stderr)
        if argv and not argv[0].startswith("-"):
            print(f"viscolab: unknown subcommand {argv[0]!r}; choose from {', '.join(SUBCOMMANDS)}", file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.INFO, format="%(message)s", stream=sys.stdout, force=True
    )
    try:
        run = Run(args, args.command)
    except (io.ConfigError, OSError) as exc:
        print(f"viscolab: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](run)
    except (ValueError, OSError) as exc:
        log.error("%s: %s", args.command, exc)
        return run.finish(False, str(exc))


if __name__ == "__main__":
    sys.exit(main())
