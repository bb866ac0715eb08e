"""Command-line surface.

Subcommands map to the experiment families: single designs (``soop1``,
``soop2``), the weight sweep (``pareto``), configured batch sweeps
(``montecarlo``), beampattern exports (``beampattern``), per-iteration
trajectory logs (``convergence``), reference designs (``baselines``), and
the invariant suite (``validate``).

Exit codes: 0 success, 1 validation/config failure, 2 when a batch exceeds
the 10% failure threshold, 64 for usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import validate as validate_mod
from .algorithms import (
    MSE_MIN_RATE_CONSTRAINED,
    RATE_MAX_MSE_CONSTRAINED,
    ScalarizationWeights,
    ScenarioOperators,
    compute_utopia,
    solve_moop,
    solve_soop1,
    solve_soop2,
    soo_baselines,
    weighted_sum_baseline,
)
from .algorithms.soop import design_report
from .harness import (
    RunConfig,
    TrialRecord,
    aggregate,
    export_beampattern,
    export_records,
    export_summary,
    load_config,
    run_montecarlo,
)
from .metrics import REPORT_CSV_HEADER, beampattern_gain
from .model import draw_scenario

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_BATCH = 2
EXIT_USAGE = 64

_SWEEP_GROUP_KEY = {"omega": "omega1", "p_max_dbm": "p_max_dbm", "n_tx": "n_tx"}

# default threshold grids for the boundary tracers: per-user rate floors in
# bps, and template-fit caps as multiples of the attainable minimum
_RATE_FLOORS = (4.0, 5.0, 6.0, 7.0, 8.0)
_MSE_CAP_FACTORS = (1.05, 1.25, 1.5, 2.0)


class _Parser(argparse.ArgumentParser):
    """argparse that exits 64 on usage errors instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="isacwave",
                     description="Waveform design for a joint "
                                 "communication and sensing downlink.")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="command")

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, default=None,
                       help="JSON config file (defaults applied per field)")
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (default from config)")
        p.add_argument("--seed", type=int, default=None,
                       help="base RNG seed override")
        p.add_argument("--trials", type=int, default=None,
                       help="number of Monte-Carlo trials")
        p.add_argument("--jobs", type=int, default=None,
                       help="parallel worker count")
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="output file format")
        return p

    add("soop1", "maximize the sum rate for one scenario")
    add("soop2", "minimize the beampattern error for one scenario")
    add("pareto", "sweep the preference weights over Monte-Carlo trials")
    add("montecarlo", "run the sweep configured in the config file")
    bp = add("beampattern", "export gain-vs-angle curves per antenna count")
    bp.add_argument("--n-tx", default="4,8,16",
                    help="comma-separated transmit antenna counts")
    add("convergence", "log per-iteration objective traces")
    add("baselines", "run the weighted-sum and boundary-tracing references")
    add("validate", "run every module's invariant suite")
    return parser


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    run_kw = {}
    if args.trials is not None:
        run_kw["n_trials"] = args.trials
    if args.jobs is not None:
        run_kw["jobs"] = args.jobs
    if args.out is not None:
        run_kw["out_dir"] = str(args.out)
    if args.seed is not None:
        system = cfg.system.replace(rng_seed=args.seed)
        run_kw["system"] = system
    return dataclasses.replace(cfg, **run_kw) if run_kw else cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_report(report, seed: int, omega1: float, out: Path,
                  stem: str, fmt: str) -> Path:
    if fmt == "json":
        path = out / f"{stem}.json"
        payload = report.to_dict()
        payload["seed"] = seed
        payload["omega1"] = omega1
        path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
        return path
    path = out / f"{stem}.csv"
    lines = [",".join(REPORT_CSV_HEADER),
             ",".join(str(v) for v in report.csv_row(seed, omega1))]
    path.write_text("\n".join(lines) + "\n")
    return path


def _cmd_single(args, which: str) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    seed = cfg.system.rng_seed
    scenario = draw_scenario(cfg.system, seed)
    if which == "soop1":
        result = solve_soop1(scenario)
        report = design_report(scenario, result.x, None)
        omega1 = 1.0
    else:
        result = solve_soop2(scenario, n_draws=cfg.n_draws,
                             rng=np.random.default_rng(seed))
        report = design_report(scenario, result.x, result.r)
        omega1 = 0.0
    path = _write_report(report, seed, omega1, out, which, args.format)
    print(f"{which}: seed={seed} sum_rate={report.sum_rate_bps:.4f} "
          f"mse={report.mse:.4f} converged={result.converged} -> {path}")
    return EXIT_OK if result.converged else EXIT_VALIDATION


def _run_batch(cfg: RunConfig, fmt: str, group_key: str) -> int:
    out = _out_dir(cfg)
    records = run_montecarlo(cfg)
    rec_path = export_records(records, out / f"records.{fmt}", fmt=fmt)
    rows = aggregate(records, (group_key,))
    sum_path = export_summary(rows, out / f"summary.{fmt}", fmt=fmt)
    failed = sum(r.failure for r in records)
    frac = failed / len(records) if records else 0.0
    print(f"{len(records)} records ({failed} failed) -> {rec_path}")
    print(f"{len(rows)} summary rows by {group_key} -> {sum_path}")
    if frac > 0.1:
        print(f"failure fraction {frac:.2%} exceeds 10%", file=sys.stderr)
        return EXIT_BATCH
    return EXIT_OK


def _cmd_pareto(args) -> int:
    cfg = _load(args)
    if cfg.sweep != "omega":
        cfg = dataclasses.replace(cfg, sweep="omega", sweep_grid=None)
    return _run_batch(cfg, args.format, "omega1")


def _cmd_montecarlo(args) -> int:
    cfg = _load(args)
    return _run_batch(cfg, args.format, _SWEEP_GROUP_KEY[cfg.sweep])


def _cmd_beampattern(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    try:
        counts = [int(tok) for tok in args.n_tx.split(",") if tok.strip()]
    except ValueError:
        print(f"--n-tx expects comma-separated integers, got {args.n_tx!r}",
              file=sys.stderr)
        return EXIT_USAGE
    if not counts:
        print("--n-tx expects at least one antenna count", file=sys.stderr)
        return EXIT_USAGE
    seed = cfg.system.rng_seed
    for n in counts:
        system = cfg.system.replace(n_tx=n)
        scenario = draw_scenario(system, seed)
        result = solve_soop2(scenario, n_draws=cfg.n_draws,
                             rng=np.random.default_rng(seed))
        gains = beampattern_gain(result.r, scenario.grid)
        path = export_beampattern(np.degrees(scenario.grid.angles_rad), gains,
                                  out / f"beampattern_nt{n}.csv")
        print(f"n_tx={n}: mse={result.f2:.4f} -> {path}")
    return EXIT_OK


def _cmd_convergence(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    seed = cfg.system.rng_seed
    scenario = draw_scenario(cfg.system, seed)
    ops = ScenarioOperators(scenario)
    rng = np.random.default_rng(seed)
    utopia, s1, s2 = compute_utopia(scenario, n_draws=cfg.n_draws, rng=rng,
                                    ops=ops)
    pt = solve_moop(scenario, utopia, ScalarizationWeights.of(0.5),
                    n_draws=cfg.n_draws, rng=rng, ops=ops)
    for name, traj in (("soop1", s1.trajectory), ("soop2", s2.trajectory),
                       ("moop", pt.trajectory)):
        path = out / f"convergence_{name}.jsonl"
        path.write_text("".join(json.dumps(t.to_dict()) + "\n" for t in traj))
        print(f"{name}: {len(traj)} iterations -> {path}")
    return EXIT_OK


def _cmd_baselines(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    fmt = args.format
    seed = cfg.system.rng_seed
    scenario = draw_scenario(cfg.system, seed)
    ops = ScenarioOperators(scenario)
    rng = np.random.default_rng(seed)
    utopia, _, _ = compute_utopia(scenario, n_draws=cfg.n_draws, rng=rng,
                                  ops=ops)

    records = []
    for omega1 in cfg.grid():
        point = weighted_sum_baseline(scenario, utopia,
                                      ScalarizationWeights.of(omega1),
                                      n_draws=cfg.n_draws, rng=rng, ops=ops)
        records.append(TrialRecord.from_point(
            seed, cfg.system.p_max_dbm, cfg.system.n_tx, point))
    ws_path = export_records(records, out / f"weighted_sum.{fmt}", fmt=fmt)
    print(f"{len(records)} weighted-sum points -> {ws_path}")

    rows = []
    for floor in _RATE_FLOORS:
        rows.append(_tracer_row(scenario, floor, MSE_MIN_RATE_CONSTRAINED,
                                cfg, rng))
    for factor in _MSE_CAP_FACTORS:
        rows.append(_tracer_row(scenario, factor * utopia.f2_star,
                                RATE_MAX_MSE_CONSTRAINED, cfg, rng))
    tracer_path = export_summary(rows, out / f"soo_tracers.{fmt}", fmt=fmt)
    print(f"{len(rows)} boundary-tracer points -> {tracer_path}")
    return EXIT_OK


def _tracer_row(scenario, threshold: float, mode: str, cfg: RunConfig,
                rng) -> dict:
    try:
        design = soo_baselines(scenario, threshold, mode,
                               n_draws=cfg.n_draws, rng=rng)
    except ValueError as exc:
        return {"mode": mode, "threshold": threshold,
                "sum_rate": float("nan"), "mse": float("nan"),
                "min_ci_margin": float("nan"), "tx_power": float("nan"),
                "status": f"infeasible: {exc}"}
    r = design.report
    return {"mode": mode, "threshold": threshold,
            "sum_rate": r.sum_rate_bps, "mse": r.mse,
            "min_ci_margin": r.min_margin, "tx_power": r.tx_power,
            "status": "ok"}


def _cmd_validate(args) -> int:
    ok = validate_mod.run_all()
    print("validate:", "PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_VALIDATION


def cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "soop1":
            return _cmd_single(args, "soop1")
        if args.command == "soop2":
            return _cmd_single(args, "soop2")
        if args.command == "pareto":
            return _cmd_pareto(args)
        if args.command == "montecarlo":
            return _cmd_montecarlo(args)
        if args.command == "beampattern":
            return _cmd_beampattern(args)
        if args.command == "convergence":
            return _cmd_convergence(args)
        if args.command == "baselines":
            return _cmd_baselines(args)
        if args.command == "validate":
            return _cmd_validate(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    raise AssertionError(f"unhandled command {args.command!r}")


def main() -> None:
    raise SystemExit(cli())


if __name__ == "__main__":
    main()
