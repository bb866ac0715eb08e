"""Run orchestration: config files, Monte-Carlo batches, summaries, exports.

A run is a grid of independent jobs (trial x sweep point).  Each job derives
its own scenario seed from the run seed, so results are identical whatever
the parallelism degree; records are sorted before export and CSV headers are
part of the contract.
"""

from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import json
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algorithms import (
    ParetoPoint,
    ScalarizationWeights,
    pareto_sweep,
    weight_grid,
)
from .model import ScenarioDraw, SystemConfig, draw_scenario

RECORD_SCHEMA = "isacwave.trial/1"

TRIAL_CSV_HEADER = ("seed", "omega1", "p_max_dbm", "n_tx", "sum_rate",
                    "mse_relaxed", "mse_extracted", "min_ci_margin",
                    "tx_power", "iters", "status")

SWEEP_KINDS = ("omega", "p_max_dbm", "n_tx")

_DEFAULT_GRIDS = {"p_max_dbm": (20.0, 25.0, 30.0), "n_tx": (4.0, 8.0, 16.0)}

_RUN_FIELDS = ("n_trials", "sweep", "sweep_grid", "omega1", "out_dir",
               "jobs", "n_draws")


@dataclass(frozen=True)
class RunConfig:
    """System parameters plus batch orchestration settings."""

    system: SystemConfig = field(default_factory=SystemConfig)
    n_trials: int = 1000
    sweep: str = "omega"
    sweep_grid: tuple[float, ...] | None = None
    omega1: float = 0.5
    out_dir: str = "results"
    jobs: int = 1
    n_draws: int = 100

    def __post_init__(self) -> None:
        errors = []
        if self.sweep not in SWEEP_KINDS:
            errors.append(f"sweep: expected one of {SWEEP_KINDS}, "
                          f"got {self.sweep!r}")
        if not (isinstance(self.n_trials, int) and self.n_trials >= 1):
            errors.append(f"n_trials: expected integer >= 1, got {self.n_trials!r}")
        if not (isinstance(self.jobs, int) and self.jobs >= 1):
            errors.append(f"jobs: expected integer >= 1, got {self.jobs!r}")
        if not (isinstance(self.n_draws, int) and self.n_draws >= 1):
            errors.append(f"n_draws: expected integer >= 1, got {self.n_draws!r}")
        if not (0.0 < self.omega1 < 1.0):
            errors.append(f"omega1: expected value in (0, 1), got {self.omega1!r}")
        if self.sweep_grid is not None:
            if len(self.sweep_grid) == 0:
                errors.append("sweep_grid: must be non-empty")
            elif self.sweep == "omega" \
                    and not all(0.0 < v < 1.0 for v in self.sweep_grid):
                errors.append("sweep_grid: omega weights must lie in (0, 1)")
            elif self.sweep == "n_tx" \
                    and not all(float(v).is_integer() and v >= 1
                                for v in self.sweep_grid):
                errors.append("sweep_grid: antenna counts must be integers >= 1")
            elif self.sweep == "p_max_dbm" \
                    and not all(np.isfinite(v) for v in self.sweep_grid):
                errors.append("sweep_grid: powers must be finite")
        if errors:
            raise ValueError("; ".join(errors))

    def grid(self) -> tuple[float, ...]:
        if self.sweep_grid is not None:
            return tuple(float(v) for v in self.sweep_grid)
        if self.sweep == "omega":
            return tuple(w.omega1 for w in
                         weight_grid(self.system.delta_omega, xi=self.system.xi))
        return _DEFAULT_GRIDS[self.sweep]

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in _RUN_FIELDS}
        out["sweep_grid"] = list(self.sweep_grid) if self.sweep_grid else None
        out.update(self.system.to_dict())
        return out


def load_config(path: str | Path) -> RunConfig:
    """Parse a flat JSON object of system and run fields, defaults applied."""
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as exc:
        raise ValueError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValueError(f"config {path}: expected a JSON object, "
                         f"got {type(data).__name__}")
    return config_from_dict(data)


def config_from_dict(data: dict) -> RunConfig:
    run_kwargs = {}
    sys_kwargs = {}
    sys_fields = {f.name for f in dataclasses.fields(SystemConfig)}
    unknown = []
    for key, value in data.items():
        if key in _RUN_FIELDS:
            run_kwargs[key] = tuple(value) if key == "sweep_grid" \
                and value is not None else value
        elif key in sys_fields:
            sys_kwargs[key] = value
        else:
            unknown.append(key)
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    system = SystemConfig.from_dict(sys_kwargs)
    return RunConfig(system=system, **run_kwargs)


@dataclass
class TrialRecord:
    """One solved design at one sweep coordinate."""

    seed: int
    omega1: float
    p_max_dbm: float
    n_tx: int
    sum_rate: float
    mse_relaxed: float
    mse_extracted: float
    min_ci_margin: float
    tx_power: float
    iters: int
    status: str
    wall_ms: float = field(default=0.0, compare=False)
    schema: str = RECORD_SCHEMA
    point: ParetoPoint | None = field(default=None, compare=False, repr=False)

    @classmethod
    def from_point(cls, seed: int, p_max_dbm: float, n_tx: int,
                   point: ParetoPoint, wall_ms: float = 0.0) -> "TrialRecord":
        report = point.design.report if point.design is not None else None
        return cls(seed=seed, omega1=point.weights.omega1,
                   p_max_dbm=p_max_dbm, n_tx=n_tx,
                   sum_rate=point.sum_rate_bps,
                   mse_relaxed=point.f2_relaxed, mse_extracted=point.f2,
                   min_ci_margin=report.min_margin if report else float("nan"),
                   tx_power=report.tx_power if report else float("nan"),
                   iters=point.iterations, status=point.status,
                   wall_ms=wall_ms, point=point)

    @classmethod
    def failed(cls, seed: int, omega1: float, p_max_dbm: float, n_tx: int,
               status: str, wall_ms: float = 0.0) -> "TrialRecord":
        nan = float("nan")
        return cls(seed=seed, omega1=omega1, p_max_dbm=p_max_dbm, n_tx=n_tx,
                   sum_rate=nan, mse_relaxed=nan, mse_extracted=nan,
                   min_ci_margin=nan, tx_power=nan, iters=0, status=status,
                   wall_ms=wall_ms)

    @property
    def failure(self) -> bool:
        return not np.isfinite(self.sum_rate)

    def csv_row(self) -> tuple:
        return (self.seed, self.omega1, self.p_max_dbm, self.n_tx,
                self.sum_rate, self.mse_relaxed, self.mse_extracted,
                self.min_ci_margin, self.tx_power, self.iters, self.status)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in TRIAL_CSV_HEADER}
        out["wall_ms"] = self.wall_ms
        out["schema"] = self.schema
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "TrialRecord":
        if data.get("schema") != RECORD_SCHEMA:
            raise ValueError(f"unsupported record schema {data.get('schema')!r}")
        kwargs = {k: data[k] for k in TRIAL_CSV_HEADER}
        return cls(wall_ms=float(data.get("wall_ms", 0.0)), **kwargs)


def trial_seed(rng_seed: int, trial: int) -> int:
    """Independent per-trial scenario seed mixed from the run seed."""
    ss = np.random.SeedSequence([int(rng_seed), int(trial)])
    return int(ss.generate_state(1, np.uint64)[0] >> 1)


def _job_system(cfg: RunConfig, value: float) -> SystemConfig:
    if cfg.sweep == "p_max_dbm":
        return cfg.system.replace(p_max_dbm=float(value))
    if cfg.sweep == "n_tx":
        return cfg.system.replace(n_tx=int(value))
    return cfg.system


def _run_job(cfg: RunConfig, trial: int, value: float | None) -> list[TrialRecord]:
    """One trial at one sweep coordinate (or the whole weight grid)."""
    seed = trial_seed(cfg.system.rng_seed, trial)
    if cfg.sweep == "omega":
        system = cfg.system
        weights = tuple(ScalarizationWeights.of(w, xi=system.xi)
                        for w in cfg.grid())
        p_max, n_tx = system.p_max_dbm, system.n_tx
    else:
        system = _job_system(cfg, value)
        weights = (ScalarizationWeights.of(cfg.omega1, xi=system.xi),)
        p_max, n_tx = system.p_max_dbm, system.n_tx

    t0 = time.perf_counter()
    try:
        scenario = draw_scenario(system, seed)
        front = pareto_sweep(scenario, weights_list=weights,
                             n_draws=cfg.n_draws, rng_seed=seed)
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        wall = 1e3 * (time.perf_counter() - t0)
        return [TrialRecord.failed(seed, w.omega1, p_max, n_tx,
                                   f"error: {exc}", wall_ms=wall)
                for w in weights]
    wall = 1e3 * (time.perf_counter() - t0) / max(len(front.points), 1)
    return [TrialRecord.from_point(seed, p_max, n_tx, pt, wall_ms=wall)
            for pt in front.points]


def _record_order(rec: TrialRecord) -> tuple:
    return (rec.seed, rec.n_tx, rec.p_max_dbm, rec.omega1)


def run_montecarlo(cfg: RunConfig, n_trials: int | None = None,
                   jobs: int | None = None) -> list[TrialRecord]:
    """All (trial, sweep point) jobs; deterministic regardless of ``jobs``."""
    n_trials = cfg.n_trials if n_trials is None else int(n_trials)
    jobs = cfg.jobs if jobs is None else int(jobs)
    if cfg.sweep == "omega":
        work = [(t, None) for t in range(n_trials)]
    else:
        work = [(t, v) for t in range(n_trials) for v in cfg.grid()]

    records: list[TrialRecord] = []
    if jobs <= 1:
        for trial, value in work:
            records.extend(_run_job(cfg, trial, value))
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_job, cfg, trial, value)
                       for trial, value in work]
            for fut in futures:
                records.extend(fut.result())
    records.sort(key=_record_order)
    return records


def failure_fraction(records: list[TrialRecord]) -> float:
    if not records:
        return 0.0
    return sum(r.failure for r in records) / len(records)


AGGREGATE_FIELDS = ("sum_rate", "mse_relaxed", "mse_extracted", "iters")


def aggregate(records: list[TrialRecord],
              group_keys: tuple[str, ...]) -> list[dict]:
    """Per-group mean/std/count of the headline metrics, NaN-free.

    Failed records are excluded; a group left empty is omitted with a
    warning rather than emitting NaN statistics.
    """
    if not records:
        raise ValueError("aggregate needs a non-empty record list")
    groups: dict[tuple, list[TrialRecord]] = {}
    for rec in records:
        groups.setdefault(tuple(getattr(rec, k) for k in group_keys),
                          []).append(rec)
    rows = []
    for key in sorted(groups):
        usable = [r for r in groups[key] if not r.failure]
        if not usable:
            warnings.warn(f"group {dict(zip(group_keys, key))} has no usable "
                          "records; omitted", stacklevel=2)
            continue
        row: dict = dict(zip(group_keys, key))
        row["count"] = len(usable)
        for name in AGGREGATE_FIELDS:
            vals = np.array([getattr(r, name) for r in usable], dtype=float)
            row[f"{name}_mean"] = float(vals.mean())
            row[f"{name}_std"] = float(vals.std())
        rows.append(row)
    return rows


# -- persistence ------------------------------------------------------------------


def _write_csv(path: Path, header: tuple[str, ...], rows: list[tuple]) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise ValueError(f"cannot write {path}: {exc}") from exc


def export_records(records: list[TrialRecord], path: str | Path,
                   fmt: str = "csv") -> Path:
    """Write trial records; CSV columns are the documented contract."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        _write_csv(path, TRIAL_CSV_HEADER, [r.csv_row() for r in records])
    elif fmt == "json":
        payload = {"schema": RECORD_SCHEMA,
                   "records": [r.to_dict() for r in records]}
        try:
            path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
        except OSError as exc:
            raise ValueError(f"cannot write {path}: {exc}") from exc
    else:
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    return path


def load_records(path: str | Path) -> list[TrialRecord]:
    """Inverse of the JSON export."""
    path = Path(path)
    data = json.loads(path.read_text())
    if data.get("schema") != RECORD_SCHEMA:
        raise ValueError(f"unsupported records schema {data.get('schema')!r} "
                         f"in {path}")
    return [TrialRecord.from_dict(d) for d in data["records"]]


def export_summary(rows: list[dict], path: str | Path,
                   fmt: str = "csv") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        try:
            path.write_text(json.dumps(rows, indent=1, sort_keys=True) + "\n")
        except OSError as exc:
            raise ValueError(f"cannot write {path}: {exc}") from exc
        return path
    if fmt != "csv":
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    header = tuple(rows[0].keys()) if rows else ()
    _write_csv(path, header, [tuple(row[k] for k in header) for row in rows])
    return path


BEAMPATTERN_CSV_HEADER = ("angle_deg", "gain")


def export_beampattern(angles_deg: np.ndarray, gains: np.ndarray,
                       path: str | Path) -> Path:
    """Gain-versus-angle rows for one designed covariance."""
    if len(angles_deg) != len(gains):
        raise ValueError("angle and gain lengths differ")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [(float(a), float(g)) for a, g in zip(angles_deg, gains)]
    _write_csv(path, BEAMPATTERN_CSV_HEADER, rows)
    return path
