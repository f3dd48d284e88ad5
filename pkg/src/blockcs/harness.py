"""Experiment grid: config parsing, seeded trial batteries, and output files.

Seeding: the random matrix of a run is drawn once from ``master_seed`` and shared by
every cell; trial ``t`` draws its signal and noise from ``master_seed + t``. Output
files other than ``timing.csv`` are byte-identical across runs with the same config.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .amp import AmpConfig, amp_solve
from .bnhtp import SolverConfig, bnhtp_solve
from .datagen import MatrixKind, ScenarioParams, gen_instance, gen_matrix
from .metrics import (ZERO_TOL, DetectionStats, MetricsRecord, aggregate, block_statistics,
                      calibrate_statistics, objective_metric, relative_error, support_rates)
from .types import BlockStructure, ContractError

TABLE_HEADER = ("matrix", "s_bar", "sigma", "solver", "iter", "time_s", "r_error", "obj_value",
                "t_rate", "tc_rate", "seed", "trials")
SOLVERS = ("bnhtp", "amp")
FIGURE_PANELS = (("fig_iterations.csv", "iterations"), ("fig_r_error.csv", "r_error"),
                 ("fig_obj_value.csv", "obj_value"), ("fig_fir.csv", "fir"))
THREADS_ENV = "BLOCKCS_THREADS"


class ConfigError(ContractError):
    pass


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads JSON-style exponents without a dot (``1e-08``) as floats."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789"),
)


@dataclass(frozen=True)
class OracleSuiteSpec:
    """Small noiseless instances checked against exhaustive search."""

    instances: int = 100
    m: int = 8
    block_count: int = 3
    block_length: int = 4
    sparsity: int = 1
    s_bar: int = 3
    rel_tol: float = 1e-6

    def __post_init__(self):
        for name in ("instances", "m", "block_count", "block_length", "sparsity"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"oracle.{name}: must be >= 1, got {getattr(self, name)}")
        if self.sparsity > self.block_length:
            raise ConfigError(f"oracle.sparsity: {self.sparsity} exceeds block_length {self.block_length}")
        if not 0 <= self.s_bar <= self.block_count:
            raise ConfigError(f"oracle.s_bar: must lie in [0, {self.block_count}], got {self.s_bar}")
        if not self.rel_tol > 0:
            raise ConfigError(f"oracle.rel_tol: must be positive, got {self.rel_tol}")


@dataclass(frozen=True)
class ExperimentSpec:
    """A grid of (matrix kind, s_bar, sigma) cells and how to run them.

    ``matrix=None`` picks the command default: A1 for tables, A3 for detection.
    ``blocks=None`` picks the kind's default layout (64 users, one nonzero each).
    """

    matrix: tuple[MatrixKind, ...] | None = None
    s_bar: tuple[int, ...] = (20,)
    sigma: tuple[float, ...] = (0.001,)
    trials: int = 5
    seed: int = 0
    m: int = 839
    blocks: BlockStructure | None = None
    beta_signal: float = 1.0
    normalize_columns: bool = False
    solvers: tuple[str, ...] = SOLVERS
    bnhtp: SolverConfig = field(default_factory=SolverConfig)
    amp: AmpConfig = field(default_factory=AmpConfig)
    target_fap: float | None = None
    zero_tol: float = ZERO_TOL
    r_error_denominator: str = "recovered"
    output_dir: str = "results"
    oracle: OracleSuiteSpec = field(default_factory=OracleSuiteSpec)

    def __post_init__(self):
        if int(self.trials) < 1:
            raise ConfigError(f"trials: must be >= 1, got {self.trials}")
        if not self.s_bar:
            raise ConfigError("s_bar: must be a nonempty list")
        if not self.sigma:
            raise ConfigError("sigma: must be a nonempty list")
        if self.matrix is not None and not self.matrix:
            raise ConfigError("matrix: must be a nonempty list")
        if any(s < 0 for s in self.sigma):
            raise ConfigError(f"sigma: values must be nonnegative, got {list(self.sigma)}")
        if any(s < 0 for s in self.s_bar):
            raise ConfigError(f"s_bar: values must be nonnegative, got {list(self.s_bar)}")
        if int(self.seed) < 0 or int(self.seed) >= 2**64:
            raise ConfigError(f"seed: must be an unsigned 64-bit integer, got {self.seed}")
        if not self.solvers or any(s not in SOLVERS for s in self.solvers):
            raise ConfigError(f"solvers: must be a nonempty subset of {list(SOLVERS)}, got {list(self.solvers)}")
        if len(set(self.solvers)) != len(self.solvers):
            raise ConfigError(f"solvers: duplicate entries in {list(self.solvers)}")
        if self.target_fap is not None and not 0 < self.target_fap < 1:
            raise ConfigError(f"target_fap: must lie in (0, 1), got {self.target_fap}")
        if self.zero_tol < 0:
            raise ConfigError(f"zero_tol: must be nonnegative, got {self.zero_tol}")
        if self.r_error_denominator not in ("recovered", "true"):
            raise ConfigError(f"r_error_denominator: must be 'recovered' or 'true', got "
                              f"{self.r_error_denominator!r}")
        if self.beta_signal <= 0:
            raise ConfigError(f"beta_signal: must be positive, got {self.beta_signal}")
        if int(self.m) < 1:
            raise ConfigError(f"m: must be >= 1, got {self.m}")

    def kinds(self, default: MatrixKind) -> tuple[MatrixKind, ...]:
        return (default,) if self.matrix is None else self.matrix

    def layout(self, kind: MatrixKind) -> BlockStructure:
        return kind.default_blocks() if self.blocks is None else self.blocks

    def scenario(self, kind: MatrixKind, s_bar: int, sigma: float, trial: int) -> ScenarioParams:
        shape = kind.fixed_shape
        return ScenarioParams(
            m=shape[0] if shape else int(self.m), bs=self.layout(kind), s_bar=int(s_bar),
            beta_signal=float(self.beta_signal), sigma_noise=float(sigma), matrix_kind=kind,
            seed=int(self.seed) + int(trial), matrix_seed=int(self.seed),
            normalize_columns=bool(self.normalize_columns),
        )

    def to_dict(self) -> dict:
        return {
            "matrix": None if self.matrix is None else [k.value for k in self.matrix],
            "s_bar": list(self.s_bar),
            "sigma": list(self.sigma),
            "trials": self.trials,
            "seed": self.seed,
            "m": self.m,
            "blocks": None if self.blocks is None else self.blocks.to_dict(),
            "beta_signal": self.beta_signal,
            "normalize_columns": self.normalize_columns,
            "solvers": list(self.solvers),
            "bnhtp": asdict(self.bnhtp),
            "amp": asdict(self.amp),
            "target_fap": self.target_fap,
            "zero_tol": self.zero_tol,
            "r_error_denominator": self.r_error_denominator,
            "output_dir": self.output_dir,
            "oracle": asdict(self.oracle),
        }


# ---------------------------------------------------------------- config parsing

def _key_lines(text: str) -> dict[tuple[str, ...], int]:
    """1-based line of every mapping key, addressed by its path."""
    out: dict[tuple[str, ...], int] = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = path + (str(k.value),)
                out[key] = k.start_mark.line + 1
                walk(v, key)

    try:
        walk(yaml.compose(text, Loader=_Loader), ())
    except yaml.YAMLError:
        pass
    return out


def _where(lines, *path) -> str:
    line = lines.get(tuple(path))
    return f" (line {line})" if line else ""


def _as_list(value, name, lines):
    if value is None:
        raise ConfigError(f"{name}: must not be null{_where(lines, name)}")
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _number(value, name, lines, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {value!r}{_where(lines, *name.split('.'))}")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{name}: expected an integer, got {value!r}{_where(lines, *name.split('.'))}")
        return int(value)
    return float(value)


def _section(raw, cls, name, lines, ints=()):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected a mapping{_where(lines, name)}")
    known = {f.name for f in fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown key {name}.{key}{_where(lines, name, str(key))}; "
                              f"allowed: {sorted(known)}")
    kw = {}
    for key, value in raw.items():
        if key == "tau" and isinstance(value, str):
            kw[key] = value
        else:
            kw[key] = _number(value, f"{name}.{key}", lines, int if key in ints else float)
    try:
        return cls(**kw)
    except ContractError as exc:
        raise ConfigError(f"{name}.{exc}") from None


def spec_from_dict(data: dict, lines: dict | None = None) -> ExperimentSpec:
    """Build an ``ExperimentSpec`` from a parsed mapping; unknown keys are rejected."""
    lines = lines or {}
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level")
    known = {f.name for f in fields(ExperimentSpec)}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown key {key!r}{_where(lines, str(key))}; allowed: {sorted(known)}")
    kw: dict = {}
    if data.get("matrix") is not None:
        try:
            kw["matrix"] = tuple(MatrixKind.parse(v) for v in _as_list(data["matrix"], "matrix", lines))
        except ContractError as exc:
            raise ConfigError(f"matrix: {exc}{_where(lines, 'matrix')}") from None
    if "s_bar" in data:
        kw["s_bar"] = tuple(_number(v, "s_bar", lines, int) for v in _as_list(data["s_bar"], "s_bar", lines))
    if "sigma" in data:
        kw["sigma"] = tuple(_number(v, "sigma", lines) for v in _as_list(data["sigma"], "sigma", lines))
    for key in ("trials", "seed", "m"):
        if key in data:
            kw[key] = _number(data[key], key, lines, int)
    for key in ("beta_signal", "zero_tol"):
        if key in data:
            kw[key] = _number(data[key], key, lines)
    if data.get("target_fap") is not None:
        kw["target_fap"] = _number(data["target_fap"], "target_fap", lines)
    if "normalize_columns" in data:
        if not isinstance(data["normalize_columns"], bool):
            raise ConfigError(f"normalize_columns: expected true/false{_where(lines, 'normalize_columns')}")
        kw["normalize_columns"] = data["normalize_columns"]
    for key in ("r_error_denominator", "output_dir"):
        if key in data:
            kw[key] = str(data[key])
    if "solvers" in data:
        kw["solvers"] = tuple(str(s).lower() for s in _as_list(data["solvers"], "solvers", lines))
    if data.get("blocks") is not None:
        b = data["blocks"]
        if not isinstance(b, dict) or set(b) - {"lengths", "sparsities"} or not {"lengths", "sparsities"} <= set(b):
            raise ConfigError(f"blocks: expected a mapping with 'lengths' and 'sparsities'{_where(lines, 'blocks')}")
        try:
            kw["blocks"] = BlockStructure(tuple(int(v) for v in b["lengths"]), tuple(int(v) for v in b["sparsities"]))
        except (ContractError, TypeError, ValueError) as exc:
            raise ConfigError(f"blocks: {exc}{_where(lines, 'blocks')}") from None
    kw["bnhtp"] = _section(data.get("bnhtp"), SolverConfig, "bnhtp", lines, ints=("max_iter", "max_backtracks"))
    kw["amp"] = _section(data.get("amp"), AmpConfig, "amp", lines, ints=("max_iter",))
    kw["oracle"] = _section(data.get("oracle"), OracleSuiteSpec, "oracle", lines,
                            ints=("instances", "m", "block_count", "block_length", "sparsity", "s_bar"))
    return ExperimentSpec(**kw)


def parse_config_text(text: str) -> ExperimentSpec:
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"malformed config{where}: {problem}") from None
    return spec_from_dict(data, _key_lines(text))


def parse_config(path) -> ExperimentSpec:
    """Read a JSON or YAML experiment config; missing fields take their defaults."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        return parse_config_text(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def emit_defaults(spec: ExperimentSpec | None = None) -> str:
    """Serialize an ``ExperimentSpec`` (the defaults when omitted) as JSON that ``parse_config`` reads back."""
    return json.dumps((spec or ExperimentSpec()).to_dict(), indent=2) + "\n"


# ---------------------------------------------------------------- running trials

@dataclass
class TrialOutcome:
    trial: int
    seed: int
    solver: str
    metrics: MetricsRecord
    halting_reason: str
    diagnostic: str | None
    block_stat: np.ndarray = field(repr=False)
    active: np.ndarray = field(repr=False)
    result: object = field(default=None, repr=False)


SENTINEL = dict(r_error=math.inf, obj_value=math.inf, t_rate=0.0, tc_rate=0.0)


def resolve_threads(requested: int | None = None) -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            requested = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    k = 1 if requested is None else int(requested)
    if k < 1:
        raise ConfigError(f"thread count must be >= 1, got {k}")
    return k


def _solve(name: str, spec: ExperimentSpec, problem):
    return bnhtp_solve(problem, spec.bnhtp) if name == "bnhtp" else amp_solve(problem, spec.amp)


def _trial(spec: ExperimentSpec, kind: MatrixKind, s_bar: int, sigma: float, t: int,
           keep: bool, observer=None) -> list[TrialOutcome]:
    params = spec.scenario(kind, s_bar, sigma, t)
    inst = gen_instance(params)
    bs = params.bs
    active = block_statistics([inst.x_true], bs)[0] > 0
    out = []
    for name in spec.solvers:
        try:
            res = _solve(name, spec, inst.problem)
            reason, diag, wall, iters = res.halting_reason.value, res.diagnostic, res.wall_time, res.iterations
            x = res.x_hat
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            res, reason, diag, wall, iters, x = None, "error", f"error: {exc}", 0.0, 0, None
        if x is not None and np.all(np.isfinite(x)):
            t_rate, tc_rate = support_rates(x, inst.x_true, spec.zero_tol)
            vals = dict(r_error=relative_error(x, inst.x_true, spec.r_error_denominator),
                        obj_value=objective_metric(inst.problem, x), t_rate=t_rate, tc_rate=tc_rate)
            stat = block_statistics([x], bs)[0]
        else:
            vals = dict(SENTINEL)
            stat = np.full(bs.num_blocks, np.inf)
            diag = diag or "non-finite estimate"
        rec = MetricsRecord(iterations=float(iters), wall_time=float(wall), **vals)
        outcome = TrialOutcome(t, params.seed, name, rec, reason, diag, stat, active, res if keep else None)
        if observer is not None:
            observer(outcome, res, inst)
        out.append(outcome)
    return out


def run_cell(spec: ExperimentSpec, kind, s_bar: int, sigma: float, threads: int = 1,
             keep: bool = False, observer=None) -> list[TrialOutcome]:
    """All trials of one cell, ordered by trial index then solver.

    ``keep=True`` retains every ``SolveResult`` (with its iteration history).
    ``observer(outcome, result, instance)`` is called after every solve, from the
    worker thread that ran it, so it must be thread-safe when ``threads > 1``.
    """
    kind = MatrixKind.parse(kind)
    bs = spec.layout(kind)
    if not s_bar <= bs.num_blocks:
        raise ConfigError(f"s_bar: {s_bar} exceeds the {bs.num_blocks} users of the block layout")
    shape = kind.fixed_shape
    m = shape[0] if shape else spec.m
    gen_matrix(kind, m, bs.total_len, spec.seed, spec.normalize_columns)   # build the shared matrix once
    work = lambda t: _trial(spec, kind, s_bar, sigma, t, keep, observer)
    if threads <= 1:
        parts = [work(t) for t in range(spec.trials)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(spec.trials)))
    return [o for part in parts for o in part]


# ---------------------------------------------------------------- output helpers

def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, np.generic):
        return _json_value(v.item())
    return v


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from None


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _cell_name(kind: MatrixKind, s_bar: int, sigma: float) -> str:
    return f"{kind.value}_s{s_bar}_sigma{_fmt(float(sigma))}"


def _raw_lines(outcomes: list[TrialOutcome], extra: dict) -> str:
    lines = []
    for o in outcomes:
        rec = dict(extra)
        rec.update(trial=o.trial, seed=o.seed, solver=o.solver, halting_reason=o.halting_reason,
                   diagnostic=o.diagnostic)
        rec.update({k: _json_value(v) for k, v in o.metrics.to_dict().items() if k != "wall_time"})
        lines.append(json.dumps(rec, sort_keys=True, allow_nan=False))
    return "\n".join(lines) + "\n"


def _timing_rows(kind, s_bar, sigma, outcomes):
    return [(kind.value, s_bar, float(sigma), o.solver, o.trial, o.metrics.wall_time) for o in outcomes]


def _by_solver(spec, outcomes):
    return {name: [o for o in outcomes if o.solver == name] for name in spec.solvers}


# ---------------------------------------------------------------- commands

@dataclass
class TableRow:
    matrix: str
    s_bar: int
    sigma: float
    solver: str
    record: MetricsRecord
    seed: int
    trials: int

    def cells(self, inline_timing: bool) -> tuple:
        r = self.record
        return (self.matrix, self.s_bar, self.sigma, self.solver, r.iterations,
                r.wall_time if inline_timing else "", r.r_error, r.obj_value, r.t_rate, r.tc_rate,
                self.seed, self.trials)


def run_table(spec: ExperimentSpec, out_dir=None, threads: int = 1,
              inline_timing: bool = False, observer=None) -> list[TableRow]:
    """Run every (matrix, s_bar, sigma) cell and write ``results.csv``.

    Also writes one JSON-lines file per cell under ``raw/``, ``summary.json`` and
    ``timing.csv``. ``time_s`` in ``results.csv`` stays empty unless
    ``inline_timing`` is set, so the table is byte-reproducible.
    """
    out = Path(out_dir if out_dir is not None else spec.output_dir)
    rows: list[TableRow] = []
    timing = []
    for kind in spec.kinds(MatrixKind.GAUSSIAN):
        for s_bar in spec.s_bar:
            for sigma in spec.sigma:
                outcomes = run_cell(spec, kind, s_bar, sigma, threads, observer=observer)
                _write_text(out / "raw" / f"{_cell_name(kind, s_bar, sigma)}.jsonl",
                            _raw_lines(outcomes, {"matrix": kind.value, "s_bar": s_bar, "sigma": sigma}))
                timing += _timing_rows(kind, s_bar, sigma, outcomes)
                for name, group in _by_solver(spec, outcomes).items():
                    rows.append(TableRow(kind.value, int(s_bar), float(sigma), name,
                                         aggregate(o.metrics for o in group), int(spec.seed), spec.trials))
    _write_text(out / "results.csv", _csv_text(TABLE_HEADER, [r.cells(inline_timing) for r in rows]))
    _write_text(out / "timing.csv", _csv_text(("matrix", "s_bar", "sigma", "solver", "trial", "time_s"), timing))
    summary = {
        "config": spec.to_dict(),
        "rows": [{k: _json_value(v) for k, v in zip(TABLE_HEADER, r.cells(False)) if k != "time_s"} for r in rows],
    }
    _write_text(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True, allow_nan=False) + "\n")
    return rows


@dataclass
class DetectionRow:
    sigma: float
    solver: str
    stats: DetectionStats
    record: MetricsRecord


def run_detection(spec: ExperimentSpec, out_dir=None, threads: int = 1, observer=None) -> list[DetectionRow]:
    """Calibrate per-solver thresholds at every noise level and write the plot data.

    Uses the first matrix kind (A3 by default) and the first ``s_bar`` of the spec.
    Writes ``detection.csv``, one ``fig_*.csv`` per panel (columns ``sigma,solver,value``),
    raw per-level JSON lines and ``timing.csv``.
    """
    if spec.target_fap is None:
        raise ConfigError("target_fap: must be set for the detection protocol")
    out = Path(out_dir if out_dir is not None else spec.output_dir)
    kind = spec.kinds(MatrixKind.EXP_TYPE1)[0]
    s_bar = spec.s_bar[0]
    rows: list[DetectionRow] = []
    timing = []
    for sigma in spec.sigma:
        outcomes = run_cell(spec, kind, s_bar, sigma, threads, observer=observer)
        _write_text(out / "raw" / f"detect_{_cell_name(kind, s_bar, sigma)}.jsonl",
                    _raw_lines(outcomes, {"matrix": kind.value, "s_bar": s_bar, "sigma": sigma}))
        timing += _timing_rows(kind, s_bar, sigma, outcomes)
        for name, group in _by_solver(spec, outcomes).items():
            stats = calibrate_statistics(np.stack([o.block_stat for o in group]),
                                         np.stack([o.active for o in group]), spec.target_fap)
            rows.append(DetectionRow(float(sigma), name, stats, aggregate(o.metrics for o in group)))
    header = ("matrix", "s_bar", "sigma", "solver", "target_fap", "fap", "fir", "threshold", "trials", "seed")
    _write_text(out / "detection.csv", _csv_text(header, [
        (kind.value, s_bar, r.sigma, r.solver, spec.target_fap, r.stats.fap, r.stats.fir, r.stats.threshold,
         r.stats.trials, spec.seed) for r in rows]))
    for fname, key in FIGURE_PANELS:
        vals = [(r.sigma, r.solver, r.stats.fir if key == "fir" else getattr(r.record, key)) for r in rows]
        _write_text(out / fname, _csv_text(("sigma", "solver", "value"), vals))
    _write_text(out / "timing.csv", _csv_text(("matrix", "s_bar", "sigma", "solver", "trial", "time_s"), timing))
    return rows


@dataclass
class OracleCase:
    instance: int
    seed: int
    bnhtp_objective: float
    oracle_objective: float
    optimal: bool
    oracle_stationary: bool
    result: object = field(default=None, repr=False)


def objectives_match(f_solver: float, f_oracle: float, rel_tol: float = 1e-6, abs_tol: float = 1e-12) -> bool:
    """``f_solver <= f_oracle * (1 + rel_tol) + abs_tol``."""
    return f_solver <= f_oracle * (1.0 + rel_tol) + abs_tol


def run_oracle_suite(spec: ExperimentSpec, out_dir=None, keep: bool = False, observer=None) -> list[OracleCase]:
    """Compare BNHTP with exhaustive search on small noiseless Gaussian instances.

    Instance ``i`` draws its own matrix and signal from ``seed + i``. Writes
    ``oracle.csv`` when ``out_dir`` is given. ``observer(None, result, problem)`` is
    called after every BNHTP solve.
    """
    from .bnhtp import auto_tau
    from .oracle import exhaustive_solve, verify_stationary

    o = spec.oracle
    bs = BlockStructure.uniform(o.block_count, o.block_length, o.sparsity)
    cases = []
    for i in range(o.instances):
        seed = int(spec.seed) + i
        params = ScenarioParams(m=o.m, bs=bs, s_bar=o.s_bar, sigma_noise=0.0, matrix_kind=MatrixKind.GAUSSIAN,
                                seed=seed, matrix_seed=seed)
        p = gen_instance(params).problem
        res = bnhtp_solve(p, spec.bnhtp)
        if observer is not None:
            observer(None, res, p)
        best = exhaustive_solve(p)
        f_b = objective_metric(p, res.x_hat)
        f_o = best.best_objective
        optimal = objectives_match(f_b, f_o, o.rel_tol)
        cases.append(OracleCase(i, seed, f_b, f_o, bool(optimal),
                                verify_stationary(p, best.best_x, auto_tau(p)), res if keep else None))
    if out_dir is not None:
        _write_text(Path(out_dir) / "oracle.csv", _csv_text(
            ("instance", "seed", "bnhtp_objective", "oracle_objective", "optimal", "oracle_stationary"),
            [(c.instance, c.seed, c.bnhtp_objective, c.oracle_objective, int(c.optimal), int(c.oracle_stationary))
             for c in cases]))
    return cases
