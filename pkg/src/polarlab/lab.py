"""Scenario runner: key = value configs in, CSV fields and JSON summaries out.

A config names an ``operation`` from the registry and overrides any of its
parameters.  ``tol.<check>`` lines override single tolerances.  Exit-status
contract of the command line: 0 all checks pass, 1 a check failed (or a
solver broke), 2 configuration error.
"""
from __future__ import annotations

import json
import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError, PolarlabError
from .fields import write_columns_csv

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
_ID_RE = re.compile(r"^[A-Za-z0-9_.-]+$")
RESERVED_KEYS = ("id", "operation", "module", "paper_ref")


class ScenarioRunError(PolarlabError, RuntimeError):
    """A solver or runner failure, tagged with the scenario id."""

    def __init__(self, scenario_id, cause):
        self.scenario_id = scenario_id
        self.cause = cause
        super().__init__(f"scenario {scenario_id!r} failed: {type(cause).__name__}: {cause}")


# ---------------------------------------------------------------- registry

@dataclass(frozen=True)
class CheckSpec:
    tolerance: float
    kind: str = "le"  # "le": value <= tolerance; "ge": value >= tolerance (convergence orders)
    equation: str = ""
    norm: str = "max"


@dataclass(frozen=True)
class Operation:
    name: str
    module: str
    func: object
    params: dict
    checks: dict
    paper_ref: str


OPERATIONS: dict = {}


def operation(name, module, paper_ref, params, checks):
    """Register a runner ``func(ctx)`` under ``name``."""
    for spec in checks.values():
        if spec.kind not in ("le", "ge") or not spec.tolerance > 0:
            raise ValueError(f"bad check spec in {name}: {spec}")

    def deco(func):
        OPERATIONS[name] = Operation(name, module, func, dict(params), dict(checks), paper_ref)
        return func

    return deco


def operations() -> dict:
    from . import runners  # noqa: F401  (fills the registry)

    return OPERATIONS


# ---------------------------------------------------------------- config

@dataclass(frozen=True)
class Scenario:
    id: str
    operation: str
    module: str
    params: dict
    tolerances: dict  # explicit overrides only
    paper_ref: str
    path: str | None = None


def _parse_value(default, text):
    if isinstance(default, bool):
        low = text.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"expected a boolean, got {text!r}")
        return low in ("true", "1", "yes")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        value = float(text)
        if not math.isfinite(value):
            raise ValueError("value must be finite")
        return value
    if isinstance(default, tuple):
        items = tuple(float(v) for v in text.split(",") if v.strip())
        if not items or not all(math.isfinite(v) for v in items):
            raise ValueError("expected a comma separated list of finite numbers")
        return items
    return text


def read_entries(text: str, path=None) -> dict:
    """``key -> (value, line)`` for every non-blank, non-comment line."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", path, lineno)
        if key in entries:
            raise ConfigError(f"duplicate key {key!r} (first on line {entries[key][1]})", path, lineno)
        entries[key] = (value, lineno)
    return entries


def parse_config(path) -> Scenario | None:
    """Parse a config file.  Returns None for a config without entries."""
    return parse_text(Path(path).read_text(), str(path))


def parse_text(text: str, path=None) -> Scenario | None:
    entries = read_entries(text, path)
    if not entries:
        return None
    if "operation" not in entries:
        raise ConfigError("missing required key 'operation'", path)
    op_name, op_line = entries["operation"]
    ops = operations()
    if op_name not in ops:
        raise ConfigError(f"unknown operation {op_name!r}; known: {', '.join(sorted(ops))}", path, op_line)
    op = ops[op_name]
    default_id = Path(path).stem if path else op_name
    sid, id_line = entries.get("id", (default_id, None))
    if not _ID_RE.match(sid):
        raise ConfigError(f"scenario id {sid!r} may only use letters, digits, '_', '.', '-'", path, id_line)
    if "module" in entries and entries["module"][0] != op.module:
        raise ConfigError(f"operation {op_name!r} belongs to module {op.module!r}", path, entries["module"][1])
    params = dict(op.params)
    tolerances = {}
    for key, (value, line) in entries.items():
        if key in RESERVED_KEYS:
            continue
        if key.startswith("tol."):
            check = key[4:]
            if check not in op.checks:
                raise ConfigError(f"unknown check {check!r} for {op_name}; known: {', '.join(op.checks)}",
                                  path, line)
            try:
                tol = float(value)
            except ValueError:
                raise ConfigError(f"tolerance {value!r} is not a number", path, line) from None
            if not (math.isfinite(tol) and tol > 0):
                raise ConfigError(f"tolerance for {check!r} must be finite and > 0, got {value}", path, line)
            tolerances[check] = tol
            continue
        if key not in op.params:
            raise ConfigError(f"unknown key {key!r} for operation {op_name}", path, line)
        try:
            params[key] = _parse_value(op.params[key], value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", path, line) from None
    paper_ref = entries.get("paper_ref", (op.paper_ref, None))[0]
    return Scenario(sid, op_name, op.module, params, tolerances, paper_ref, path)


# ---------------------------------------------------------------- running

@dataclass(frozen=True)
class Check:
    name: str
    equation: str
    norm: str
    value: float
    tolerance: float
    kind: str = "le"
    order: float | None = None

    @property
    def passed(self) -> bool:
        if math.isnan(self.value):
            return False
        return self.value <= self.tolerance if self.kind == "le" else self.value >= self.tolerance

    def as_dict(self) -> dict:
        return {"name": self.name, "equation": self.equation, "norm": self.norm, "value": self.value,
                "order": self.order, "tolerance": self.tolerance, "kind": self.kind, "pass": self.passed}


@dataclass
class RunContext:
    """Handed to runners: parameters in, checks and artifacts out."""

    scenario: Scenario
    out_dir: Path
    tol_scale: float = 1.0
    checks: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def p(self) -> dict:
        return self.scenario.params

    def tolerance(self, name: str) -> float:
        spec = OPERATIONS[self.scenario.operation].checks[name]
        base = self.scenario.tolerances.get(name, spec.tolerance)
        return base * self.tol_scale if spec.kind == "le" else base

    def check(self, name: str, value: float, order: float | None = None) -> Check:
        spec = OPERATIONS[self.scenario.operation].checks[name]
        c = Check(name, spec.equation, spec.norm, float(value), self.tolerance(name), spec.kind,
                  None if order is None else float(order))
        self.checks.append(c)
        return c

    def artifact(self, filename: str) -> Path:
        """Path for an artifact in the scenario's directory (recorded relative to the output root)."""
        rel = Path(self.scenario.id) / filename
        path = self.out_dir / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        self.artifacts.append(rel.as_posix())
        return path

    def csv(self, name: str, columns: dict) -> None:
        write_columns_csv(self.artifact(f"{name}.csv"), columns)


@dataclass(frozen=True)
class RunSummary:
    id: str
    operation: str | None
    module: str | None
    paper_ref: str | None
    params: dict
    checks: tuple
    artifacts: tuple
    wall_time: float
    tol_scale: float = 1.0
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed_checks(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    @property
    def exit_status(self) -> int:
        return EXIT_PASS if self.passed else EXIT_FAIL

    def as_dict(self) -> dict:
        return {"id": self.id, "operation": self.operation, "module": self.module, "paper_ref": self.paper_ref,
                "params": self.params, "checks": [c.as_dict() for c in self.checks],
                "n_checks": len(self.checks), "n_failed": len(self.failed_checks), "pass": self.passed,
                "artifacts": list(self.artifacts), "tol_scale": self.tol_scale, "info": self.info,
                "wall_time": self.wall_time}


def _clean(obj):
    """JSON-safe copy: tuples to lists, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if hasattr(obj, "item"):  # numpy scalar
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def dump_json(path, obj) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


def strip_volatile(obj):
    """Drop wall-time fields, for comparing runs."""
    if isinstance(obj, dict):
        return {k: strip_volatile(v) for k, v in obj.items() if k != "wall_time"}
    if isinstance(obj, list):
        return [strip_volatile(v) for v in obj]
    return obj


def _check_scale(tol_scale):
    if not (math.isfinite(tol_scale) and tol_scale > 0):
        raise ConfigError(f"--tol-scale must be finite and > 0, got {tol_scale}")


def execute(scenario: Scenario | None, out_dir, tol_scale: float = 1.0, empty_id: str = "empty") -> RunSummary:
    """Run a parsed scenario and write ``<out_dir>/<id>.json``."""
    _check_scale(tol_scale)
    out_dir = Path(out_dir)
    if scenario is None:
        summary = RunSummary(empty_id, None, None, None, {}, (), (), 0.0, tol_scale)
    else:
        op = operations()[scenario.operation]
        ctx = RunContext(scenario, out_dir, tol_scale)
        start = time.perf_counter()
        try:
            op.func(ctx)
        except Exception as exc:
            raise ScenarioRunError(scenario.id, exc) from exc
        missing = set(op.checks) - {c.name for c in ctx.checks}
        if missing:
            raise ScenarioRunError(scenario.id, RuntimeError(f"runner skipped checks {sorted(missing)}"))
        summary = RunSummary(scenario.id, scenario.operation, scenario.module, scenario.paper_ref,
                             dict(scenario.params), tuple(ctx.checks), tuple(ctx.artifacts),
                             time.perf_counter() - start, tol_scale, dict(ctx.info))
    dump_json(out_dir / f"{summary.id}.json", summary.as_dict())
    return summary


def run(config_path, out_dir="lab-out", tol_scale: float = 1.0) -> RunSummary:
    path = Path(config_path)
    scenario = parse_config(path)
    return execute(scenario, out_dir, tol_scale, empty_id=path.stem)


@dataclass(frozen=True)
class SuiteSummary:
    rows: tuple  # RunSummary or (id, error message)
    wall_time: float
    tol_scale: float = 1.0

    @property
    def passed(self) -> bool:
        return all(isinstance(r, RunSummary) and r.passed for r in self.rows)

    @property
    def exit_status(self) -> int:
        return EXIT_PASS if self.passed else EXIT_FAIL

    def as_dict(self) -> dict:
        rows = []
        for r in self.rows:
            if isinstance(r, RunSummary):
                rows.append({"id": r.id, "operation": r.operation, "paper_ref": r.paper_ref, "pass": r.passed,
                             "n_checks": len(r.checks), "failed_checks": r.failed_checks,
                             "summary": f"{r.id}.json", "wall_time": r.wall_time})
            else:
                rows.append({"id": r[0], "pass": False, "error": r[1]})
        return {"scenarios": rows, "n_scenarios": len(rows), "n_failed": sum(not row["pass"] for row in rows),
                "pass": self.passed, "tol_scale": self.tol_scale, "wall_time": self.wall_time}


def bundled_dir() -> Path:
    return Path(str(resources.files("polarlab") / "scenarios"))


def load_suite(directory) -> list:
    """Parse every ``*.cfg`` in ``directory``; all config errors are reported together."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigError(f"{directory} is not a directory")
    parsed, problems, seen = [], [], {}
    for path in sorted(directory.glob("*.cfg")):
        try:
            sc = parse_config(path)
        except ConfigError as exc:
            problems.append(str(exc))
            continue
        sid = sc.id if sc is not None else path.stem
        if sid in seen:
            problems.append(f"{path}: scenario id {sid!r} already used by {seen[sid]}")
            continue
        seen[sid] = path
        parsed.append((sid, sc))
    if problems:
        raise ConfigError("invalid configs:\n  " + "\n  ".join(problems))
    return sorted(parsed, key=lambda item: item[0])


def run_suite(directory=None, out_dir="lab-out", tol_scale: float = 1.0, jobs: int = 1) -> SuiteSummary:
    """Run all configs of a directory (the bundled suite by default) and write ``suite.json``."""
    _check_scale(tol_scale)
    items = load_suite(bundled_dir() if directory is None else directory)
    start = time.perf_counter()

    def one(item):
        sid, sc = item
        try:
            return execute(sc, out_dir, tol_scale, empty_id=sid)
        except ScenarioRunError as exc:
            return (sid, str(exc))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, items))
    else:
        rows = [one(item) for item in items]
    suite = SuiteSummary(tuple(rows), time.perf_counter() - start, tol_scale)
    dump_json(Path(out_dir) / "suite.json", suite.as_dict())
    return suite
