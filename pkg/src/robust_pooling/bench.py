"""Benchmark harness: r-sweeps, certificates and method comparisons.

Sweeps produce one :class:`SweepRow` per (instance, geometry, r) cell. Rows
are written as CSV with ``repr`` floats so that they round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
import scipy

from .pooling import PoolingInstance, Solution, load_instance
from .robust import (
    FEAS_TOL,
    CuttingPlaneConfig,
    MethodResult,
    SafetyFactorConfig,
    Separation,
    cutting_plane_solve,
    nominal_solve,
    optimal_safety_factor,
    reformulation_solve,
    separation,
)
from .uncertainty import Geometry, UncertaintySet, kernel_covariance

log = logging.getLogger(__name__)

CSV_HEADER = ("instance", "set", "r", "method", "status", "objective", "relative_objective",
              "profit", "cuts", "nodes", "time_s", "robust_certified")
METHODS = ("nominal", "reform", "cut-single", "cut-multi", "safety")
PRESETS = {"near": 0.5, "medium": 1.0, "far": 4.0}
AGREE_TOL = 1e-4


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class MethodConfig:
    """Method choice and its tuning knobs, as accepted in JSON configs."""

    method: str = "cut-multi"
    delta0: float = 1e-2
    gamma: float = 0.1
    delta_star: float = 1e-6
    feas_tol: float = FEAS_TOL
    max_cuts: int = 200
    s_bar: float = 100.0
    time_limit_s: float | None = None
    node_limit: int = 100_000

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {', '.join(METHODS)}")
        self.cutting_plane()  # validates the shared knobs
        SafetyFactorConfig(s_bar=self.s_bar)

    @classmethod
    def from_dict(cls, doc: dict) -> MethodConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown method option(s): {', '.join(sorted(unknown))}")
        return cls(**doc)

    def updated(self, **changes) -> MethodConfig:
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def cutting_plane(self, mode: str = "multi") -> CuttingPlaneConfig:
        return CuttingPlaneConfig(self.delta0, self.gamma, self.delta_star, self.feas_tol, self.max_cuts,
                                  mode, self.time_limit_s, self.node_limit)

    def safety(self) -> SafetyFactorConfig:
        return SafetyFactorConfig(s_bar=self.s_bar, feas_tol=self.feas_tol, delta=self.delta_star,
                                  time_limit=self.time_limit_s, node_limit=self.node_limit)


@dataclass(frozen=True)
class SetConfig:
    """Uncertainty-set recipe: geometry plus kernel data for correlated sets."""

    geometry: str = "box"
    sigma2: float = 1.0
    length_scale: float = 1.0
    preset: str | None = None

    def __post_init__(self):
        Geometry(self.geometry)
        if self.preset is not None and self.preset not in PRESETS:
            raise ValueError(f"unknown location preset {self.preset!r}")

    def build(self, inst: PoolingInstance, r: float) -> UncertaintySet:
        geom = Geometry(self.geometry)
        if geom is not Geometry.CORRELATED:
            return UncertaintySet(geom, r)
        locs = preset_locations(inst, self.preset, self.length_scale) if self.preset else inst.locations
        return UncertaintySet.correlated(r, kernel_covariance(locs, self.sigma2, self.length_scale))


def preset_locations(inst: PoolingInstance, preset: str, length_scale: float = 1.0) -> np.ndarray:
    """Sources on a line, neighbours ``{near: 0.5, medium: 1, far: 4} * length_scale`` apart."""
    step = PRESETS[preset] * length_scale
    return np.column_stack([step * np.arange(len(inst.sources)), np.zeros(len(inst.sources))])


def parse_r_grid(text: str) -> np.ndarray:
    """``"lo:hi:n"`` -> n uniform points; a comma list is taken verbatim."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("r-grid must look like lo:hi:n")
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise ValueError("r-grid needs at least one point")
        grid = np.linspace(lo, hi, n)
    else:
        grid = np.array([float(t) for t in text.split(",") if t.strip()])
    check_r_grid(grid)
    return grid


def check_r_grid(grid) -> None:
    grid = np.asarray(grid, dtype=float)
    if not len(grid) or grid[0] != 0:
        raise ValueError("r-grid must start at 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("r-grid must be strictly increasing")


def default_r_grid() -> np.ndarray:
    return np.linspace(0.0, 0.3, 30)


def shipped_instances() -> dict[str, Path]:
    """Instance files bundled with the package, by name."""
    root = resources.files("robust_pooling") / "instances"
    return {Path(p.name).stem: Path(str(p)) for p in sorted(root.iterdir(), key=lambda p: p.name)
            if p.name.endswith(".json")}


def resolve_instance(ref: str) -> PoolingInstance:
    """Load a file path, or a bundled instance by name."""
    path = Path(ref)
    if path.exists():
        return load_instance(path)
    bundled = shipped_instances()
    if ref in bundled:
        return load_instance(bundled[ref])
    raise FileNotFoundError(f"no instance file or bundled instance named {ref!r}")


# ---------------------------------------------------------------------------
# Running methods


def run_method(inst: PoolingInstance, uset: UncertaintySet, cfg: MethodConfig,
               method: str | None = None) -> MethodResult:
    method = method or cfg.method
    delta, tl, nl = cfg.delta_star, cfg.time_limit_s, cfg.node_limit
    if method == "nominal":
        res = nominal_solve(inst, delta, tl, nl, uset=uset)
    elif method == "reform":
        res = reformulation_solve(inst, uset, delta, tl, nl, cfg.feas_tol)
    elif method in ("cut-single", "cut-multi"):
        res = cutting_plane_solve(inst, uset, cfg.cutting_plane(method.split("-")[1]))
    elif method == "safety":
        _, res = optimal_safety_factor(inst, uset, cfg.safety())
    else:
        raise ValueError(f"unknown method {method!r}")
    if res.solution is not None and res.separation is None:
        res.separation = separation(inst, res.solution, uset, cfg.feas_tol)
    return res


@dataclass(frozen=True)
class SweepRow:
    instance: str
    set: str
    r: float
    method: str
    status: str
    objective: float
    relative_objective: float
    profit: float
    cuts: int
    nodes: int
    time_s: float
    robust_certified: bool

    def to_record(self) -> list[str]:
        out = []
        for name in CSV_HEADER:
            v = getattr(self, name)
            if isinstance(v, (bool, np.bool_)):
                out.append("true" if v else "false")
            elif isinstance(v, (float, np.floating)):
                out.append(repr(float(v)))
            else:
                out.append(str(v))
        return out

    @classmethod
    def from_record(cls, rec: dict[str, str]) -> SweepRow:
        return cls(
            rec["instance"], rec["set"], float(rec["r"]), rec["method"], rec["status"],
            float(rec["objective"]), float(rec["relative_objective"]), float(rec["profit"]),
            int(rec["cuts"]), int(rec["nodes"]), float(rec["time_s"]),
            {"true": True, "false": False}[rec["robust_certified"]],
        )

    @property
    def key(self):
        return (self.instance, self.set, self.r)


def write_csv(rows: Iterable[SweepRow], fh, header: bool = True) -> None:
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow(row.to_record())


def read_csv(fh) -> list[SweepRow]:
    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    return [SweepRow.from_record(rec) for rec in reader]


def rows_to_csv(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()


def _cell(inst: PoolingInstance, set_cfg: SetConfig, r: float, cfg: MethodConfig,
          nominal_obj: float) -> SweepRow:
    start = time.perf_counter()
    try:
        res = run_method(inst, set_cfg.build(inst, r), cfg)
    except Exception as exc:  # a failed cell must not abort the sweep
        log.warning("%s %s r=%g: %s", inst.name, set_cfg.geometry, r, exc)
        return SweepRow(inst.name, set_cfg.geometry, float(r), cfg.method, f"Error: {exc}".replace("\n", " "),
                        math.nan, math.nan, math.nan, 0, 0, time.perf_counter() - start, False)
    obj = res.objective if res.solution is not None else math.nan
    rel = obj / nominal_obj if nominal_obj not in (0.0,) and math.isfinite(nominal_obj) else math.nan
    obj = float(obj) + 0.0  # no signed zeros in the CSV
    return SweepRow(inst.name, set_cfg.geometry, float(r), res.method, res.status, obj, float(rel) + 0.0,
                    -obj + 0.0 if math.isfinite(obj) else math.nan, int(res.cuts), int(res.nodes),
                    float(res.time_s), bool(res.certified))


def sweep(instances: list[PoolingInstance], sets: list[SetConfig], r_grid, cfg: MethodConfig,
          workers: int = 1, on_row: Callable[[SweepRow], None] | None = None) -> list[SweepRow]:
    """Solve every (instance, set, r) cell with ``cfg.method``.

    ``on_row`` sees rows as they finish (completion order); the returned list
    is sorted by (instance, set, r).
    """
    check_r_grid(r_grid)
    nominal = {}
    for inst in instances:
        res = nominal_solve(inst, cfg.delta_star, cfg.time_limit_s, cfg.node_limit)
        nominal[inst.name] = res.objective if res.solution is not None else math.nan
    cells = [(inst, s, float(r)) for inst in instances for s in sets for r in r_grid]
    rows: list[SweepRow] = []

    def emit(row):
        rows.append(row)
        if on_row is not None:
            on_row(row)

    if workers <= 1:
        for inst, s, r in cells:
            emit(_cell(inst, s, r, cfg, nominal[inst.name]))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_cell, inst, s, r, cfg, nominal[inst.name]) for inst, s, r in cells]
            for fut in as_completed(futs):
                emit(fut.result())
    return sorted(rows, key=lambda row: row.key)


def manifest(instances: list[PoolingInstance], sets: list[SetConfig], r_grid, cfg: MethodConfig,
             rows: list[SweepRow] | None = None) -> dict:
    from . import __version__

    doc = {
        "package": "robust-pooling",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "seed": None,
        "instances": [inst.name for inst in instances],
        "sets": [asdict(s) for s in sets],
        "r_grid": [float(r) for r in r_grid],
        "config": asdict(cfg),
        "argv": sys.argv,
    }
    if rows is not None:
        doc["rows"] = len(rows)
        doc["statuses"] = sorted({row.status for row in rows})
    return doc


# ---------------------------------------------------------------------------
# Certificates and comparisons


@dataclass(frozen=True)
class Certificate:
    instance: str
    set: dict
    separation: Separation

    @property
    def certified(self) -> bool:
        return self.separation.certified

    def describe(self, inst: PoolingInstance) -> str:
        sep = self.separation
        term = inst.terminals[sep.terminal].id
        comp = inst.components[sep.component]
        lines = [
            f"instance: {self.instance}",
            f"set: {json.dumps(self.set)}",
            f"epsilon: {sep.eps!r}",
            f"worst row: terminal={term} component={comp} side={sep.side}",
            "scenario (xi per source): " + ", ".join(
                f"{s.id}={sep.scenario.xi[n, sep.component]:.6g}" for n, s in enumerate(inst.sources)),
            f"certified: {'yes' if self.certified else 'no'} (feas_tol {sep.feas_tol:g})",
        ]
        return "\n".join(lines)


def verify(inst: PoolingInstance, sol: Solution, uset: UncertaintySet, feas_tol: float = FEAS_TOL) -> Certificate:
    return Certificate(inst.name, uset.to_dict(), separation(inst, sol, uset, feas_tol))


@dataclass
class Comparison:
    instance: str
    set: str
    r: float
    results: dict[str, MethodResult] = field(default_factory=dict)
    nominal_objective: float = math.nan

    @property
    def reform_vs_multi(self) -> float:
        a, b = self.results.get("reform"), self.results.get("cut-multi")
        if a is None or b is None or a.solution is None or b.solution is None:
            return math.nan
        return abs(a.objective - b.objective) / max(abs(a.objective), abs(b.objective), 1.0)

    @property
    def disagreement(self) -> bool:
        a, b = self.results.get("reform"), self.results.get("cut-multi")
        both = a is not None and b is not None and a.converged and b.converged
        return both and self.reform_vs_multi > AGREE_TOL

    def table(self) -> str:
        head = f"{'method':<11} {'status':<10} {'profit':>14} {'delta':>11} {'cuts':>5} {'nodes':>7} {'time_s':>8} certified"
        lines = [f"{self.instance}  set={self.set}  r={self.r:g}", head]
        ref = self.results.get("reform")
        for name, res in self.results.items():
            delta = (abs(res.objective - ref.objective) / max(abs(ref.objective), 1.0)
                     if ref is not None and ref.solution is not None and res.solution is not None else math.nan)
            lines.append(f"{name:<11} {res.status:<10} {res.profit:>14.6f} {delta:>11.3g} {res.cuts:>5d} "
                         f"{res.nodes:>7d} {res.time_s:>8.2f} {'yes' if res.certified else 'no'}")
        lines.append(f"reform vs cut-multi: {self.reform_vs_multi:.3g}"
                     + ("  DISAGREE" if self.disagreement else ""))
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "instance": self.instance, "set": self.set, "r": self.r,
            "reform_vs_multi": self.reform_vs_multi, "disagreement": self.disagreement,
            "methods": {name: result_summary(res) for name, res in self.results.items()},
        }


def compare(inst: PoolingInstance, set_cfg: SetConfig, r: float, cfg: MethodConfig = MethodConfig()) -> Comparison:
    """Run reform, cut-single, cut-multi and safety on one cell."""
    uset = set_cfg.build(inst, r)
    out = Comparison(inst.name, set_cfg.geometry, r)
    for method in ("reform", "cut-single", "cut-multi", "safety"):
        out.results[method] = run_method(inst, uset, cfg, method)
    return out


def result_summary(res: MethodResult) -> dict:
    sep = res.separation
    return {
        "method": res.method,
        "status": res.status,
        "objective": res.objective,
        "profit": res.profit,
        "bound": res.bound,
        "gap": res.gap,
        "iterations": res.iterations,
        "cuts": res.cuts,
        "nodes": res.nodes,
        "time_s": res.time_s,
        "safety_factor": res.safety_factor,
        "epsilon": None if sep is None else sep.eps,
        "robust_certified": res.certified,
        "history": res.history,
    }
