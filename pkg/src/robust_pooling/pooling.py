"""Standard pooling problem in the q-formulation.

Instances are immutable; numeric views (costs, concentrations, bounds) are
exposed as numpy arrays indexed in file order, so that sources map to rows
and terminals/components to columns.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np

DEFAULT_TOL = 1e-6

FAMILIES = (
    "availability",
    "capacity",
    "demand",
    "simplex",
    "quality-upper",
    "quality-lower",
    "bounds",
)


class InstanceError(ValueError):
    """Raised for malformed or inconsistent instance/solution documents."""


@dataclass(frozen=True)
class Source:
    id: str
    cost: float
    lower_avail: float
    upper_avail: float
    quality: dict[str, float]
    deviation: dict[str, float]
    location: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class Pool:
    id: str
    capacity: float


@dataclass(frozen=True)
class Terminal:
    id: str
    price: float
    min_demand: float
    max_demand: float
    quality_lower: dict[str, float]
    quality_upper: dict[str, float]


@dataclass(frozen=True)
class PoolingInstance:
    name: str
    components: tuple[str, ...]
    sources: tuple[Source, ...]
    pools: tuple[Pool, ...]
    terminals: tuple[Terminal, ...]
    source_pool: tuple[tuple[str, str], ...]
    pool_terminal: tuple[tuple[str, str], ...]
    source_terminal: tuple[tuple[str, str], ...]
    provenance: str = ""

    def __post_init__(self):
        _validate(self)

    # index maps
    @cached_property
    def source_index(self) -> dict[str, int]:
        return {s.id: n for n, s in enumerate(self.sources)}

    @cached_property
    def pool_index(self) -> dict[str, int]:
        return {p.id: n for n, p in enumerate(self.pools)}

    @cached_property
    def terminal_index(self) -> dict[str, int]:
        return {t.id: n for n, t in enumerate(self.terminals)}

    @cached_property
    def component_index(self) -> dict[str, int]:
        return {k: n for n, k in enumerate(self.components)}

    # numeric views
    @cached_property
    def cost(self) -> np.ndarray:
        return np.array([s.cost for s in self.sources], dtype=float)

    @cached_property
    def price(self) -> np.ndarray:
        return np.array([t.price for t in self.terminals], dtype=float)

    @cached_property
    def conc(self) -> np.ndarray:
        """Nominal concentrations, shape (sources, components)."""
        return np.array(
            [[s.quality[k] for k in self.components] for s in self.sources], dtype=float
        )

    @cached_property
    def dev(self) -> np.ndarray:
        """Maximum deviations, shape (sources, components)."""
        return np.array(
            [[s.deviation[k] for k in self.components] for s in self.sources], dtype=float
        )

    @cached_property
    def qual_lo(self) -> np.ndarray:
        return np.array(
            [[t.quality_lower.get(k, 0.0) for k in self.components] for t in self.terminals],
            dtype=float,
        )

    @cached_property
    def qual_hi(self) -> np.ndarray:
        return np.array(
            [[t.quality_upper.get(k, math.inf) for k in self.components] for t in self.terminals],
            dtype=float,
        )

    @cached_property
    def avail_lo(self) -> np.ndarray:
        return np.array([s.lower_avail for s in self.sources], dtype=float)

    @cached_property
    def avail_hi(self) -> np.ndarray:
        return np.array([s.upper_avail for s in self.sources], dtype=float)

    @cached_property
    def demand_lo(self) -> np.ndarray:
        return np.array([t.min_demand for t in self.terminals], dtype=float)

    @cached_property
    def demand_hi(self) -> np.ndarray:
        return np.array([t.max_demand for t in self.terminals], dtype=float)

    @cached_property
    def capacity(self) -> np.ndarray:
        return np.array([p.capacity for p in self.pools], dtype=float)

    @cached_property
    def locations(self) -> np.ndarray:
        return np.array([s.location for s in self.sources], dtype=float)

    @cached_property
    def paths(self) -> tuple[tuple[str, str, str], ...]:
        """All (source, pool, terminal) triples with (i,l) in T_X and (l,j) in T_Y."""
        out_of = {}
        for l, j in self.pool_terminal:
            out_of.setdefault(l, []).append(j)
        return tuple((i, l, j) for i, l in self.source_pool for j in out_of.get(l, ()))

    @cached_property
    def reachable(self) -> tuple[tuple[str, str], ...]:
        """Source/terminal pairs that can carry flow, in (source, terminal) file order."""
        pairs = {(i, j) for i, _, j in self.paths} | set(self.source_terminal)
        return tuple(
            (s.id, t.id) for s in self.sources for t in self.terminals if (s.id, t.id) in pairs
        )

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return len(self.sources), len(self.pools), len(self.terminals), len(self.components)

    def with_quality_bounds(self, lower: np.ndarray, upper: np.ndarray) -> PoolingInstance:
        """Copy of the instance with replaced quality bound matrices."""
        terms = []
        for j, t in enumerate(self.terminals):
            lo = {k: float(lower[j, n]) for n, k in enumerate(self.components)}
            hi = {
                k: float(upper[j, n])
                for n, k in enumerate(self.components)
                if math.isfinite(upper[j, n])
            }
            terms.append(
                Terminal(t.id, t.price, t.min_demand, t.max_demand, lo, hi)
            )
        return _replace(self, terminals=tuple(terms))

    def with_locations(self, locations: np.ndarray) -> PoolingInstance:
        srcs = tuple(
            Source(s.id, s.cost, s.lower_avail, s.upper_avail, s.quality, s.deviation,
                   (float(p[0]), float(p[1])))
            for s, p in zip(self.sources, np.asarray(locations, dtype=float))
        )
        return _replace(self, sources=srcs)


def _replace(inst: PoolingInstance, **changes) -> PoolingInstance:
    kwargs = {
        f: getattr(inst, f)
        for f in (
            "name", "components", "sources", "pools", "terminals",
            "source_pool", "pool_terminal", "source_terminal", "provenance",
        )
    }
    kwargs.update(changes)
    return PoolingInstance(**kwargs)


def _validate(inst: PoolingInstance) -> None:
    for kind, items in (("source", inst.sources), ("pool", inst.pools), ("terminal", inst.terminals)):
        ids = [it.id for it in items]
        if len(set(ids)) != len(ids):
            raise InstanceError(f"duplicate {kind} ids")
    if len(set(inst.components)) != len(inst.components):
        raise InstanceError("duplicate component ids")

    src = {s.id for s in inst.sources}
    pools = {p.id for p in inst.pools}
    terms = {t.id for t in inst.terminals}
    for name, arcs, a, b in (
        ("source_pool", inst.source_pool, src, pools),
        ("pool_terminal", inst.pool_terminal, pools, terms),
        ("source_terminal", inst.source_terminal, src, terms),
    ):
        if len(set(arcs)) != len(arcs):
            raise InstanceError(f"arcs.{name}: duplicate arc")
        for u, w in arcs:
            if u not in a or w not in b:
                raise InstanceError(f"arcs.{name}: unknown endpoint in [{u!r}, {w!r}]")

    for p in inst.pools:
        if not any(l == p.id for _, l in inst.source_pool):
            raise InstanceError(f"pool {p.id!r} has no inbound arc")
        if not any(l == p.id for l, _ in inst.pool_terminal):
            raise InstanceError(f"pool {p.id!r} has no outbound arc")
        if not p.capacity >= 0:
            raise InstanceError(f"pool {p.id!r}: capacity must be >= 0")

    for s in inst.sources:
        if not s.cost >= 0:
            raise InstanceError(f"source {s.id!r}: cost must be >= 0")
        if not 0 <= s.lower_avail <= s.upper_avail:
            raise InstanceError(f"source {s.id!r}: need 0 <= lower_avail <= upper_avail")
        for k in inst.components:
            if k not in s.quality or k not in s.deviation:
                raise InstanceError(f"source {s.id!r}: component {k!r} undefined")
            if not (s.quality[k] >= 0 and s.deviation[k] >= 0):
                raise InstanceError(f"source {s.id!r}: negative quality/deviation for {k!r}")

    for t in inst.terminals:
        if not t.price >= 0:
            raise InstanceError(f"terminal {t.id!r}: price must be >= 0")
        if not 0 <= t.min_demand <= t.max_demand < math.inf:
            raise InstanceError(f"terminal {t.id!r}: need 0 <= min_demand <= max_demand < inf")
        for k in inst.components:
            lo = t.quality_lower.get(k, 0.0)
            hi = t.quality_upper.get(k, math.inf)
            if not 0 <= lo <= hi:
                raise InstanceError(f"terminal {t.id!r}: quality bounds for {k!r} out of order")


# ---------------------------------------------------------------------------
# Instance file format


def _field(doc: dict, key: str, path: str, default: Any = ..., kind=(int, float)):
    if key not in doc:
        if default is ...:
            raise InstanceError(f"{path}.{key}: missing")
        return default
    val = doc[key]
    if kind is not None and (not isinstance(val, kind) or isinstance(val, bool)):
        raise InstanceError(f"{path}.{key}: expected {_kind_name(kind)}, got {type(val).__name__}")
    return val


def _kind_name(kind) -> str:
    if kind == (int, float):
        return "number"
    if isinstance(kind, tuple):
        return "/".join(k.__name__ for k in kind)
    return kind.__name__


def _number_map(doc: dict, path: str) -> dict[str, float]:
    if not isinstance(doc, dict):
        raise InstanceError(f"{path}: expected object")
    out = {}
    for k, v in doc.items():
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise InstanceError(f"{path}.{k}: expected number")
        out[k] = float(v)
    return out


def _pairs(doc: dict, key: str) -> tuple[tuple[str, str], ...]:
    raw = doc.get(key, [])
    if not isinstance(raw, list):
        raise InstanceError(f"arcs.{key}: expected array")
    out = []
    for n, arc in enumerate(raw):
        if not (isinstance(arc, list) and len(arc) == 2 and all(isinstance(a, str) for a in arc)):
            raise InstanceError(f"arcs.{key}[{n}]: expected [id, id]")
        out.append((arc[0], arc[1]))
    return tuple(out)


def instance_from_dict(doc: dict) -> PoolingInstance:
    if not isinstance(doc, dict):
        raise InstanceError("document: expected object")
    name = _field(doc, "name", "document", kind=str)
    comps = _field(doc, "components", "document", kind=list)
    if not all(isinstance(k, str) for k in comps):
        raise InstanceError("document.components: expected array of strings")
    for key in ("sources", "pools", "terminals"):
        _field(doc, key, "document", kind=list)
    arcs = _field(doc, "arcs", "document", kind=dict)

    terminals = []
    for n, t in enumerate(doc["terminals"]):
        path = f"terminals[{n}]"
        if not isinstance(t, dict):
            raise InstanceError(f"{path}: expected object")
        terminals.append(
            Terminal(
                id=_field(t, "id", path, kind=str),
                price=float(_field(t, "price", path)),
                min_demand=float(_field(t, "min_demand", path, 0.0)),
                max_demand=float(_field(t, "max_demand", path)),
                quality_lower=_number_map(t.get("quality_lower", {}), f"{path}.quality_lower"),
                quality_upper=_number_map(_field(t, "quality_upper", path, kind=dict),
                                          f"{path}.quality_upper"),
            )
        )
    implied_avail = float(sum(t.max_demand for t in terminals))

    sources = []
    for n, s in enumerate(doc["sources"]):
        path = f"sources[{n}]"
        if not isinstance(s, dict):
            raise InstanceError(f"{path}: expected object")
        quality = _number_map(_field(s, "quality", path, kind=dict), f"{path}.quality")
        deviation = _number_map(s.get("deviation", quality), f"{path}.deviation")
        # deviation defaults to the nominal value component-wise
        deviation = {k: deviation.get(k, quality.get(k, 0.0)) for k in quality}
        loc = s.get("location", [0.0, 0.0])
        if not (isinstance(loc, list) and len(loc) == 2
                and all(isinstance(c, (int, float)) for c in loc)):
            raise InstanceError(f"{path}.location: expected [x, y]")
        sources.append(
            Source(
                id=_field(s, "id", path, kind=str),
                cost=float(_field(s, "cost", path)),
                lower_avail=float(_field(s, "lower_avail", path, 0.0)),
                upper_avail=float(_field(s, "upper_avail", path, implied_avail)),
                quality=quality,
                deviation=deviation,
                location=(float(loc[0]), float(loc[1])),
            )
        )

    pools = []
    for n, p in enumerate(doc["pools"]):
        path = f"pools[{n}]"
        if not isinstance(p, dict):
            raise InstanceError(f"{path}: expected object")
        pools.append(Pool(_field(p, "id", path, kind=str), float(_field(p, "capacity", path))))

    return PoolingInstance(
        name=name,
        components=tuple(comps),
        sources=tuple(sources),
        pools=tuple(pools),
        terminals=tuple(terminals),
        source_pool=_pairs(arcs, "source_pool"),
        pool_terminal=_pairs(arcs, "pool_terminal"),
        source_terminal=_pairs(arcs, "source_terminal"),
        provenance=str(doc.get("provenance", "")),
    )


def parse_instance(text: str) -> PoolingInstance:
    """Parse and validate an instance JSON document.

    Raises :class:`InstanceError` with a line number for syntax errors and a
    field path (``sources[1].cost``) or the violated invariant otherwise.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return instance_from_dict(doc)


def load_instance(path) -> PoolingInstance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


def instance_to_dict(inst: PoolingInstance) -> dict:
    doc = {
        "name": inst.name,
        "components": list(inst.components),
        "sources": [
            {
                "id": s.id,
                "cost": s.cost,
                "lower_avail": s.lower_avail,
                "upper_avail": s.upper_avail,
                "quality": dict(s.quality),
                "deviation": dict(s.deviation),
                "location": list(s.location),
            }
            for s in inst.sources
        ],
        "pools": [{"id": p.id, "capacity": p.capacity} for p in inst.pools],
        "terminals": [
            {
                "id": t.id,
                "price": t.price,
                "min_demand": t.min_demand,
                "max_demand": t.max_demand,
                "quality_lower": dict(t.quality_lower),
                "quality_upper": dict(t.quality_upper),
            }
            for t in inst.terminals
        ],
        "arcs": {
            "source_pool": [list(a) for a in inst.source_pool],
            "pool_terminal": [list(a) for a in inst.pool_terminal],
            "source_terminal": [list(a) for a in inst.source_terminal],
        },
    }
    if inst.provenance:
        doc["provenance"] = inst.provenance
    return doc


# ---------------------------------------------------------------------------
# Solutions


@dataclass(frozen=True)
class Solution:
    """Pool fractions ``q[(i, l)]``, pool flows ``y[(l, j)]`` and direct flows ``z[(i, j)]``."""

    q: dict[tuple[str, str], float] = field(default_factory=dict)
    y: dict[tuple[str, str], float] = field(default_factory=dict)
    z: dict[tuple[str, str], float] = field(default_factory=dict)

    @classmethod
    def zeros(cls, inst: PoolingInstance) -> Solution:
        # q is immaterial at zero flow; an even split keeps the simplex rows satisfied
        q = {}
        for p in inst.pools:
            feeds = [a for a in inst.source_pool if a[1] == p.id]
            for a in feeds:
                q[a] = 1.0 / len(feeds)
        return cls(q, {a: 0.0 for a in inst.pool_terminal}, {a: 0.0 for a in inst.source_terminal})

    def to_dict(self) -> dict:
        return {
            name: {"|".join(k): float(v) for k, v in getattr(self, name).items()}
            for name in ("q", "y", "z")
        }


def check_keys(inst: PoolingInstance, sol: Solution) -> None:
    for name, arcs in (("q", inst.source_pool), ("y", inst.pool_terminal), ("z", inst.source_terminal)):
        allowed = set(arcs)
        for key in getattr(sol, name):
            if key not in allowed:
                raise InstanceError(f"solution.{name}: {'|'.join(key)!r} is not an arc")


def solution_from_dict(doc: dict, inst: PoolingInstance | None = None) -> Solution:
    parts = {}
    for name in ("q", "y", "z"):
        raw = doc.get(name, {})
        if not isinstance(raw, dict):
            raise InstanceError(f"solution.{name}: expected object")
        part = {}
        for key, val in raw.items():
            ids = tuple(key.split("|"))
            if len(ids) != 2:
                raise InstanceError(f"solution.{name}: bad key {key!r}, expected 'a|b'")
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise InstanceError(f"solution.{name}.{key}: expected number")
            part[ids] = float(val)
        parts[name] = part
    sol = Solution(**parts)
    if inst is not None:
        check_keys(inst, sol)
    return sol


def parse_solution(text: str, inst: PoolingInstance | None = None) -> Solution:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise InstanceError("solution: expected object")
    return solution_from_dict(doc, inst)


# ---------------------------------------------------------------------------
# Evaluation


def objective(inst: PoolingInstance, sol: Solution) -> float:
    """Negative profit of ``sol``."""
    check_keys(inst, sol)
    si, ti = inst.source_index, inst.terminal_index
    total = 0.0
    for i, l, j in inst.paths:
        qy = sol.q.get((i, l), 0.0) * sol.y.get((l, j), 0.0)
        total += inst.cost[si[i]] * qy
    for (l, j), val in sol.y.items():
        total -= inst.price[ti[j]] * val
    for (i, j), val in sol.z.items():
        total -= (inst.price[ti[j]] - inst.cost[si[i]]) * val
    return float(total)


def total_flow_x(inst: PoolingInstance, sol: Solution) -> np.ndarray:
    """Total source-to-terminal flows, shape (sources, terminals)."""
    x = np.zeros((len(inst.sources), len(inst.terminals)))
    si, ti = inst.source_index, inst.terminal_index
    for i, l, j in inst.paths:
        x[si[i], ti[j]] += sol.y.get((l, j), 0.0) * sol.q.get((i, l), 0.0)
    for (i, j), val in sol.z.items():
        x[si[i], ti[j]] += val
    return x


def terminal_flow_v(inst: PoolingInstance, sol: Solution) -> np.ndarray:
    v = np.zeros(len(inst.terminals))
    ti = inst.terminal_index
    for (_, j), val in sol.y.items():
        v[ti[j]] += val
    for (_, j), val in sol.z.items():
        v[ti[j]] += val
    return v


def profit(inst: PoolingInstance, sol: Solution) -> float:
    return -objective(inst, sol)


@dataclass(frozen=True)
class Violation:
    location: tuple | None
    magnitude: float


@dataclass(frozen=True)
class FeasibilityReport:
    """Worst signed violation per constraint family (positive means violated)."""

    worst: dict[str, Violation]
    tol: float

    @property
    def feasible(self) -> bool:
        return all(v.magnitude <= self.tol for v in self.worst.values())

    @property
    def max_violation(self) -> float:
        return max((v.magnitude for v in self.worst.values()), default=-math.inf)


def check_feasibility(
    inst: PoolingInstance,
    sol: Solution,
    concentrations: np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
) -> FeasibilityReport:
    """Evaluate every constraint family of the q-formulation.

    ``concentrations`` is a (sources, components) realization; the nominal
    values are used when omitted. Quality rows are evaluated in the linear
    form ``sum_i C_ik x_ij`` against ``P_jk v_j``.
    """
    check_keys(inst, sol)
    conc = inst.conc if concentrations is None else np.asarray(concentrations, dtype=float)
    x = total_flow_x(inst, sol)
    v = terminal_flow_v(inst, sol)
    worst = {f: Violation(None, -math.inf) for f in FAMILIES}

    def note(family, loc, mag):
        if mag > worst[family].magnitude:
            worst[family] = Violation(loc, float(mag))

    supplied = x.sum(axis=1)
    for n, s in enumerate(inst.sources):
        note("availability", (s.id,), max(s.lower_avail - supplied[n], supplied[n] - s.upper_avail))

    pool_out = {p.id: 0.0 for p in inst.pools}
    for (l, _), val in sol.y.items():
        pool_out[l] += val
    for p in inst.pools:
        note("capacity", (p.id,), pool_out[p.id] - p.capacity)
        if pool_out[p.id] > tol:
            frac = sum(sol.q.get(a, 0.0) for a in inst.source_pool if a[1] == p.id)
            note("simplex", (p.id,), abs(frac - 1.0))

    for n, t in enumerate(inst.terminals):
        note("demand", (t.id,), max(t.min_demand - v[n], v[n] - t.max_demand))

    content = conc.T @ x  # (components, terminals)
    for j, t in enumerate(inst.terminals):
        for k, comp in enumerate(inst.components):
            hi = inst.qual_hi[j, k]
            if math.isfinite(hi):
                note("quality-upper", (t.id, comp), content[k, j] - hi * v[j])
            note("quality-lower", (t.id, comp), inst.qual_lo[j, k] * v[j] - content[k, j])

    for key, val in sol.q.items():
        note("bounds", ("q",) + key, max(-val, val - 1.0))
    for name in ("y", "z"):
        for key, val in getattr(sol, name).items():
            note("bounds", (name,) + key, -val)
    return FeasibilityReport(worst, tol)
