"""Robust pooling: duality-based reformulation, cutting planes, safety factors.

All three strategies build a :class:`~robust_pooling.bilinear.MasterProblem`
over the same base model (pool fractions ``q``, flows ``y`` and ``z``,
products ``w = q * y``, total flows ``x`` and terminal flows ``v``) and
differ only in the quality rows they attach to it.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import bilinear
from .bilinear import GAP_LIMIT, INFEASIBLE, OPTIMAL, TIME_LIMIT, MasterProblem, ModelBuilder
from .pooling import PoolingInstance, Solution, check_feasibility, objective
from .uncertainty import (
    LOWER,
    UPPER,
    Geometry,
    ScenarioPoint,
    UncertaintySet,
    membership,
    worst_case,
)

log = logging.getLogger(__name__)

FEAS_TOL = 1e-6
SIDES = (UPPER, LOWER)


# ---------------------------------------------------------------------------
# Master problems


def _base_model(inst: PoolingInstance) -> ModelBuilder:
    """Variables, objective and the certain rows of the q-formulation."""
    mb = ModelBuilder()
    si, ti, pi = inst.source_index, inst.terminal_index, inst.pool_index
    for i, l in inst.source_pool:
        mb.var(("q", i, l), 0.0, 1.0, fixable=True)
    for l, j in inst.pool_terminal:
        mb.var(("y", l, j), 0.0, min(inst.capacity[pi[l]], inst.demand_hi[ti[j]]))
    for i, j in inst.source_terminal:
        mb.var(("z", i, j), 0.0, min(inst.avail_hi[si[i]], inst.demand_hi[ti[j]]))
    idx = mb.index
    for i, l, j in inst.paths:
        mb.product(("w", i, l, j), idx["q", i, l], idx["y", l, j])

    feeds: dict[tuple[str, str], dict[int, float]] = {}
    for i, l, j in inst.paths:
        feeds.setdefault((i, j), {})[idx["w", i, l, j]] = 1.0
    for i, j in inst.source_terminal:
        feeds.setdefault((i, j), {})[idx["z", i, j]] = 1.0
    for i, j in inst.reachable:
        mb.linear(("x", i, j), feeds[i, j], lb=0.0)
    for t in inst.terminals:
        inflow = {idx["y", l, j]: 1.0 for l, j in inst.pool_terminal if j == t.id}
        inflow.update({idx["z", i, j]: 1.0 for i, j in inst.source_terminal if j == t.id})
        mb.linear(("v", t.id), inflow, lb=0.0)

    obj = {}
    for i, l, j in inst.paths:
        obj[idx["w", i, l, j]] = inst.cost[si[i]]
    for l, j in inst.pool_terminal:
        obj[idx["y", l, j]] = -inst.price[ti[j]]
    for i, j in inst.source_terminal:
        obj[idx["z", i, j]] = -(inst.price[ti[j]] - inst.cost[si[i]])
    mb.objective(obj)

    for s in inst.sources:
        row = {idx["x", s.id, j]: 1.0 for i, j in inst.reachable if i == s.id}
        mb.le(row, s.upper_avail, ("availability-upper", s.id))
        if s.lower_avail > 0:
            mb.ge(row, s.lower_avail, ("availability-lower", s.id))
    for p in inst.pools:
        row = {idx["y", l, j]: 1.0 for l, j in inst.pool_terminal if l == p.id}
        mb.le(row, p.capacity, ("capacity", p.id))
    for t in inst.terminals:
        mb.le({idx["v", t.id]: 1.0}, t.max_demand, ("demand-upper", t.id))
        if t.min_demand > 0:
            mb.ge({idx["v", t.id]: 1.0}, t.min_demand, ("demand-lower", t.id))
    for p in inst.pools:
        mb.eq({idx["q", i, l]: 1.0 for i, l in inst.source_pool if l == p.id}, 1.0, ("simplex", p.id))
    return mb


def _content(inst: PoolingInstance, mb: ModelBuilder, j: str, conc_col: np.ndarray) -> dict[int, float]:
    """Coefficients of ``sum_i conc_i x_ij`` over the reachable sources of terminal j."""
    si = inst.source_index
    return {mb.index["x", i, jj]: float(conc_col[si[i]]) for i, jj in inst.reachable if jj == j}


def _quality_row(inst: PoolingInstance, mb: ModelBuilder, j: int, k: int, side: str,
                 conc_col: np.ndarray, label) -> None:
    tid = inst.terminals[j].id
    row = _content(inst, mb, tid, conc_col)
    v = mb.index["v", tid]
    if side == UPPER:
        bound = inst.qual_hi[j, k]
        if not math.isfinite(bound):
            return
        row[v] = row.get(v, 0.0) - bound
    else:
        row = {n: -a for n, a in row.items()}
        row[v] = row.get(v, 0.0) + inst.qual_lo[j, k]
    mb.le(row, 0.0, label)


def _nominal_rows(inst: PoolingInstance, mb: ModelBuilder, conc: np.ndarray, tag="nominal") -> None:
    _, _, nj, nk = inst.shape
    for j in range(nj):
        for k in range(nk):
            for side in SIDES:
                _quality_row(inst, mb, j, k, side, conc[:, k], (tag, j, k, side))


def nominal_master(inst: PoolingInstance) -> MasterProblem:
    mb = _base_model(inst)
    _nominal_rows(inst, mb, inst.conc)
    return mb.build()


def build_reformulation(inst: PoolingInstance, uset: UncertaintySet) -> MasterProblem:
    """Deterministic robust counterpart of the quality rows for ``uset``.

    Box shifts the coefficients to ``C +/- r Chat``. The polyhedron adds one
    padding variable per (terminal, component, side) bounded below by every
    ``Chat_ik x_ij``. Ellipsoids keep the nominal rows and add the squared rows
    ``r^2 |F' (Chat * x_j)|^2 <= (P v_j - C x_j)^2`` with ``F`` the identity or
    the Cholesky factor of the covariance.
    """
    mb = _base_model(inst)
    r = uset.r
    geom = uset.geometry
    _, _, nj, nk = inst.shape
    idx = mb.index

    if geom is Geometry.BOX:
        for j in range(nj):
            for k in range(nk):
                _quality_row(inst, mb, j, k, UPPER, inst.conc[:, k] + r * inst.dev[:, k], ("box", j, k, UPPER))
                _quality_row(inst, mb, j, k, LOWER, inst.conc[:, k] - r * inst.dev[:, k], ("box", j, k, LOWER))
        return mb.build()

    if geom is Geometry.POLYHEDRON:
        si = inst.source_index
        for j, term in enumerate(inst.terminals):
            cols = {i: idx["x", i, jj] for i, jj in inst.reachable if jj == term.id}
            for k, comp in enumerate(inst.components):
                lam_hi = max([inst.dev[si[i], k] * mb.ub[n] for i, n in cols.items()], default=0.0)
                for side in SIDES:
                    lam = mb.var(("lam", term.id, comp, side), 0.0, lam_hi)
                    for s in inst.sources:
                        row = {lam: -1.0}
                        if s.id in cols:
                            row[cols[s.id]] = inst.dev[si[s.id], k]
                        mb.le(row, 0.0, ("padding", j, k, side, s.id))
                    before = len(mb.rows_ub)
                    _quality_row(inst, mb, j, k, side, inst.conc[:, k], ("poly", j, k, side))
                    if len(mb.rows_ub) > before:
                        coeffs, rhs, label = mb.rows_ub[-1]
                        coeffs[lam] = coeffs.get(lam, 0.0) + r
        return mb.build()

    _nominal_rows(inst, mb, inst.conc)
    if r == 0:
        return mb.build()
    factor = np.eye(len(inst.sources)) if geom is Geometry.ELLIPSOID else uset.cholesky
    si = inst.source_index
    for j, term in enumerate(inst.terminals):
        cols = {i: idx["x", i, jj] for i, jj in inst.reachable if jj == term.id}
        for k, comp in enumerate(inst.components):
            spread = []
            for m in range(factor.shape[1]):
                coeffs = {n: factor[si[i], m] * inst.dev[si[i], k] for i, n in cols.items()}
                coeffs = {n: a for n, a in coeffs.items() if a != 0.0}
                if not coeffs:
                    continue
                e = mb.linear(("e", term.id, comp, m), coeffs)
                spread.append(mb.square(("s", term.id, comp, m), e))
            if not spread:
                continue
            content = _content(inst, mb, term.id, inst.conc[:, k])
            v = idx["v", term.id]
            for side in SIDES:
                if side == UPPER:
                    if not math.isfinite(inst.qual_hi[j, k]):
                        continue
                    slack = {n: -a for n, a in content.items()}
                    slack[v] = slack.get(v, 0.0) + inst.qual_hi[j, k]
                else:
                    slack = dict(content)
                    slack[v] = slack.get(v, 0.0) - inst.qual_lo[j, k]
                u = mb.linear(("u", term.id, comp, side), slack, lb=0.0)
                big = mb.square(("T", term.id, comp, side), u)
                row = {n: r * r for n in spread}
                row[big] = -1.0
                mb.le(row, 0.0, ("ellipsoid", j, k, side))
    return mb.build()


def safety_master(inst: PoolingInstance, s: float) -> MasterProblem:
    """Nominal model with quality bounds tightened to ``P_L * s`` and ``P_U / s``."""
    return nominal_master(scaled_instance(inst, s))


def scaled_instance(inst: PoolingInstance, s: float) -> PoolingInstance:
    if not s >= 1:
        raise ValueError("safety factor must be >= 1")
    return inst.with_quality_bounds(inst.qual_lo * s, inst.qual_hi / s)


def solution_from_point(inst: PoolingInstance, problem: MasterProblem, x: np.ndarray) -> Solution:
    idx = problem.index
    q = {(i, l): float(np.clip(x[idx["q", i, l]], 0.0, 1.0)) for i, l in inst.source_pool}
    y = {(l, j): float(max(x[idx["y", l, j]], 0.0)) for l, j in inst.pool_terminal}
    z = {(i, j): float(max(x[idx["z", i, j]], 0.0)) for i, j in inst.source_terminal}
    return Solution(q, y, z)


# ---------------------------------------------------------------------------
# Cut pool and scenario masters


ALL_ROWS = None


@dataclass
class Cut:
    scenario: ScenarioPoint
    iteration: int
    row: tuple[int, int, str] | None  # violating (j, k, side); None for the nominal entry
    violation: float
    rows: tuple[tuple[int, int, str], ...] | None = ALL_ROWS  # rows added; None means all


@dataclass
class CutPool:
    """Scenarios accumulated by the cutting-plane loop, nominal first."""

    cuts: list[Cut] = field(default_factory=list)
    max_cuts: int = 200

    @classmethod
    def initial(cls, inst: PoolingInstance, max_cuts: int = 200) -> CutPool:
        return cls([Cut(ScenarioPoint.nominal(inst), 0, None, 0.0)], max_cuts)

    def __len__(self):
        return len(self.cuts)

    @property
    def added(self) -> int:
        return len(self.cuts) - 1

    def contains(self, scenario: ScenarioPoint, rows=ALL_ROWS, tol: float = 1e-12) -> bool:
        for cut in self.cuts:
            if not cut.scenario.close_to(scenario, tol):
                continue
            if cut.rows is ALL_ROWS or (rows is not ALL_ROWS and set(rows) <= set(cut.rows)):
                return True
        return False

    def add(self, cut: Cut) -> None:
        if self.added >= self.max_cuts:
            raise OverflowError("cut pool is full")
        if self.contains(cut.scenario, cut.rows):
            raise ValueError("duplicate scenario")
        self.cuts.append(cut)


def scenario_master(inst: PoolingInstance, pool: CutPool) -> MasterProblem:
    """Base model plus linear quality rows for every scenario in the pool."""
    if not len(pool):
        raise ValueError("cut pool is empty")
    mb = _base_model(inst)
    _, _, nj, nk = inst.shape
    for n, cut in enumerate(pool.cuts):
        conc = cut.scenario.concentrations(inst)
        rows = cut.rows if cut.rows is not ALL_ROWS else [
            (j, k, side) for j in range(nj) for k in range(nk) for side in SIDES
        ]
        for j, k, side in rows:
            _quality_row(inst, mb, j, k, side, conc[:, k], ("scenario", n, j, k, side))
    return mb.build()


# ---------------------------------------------------------------------------
# Separation


@dataclass(frozen=True)
class Separation:
    eps: float
    terminal: int
    component: int
    side: str
    scenario: ScenarioPoint
    feas_tol: float = FEAS_TOL

    @property
    def certified(self) -> bool:
        return self.eps <= self.feas_tol


def separation(inst: PoolingInstance, sol: Solution, uset: UncertaintySet,
               feas_tol: float = FEAS_TOL) -> Separation:
    """Worst quality-row violation of ``sol`` over the uncertainty set.

    The returned scenario uses the maximizer of the worst row for its
    component and, for the other components, the maximizer of the same
    terminal and side.
    """
    from .pooling import terminal_flow_v, total_flow_x

    x = total_flow_x(inst, sol)
    v = terminal_flow_v(inst, sol)
    _, _, nj, nk = inst.shape
    best = (-math.inf, 0, 0, UPPER)
    for j in range(nj):
        for k in range(nk):
            for side in SIDES:
                eps, _ = worst_case(uset, inst, x, v, j, k, side)
                if eps > best[0]:
                    best = (eps, j, k, side)
    eps, j, k, side = best
    xi = np.zeros((len(inst.sources), nk))
    for kk in range(nk):
        _, point = worst_case(uset, inst, x, v, j, kk, side)
        xi[:, kk] = point.xi[:, kk]
    return Separation(float(eps), j, k, side, ScenarioPoint(xi), feas_tol)


# ---------------------------------------------------------------------------
# Configuration and results


@dataclass(frozen=True)
class CuttingPlaneConfig:
    delta0: float = 1e-2
    gamma: float = 0.1
    delta_star: float = 1e-6
    feas_tol: float = FEAS_TOL
    max_cuts: int = 200
    cut_mode: str = "multi"
    time_limit: float | None = None
    node_limit: int = 100_000

    def __post_init__(self):
        if not 0 < self.delta_star <= self.delta0:
            raise ValueError("need 0 < delta_star <= delta0")
        if not 0 < self.gamma < 1:
            raise ValueError("need 0 < gamma < 1")
        if self.max_cuts < 1:
            raise ValueError("max_cuts must be >= 1")
        if self.cut_mode not in ("single", "multi"):
            raise ValueError("cut_mode must be 'single' or 'multi'")


@dataclass(frozen=True)
class SafetyFactorConfig:
    s_bar: float = 100.0
    rel_tol: float = 1e-6
    switch: float = 0.01
    max_iters: int = 200
    feas_tol: float = FEAS_TOL
    delta: float = 1e-6
    time_limit: float | None = None
    node_limit: int = 100_000

    def __post_init__(self):
        if not self.s_bar > 1:
            raise ValueError("s_bar must be > 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")


@dataclass
class MethodResult:
    method: str
    status: str
    solution: Solution | None
    objective: float
    bound: float
    gap: float
    nodes: int
    time_s: float
    iterations: int = 1
    cuts: int = 0
    separation: Separation | None = None
    pool: CutPool | None = None
    safety_factor: float | None = None
    history: list[dict] = field(default_factory=list)
    incumbents: list[Solution] = field(default_factory=list)

    @property
    def profit(self) -> float:
        return -self.objective

    @property
    def certified(self) -> bool:
        return self.separation is not None and self.separation.certified

    @property
    def converged(self) -> bool:
        return self.status == OPTIMAL


def _deadline(time_limit):
    return math.inf if time_limit is None else time.perf_counter() + time_limit


def _remaining(deadline):
    return None if math.isinf(deadline) else max(deadline - time.perf_counter(), 0.0)


def candidate_screen(inst: PoolingInstance, problem: MasterProblem, uset: UncertaintySet | None = None,
                     feas_tol: float = FEAS_TOL):
    """Incumbent screen: pooling rows at ``feas_tol`` and, given a set, robust feasibility.

    Candidates are judged as pooling solutions (flows recomputed from
    ``q``, ``y`` and ``z``), not by the residuals of the master's auxiliaries.
    """
    def accept(x: np.ndarray) -> bool:
        sol = solution_from_point(inst, problem, x)
        if not check_feasibility(inst, sol, tol=feas_tol).feasible:
            return False
        return uset is None or separation(inst, sol, uset, feas_tol).certified
    return accept


def _run(method: str, inst: PoolingInstance, problem: MasterProblem, uset: UncertaintySet | None,
         delta: float, time_limit, node_limit, feas_tol=FEAS_TOL, keep_incumbents=False,
         robust: bool = False) -> MethodResult:
    screen = candidate_screen(inst, problem, uset if robust else None, feas_tol)
    rep = bilinear.solve_global(problem, delta, time_limit=time_limit, node_limit=node_limit, accept=screen)
    sol = solution_from_point(inst, problem, rep.x) if rep.x is not None else None
    sep = separation(inst, sol, uset, feas_tol) if (sol is not None and uset is not None) else None
    incs = [solution_from_point(inst, problem, x) for _, _, x in rep.incumbents] if keep_incumbents else []
    return MethodResult(method, rep.status, sol, objective(inst, sol) if sol else math.inf,
                        rep.bound, rep.gap, rep.nodes, rep.time_s, separation=sep, incumbents=incs)


# ---------------------------------------------------------------------------
# Strategies


def nominal_solve(inst: PoolingInstance, delta: float = 1e-6, time_limit=None, node_limit=100_000,
                  uset: UncertaintySet | None = None) -> MethodResult:
    return _run("nominal", inst, nominal_master(inst), uset, delta, time_limit, node_limit)


def reformulation_solve(inst: PoolingInstance, uset: UncertaintySet, delta: float = 1e-6,
                        time_limit=None, node_limit=100_000, feas_tol=FEAS_TOL,
                        keep_incumbents: bool = False) -> MethodResult:
    """Solve the robust counterpart globally.

    Every incumbent of the counterpart is robustly feasible; pass
    ``keep_incumbents=True`` to collect them all.
    """
    return _run("reform", inst, build_reformulation(inst, uset), uset, delta, time_limit,
                node_limit, feas_tol, keep_incumbents, robust=True)


def safety_factor_solve(inst: PoolingInstance, s: float, delta: float = 1e-6, time_limit=None,
                        node_limit=100_000, uset: UncertaintySet | None = None) -> MethodResult:
    res = _run("safety", inst, safety_master(inst, s), uset, delta, time_limit, node_limit)
    res.safety_factor = s
    return res


def cutting_plane_solve(inst: PoolingInstance, uset: UncertaintySet,
                        cfg: CuttingPlaneConfig = CuttingPlaneConfig()) -> MethodResult:
    """Robust cutting planes with an adaptive master tolerance.

    The master is solved to ``delta`` (starting at ``delta0``); a violated
    scenario is added to the pool, and ``delta`` shrinks by ``gamma`` every
    time the master solution is robustly feasible, until it reaches
    ``delta_star``. A robustly feasible master whose gap is already within
    ``delta_star`` ends the loop without further shrinking.
    """
    start = time.perf_counter()
    deadline = _deadline(cfg.time_limit)
    pool = CutPool.initial(inst, cfg.max_cuts)
    _, _, nj, nk = inst.shape
    eps = math.inf
    delta = cfg.delta0
    n = 0
    nodes = 0
    history: list[dict] = []
    rep = sol = sep = None
    status = None

    while eps > cfg.feas_tol or delta > cfg.delta_star:
        if eps <= cfg.feas_tol:
            if rep.gap <= cfg.delta_star:
                # the last master already closed to the final tolerance
                delta = cfg.delta_star
                break
            delta = max(delta * cfg.gamma, cfg.delta_star)
        master = scenario_master(inst, pool)
        rep = bilinear.solve_global(master, delta, time_limit=_remaining(deadline), node_limit=cfg.node_limit,
                                    accept=candidate_screen(inst, master, None, cfg.feas_tol))
        n += 1
        nodes += rep.nodes
        if rep.x is None:
            status = rep.status
            sol = sep = None
            break
        sol = solution_from_point(inst, master, rep.x)
        sep = separation(inst, sol, uset, cfg.feas_tol)
        eps = sep.eps
        history.append({"iteration": n, "delta": delta, "objective": rep.objective,
                        "master_status": rep.status, "eps": eps, "cuts": pool.added,
                        "certified": sep.certified})
        if rep.status == TIME_LIMIT:
            status = TIME_LIMIT
            break
        if eps > cfg.feas_tol:
            rows = ALL_ROWS if cfg.cut_mode == "multi" else ((sep.terminal, sep.component, sep.side),)
            if pool.contains(sep.scenario, rows):
                if delta <= cfg.delta_star:
                    status = GAP_LIMIT
                    break
                delta = max(delta * cfg.gamma, cfg.delta_star)
                continue
            if pool.added >= cfg.max_cuts:
                status = GAP_LIMIT
                break
            pool.add(Cut(sep.scenario, n, (sep.terminal, sep.component, sep.side), eps, rows))
        if time.perf_counter() > deadline:
            status = TIME_LIMIT
            break

    if status is None:
        status = rep.status
    method = "cut-multi" if cfg.cut_mode == "multi" else "cut-single"
    return MethodResult(
        method, status, sol, objective(inst, sol) if sol else math.inf,
        rep.bound if rep else math.inf, rep.gap if rep else math.inf, nodes,
        time.perf_counter() - start, iterations=n, cuts=pool.added, separation=sep, pool=pool,
        history=history,
    )


def optimal_safety_factor(inst: PoolingInstance, uset: UncertaintySet,
                          cfg: SafetyFactorConfig = SafetyFactorConfig()) -> tuple[float, MethodResult]:
    """Smallest safety factor whose nominal-scaled solution is robustly feasible.

    Keeps a bracket ``[s_lo, s_hi]`` with an infeasible lower end and a
    feasible upper end. Steps are regula falsi on the separation value,
    switching to bisection once the infeasible end is within ``switch`` of
    feasibility (or when the secant point leaves the bracket interior).
    """
    start = time.perf_counter()
    deadline = _deadline(cfg.time_limit)
    nodes = 0
    history = []

    def evaluate(s):
        nonlocal nodes
        res = safety_factor_solve(inst, s, cfg.delta, _remaining(deadline), cfg.node_limit, uset)
        nodes += res.nodes
        if res.separation is None:
            # an infeasible scaled model cannot certify anything
            eps = math.inf
        else:
            eps = res.separation.eps
            res.separation = Separation(eps, res.separation.terminal, res.separation.component,
                                        res.separation.side, res.separation.scenario, cfg.feas_tol)
        history.append({"s": s, "eps": eps, "objective": res.objective, "status": res.status})
        return res, eps

    lo_res, eps_lo = evaluate(1.0)
    s_lo = 1.0

    def finish(s, res, iters):
        res.safety_factor = s
        res.method = "safety"
        res.nodes = nodes
        res.time_s = time.perf_counter() - start
        res.iterations = iters
        res.history = history
        return s, res

    if eps_lo <= cfg.feas_tol:
        return finish(1.0, lo_res, 1)
    hi_res, eps_hi = evaluate(cfg.s_bar)
    s_hi = cfg.s_bar
    if eps_hi > cfg.feas_tol:
        raise RuntimeError(f"safety factor {cfg.s_bar} is not robustly feasible; increase s_bar")

    iters = 2
    while abs(s_hi - s_lo) / s_lo >= cfg.rel_tol and iters < cfg.max_iters:
        width = s_hi - s_lo
        s = 0.5 * (s_lo + s_hi)
        if eps_lo > cfg.switch and math.isfinite(eps_lo) and eps_lo != eps_hi:
            sec = s_lo + eps_lo * (s_lo - s_hi) / (eps_hi - eps_lo)
            if s_lo + 0.01 * width < sec < s_hi - 0.01 * width:
                s = sec
        res, eps = evaluate(s)
        iters += 1
        if res.status == TIME_LIMIT:
            hi_res.status = TIME_LIMIT
            break
        if eps <= cfg.feas_tol:
            s_hi, eps_hi, hi_res = s, eps, res
        else:
            s_lo, eps_lo = s, eps
    if hi_res.status == OPTIMAL and abs(s_hi - s_lo) / s_lo >= cfg.rel_tol:
        hi_res.status = GAP_LIMIT
    return finish(s_hi, hi_res, iters)


def cut_pool_members_valid(pool: CutPool, uset: UncertaintySet) -> bool:
    return all(membership(uset, cut.scenario) for cut in pool.cuts)


__all__ = [
    "ALL_ROWS", "Cut", "CutPool", "CuttingPlaneConfig", "MethodResult", "SafetyFactorConfig",
    "Separation", "build_reformulation", "cutting_plane_solve", "nominal_master", "nominal_solve",
    "optimal_safety_factor", "reformulation_solve", "safety_factor_solve", "safety_master",
    "scaled_instance", "scenario_master", "separation", "solution_from_point", "INFEASIBLE",
]
