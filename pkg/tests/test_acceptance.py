"""Acceptance suite: one test per criterion, each recording a pass/fail line.

The sweep grid is the default 30-point grid on [0, 0.3] extended to r = 1.
Profits are compared with ``tol * max(1, |profit|)`` where a criterion asks
for a tolerance, except where noted.
"""

import statistics
import time

import numpy as np
import pytest

from conftest import SHIPPED, load, record, solved
from oracles import grid_oracle, max_linear_over_set
from robust_pooling.bench import MethodConfig, SetConfig, default_r_grid, run_method
from robust_pooling.bilinear import OPTIMAL, solve_global
from robust_pooling.pooling import instance_from_dict
from robust_pooling.robust import (
    Cut,
    CutPool,
    nominal_master,
    reformulation_solve,
    scenario_master,
    separation,
)
from robust_pooling.uncertainty import (
    ScenarioPoint,
    UncertaintySet,
    membership,
    padding_lambda,
    worst_case,
)

GEOMETRIES = ("box", "ellipsoid", "polyhedron", "ellipsoid-corr")
ROBUST = ("reform", "cut-single", "cut-multi", "safety")
GRID = tuple(float(r) for r in np.concatenate([default_r_grid(), [0.4, 0.5, 0.75, 1.0]]))


def scaled_close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def cells(methods=ROBUST, geometries=GEOMETRIES, grid=GRID):
    for name in SHIPPED:
        for geom in geometries:
            for r in grid:
                for method in methods:
                    yield name, geom, r, method, solved(name, geom, r, method)


def report(number, title, failures, checked, extra=""):
    ok = not failures
    detail = f"{checked} checks, {len(failures)} failures" + (f"; {extra}" if extra else "")
    if failures:
        detail += f"; first: {failures[0]}"
    record(number, title, ok, detail)
    assert ok, detail


def test_criterion_01_nominal_recovery():
    inst = load("haverly1")
    start = time.perf_counter()
    rep = solve_global(nominal_master(inst))
    elapsed = time.perf_counter() - start
    ref = grid_oracle(inst)
    profit = -rep.objective
    ok = rep.status == OPTIMAL and abs(profit - ref) <= 1e-4 * abs(ref) and abs(profit - 400) <= 1e-4 * 400 \
        and elapsed < 60
    record(1, "nominal recovery", ok, f"profit {profit:.6f}, oracle {ref:.6f}, {elapsed:.2f} s")
    assert ok


def test_criterion_02_zero_radius_collapse():
    failures, n = [], 0
    for name in SHIPPED:
        nominal = solved(name, "box", 0.0, "nominal").objective
        for geom in GEOMETRIES:
            for method in ("nominal",) + ROBUST:
                res = solved(name, geom, 0.0, method)
                n += 1
                if res.solution is None or not scaled_close(res.objective, nominal, 1e-6):
                    failures.append((name, geom, method, res.objective, nominal))
    report(2, "r=0 collapse", failures, n)


def test_criterion_03_method_agreement():
    failures, n, box_total, box_ok = [], 0, 0, 0
    for name in SHIPPED:
        for geom in GEOMETRIES:
            for r in GRID:
                a, b = solved(name, geom, r, "reform"), solved(name, geom, r, "cut-multi")
                both = a.converged and b.converged
                agree = both and scaled_close(a.objective, b.objective, 1e-4)
                if geom == "box":
                    box_total += 1
                    box_ok += agree
                if both:
                    n += 1
                    if not agree:
                        failures.append((name, geom, r, a.profit, b.profit))
    share = box_ok / box_total
    if share < 0.95:
        failures.append(f"box agreement share {share:.3f} < 0.95")
    report(3, "reform vs cut-multi agreement", failures, n, f"box cells agreeing {box_ok}/{box_total}")


def test_criterion_04_geometry_ordering():
    # absolute 1e-6 on profit, as written
    failures, n = [], 0
    for name in SHIPPED:
        for r in (r for r in GRID if 0 < r <= 1):
            for method in ROBUST:
                res = {g: solved(name, g, r, method) for g in ("box", "ellipsoid", "polyhedron")}
                if not all(x.converged for x in res.values()):
                    continue
                n += 1
                p = {g: x.profit for g, x in res.items()}
                if not (p["polyhedron"] >= p["ellipsoid"] - 1e-6 and p["ellipsoid"] >= p["box"] - 1e-6):
                    failures.append((name, r, method, p))
    report(4, "geometry ordering", failures, n)


def test_criterion_05_monotone_in_radius():
    # absolute 1e-6 on profit, as written
    failures, n = [], 0
    for name in SHIPPED:
        for geom in GEOMETRIES:
            for method in ROBUST:
                series = [(r, solved(name, geom, r, method)) for r in GRID]
                series = [(r, res.profit) for r, res in series if res.converged]
                for (r0, p0), (r1, p1) in zip(series, series[1:]):
                    n += 1
                    if p1 > p0 + 1e-6:
                        failures.append((name, geom, method, r0, r1, p0, p1))
    report(5, "monotone in r", failures, n)


def random_instance(rng, n_sources, n_comp):
    comps = [f"k{c}" for c in range(n_comp)]
    sources = []
    for i in range(n_sources):
        sources.append({
            "id": f"S{i}", "cost": 1.0,
            "quality": {k: float(rng.uniform(0, 5)) for k in comps},
            "deviation": {k: float(rng.uniform(0, 2)) for k in comps},
        })
    terminals = []
    for j in range(2):
        lo = {k: float(rng.uniform(0, 1.5)) for k in comps}
        terminals.append({"id": f"T{j}", "price": 10.0, "max_demand": 100.0,
                          "quality_upper": {k: lo[k] + float(rng.uniform(0, 3)) for k in comps},
                          "quality_lower": lo})
    doc = {
        "name": "random", "components": comps, "sources": sources,
        "pools": [{"id": "P", "capacity": 100.0}], "terminals": terminals,
        "arcs": {"source_pool": [[s["id"], "P"] for s in sources],
                 "pool_terminal": [["P", t["id"]] for t in terminals], "source_terminal": []},
    }
    return instance_from_dict(doc)


def random_covariance(rng, n):
    a = rng.normal(size=(n, n))
    return a @ a.T + 0.5 * np.eye(n)


def test_criterion_06_separation_exactness():
    rng = np.random.default_rng(20161)
    failures, n = [], 0
    geoms = ("box", "ellipsoid", "polyhedron", "ellipsoid-corr")
    for trial in range(1000):
        inst = random_instance(rng, int(rng.integers(1, 5)), int(rng.integers(1, 3)))
        I, J, K = len(inst.sources), len(inst.terminals), len(inst.components)
        x = rng.uniform(0, 10, size=(I, J)) * (rng.uniform(size=(I, J)) > 0.15)
        v = x.sum(axis=0) + rng.uniform(0, 5, size=J)
        geom = geoms[trial % 4]
        r = float(rng.uniform(0, 1))
        cov = random_covariance(rng, I) if geom == "ellipsoid-corr" else None
        uset = UncertaintySet.correlated(r, cov) if cov is not None else UncertaintySet(geom, r)
        j, k = int(rng.integers(J)), int(rng.integers(K))
        side = ("upper", "lower")[trial % 2]
        val, scen = worst_case(uset, inst, x, v, j, k, side)
        # independent reference: nominal residual plus the best linear gain over the set
        sign = 1.0 if side == "upper" else -1.0
        content = inst.conc[:, k] @ x[:, j]
        base = content - inst.qual_hi[j, k] * v[j] if side == "upper" else inst.qual_lo[j, k] * v[j] - content
        ref = base + max_linear_over_set(sign * inst.dev[:, k] * x[:, j],
                                         "ellipsoid" if cov is not None else geom, r, cov)
        realized = sign * ((inst.conc[:, k] + inst.dev[:, k] * scen.xi[:, k]) @ x[:, j]) \
            - sign * (inst.qual_hi[j, k] if side == "upper" else inst.qual_lo[j, k]) * v[j]
        n += 1
        if not (abs(val - ref) <= 1e-6 and abs(realized - val) <= 1e-6 and membership(uset, scen.xi[:, k])):
            failures.append((trial, geom, val, ref, realized))
    report(6, "separation exactness", failures, n)


def test_criterion_07_robust_certificates():
    failures, n = [], 0
    for name, geom, r, method, res in cells():
        n += 1
        if res.solution is None or not res.certified:
            failures.append((name, geom, r, method, res.status))
    incumbents = 0
    for name in SHIPPED:
        inst = load(name)
        for geom in GEOMETRIES:
            for r in (0.1, 0.2, 0.3):
                uset = _uset(inst, geom, r)
                res = reformulation_solve(inst, uset, keep_incumbents=True)
                for sol in res.incumbents:
                    incumbents += 1
                    n += 1
                    if separation(inst, sol, uset).eps > 1e-6:
                        failures.append((name, geom, r, "incumbent"))
    report(7, "robust certificates", failures, n, f"{incumbents} reformulation incumbents")


def _uset(inst, geom, r):
    return SetConfig(geom, preset="medium").build(inst, r)


def test_criterion_08_box_equivalence():
    failures, n = [], 0
    for name in SHIPPED:
        inst = load(name)
        for r in (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.5):
            pool = CutPool.initial(inst)
            pool.cuts = [Cut(ScenarioPoint(np.full(inst.conc.shape, s * r)), 0, None, 0.0) for s in (-1.0, 1.0)]
            a = solve_global(scenario_master(inst, pool))
            b = solved(name, "box", r, "reform")
            n += 1
            if not (a.status == OPTIMAL and b.converged and scaled_close(a.objective, b.objective, 1e-6)):
                failures.append((name, r, a.objective, b.objective))
    report(8, "box equals two-scenario master", failures, n)


def test_criterion_09_identity_covariance_collapse():
    failures, n = [], 0
    rng = np.random.default_rng(9)
    for _ in range(200):
        m = int(rng.integers(1, 5))
        dev, col = rng.uniform(0, 3, m), rng.uniform(0, 10, m) * (rng.uniform(size=m) > 0.2)
        r = float(rng.uniform(0, 1))
        a = padding_lambda(UncertaintySet.ellipsoid(r), dev, col)
        b = padding_lambda(UncertaintySet.correlated(r, np.eye(m)), dev, col)
        n += 1
        if abs(a - b) > 1e-6:
            failures.append(("padding", a, b))
    for name in SHIPPED:
        inst = load(name)
        eye = np.eye(len(inst.sources))
        sol = solved(name, "box", 0.0, "nominal").solution
        for r in (0.1, 0.2, 0.3):
            ell, corr = UncertaintySet.ellipsoid(r), UncertaintySet.correlated(r, eye)
            e1, e2 = separation(inst, sol, ell).eps, separation(inst, sol, corr).eps
            n += 1
            if abs(e1 - e2) > 1e-6:
                failures.append((name, r, "separation", e1, e2))
            for method in ("reform", "cut-multi"):
                o1 = solved(name, "ellipsoid", r, method).objective
                o2 = run_method(inst, corr, MethodConfig(method=method)).objective
                n += 1
                if not scaled_close(o1, o2, 1e-6):
                    failures.append((name, r, method, o1, o2))
    report(9, "identity covariance equals ellipsoid", failures, n)


def test_criterion_10_safety_factor_conservatism():
    failures, n = [], 0
    for name in SHIPPED:
        for geom in GEOMETRIES:
            for r in GRID:
                safe, cut = solved(name, geom, r, "safety"), solved(name, geom, r, "cut-multi")
                if not (safe.converged and cut.converged):
                    continue
                n += 1
                if not safe.certified or safe.profit > cut.profit + 1e-6:
                    failures.append((name, geom, r, safe.profit, cut.profit))
            s0 = solved(name, geom, 0.0, "safety").safety_factor
            n += 1
            if abs(s0 - 1.0) > 1e-6:
                failures.append((name, geom, "s_min at r=0", s0))
    report(10, "safety factor conservatism", failures, n)


def test_criterion_11_cutting_plane_economy():
    failures, iterations = [], []
    for name, geom, r, method, res in cells(("cut-multi",), grid=[r for r in GRID if r <= 0.3]):
        if not res.converged:
            continue
        iterations.append(res.iterations)
        if res.cuts > 200:
            failures.append((name, geom, r, res.cuts))
    med = statistics.median(iterations)
    if med > 25:
        failures.append(f"median iterations {med}")
    report(11, "cutting-plane economy", failures, len(iterations),
           f"median iterations {med}, max {max(iterations)}")


def test_criterion_12_polyhedron_drop_instance():
    record(12, "polyhedron drop instance", None, "instance not transcribed; nothing to check")
    pytest.skip("instance with the 446.2 -> 65.9 polyhedron drop is not shipped")
