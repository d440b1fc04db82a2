import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import load, solved
from oracles import grid_oracle, max_linear_over_set
from robust_pooling.bench import SetConfig
from robust_pooling.bilinear import GAP_LIMIT, OPTIMAL, TIME_LIMIT, solve_global
from robust_pooling.pooling import Solution, check_feasibility, terminal_flow_v, total_flow_x
from robust_pooling.robust import (
    Cut,
    CutPool,
    CuttingPlaneConfig,
    SafetyFactorConfig,
    build_reformulation,
    cut_pool_members_valid,
    cutting_plane_solve,
    nominal_master,
    nominal_solve,
    optimal_safety_factor,
    reformulation_solve,
    safety_factor_solve,
    scaled_instance,
    scenario_master,
    separation,
)
from robust_pooling.uncertainty import ScenarioPoint, UncertaintySet, nominal_residual
from test_pooling import haverly1_optimum


def quality_rows(problem, tag):
    return [n for n, lab in enumerate(problem.labels_ub) if isinstance(lab, tuple) and lab[0] == tag]


# ---------------------------------------------------------------------------
# Model structure


def test_box_zero_radius_rows_equal_nominal(shipped):
    box = build_reformulation(shipped, UncertaintySet.box(0.0))
    nom = nominal_master(shipped)
    np.testing.assert_array_equal(box.A_ub, nom.A_ub)
    np.testing.assert_array_equal(box.b_ub, nom.b_ub)
    np.testing.assert_array_equal(box.A_eq, nom.A_eq)


def test_box_unit_radius_coefficients(haverly1):
    p = build_reformulation(haverly1, UncertaintySet.box(1.0))
    idx = p.index
    for n in quality_rows(p, "box"):
        _, j, k, side = p.labels_ub[n]
        term = haverly1.terminals[j].id
        for i, jj in haverly1.reachable:
            if jj != term:
                continue
            coef = p.A_ub[n, idx["x", i, jj]]
            c = haverly1.conc[haverly1.source_index[i], k]
            assert coef == pytest.approx(2 * c if side == "upper" else -0.0)


def test_polyhedron_counts(shipped):
    I, _, J, K = shipped.shape
    p = build_reformulation(shipped, UncertaintySet.polyhedron(0.2))
    nom = nominal_master(shipped)
    assert p.count("lam") == 2 * J * K
    assert len(quality_rows(p, "padding")) == 2 * I * J * K
    assert p.n == nom.n + 2 * J * K
    assert len(p.bilinear) == len(nom.bilinear) and not len(p.squares)


@pytest.mark.parametrize("geom", ["ellipsoid", "ellipsoid-corr"])
def test_ellipsoid_structure(haverly1, geom):
    uset = SetConfig(geom, preset="medium").build(haverly1, 0.2)
    p = build_reformulation(haverly1, uset)
    assert len(quality_rows(p, "nominal")) == len(quality_rows(nominal_master(haverly1), "nominal"))
    assert len(quality_rows(p, "ellipsoid")) == 4  # 2 terminals x 1 component x 2 sides
    assert len(p.squares) > 0
    assert not len(build_reformulation(haverly1, uset.with_radius(0.0)).squares)


def test_scenario_master_nominal_pool_equals_nominal(shipped):
    a = scenario_master(shipped, CutPool.initial(shipped))
    b = nominal_master(shipped)
    np.testing.assert_array_equal(a.A_ub, b.A_ub)
    np.testing.assert_array_equal(a.b_ub, b.b_ub)
    assert solve_global(a).objective == pytest.approx(solve_global(b).objective, rel=1e-9)


def test_scenario_master_row_count(haverly1):
    pool = CutPool.initial(haverly1)
    for s in range(1, 4):
        xi = np.full((3, 1), 0.1 * s)
        pool.add(Cut(ScenarioPoint(xi), s, (0, 0, "upper"), 1.0))
    p = scenario_master(haverly1, pool)
    assert len(quality_rows(p, "scenario")) == 2 * len(pool) * 2 * 1
    with pytest.raises(ValueError):
        scenario_master(haverly1, CutPool([], 5))


def test_cut_pool_guards(haverly1):
    pool = CutPool.initial(haverly1, max_cuts=1)
    with pytest.raises(ValueError, match="duplicate"):
        pool.add(Cut(ScenarioPoint.nominal(haverly1), 1, None, 0.0))
    pool.add(Cut(ScenarioPoint(np.full((3, 1), 0.1)), 1, (0, 0, "upper"), 1.0, ((0, 0, "upper"),)))
    assert pool.contains(ScenarioPoint(np.full((3, 1), 0.1 + 1e-13)), ((0, 0, "upper"),))
    assert not pool.contains(ScenarioPoint(np.full((3, 1), 0.1)), ((1, 0, "upper"),))
    with pytest.raises(OverflowError):
        pool.add(Cut(ScenarioPoint(np.full((3, 1), 0.2)), 2, None, 1.0))


@pytest.mark.parametrize("kwargs", [
    dict(delta0=1e-7, delta_star=1e-6), dict(gamma=1.0), dict(max_cuts=0), dict(cut_mode="both"),
])
def test_cutting_plane_config_validation(kwargs):
    with pytest.raises(ValueError):
        CuttingPlaneConfig(**kwargs)


@pytest.mark.parametrize("kwargs", [dict(s_bar=1.0), dict(rel_tol=0.0)])
def test_safety_config_validation(kwargs):
    with pytest.raises(ValueError):
        SafetyFactorConfig(**kwargs)


# ---------------------------------------------------------------------------
# Separation


def test_separation_detects_tight_nominal_optimum(haverly1):
    sol = haverly1_optimum(haverly1)
    sep = separation(haverly1, sol, UncertaintySet.box(0.1))
    assert sep.eps > 0 and not sep.certified
    x = total_flow_x(haverly1, sol)
    # vertex enumeration of the box on the worst row (terminal Y, upper)
    ref = nominal_residual(haverly1, x, terminal_flow_v(haverly1, sol), 1, 0, "upper") \
        + max_linear_over_set(haverly1.dev[:, 0] * x[:, 1], "box", 0.1)
    assert sep.eps == pytest.approx(ref, abs=1e-9)
    assert (sep.terminal, sep.component, sep.side) == (1, 0, "upper")


@pytest.mark.parametrize("geom", ["box", "ellipsoid", "polyhedron"])
def test_separation_of_zero_solution(shipped, geom):
    assert separation(shipped, Solution.zeros(shipped), UncertaintySet(geom, 0.3)).eps <= 0


def test_separation_at_zero_radius_is_nominal_residual(haverly1):
    sol = Solution({("A", "P"): 0.5, ("B", "P"): 0.5}, {("P", "X"): 10.0, ("P", "Y"): 50.0},
                   {("C", "X"): 5.0, ("C", "Y"): 1.0})
    x, v = total_flow_x(haverly1, sol), terminal_flow_v(haverly1, sol)
    worst = max(nominal_residual(haverly1, x, v, j, 0, s) for j in range(2) for s in ("upper", "lower"))
    assert separation(haverly1, sol, UncertaintySet.ellipsoid(0.0)).eps == pytest.approx(worst)


sol_strategy = st.tuples(st.floats(0, 1), st.floats(0, 100), st.floats(0, 100), st.floats(0, 100), st.floats(0, 100))


def _sol(t, a, b, c, d):
    return Solution({("A", "P"): t, ("B", "P"): 1 - t}, {("P", "X"): a, ("P", "Y"): b},
                    {("C", "X"): c, ("C", "Y"): d})


@given(vals=sol_strategy, r1=st.floats(0, 1), r2=st.floats(0, 1))
def test_separation_monotone_in_radius(vals, r1, r2):
    inst = load("haverly1")
    sol = _sol(*vals)
    lo, hi = sorted((r1, r2))
    for geom in ("box", "ellipsoid", "polyhedron"):
        assert separation(inst, sol, UncertaintySet(geom, lo)).eps <= \
            separation(inst, sol, UncertaintySet(geom, hi)).eps + 1e-9


@given(vals=sol_strategy, r=st.floats(0, 1))
def test_separation_geometry_nesting(vals, r):
    # the 1-ball sits inside the 2-ball inside the inf-ball
    inst = load("haverly1")
    sol = _sol(*vals)
    e = {g: separation(inst, sol, UncertaintySet(g, r)).eps for g in ("box", "ellipsoid", "polyhedron")}
    assert e["polyhedron"] <= e["ellipsoid"] + 1e-9 <= e["box"] + 2e-9


# ---------------------------------------------------------------------------
# Solves against brute force


@pytest.mark.parametrize("name", ["haverly1", "haverly3"])
@pytest.mark.parametrize("geom, r", [("box", 0.1), ("polyhedron", 0.2), ("ellipsoid", 0.2), ("ellipsoid-corr", 0.3)])
def test_reformulation_matches_brute_force(name, geom, r):
    inst = load(name)
    res = solved(name, geom, r, "reform")
    uset = SetConfig(geom, preset="medium").build(inst, r)
    ref = grid_oracle(inst, "ellipsoid" if geom == "ellipsoid-corr" else geom, r, uset.covariance)
    assert res.status == OPTIMAL
    assert res.profit == pytest.approx(ref, rel=1e-5)
    assert res.profit >= ref - 1e-6 * max(1.0, abs(ref)) - 1e-5  # global: not beaten by the oracle


def test_box_reform_equals_two_extreme_scenarios(shipped):
    r = 0.15
    pool = CutPool.initial(shipped)
    pool.cuts = [Cut(ScenarioPoint(np.full(shipped.conc.shape, s * r)), 0, None, 0.0) for s in (-1, 1)]
    a = solve_global(scenario_master(shipped, pool))
    b = reformulation_solve(shipped, UncertaintySet.box(r))
    assert a.objective == pytest.approx(b.objective, rel=1e-6, abs=1e-6)


def test_cutting_plane_at_zero_radius(shipped):
    for geom in ("box", "ellipsoid", "polyhedron"):
        res = cutting_plane_solve(shipped, UncertaintySet(geom, 0.0))
        assert res.iterations == 1 and res.cuts == 0
        assert res.objective == pytest.approx(nominal_solve(shipped).objective, rel=1e-6)


@pytest.mark.parametrize("mode", ["single", "multi"])
def test_cutting_plane_certified_and_pool_valid(haverly1, mode):
    uset = UncertaintySet.ellipsoid(0.2)
    res = cutting_plane_solve(haverly1, uset, CuttingPlaneConfig(cut_mode=mode))
    assert res.status == OPTIMAL and res.certified
    assert cut_pool_members_valid(res.pool, uset)
    assert res.cuts == len(res.pool) - 1
    rows = {c.rows for c in res.pool.cuts[1:]}
    assert (rows == {None}) if mode == "multi" else all(len(r) == 1 for r in rows)
    # intermediate incumbents were not robust
    assert any(not h["certified"] for h in res.history)
    assert res.history[-1]["certified"]


def test_cutting_plane_max_cuts_and_time_limit(haverly1):
    uset = UncertaintySet.ellipsoid(0.3)
    capped = cutting_plane_solve(haverly1, uset, CuttingPlaneConfig(max_cuts=2))
    assert capped.status == GAP_LIMIT and capped.cuts == 2 and not capped.certified
    timed = cutting_plane_solve(haverly1, uset, CuttingPlaneConfig(time_limit=0.0))
    assert timed.status == TIME_LIMIT


def test_reform_incumbents_are_robust(haverly1):
    uset = UncertaintySet.ellipsoid(0.25)
    res = reformulation_solve(haverly1, uset, keep_incumbents=True)
    assert res.incumbents
    for sol in res.incumbents:
        assert separation(haverly1, sol, uset).eps <= 1e-6
        assert check_feasibility(haverly1, sol).feasible


# ---------------------------------------------------------------------------
# Safety factors


def test_safety_factor_limits(haverly1):
    assert safety_factor_solve(haverly1, 1.0).profit == pytest.approx(400.0, rel=1e-6)
    huge = safety_factor_solve(haverly1, 1e6)
    assert huge.profit == pytest.approx(0.0, abs=1e-6)
    assert all(abs(a) <= 1e-6 for a in list(huge.solution.y.values()) + list(huge.solution.z.values()))
    with pytest.raises(ValueError):
        safety_factor_solve(haverly1, 0.9)


def test_safety_factor_1_1_against_oracle(haverly1):
    res = safety_factor_solve(haverly1, 1.1)
    ref = grid_oracle(scaled_instance(haverly1, 1.1))
    assert res.profit < 400.0 - 1e-3
    assert res.profit == pytest.approx(ref, rel=1e-6)


def test_optimal_safety_factor_zero_radius(haverly1):
    s, res = optimal_safety_factor(haverly1, UncertaintySet.box(0.0))
    assert s == pytest.approx(1.0, abs=1e-6)
    assert res.certified and res.profit == pytest.approx(400.0, rel=1e-6)


def test_optimal_safety_factor_box_is_exact(haverly1):
    # with Chat = C and no lower bounds the box counterpart is the nominal model with P/(1+r)
    r = 0.1
    cfg = SafetyFactorConfig(rel_tol=1e-6)
    s, res = optimal_safety_factor(haverly1, UncertaintySet.box(r), cfg)
    assert res.certified
    assert s >= 1 + r - 1e-9
    assert s == pytest.approx(1 + r, rel=1e-5)
    assert res.profit <= solved("haverly1", "box", r, "cut-multi").profit + 1e-6
    assert res.profit == pytest.approx(solved("haverly1", "box", r, "reform").profit, rel=1e-4)


def test_optimal_safety_factor_is_conservative(haverly1):
    uset = UncertaintySet.polyhedron(0.2)
    s, res = optimal_safety_factor(haverly1, uset)
    assert res.certified and s > 1
    assert res.profit <= solved("haverly1", "polyhedron", 0.2, "cut-multi").profit + 1e-6
    # the bracket closed: slightly less safety is not robust
    below = safety_factor_solve(haverly1, s * (1 - 1e-3), uset=uset)
    assert below.separation.eps > 1e-6


def test_optimal_safety_factor_needs_feasible_upper_bracket(haverly1):
    with pytest.raises(RuntimeError, match="increase s_bar"):
        optimal_safety_factor(haverly1, UncertaintySet.box(0.3), SafetyFactorConfig(s_bar=1.01))


def test_nominal_solution_is_not_robust(haverly1):
    res = nominal_solve(haverly1, uset=UncertaintySet.box(0.1))
    assert res.profit == pytest.approx(400.0) and not res.certified
    assert math.isfinite(res.separation.eps)
