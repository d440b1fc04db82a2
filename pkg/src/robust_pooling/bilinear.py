"""Spatial branch-and-bound for bilinear programs with square terms.

A :class:`MasterProblem` is linear in its variables except for registered
definitions ``w = a * b`` (bilinear) and ``t = u**2`` (square). Every variable
carries finite bounds. Nodes are bounded by a linear relaxation: McCormick
envelopes for products, tangents plus the secant for squares, and global
pools of tangent and cone cuts that stay valid in every node. Incumbents come from
fixing the ``fixable`` variables (pool fractions) at the relaxation point,
which turns every product linear, and re-solving.
"""

from __future__ import annotations

import heapq
import io
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Hashable

import numpy as np
from scipy.optimize import linprog

log = logging.getLogger(__name__)

EPS_VIOLATION = 1e-7  # product/square mismatch that triggers branching
FEAS_TOL = 1e-6  # scaled row residual accepted for incumbents
SNAP_TOL = 1e-9
CUT_TOL = 1e-10
MAX_CUT_ROUNDS = 20
MAX_POOL_CUTS = 5000
CLAMP = 0.2

HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-9,
    "dual_feasibility_tolerance": 1e-9,
    "presolve": True,
}

OPTIMAL = "Optimal"
GAP_LIMIT = "GapLimit"
TIME_LIMIT = "TimeLimit"
INFEASIBLE = "Infeasible"


# ---------------------------------------------------------------------------
# Problem representation


@dataclass
class MasterProblem:
    names: list[str]
    lb: np.ndarray
    ub: np.ndarray
    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    bilinear: np.ndarray  # rows (w, a, b): x[w] == x[a] * x[b]
    squares: np.ndarray  # rows (t, u): x[t] == x[u] ** 2
    fixable: np.ndarray
    index: dict[Hashable, int] = field(default_factory=dict)
    labels_ub: list = field(default_factory=list)
    labels_eq: list = field(default_factory=list)
    A_rlt: np.ndarray | None = None  # implied equalities used by the relaxation only
    cones: list | None = None  # implied norm bounds used by the relaxation only

    def __post_init__(self):
        if self.A_rlt is None:
            self.A_rlt = rlt_rows(self)
        if self.cones is None:
            self.cones = norm_cones(self)

    @property
    def n(self) -> int:
        return len(self.names)

    def complete(self, x: np.ndarray) -> np.ndarray:
        """Recompute every product and square from its factors."""
        x = np.array(x, dtype=float)
        if len(self.bilinear):
            w, a, b = self.bilinear.T
            x[w] = x[a] * x[b]
        if len(self.squares):
            t, u = self.squares.T
            x[t] = x[u] ** 2
        return x

    def max_violation(self, x: np.ndarray) -> float:
        """Largest scaled residual over rows, bounds and definitions.

        Row residuals are divided by ``max(1, |b|, max_i |a_i x_i|)``.
        """
        x = np.asarray(x, dtype=float)
        worst = 0.0
        if len(self.b_ub):
            terms = np.abs(self.A_ub * x)
            scale = np.maximum(1.0, np.maximum(np.abs(self.b_ub), terms.max(axis=1, initial=0.0)))
            worst = max(worst, float(((self.A_ub @ x - self.b_ub) / scale).max()))
        if len(self.b_eq):
            terms = np.abs(self.A_eq * x)
            scale = np.maximum(1.0, np.maximum(np.abs(self.b_eq), terms.max(axis=1, initial=0.0)))
            worst = max(worst, float((np.abs(self.A_eq @ x - self.b_eq) / scale).max()))
        scale = np.maximum(1.0, np.abs(x))
        worst = max(worst, float(((self.lb - x) / scale).max(initial=0.0)))
        worst = max(worst, float(((x - self.ub) / scale).max(initial=0.0)))
        if len(self.bilinear):
            w, a, b = self.bilinear.T
            worst = max(worst, float((np.abs(x[w] - x[a] * x[b]) / np.maximum(1.0, np.abs(x[w]))).max()))
        if len(self.squares):
            t, u = self.squares.T
            worst = max(worst, float((np.abs(x[t] - x[u] ** 2) / np.maximum(1.0, np.abs(x[t]))).max()))
        return worst

    def value(self, x: np.ndarray) -> float:
        return float(self.c @ x)

    def count(self, kind: str) -> int:
        """Number of variables whose index key starts with ``kind``."""
        return sum(1 for k in self.index if isinstance(k, tuple) and k[0] == kind)


def _interval_sum(coeffs: dict[int, float], lb, ub) -> tuple[float, float]:
    lo = hi = 0.0
    for j, a in coeffs.items():
        if a >= 0:
            lo += a * lb[j]
            hi += a * ub[j]
        else:
            lo += a * ub[j]
            hi += a * lb[j]
    return lo, hi


class ModelBuilder:
    """Incremental construction of a :class:`MasterProblem`."""

    def __init__(self):
        self.names: list[str] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.index: dict[Hashable, int] = {}
        self.obj: dict[int, float] = {}
        self.rows_ub: list[tuple[dict[int, float], float, object]] = []
        self.rows_eq: list[tuple[dict[int, float], float, object]] = []
        self.bilinear: list[tuple[int, int, int]] = []
        self.squares: list[tuple[int, int]] = []
        self.fixable: list[int] = []

    def var(self, key: Hashable, lb: float, ub: float, fixable: bool = False) -> int:
        if key in self.index:
            raise KeyError(f"duplicate variable {key!r}")
        if not (math.isfinite(lb) and math.isfinite(ub)):
            raise ValueError(f"variable {key!r} needs finite bounds, got [{lb}, {ub}]")
        if lb > ub:
            raise ValueError(f"variable {key!r}: lb {lb} > ub {ub}")
        n = len(self.names)
        self.index[key] = n
        self.names.append(str(key))
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        if fixable:
            self.fixable.append(n)
        return n

    def le(self, coeffs: dict[int, float], rhs: float, label=None) -> None:
        self.rows_ub.append((dict(coeffs), float(rhs), label))

    def ge(self, coeffs: dict[int, float], rhs: float, label=None) -> None:
        self.le({j: -a for j, a in coeffs.items()}, -rhs, label)

    def eq(self, coeffs: dict[int, float], rhs: float, label=None) -> None:
        self.rows_eq.append((dict(coeffs), float(rhs), label))

    def objective(self, coeffs: dict[int, float]) -> None:
        for j, a in coeffs.items():
            self.obj[j] = self.obj.get(j, 0.0) + a

    def product(self, key: Hashable, a: int, b: int) -> int:
        corners = [self.lb[a] * self.lb[b], self.lb[a] * self.ub[b],
                   self.ub[a] * self.lb[b], self.ub[a] * self.ub[b]]
        w = self.var(key, min(corners), max(corners))
        self.bilinear.append((w, a, b))
        return w

    def square(self, key: Hashable, u: int) -> int:
        lo, hi = self.lb[u], self.ub[u]
        sq_lo = 0.0 if lo <= 0 <= hi else min(lo * lo, hi * hi)
        t = self.var(key, sq_lo, max(lo * lo, hi * hi))
        self.squares.append((t, u))
        return t

    def linear(self, key: Hashable, coeffs: dict[int, float], const: float = 0.0,
               lb: float = -math.inf, ub: float = math.inf, label=None) -> int:
        """Auxiliary ``key = sum(coeffs * x) + const`` with interval-derived bounds."""
        lo, hi = _interval_sum(coeffs, self.lb, self.ub)
        lo, hi = max(lo + const, lb), min(hi + const, ub)
        if lo > hi:
            if lo - hi > 1e-9 * max(1.0, abs(lo)):
                raise ValueError(f"empty range for auxiliary {key!r}")
            hi = lo
        n = self.var(key, lo, hi)
        row = {j: -a for j, a in coeffs.items()}
        row[n] = row.get(n, 0.0) + 1.0
        self.eq(row, const, label if label is not None else ("def", key))
        return n

    def build(self) -> MasterProblem:
        n = len(self.names)

        def dense(rows):
            A = np.zeros((len(rows), n))
            for r, (coeffs, _, _) in enumerate(rows):
                for j, a in coeffs.items():
                    A[r, j] += a
            return A, np.array([rhs for _, rhs, _ in rows], dtype=float), [lab for _, _, lab in rows]

        A_ub, b_ub, lab_ub = dense(self.rows_ub)
        A_eq, b_eq, lab_eq = dense(self.rows_eq)
        c = np.zeros(n)
        for j, a in self.obj.items():
            c[j] = a
        return MasterProblem(
            names=list(self.names),
            lb=np.array(self.lb),
            ub=np.array(self.ub),
            c=c,
            A_ub=A_ub,
            b_ub=b_ub,
            A_eq=A_eq,
            b_eq=b_eq,
            bilinear=np.array(self.bilinear, dtype=int).reshape(-1, 3),
            squares=np.array(self.squares, dtype=int).reshape(-1, 2),
            fixable=np.array(sorted(self.fixable), dtype=int),
            index=dict(self.index),
            labels_ub=lab_ub,
            labels_eq=lab_eq,
        )


def rlt_rows(problem: MasterProblem) -> np.ndarray:
    """Products of equality rows over fixable variables with a shared factor.

    An equality ``sum_a alpha_a q_a = beta`` whose every ``q_a`` appears in a
    product ``w_a = q_a * b`` implies ``sum_a alpha_a w_a - beta b = 0``. The
    rows are redundant for the exact problem but tighten McCormick envelopes.
    """
    fix = set(problem.fixable.tolist())
    partner: dict[tuple[int, int], int] = {}
    for w, a, b in problem.bilinear:
        if a in fix:
            partner[a, b] = w
        if b in fix:
            partner[b, a] = w
    rows = []
    for r in range(len(problem.b_eq)):
        nz = np.flatnonzero(problem.A_eq[r])
        if not len(nz) or not set(nz.tolist()) <= fix:
            continue
        others = {b for (a, b) in partner if a == nz[0]}
        for b in sorted(others):
            if all((a, b) in partner for a in nz):
                row = np.zeros(problem.n)
                for a in nz:
                    row[partner[a, b]] += problem.A_eq[r, a]
                row[b] -= problem.b_eq[r]
                rows.append(row)
    return np.array(rows).reshape(-1, problem.n)


@dataclass(frozen=True)
class Cone:
    """Implied convex bound ``|weights * x[base]|_2 <= x[top]``."""

    base: np.ndarray
    weights: np.ndarray
    top: int


def norm_cones(problem: MasterProblem) -> list[Cone]:
    """Norm bounds implied by rows ``sum_m a_m s_m - b T <= 0``.

    When every ``s_m = e_m**2`` and ``T = u**2`` are squares, ``a_m, b > 0``
    and ``u >= 0``, the row says ``|sqrt(a / b) * e|_2 <= u``. That set is
    convex, so its gradient cuts hold everywhere, while the secant of ``T``
    is only tight after branching on ``u``.
    """
    base_of = {int(t): int(u) for t, u in problem.squares}
    cones = []
    for r in range(len(problem.b_ub)):
        if problem.b_ub[r] != 0:
            continue
        nz = np.flatnonzero(problem.A_ub[r])
        coef = problem.A_ub[r, nz]
        neg = nz[coef < 0]
        if len(neg) != 1 or not all(int(j) in base_of for j in nz):
            continue
        top = base_of[int(neg[0])]
        if problem.lb[top] < 0:
            continue
        b = -problem.A_ub[r, neg[0]]
        pos = nz[coef > 0]
        base = np.array([base_of[int(j)] for j in pos], dtype=int)
        if len(base) and top not in base:
            cones.append(Cone(base, np.sqrt(problem.A_ub[r, pos] / b), top))
    return cones


class ConeCuts:
    """Globally valid cuts ``(g * weights) . x[base] <= x[top]`` for unit ``g``."""

    def __init__(self, n: int, cones: list[Cone]):
        self.n = n
        self.cones = cones
        self._seen: set[tuple] = set()
        self.rows: list[tuple[int, np.ndarray]] = []
        for c, cone in enumerate(cones):
            for m in range(len(cone.base)):
                for sign in (1.0, -1.0):
                    g = np.zeros(len(cone.base))
                    g[m] = sign
                    self.add(c, g)

    def add(self, c: int, g: np.ndarray) -> bool:
        key = (c,) + tuple(np.round(g, 10))
        if key in self._seen or len(self.rows) >= MAX_POOL_CUTS:
            return False
        self._seen.add(key)
        self.rows.append((c, np.asarray(g, dtype=float)))
        return True

    def separate(self, x: np.ndarray) -> bool:
        """Add the gradient cut of every cone violated at ``x``."""
        added = False
        for c, cone in enumerate(self.cones):
            y = cone.weights * x[cone.base]
            rho = float(np.linalg.norm(y))
            if rho - x[cone.top] > CUT_TOL * max(1.0, rho):
                added |= self.add(c, y / rho)
        return added

    def matrix(self) -> tuple[np.ndarray, np.ndarray]:
        A = np.zeros((len(self.rows), self.n))
        for k, (c, g) in enumerate(self.rows):
            cone = self.cones[c]
            A[k, cone.base] += g * cone.weights
            A[k, cone.top] -= 1.0
        return A, np.zeros(len(self.rows))

    def __len__(self):
        return len(self.rows)


# ---------------------------------------------------------------------------
# Linear programs


@dataclass
class LinearProgram:
    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    lb: np.ndarray
    ub: np.ndarray


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None
    value: float


def lp_solve(lp: LinearProgram) -> LPResult:
    """Solve ``min c x`` over the rows and bounds of ``lp`` with HiGHS.

    An inconclusive HiGHS status (seen with presolve on nearly degenerate
    node boxes) is retried without presolve, then with default tolerances.
    """
    if np.any(~np.isfinite(lp.lb)) or np.any(~np.isfinite(lp.ub)):
        raise ValueError("lp_solve needs finite bounds")
    if np.any(lp.lb > lp.ub):
        return LPResult(INFEASIBLE, None, math.inf)
    for options in (HIGHS_OPTIONS, {**HIGHS_OPTIONS, "presolve": False}, {}):
        res = linprog(
            lp.c,
            A_ub=lp.A_ub if len(lp.b_ub) else None,
            b_ub=lp.b_ub if len(lp.b_ub) else None,
            A_eq=lp.A_eq if len(lp.b_eq) else None,
            b_eq=lp.b_eq if len(lp.b_eq) else None,
            bounds=np.column_stack([lp.lb, lp.ub]),
            method="highs",
            options=options,
        )
        if res.status in (0, 2, 3):
            break
    if res.status == 0:
        x = np.clip(res.x, lp.lb, lp.ub)
        return LPResult(OPTIMAL, x, float(lp.c @ x))
    if res.status == 2:
        return LPResult(INFEASIBLE, None, math.inf)
    if res.status == 3:
        return LPResult("Unbounded", None, -math.inf)
    return LPResult("Error", None, math.nan)


def mccormick_rows(bilinear: np.ndarray, lb: np.ndarray, ub: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """The four envelope inequalities of every product, as ``A x <= b``."""
    m = len(bilinear)
    A = np.zeros((4 * m, n))
    b = np.zeros(4 * m)
    if not m:
        return A, b
    w, a, c = bilinear.T
    aL, aU, cL, cU = lb[a], ub[a], lb[c], ub[c]
    r = np.arange(m)
    # w >= aL c + cL a - aL cL
    A[4 * r, w], A[4 * r, c], A[4 * r, a], b[4 * r] = -1.0, aL, cL, aL * cL
    # w >= aU c + cU a - aU cU
    A[4 * r + 1, w], A[4 * r + 1, c], A[4 * r + 1, a], b[4 * r + 1] = -1.0, aU, cU, aU * cU
    # w <= aU c + cL a - aU cL
    A[4 * r + 2, w], A[4 * r + 2, c], A[4 * r + 2, a], b[4 * r + 2] = 1.0, -aU, -cL, -aU * cL
    # w <= aL c + cU a - aL cU
    A[4 * r + 3, w], A[4 * r + 3, c], A[4 * r + 3, a], b[4 * r + 3] = 1.0, -aL, -cU, -aL * cU
    # a factor shared by both slots (a == c) adds coefficients
    same = a == c
    if np.any(same):
        for k in np.flatnonzero(same):
            for row, coef in ((4 * k, cL[k] + aL[k]), (4 * k + 1, cU[k] + aU[k]),
                              (4 * k + 2, -(aU[k] + cL[k])), (4 * k + 3, -(aL[k] + cU[k]))):
                A[row, a[k]] = coef
    return A, b


def square_rows(squares: np.ndarray, lb: np.ndarray, ub: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Tangents at both endpoints and the midpoint, plus the secant."""
    m = len(squares)
    A = np.zeros((4 * m, n))
    b = np.zeros(4 * m)
    for s, (t, u) in enumerate(squares):
        lo, hi = lb[u], ub[u]
        for k, p in enumerate((lo, 0.5 * (lo + hi), hi)):
            # t >= 2 p u - p^2
            A[4 * s + k, t], A[4 * s + k, u], b[4 * s + k] = -1.0, 2.0 * p, p * p
        # t <= (lo + hi) u - lo hi
        A[4 * s + 3, t], A[4 * s + 3, u], b[4 * s + 3] = 1.0, -(lo + hi), -lo * hi
    return A, b


class TangentPool:
    """Globally valid tangent cuts ``t >= 2 p u - p^2``."""

    def __init__(self, n: int):
        self.n = n
        self._seen: set[tuple[int, float]] = set()
        self.rows: list[tuple[int, int, float]] = []

    def add(self, t: int, u: int, p: float) -> bool:
        key = (t, round(p, 12))
        if key in self._seen or len(self.rows) >= MAX_POOL_CUTS:
            return False
        self._seen.add(key)
        self.rows.append((t, u, p))
        return True

    def matrix(self) -> tuple[np.ndarray, np.ndarray]:
        A = np.zeros((len(self.rows), self.n))
        b = np.zeros(len(self.rows))
        for k, (t, u, p) in enumerate(self.rows):
            A[k, t], A[k, u], b[k] = -1.0, 2.0 * p, p * p
        return A, b

    def __len__(self):
        return len(self.rows)


def relax(problem: MasterProblem, lb: np.ndarray | None = None, ub: np.ndarray | None = None,
          cuts: TangentPool | None = None, cone_cuts: ConeCuts | None = None) -> LinearProgram:
    """Linear relaxation of ``problem`` over the box ``[lb, ub]``."""
    lb = problem.lb if lb is None else np.asarray(lb, dtype=float)
    ub = problem.ub if ub is None else np.asarray(ub, dtype=float)
    if np.any(~np.isfinite(lb)) or np.any(~np.isfinite(ub)):
        raise ValueError("relaxation needs finite bounds at the node")
    n = problem.n
    blocks_A = [problem.A_ub]
    blocks_b = [problem.b_ub]
    A, b = mccormick_rows(problem.bilinear, lb, ub, n)
    blocks_A.append(A)
    blocks_b.append(b)
    A, b = square_rows(problem.squares, lb, ub, n)
    blocks_A.append(A)
    blocks_b.append(b)
    for pool in (cuts, cone_cuts):
        if pool is not None and len(pool):
            A, b = pool.matrix()
            blocks_A.append(A)
            blocks_b.append(b)
    A_eq, b_eq = problem.A_eq, problem.b_eq
    if len(problem.A_rlt):
        A_eq = np.vstack([A_eq, problem.A_rlt])
        b_eq = np.concatenate([b_eq, np.zeros(len(problem.A_rlt))])
    return LinearProgram(problem.c, np.vstack(blocks_A), np.concatenate(blocks_b),
                         A_eq, b_eq, lb.copy(), ub.copy())


# ---------------------------------------------------------------------------
# Bound tightening


def tighten_bounds(problem: MasterProblem, lb: np.ndarray, ub: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One round of interval propagation over definitions and linear rows."""
    lb, ub = np.array(lb, dtype=float), np.array(ub, dtype=float)
    for w, a, b in problem.bilinear:
        corners = (lb[a] * lb[b], lb[a] * ub[b], ub[a] * lb[b], ub[a] * ub[b])
        lb[w], ub[w] = max(lb[w], min(corners)), min(ub[w], max(corners))
    for t, u in problem.squares:
        lo, hi = lb[u], ub[u]
        sq_lo = 0.0 if lo <= 0 <= hi else min(lo * lo, hi * hi)
        lb[t], ub[t] = max(lb[t], sq_lo), min(ub[t], max(lo * lo, hi * hi))

    rows = [(problem.A_ub[r], problem.b_ub[r]) for r in range(len(problem.b_ub))]
    for r in range(len(problem.b_eq)):
        rows.append((problem.A_eq[r], problem.b_eq[r]))
        rows.append((-problem.A_eq[r], -problem.b_eq[r]))
    for a, rhs in rows:
        nz = np.flatnonzero(a)
        if not len(nz):
            continue
        coef = a[nz]
        mins = np.where(coef > 0, coef * lb[nz], coef * ub[nz])
        total = mins.sum()
        for j, aj, mj in zip(nz, coef, mins):
            bound = (rhs - (total - mj)) / aj
            slack = 1e-9 * max(1.0, abs(bound))
            if aj > 0 and bound + slack < ub[j]:
                ub[j] = max(bound + slack, lb[j]) if bound + slack >= lb[j] - 1e-7 else bound
            elif aj < 0 and bound - slack > lb[j]:
                lb[j] = min(bound - slack, ub[j]) if bound - slack <= ub[j] + 1e-7 else bound
    return lb, ub


# ---------------------------------------------------------------------------
# Branching


@dataclass(order=True)
class Node:
    bound: float
    id: int
    depth: int = field(compare=False)
    lb: np.ndarray = field(compare=False, repr=False)
    ub: np.ndarray = field(compare=False, repr=False)


def term_violations(problem: MasterProblem, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Absolute mismatch of every product and square at ``x``.

    Squares lying below the curve are reported with their absolute gap too;
    those are normally removed by tangent cuts before branching.
    """
    if len(problem.bilinear):
        w, a, b = problem.bilinear.T
        vb = np.abs(x[w] - x[a] * x[b])
    else:
        vb = np.zeros(0)
    if len(problem.squares):
        t, u = problem.squares.T
        vs = np.abs(x[t] - x[u] ** 2)
    else:
        vs = np.zeros(0)
    return vb, vs


def select_branch(problem: MasterProblem, x: np.ndarray, lb: np.ndarray, ub: np.ndarray,
                  root_lb: np.ndarray, root_ub: np.ndarray, eps: float = EPS_VIOLATION):
    """Pick ``(variable, split point)`` for the most violated term, or None.

    Bilinear terms branch on the factor with the larger width relative to its
    root width; squares branch on their base variable.
    """
    vb, vs = term_violations(problem, x)
    best, choice = eps, None
    root_w = np.maximum(root_ub - root_lb, 1e-12)
    for k, viol in enumerate(vb):
        if viol > best:
            _, a, b = problem.bilinear[k]
            wa, wb = (ub[a] - lb[a]) / root_w[a], (ub[b] - lb[b]) / root_w[b]
            var = a if wa >= wb else b
            if ub[var] - lb[var] > 1e-12:
                best, choice = viol, var
    for k, viol in enumerate(vs):
        if viol > best:
            var = problem.squares[k][1]
            if ub[var] - lb[var] > 1e-12:
                best, choice = viol, var
    if choice is None:
        return None
    lo, hi = lb[choice], ub[choice]
    width = hi - lo
    split = min(max(x[choice], lo + CLAMP * width), hi - CLAMP * width)
    return choice, split


def branch(node: Node, var: int, split: float, next_id: int) -> tuple[Node, Node]:
    """Partition ``node`` at ``var == split`` into two children."""
    if not node.lb[var] < split < node.ub[var]:
        raise ValueError("split point must lie strictly inside the node interval")
    ub_left = node.ub.copy()
    ub_left[var] = split
    lb_right = node.lb.copy()
    lb_right[var] = split
    left = Node(node.bound, next_id, node.depth + 1, node.lb.copy(), ub_left)
    right = Node(node.bound, next_id + 1, node.depth + 1, lb_right, node.ub.copy())
    return left, right


def branch_node(problem: MasterProblem, node: Node, x: np.ndarray, root_lb: np.ndarray,
                root_ub: np.ndarray, next_id: int = 0) -> tuple[Node, Node]:
    """Branch on the most violated term at the relaxation point ``x``.

    Raises ``ValueError`` when no term is violated by more than the branching
    threshold.
    """
    pick = select_branch(problem, x, node.lb, node.ub, root_lb, root_ub)
    if pick is None:
        raise ValueError("no violated bilinear or square term to branch on")
    return branch(node, pick[0], pick[1], next_id)


# ---------------------------------------------------------------------------
# Search


@dataclass
class SolveReport:
    status: str
    x: np.ndarray | None
    objective: float
    bound: float
    gap: float
    nodes: int
    time_s: float
    incumbents: list[tuple[int, float, np.ndarray]] = field(default_factory=list)
    log: list[tuple[int, int, float, float, float]] = field(default_factory=list)

    @property
    def has_solution(self) -> bool:
        return self.x is not None

    def write_log(self, fh: io.TextIOBase) -> None:
        fh.write("node_id,depth,lower,incumbent,gap\n")
        for row in self.log:
            fh.write(",".join(repr(v) for v in row) + "\n")


def rel_gap(upper: float, lower: float) -> float:
    if not math.isfinite(upper):
        return math.inf
    return (upper - lower) / max(abs(lower), 1.0)


def _solve_relaxation(problem, lb, ub, cuts: TangentPool, cone_cuts: ConeCuts | None = None) -> LPResult:
    res = LPResult(INFEASIBLE, None, math.inf)
    for _ in range(MAX_CUT_ROUNDS):
        res = lp_solve(relax(problem, lb, ub, cuts, cone_cuts))
        if res.status != OPTIMAL or not len(problem.squares):
            return res
        x = res.x
        added = cone_cuts is not None and cone_cuts.separate(x)
        for t, u in problem.squares:
            p = x[u]
            if p * p - x[t] > CUT_TOL * max(1.0, p * p):
                added |= cuts.add(int(t), int(u), float(p))
        if not added:
            return res
    return res


def _square_roles(problem: MasterProblem) -> np.ndarray:
    """+1 if a square only wants to be small, -1 if only large, 0 otherwise."""
    roles = np.zeros(len(problem.squares), dtype=int)
    for s, (t, _) in enumerate(problem.squares):
        col = problem.A_ub[:, t] if len(problem.b_ub) else np.zeros(0)
        in_eq = len(problem.b_eq) and np.any(problem.A_eq[:, t] != 0)
        if in_eq:
            continue
        if np.all(col >= 0) and problem.c[t] >= 0:
            roles[s] = 1
        elif np.all(col <= 0) and problem.c[t] <= 0:
            roles[s] = -1
    return roles


class _Heuristic:
    """Fix the pool fractions at a relaxation point and re-solve what remains."""

    def __init__(self, problem: MasterProblem, root_lb: np.ndarray, root_ub: np.ndarray):
        self.p = problem
        self.lb, self.ub = root_lb, root_ub
        self.roles = _square_roles(problem)
        self.tried: set[tuple] = set()
        fixed = set(problem.fixable.tolist())
        self.links = []  # (w, fixed factor, free factor)
        for w, a, b in problem.bilinear:
            if a in fixed:
                self.links.append((w, a, b))
            elif b in fixed:
                self.links.append((w, b, a))
            else:
                raise ValueError("every product needs a fixable factor")

    def __call__(self, xrel: np.ndarray) -> np.ndarray | None:
        p = self.p
        fix = p.fixable
        q = xrel[fix].copy()
        q[np.abs(q) <= SNAP_TOL] = 0.0
        q[np.abs(q - 1.0) <= SNAP_TOL] = 1.0
        q = np.clip(q, self.lb[fix], self.ub[fix])
        key = tuple(np.round(q, 9))
        if key in self.tried:
            return None
        self.tried.add(key)

        lb, ub = self.lb.copy(), self.ub.copy()
        lb[fix] = ub[fix] = q
        qv = np.zeros(p.n)
        qv[fix] = q
        A_link = np.zeros((len(self.links), p.n))
        for r, (w, a, b) in enumerate(self.links):
            A_link[r, w] = 1.0
            A_link[r, b] -= qv[a]
        A_eq = np.vstack([p.A_eq, A_link])
        b_eq = np.concatenate([p.b_eq, np.zeros(len(self.links))])

        if not len(p.squares):
            res = lp_solve(LinearProgram(p.c, p.A_ub, p.b_ub, A_eq, b_eq, lb, ub))
            return None if res.status != OPTIMAL else p.complete(res.x)
        return self._ccp(xrel, lb, ub, A_eq, b_eq)

    def _ccp(self, xrel, lb, ub, A_eq, b_eq) -> np.ndarray | None:
        """Sequential LP: outer tangents for squares that want to be small,
        tangent restrictions ``t <= 2 p u - p^2`` for squares that want to be large."""
        p = self.p
        kelley = TangentPool(p.n)
        for s, (t, u) in enumerate(p.squares):
            for pt in (lb[u], 0.5 * (lb[u] + ub[u]), ub[u]):
                kelley.add(int(t), int(u), float(pt))
        anchor = np.empty(len(p.squares))
        for s, (t, u) in enumerate(p.squares):
            guess = math.sqrt(max(xrel[t], 0.0)) if self.roles[s] <= 0 else xrel[u]
            anchor[s] = min(max(guess, xrel[u], lb[u]), ub[u])

        best = None
        prev = math.inf
        retried = False
        for _ in range(40):
            A_k, b_k = kelley.matrix()
            rows_A, rows_b = [p.A_ub, A_k], [p.b_ub, b_k]
            R = np.zeros((0, p.n))
            rb = np.zeros(0)
            restrict = [s for s in range(len(p.squares)) if self.roles[s] <= 0]
            if restrict:
                R = np.zeros((len(restrict), p.n))
                rb = np.zeros(len(restrict))
                for r, s in enumerate(restrict):
                    t, u = p.squares[s]
                    R[r, t], R[r, u], rb[r] = 1.0, -2.0 * anchor[s], -anchor[s] ** 2
            res = lp_solve(LinearProgram(p.c, np.vstack(rows_A + [R]), np.concatenate(rows_b + [rb]),
                                         A_eq, b_eq, lb, ub))
            if res.status != OPTIMAL:
                if not retried and best is None:
                    retried = True
                    for s, (t, u) in enumerate(p.squares):
                        anchor[s] = min(max(xrel[u], lb[u]), ub[u])
                    continue
                break
            x = res.x
            added = False
            for t, u in p.squares:
                pt = x[u]
                if pt * pt - x[t] > CUT_TOL * max(1.0, pt * pt):
                    added |= kelley.add(int(t), int(u), float(pt))
            for s in restrict:
                anchor[s] = x[p.squares[s][1]]
            cand = p.complete(x)
            if p.max_violation(cand) <= FEAS_TOL and (best is None or p.value(cand) < p.value(best)):
                best = cand
            if not added and abs(prev - res.value) <= 1e-10 * max(1.0, abs(res.value)):
                break
            prev = res.value
        return best


def solve_global(
    problem: MasterProblem,
    rel_gap_tol: float = 1e-6,
    time_limit: float | None = None,
    node_limit: int = 100_000,
    keep_log: bool = False,
    on_incumbent: Callable[[int, float, np.ndarray], None] | None = None,
    accept: Callable[[np.ndarray], bool] | None = None,
) -> SolveReport:
    """Best-first spatial branch-and-bound to relative gap ``rel_gap_tol``.

    The gap is ``(upper - lower) / max(|lower|, 1)``. Status is ``Optimal``
    when the gap closes, ``TimeLimit``/``GapLimit`` when the time or node
    budget runs out, and ``Infeasible`` when every node is infeasible.
    ``accept`` screens incumbent candidates after the built-in row check.
    """
    if not rel_gap_tol > 0:
        raise ValueError("rel_gap_tol must be > 0")
    start = time.perf_counter()
    deadline = math.inf if time_limit is None else start + time_limit

    def report(status, best_x, best_val, lower, nodes, incs, rows):
        gap = rel_gap(best_val, lower) if best_x is not None else math.inf
        return SolveReport(status, best_x, best_val if best_x is not None else math.inf, lower,
                           gap, nodes, time.perf_counter() - start, incs, rows)

    root_lb, root_ub = tighten_bounds(problem, problem.lb, problem.ub)
    if np.any(root_lb > root_ub + 1e-7):
        return report(INFEASIBLE, None, math.inf, math.inf, 0, [], [])
    root_ub = np.maximum(root_ub, root_lb)

    cuts = TangentPool(problem.n)
    cone_cuts = ConeCuts(problem.n, problem.cones)
    heuristic = _Heuristic(problem, root_lb, root_ub)
    heap: list[Node] = [Node(-math.inf, 0, 0, root_lb, root_ub)]
    next_id = 1
    best_x, best_val = None, math.inf
    closed_bound = math.inf  # least bound among nodes fathomed by value
    incumbents: list[tuple[int, float, np.ndarray]] = []
    rows: list[tuple[int, int, float, float, float]] = []
    nodes = 0

    def offer(cand: np.ndarray | None):
        nonlocal best_x, best_val
        if cand is None:
            return
        val = problem.value(cand)
        if val >= best_val - 1e-12 * max(1.0, abs(val)) or problem.max_violation(cand) > FEAS_TOL:
            return
        if accept is None or accept(cand):
            best_x, best_val = cand, val
            incumbents.append((nodes, val, cand))
            if on_incumbent is not None:
                on_incumbent(nodes, val, cand)

    def fathomed(bound: float) -> bool:
        return best_x is not None and rel_gap(best_val, bound) <= rel_gap_tol

    status = None
    while heap:
        lower = min(heap[0].bound, closed_bound)
        if best_x is not None and rel_gap(best_val, lower) <= rel_gap_tol:
            status = OPTIMAL
            break
        if time.perf_counter() > deadline:
            status = TIME_LIMIT
            break
        if nodes >= node_limit:
            status = GAP_LIMIT
            break
        node = heapq.heappop(heap)
        if fathomed(node.bound):
            closed_bound = min(closed_bound, node.bound)
            continue
        res = _solve_relaxation(problem, node.lb, node.ub, cuts, cone_cuts)
        nodes += 1
        if res.status != OPTIMAL:
            if res.status != INFEASIBLE:
                # keep the inherited bound so the reported lower bound stays valid
                log.warning("node %d: relaxation status %s", node.id, res.status)
                closed_bound = min(closed_bound, node.bound)
            continue
        value = max(res.value, node.bound)
        x = res.x
        offer(heuristic(x))
        if keep_log:
            lower_now = min([value, closed_bound] + [h.bound for h in heap[:1]])
            rows.append((node.id, node.depth, lower_now, best_val, rel_gap(best_val, lower_now)))
        if fathomed(value):
            closed_bound = min(closed_bound, value)
            continue
        pick = select_branch(problem, x, node.lb, node.ub, root_lb, root_ub)
        if pick is None:
            # relaxation point satisfies every definition to branching precision;
            # the heuristic's exact point is preferred when it already closes the node
            if not fathomed(value):
                offer(problem.complete(x))
            closed_bound = min(closed_bound, value)
            continue
        node.bound = value
        for child in branch(node, pick[0], pick[1], next_id):
            heapq.heappush(heap, child)
        next_id += 2

    if status is None:
        # tree exhausted
        if best_x is None:
            return report(INFEASIBLE, None, math.inf, math.inf, nodes, incumbents, rows)
        status = OPTIMAL
    lower = min([closed_bound] + [h.bound for h in heap[:1]])
    if best_x is not None:
        lower = min(lower, best_val)
    if status == OPTIMAL and rel_gap(best_val, lower) > rel_gap_tol:
        status = GAP_LIMIT
    return report(status, best_x, best_val, lower, nodes, incumbents, rows)
