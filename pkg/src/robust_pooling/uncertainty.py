"""Uncertainty sets on inlet concentrations and their closed-form separation.

Realized concentrations are ``C + Chat * xi`` where, for every component k,
the vector ``xi[:, k]`` over sources lies in a norm ball of radius ``r``
(box, ellipsoid, 1-norm polyhedron) or in the ellipsoid ``xi' S^-1 xi <= r^2``
for a source covariance ``S``. Maximizing a linear function over such a ball
is a dual-norm evaluation, so separation needs no optimization solver.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .pooling import PoolingInstance

MEMBERSHIP_TOL = 1e-9
MAX_CONDITION = 1e12
JITTER = 1e-10


class Geometry(str, enum.Enum):
    BOX = "box"
    ELLIPSOID = "ellipsoid"
    POLYHEDRON = "polyhedron"
    CORRELATED = "ellipsoid-corr"


@dataclass(frozen=True)
class UncertaintySet:
    geometry: Geometry
    r: float
    covariance: np.ndarray | None = None
    _chol: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "geometry", Geometry(self.geometry))
        if not (self.r >= 0 and math.isfinite(self.r)):
            raise ValueError(f"radius must be finite and >= 0, got {self.r}")
        if self.geometry is Geometry.CORRELATED:
            if self.covariance is None:
                raise ValueError("ellipsoid-corr needs a covariance matrix")
            cov = np.array(self.covariance, dtype=float)
            if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
                raise ValueError("covariance must be square")
            if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
                raise ValueError("covariance must be symmetric")
            if np.linalg.cond(cov) > MAX_CONDITION:
                raise ValueError("covariance condition number exceeds 1e12")
            try:
                chol = linalg.cholesky(cov, lower=True)
            except linalg.LinAlgError as exc:
                raise ValueError("covariance must be positive definite") from exc
            cov.setflags(write=False)
            object.__setattr__(self, "covariance", cov)
            object.__setattr__(self, "_chol", chol)
        elif self.covariance is not None:
            raise ValueError(f"{self.geometry.value} takes no covariance")

    @classmethod
    def box(cls, r: float) -> UncertaintySet:
        return cls(Geometry.BOX, r)

    @classmethod
    def ellipsoid(cls, r: float) -> UncertaintySet:
        return cls(Geometry.ELLIPSOID, r)

    @classmethod
    def polyhedron(cls, r: float) -> UncertaintySet:
        return cls(Geometry.POLYHEDRON, r)

    @classmethod
    def correlated(cls, r: float, covariance: np.ndarray) -> UncertaintySet:
        return cls(Geometry.CORRELATED, r, np.asarray(covariance, dtype=float))

    def with_radius(self, r: float) -> UncertaintySet:
        return UncertaintySet(self.geometry, r, self.covariance)

    @property
    def cholesky(self) -> np.ndarray | None:
        """Lower Cholesky factor of the covariance (correlated sets only)."""
        return self._chol

    def support(self, c: np.ndarray) -> float:
        """max of c @ xi over the unit ball (the dual norm of ``c``)."""
        c = np.asarray(c, dtype=float)
        g = self.geometry
        if g is Geometry.BOX:
            return float(np.abs(c).sum())
        if g is Geometry.ELLIPSOID:
            return float(np.linalg.norm(c))
        if g is Geometry.POLYHEDRON:
            return float(np.abs(c).max(initial=0.0))
        return float(np.linalg.norm(self._chol.T @ c))

    def maximizer(self, c: np.ndarray) -> np.ndarray:
        """A point of the radius-r ball attaining ``r * support(c)``.

        Box returns ``+r`` on every coordinate when ``c >= 0``; the polyhedron
        picks the lowest index among maximal ``|c_i|``.
        """
        c = np.asarray(c, dtype=float)
        n = c.size
        if not np.any(c):
            return np.zeros(n)
        c = c / np.abs(c).max()  # direction only; avoids norm underflow for tiny c
        g, r = self.geometry, self.r
        if g is Geometry.BOX:
            return r * np.where(c < 0, -1.0, 1.0)
        if g is Geometry.ELLIPSOID:
            return r * c / np.linalg.norm(c)
        if g is Geometry.POLYHEDRON:
            i = int(np.argmax(np.abs(c)))
            xi = np.zeros(n)
            xi[i] = r * np.sign(c[i])
            return xi
        sc = self.covariance @ c
        return r * sc / math.sqrt(float(c @ sc))

    def norm(self, xi: np.ndarray) -> float:
        """Set gauge: ``xi`` is a member iff ``norm(xi) <= r``."""
        xi = np.asarray(xi, dtype=float)
        g = self.geometry
        if g is Geometry.BOX:
            return float(np.abs(xi).max(initial=0.0))
        if g is Geometry.ELLIPSOID:
            return float(np.linalg.norm(xi))
        if g is Geometry.POLYHEDRON:
            return float(np.abs(xi).sum())
        w = linalg.solve_triangular(self._chol, xi, lower=True)
        return float(np.linalg.norm(w))

    def contains(self, xi: np.ndarray) -> bool:
        return self.norm(xi) <= self.r + MEMBERSHIP_TOL

    def to_dict(self) -> dict:
        doc = {"geometry": self.geometry.value, "r": self.r}
        if self.covariance is not None:
            doc["covariance"] = self.covariance.tolist()
        return doc


@dataclass(frozen=True)
class ScenarioPoint:
    """Deviation multipliers ``xi``, shape (sources, components)."""

    xi: np.ndarray

    def concentrations(self, inst: PoolingInstance) -> np.ndarray:
        return inst.conc + inst.dev * self.xi

    @classmethod
    def nominal(cls, inst: PoolingInstance) -> ScenarioPoint:
        return cls(np.zeros((len(inst.sources), len(inst.components))))

    def close_to(self, other: ScenarioPoint, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.xi - other.xi) <= tol))


def kernel_covariance(locations, signal_variance: float = 1.0, length_scale: float = 1.0) -> np.ndarray:
    """Squared-exponential covariance between planar source locations.

    ``S_ab = s2 * exp(-|l_a - l_b|^2 / (2 ls^2))``. A diagonal jitter of 1e-10
    is added when the matrix fails a Cholesky factorization.
    """
    if not signal_variance > 0:
        raise ValueError("signal_variance must be > 0")
    if not length_scale > 0:
        raise ValueError("length_scale must be > 0")
    pts = np.asarray(locations, dtype=float).reshape(-1, 2)
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1)
    cov = signal_variance * np.exp(-d2 / (2.0 * length_scale**2))
    try:
        linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError:
        cov = cov + JITTER * np.eye(len(pts))
    return cov


def membership(uset: UncertaintySet, xi: ScenarioPoint | np.ndarray, k: int | None = None) -> bool:
    """Whether ``xi`` (a scenario, or one component column) lies in the set.

    With a full scenario and ``k=None`` every component is checked.
    """
    arr = xi.xi if isinstance(xi, ScenarioPoint) else np.asarray(xi, dtype=float)
    if arr.ndim == 1:
        return uset.contains(arr)
    cols = range(arr.shape[1]) if k is None else [k]
    return all(uset.contains(arr[:, c]) for c in cols)


def padding_lambda(uset: UncertaintySet, dev_row: np.ndarray, x_col: np.ndarray) -> float:
    """Padding term of the robust counterpart for one quality row.

    ``dev_row`` holds the deviations of component k per source and ``x_col``
    the total flows into terminal j per source.
    """
    x_col = np.asarray(x_col, dtype=float)
    if np.any(x_col < 0):
        raise ValueError("total flows must be nonnegative")
    return uset.support(np.asarray(dev_row, dtype=float) * x_col)


UPPER, LOWER = "upper", "lower"


def nominal_residual(inst: PoolingInstance, x: np.ndarray, v: np.ndarray, j: int, k: int, side: str) -> float:
    """Nominal residual of one quality row (positive means violated)."""
    content = float(inst.conc[:, k] @ x[:, j])
    if side == UPPER:
        hi = inst.qual_hi[j, k]
        return content - hi * v[j] if math.isfinite(hi) else -math.inf
    if side == LOWER:
        return inst.qual_lo[j, k] * v[j] - content
    raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")


def worst_case(
    uset: UncertaintySet,
    inst: PoolingInstance,
    x: np.ndarray,
    v: np.ndarray,
    j: int,
    k: int,
    side: str,
) -> tuple[float, ScenarioPoint]:
    """Largest violation of quality row (j, k, side) over the set, and its maximizer.

    The returned scenario is nonzero only in column ``k``.
    """
    x = np.asarray(x, dtype=float)
    col = x[:, j]
    if np.any(col < -1e-12):
        raise ValueError("total flows must be nonnegative")
    col = np.clip(col, 0.0, None)
    base = nominal_residual(inst, x, v, j, k, side)
    c = inst.dev[:, k] * col
    sign = 1.0 if side == UPPER else -1.0
    xi = np.zeros((len(inst.sources), len(inst.components)))
    if math.isinf(base):
        return base, ScenarioPoint(xi)
    xi[:, k] = sign * uset.maximizer(c)
    return base + uset.r * uset.support(c), ScenarioPoint(xi)


def scenario_violation(inst: PoolingInstance, x: np.ndarray, v: np.ndarray, j: int, k: int,
                       side: str, scenario: ScenarioPoint) -> float:
    """Raw violation of row (j, k, side) at the realized concentrations of ``scenario``."""
    conc = scenario.concentrations(inst)
    content = float(conc[:, k] @ x[:, j])
    if side == UPPER:
        return content - inst.qual_hi[j, k] * v[j]
    return inst.qual_lo[j, k] * v[j] - content


def set_from_dict(doc: dict, locations=None) -> UncertaintySet:
    """Build a set from ``{"geometry", "r", "kernel": {...}}``.

    ``ellipsoid-corr`` takes either an explicit ``covariance`` or a ``kernel``
    evaluated at ``locations``.
    """
    geom = Geometry(doc["geometry"])
    r = float(doc.get("r", 0.0))
    if geom is not Geometry.CORRELATED:
        return UncertaintySet(geom, r)
    if "covariance" in doc:
        return UncertaintySet.correlated(r, np.asarray(doc["covariance"], dtype=float))
    kern = doc.get("kernel", {})
    if locations is None:
        raise ValueError("ellipsoid-corr with a kernel needs source locations")
    cov = kernel_covariance(locations, float(kern.get("sigma2", 1.0)), float(kern.get("length_scale", 1.0)))
    return UncertaintySet.correlated(r, cov)
