"""The cone of plans with monotone support.

Membership is decided on the ordered list of support "elements" of a plan:
vertical segments over base atoms and graph segments (or strips) over base
pieces.  Because each element is compact and they are ordered along the base
axis, the support is monotone iff every element is internally monotone and
the top of each element lies below the bottom of the next one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import DomainError
from .measures import ScalarMeasure, mixture, quantile_vector
from .plans import (
    FiberPlan,
    MapFiber,
    as_map,
    fiber_affine_push,
    w_rho,
)

MONOTONE_TOL = 1e-12
DEFAULT_GRID_CELLS = 64
DEFAULT_BINS = 256

Point = tuple[float, float]


@dataclass(frozen=True)
class _Element:
    kind: str  # "atom", "map" or "const"
    xl: float
    xr: float
    ylo: float
    yhi: float
    slope: float = 0.0
    intercept: float = 0.0

    def y_at(self, x: float) -> float:
        return self.intercept + self.slope * x


def _elements(p: FiberPlan) -> list[_Element]:
    out = []
    for (x, _), f in zip(p.base.atoms, p.atom_fibers):
        lo, hi = f.hull()
        out.append(_Element("atom", x, x, lo, hi))
    atom_xs = [x for x, _ in p.base.atoms]
    for (a, b, _), f in zip(p.base.pieces, p.piece_fibers):
        f = as_map(f)
        cuts = [a] + [x for x in atom_xs if a < x < b] + [b]
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            if isinstance(f, MapFiber):
                ya, yb = f.at(lo), f.at(hi)
                out.append(_Element("map", lo, hi, min(ya, yb), max(ya, yb), f.b, f.a))
            else:
                ylo, yhi = f.measure.hull()
                out.append(_Element("const", lo, hi, ylo, yhi))
    out.sort(key=lambda e: (e.xl, e.xr))
    return out


@dataclass(frozen=True)
class MonotonicityReport:
    """Cone-membership certificate; ``violation`` holds two support points
    (x1, y1), (x2, y2) with (x2 - x1) * (y2 - y1) < 0 when not monotone."""

    monotone: bool
    violation: Optional[tuple[Point, Point]] = None

    def __bool__(self):
        return self.monotone

    def to_dict(self) -> dict:
        wit = None if self.violation is None else [list(pt) for pt in self.violation]
        return {"monotone": self.monotone, "witness": wit}


def _internal_witness(e: _Element) -> tuple[Point, Point]:
    x1 = e.xl + 0.25 * (e.xr - e.xl)
    x2 = e.xl + 0.75 * (e.xr - e.xl)
    if e.kind == "map":
        return (x1, e.y_at(x1)), (x2, e.y_at(x2))
    return (x1, e.yhi), (x2, e.ylo)


def _pair_witness(left: _Element, right: _Element) -> tuple[Point, Point]:
    """Support points of ``left`` above support points of ``right``."""
    gap = left.yhi - right.ylo

    def pick(e, top, inward):
        if e.kind == "atom":
            return e.xl, (e.yhi if top else e.ylo)
        # top of a map element sits at its right end (slope >= 0 here)
        x = e.xr if top else e.xl
        if inward:
            step = 0.5 * (e.xr - e.xl)
            if e.slope:
                step = min(step, 0.25 * gap / abs(e.slope))
            x = x - step if top else x + step
        if e.kind == "map":
            return x, e.y_at(x)
        return x, (e.yhi if top else e.ylo)

    touching = left.xr >= right.xl
    return pick(left, True, touching), pick(right, False, touching)


def _violates(hi: float, lo: float, tol: float) -> bool:
    return hi - lo > tol * max(1.0, abs(hi), abs(lo))


def is_monotone(p: FiberPlan, tol: float = MONOTONE_TOL) -> MonotonicityReport:
    """Decide whether the support of ``p`` is a monotone subset of the plane."""
    prev = None
    for e in _elements(p):
        if e.kind == "map" and e.slope < 0 and e.xr > e.xl:
            return MonotonicityReport(False, _internal_witness(e))
        if e.kind == "const" and e.xr > e.xl and _violates(e.yhi, e.ylo, tol):
            return MonotonicityReport(False, _internal_witness(e))
        if prev is not None and _violates(prev.yhi, e.ylo, tol):
            return MonotonicityReport(False, _pair_witness(prev, e))
        prev = e
    return MonotonicityReport(True)


# -- admissible push sizes -----------------------------------------------------


@dataclass(frozen=True)
class LambdaInterval:
    """Supremum of the tau > 0 with (pi1, pi1 + tau*pi2)#p monotone.

    ``sup_tau == 0`` means no tau > 0 is admissible.
    """

    sup_tau: float
    attained: bool

    @property
    def finite(self) -> bool:
        return math.isfinite(self.sup_tau)

    def to_dict(self) -> dict:
        return {
            "sup_tau": self.sup_tau if self.finite else None,
            "finite": self.finite,
            "attained": self.attained,
        }


def lambda_max(p: FiberPlan) -> LambdaInterval:
    """Closed-form supremum of admissible tangent push sizes.

    After the push a point (x, xi) moves to (x, x + tau*xi).  For support
    points x < x' with velocities xi > eta this stays ordered iff
    tau <= (x' - x) / (xi - eta); a decreasing map piece with slope b < 0
    adds tau <= -1/b.  On graph segments the ratio is linear-fractional, so
    its minimum sits at segment endpoints.
    """
    elements = _elements(p)
    sup = math.inf
    points = []
    for e in elements:
        if e.kind == "const":
            raise DomainError("a non-Dirac fiber on a diffuse piece admits no tau > 0")
        if e.kind == "map" and e.slope < 0:
            sup = min(sup, -1.0 / e.slope)
        if e.kind == "atom":
            points.append([(e.xl, e.ylo, e.yhi)])
        else:
            ya, yb = e.y_at(e.xl), e.y_at(e.xr)
            points.append([(e.xl, ya, ya), (e.xr, yb, yb)])
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            for x, _, xi in points[i]:
                for x2, eta, _ in points[j]:
                    den = xi - eta
                    if den > 0:
                        sup = min(sup, max(x2 - x, 0.0) / den)
    if not math.isfinite(sup) or sup <= 0:
        return LambdaInterval(max(sup, 0.0), False)
    attained = is_monotone(fiber_affine_push(p, 0.0, 1.0, sup)).monotone
    return LambdaInterval(sup, attained)


def lambda_max_bisection(p: FiberPlan, iters: int = 200, cap: float = 1e12) -> float:
    """Estimate sup tau by bisection on the monotonicity certificate."""

    def ok(t):
        return is_monotone(fiber_affine_push(p, 0.0, 1.0, t), tol=0.0).monotone

    hi = 1.0
    while ok(hi):
        hi *= 2.0
        if hi > cap:
            return math.inf
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


# -- metric projection ---------------------------------------------------------


def pava(values, weights, sweep: str = "left") -> np.ndarray:
    """Weighted least-squares nondecreasing fit by pool-adjacent-violators.

    ``sweep="right"`` pools from the right end instead (same optimum).
    """
    y = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if sweep == "right":
        return -pava(-y[::-1], w[::-1], "left")[::-1]
    if sweep != "left":
        raise DomainError(f"unknown sweep {sweep!r}")
    if np.any(w <= 0):
        raise DomainError("weights must be positive")
    # blocks as [weighted sum, weight, length]
    blocks: list[list[float]] = []
    for yi, wi in zip(y.tolist(), w.tolist()):
        blocks.append([yi * wi, wi, 1])
        while len(blocks) > 1 and blocks[-2][0] / blocks[-2][1] > blocks[-1][0] / blocks[-1][1]:
            s, c, n = blocks.pop()
            blocks[-1][0] += s
            blocks[-1][1] += c
            blocks[-1][2] += n
    return np.concatenate([np.full(int(n), s / c) for s, c, n in blocks])


def chain_problem(p: FiberPlan, grid_cells: int = DEFAULT_GRID_CELLS):
    """Concatenated fiber quantile values with their weights; also the per-fiber cell masses.

    A plan over an atomic base is monotone iff this concatenation (fibers
    in base order) is nondecreasing, and w_rho**2 between two such plans is
    the weighted squared distance between their concatenations.
    """
    if p.base.pieces:
        raise DomainError(
            "projection needs an atomic base; bin the diffuse part first with atomize()"
        )
    if grid_cells < 1:
        raise DomainError("grid_cells must be positive")
    vectors = [quantile_vector(f, grid_cells) for f in p.atom_fibers]
    values = np.concatenate([q.values for q in vectors])
    weights = np.concatenate([m * q.cell_masses for (_, m), q in zip(p.base.atoms, vectors)])
    return values, weights, [q.cell_masses for q in vectors]


class Projection(NamedTuple):
    plan: FiberPlan
    distance: float


def _rebuild(p: FiberPlan, values: np.ndarray, cells) -> FiberPlan:
    fibers, start = [], 0
    for masses in cells:
        k = len(masses)
        fibers.append(ScalarMeasure(tuple(zip(values[start : start + k], masses))))
        start += k
    return FiberPlan(p.base, tuple(fibers), ())


def project_cone(
    p: FiberPlan, grid_cells: int = DEFAULT_GRID_CELLS, sweep: str = "left"
) -> Projection:
    """Nearest monotone plan in w_rho, for plans over an atomic base.

    The chain constraint on concatenated quantiles makes this a weighted
    isotonic regression, solved exactly by pool-adjacent-violators.
    Non-atomic fibers are first discretised on ``grid_cells`` mass cells.
    """
    values, weights, cells = chain_problem(p, grid_cells)
    proj = _rebuild(p, pava(values, weights, sweep), cells)
    return Projection(proj, w_rho(p, proj))


def atomize(p: FiberPlan, bins: int = DEFAULT_BINS) -> FiberPlan:
    """Replace the diffuse part of the base by equal-width atoms.

    Each piece gets a share of ``bins`` proportional to its mass; a bin
    becomes an atom at its midpoint carrying the conditional law of y on
    that bin (uniform for a map fiber, the fiber itself for a constant one).
    """
    if not p.base.pieces:
        return p
    if bins < 1:
        raise DomainError("bins must be positive")
    diffuse = p.base.diffuse_mass
    rows = [(x, m, f) for (x, m), f in zip(p.base.atoms, p.atom_fibers)]
    for (a, b, m), f in zip(p.base.pieces, p.piece_fibers):
        k = max(1, int(round(bins * m / diffuse)))
        edges = np.linspace(a, b, k + 1)
        f = as_map(f)
        for lo, hi in zip(edges[:-1], edges[1:]):
            if isinstance(f, MapFiber):
                y0, y1 = sorted((f.at(lo), f.at(hi)))
                fib = ScalarMeasure(((y0, 1.0),)) if y0 == y1 else ScalarMeasure((), ((y0, y1, 1.0),))
            else:
                fib = f.measure
            rows.append((float(0.5 * (lo + hi)), m / k, fib))
    rows.sort(key=lambda r: r[0])
    merged: list[list] = []
    for x, m, f in rows:
        if merged and x - merged[-1][0] < 1e-12:
            merged[-1][1].append(m)
            merged[-1][2].append(f)
        else:
            merged.append([x, [m], [f]])
    atoms = tuple((x, sum(ms)) for x, ms, _ in merged)
    fibers = tuple(fs[0] if len(fs) == 1 else mixture(fs, ms) for _, ms, fs in merged)
    return FiberPlan(ScalarMeasure(atoms), fibers, ())


def random_cone_member(base: ScalarMeasure, rng, sizes=None, spread: float = 3.0) -> FiberPlan:
    """A random monotone plan over an atomic base (sorted random fiber atoms)."""
    if base.pieces:
        raise DomainError("random_cone_member needs an atomic base")
    n = len(base.atoms)
    sizes = sizes if sizes is not None else rng.integers(1, 5, size=n)
    vals = np.sort(rng.uniform(-spread, spread, size=int(np.sum(sizes))))
    fibers, start = [], 0
    for k in sizes:
        chunk = vals[start : start + k]
        fibers.append(ScalarMeasure(tuple(zip(chunk, rng.uniform(0.1, 1.0, size=k)))))
        start += k
    return FiberPlan(base, tuple(fibers), ())
