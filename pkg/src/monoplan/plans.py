"""Transport plans with a prescribed first marginal, stored disintegrated.

A :class:`FiberPlan` is a base measure together with one conditional law
("fiber") per base atom and per uniform base piece.  On a piece the fiber is
either the Dirac mass at ``a + b*x`` (:class:`MapFiber`) or a fixed measure
independent of ``x`` (:class:`ConstFiber`).  This module provides the fibered
distance ``w_rho``, its three-marginal (ADM) characterisation, the linear
operations (affine fiber maps, gluing, addition) and JSON I/O.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    BaseMismatchError,
    DomainError,
    SizeError,
    UnsupportedCombinationError,
)
from .measures import (
    MERGE_TOL,
    PiecewiseAffineMap,
    ScalarMeasure,
    dirac,
    pushforward,
    quantile_vector,
    second_moment,
    wasserstein2_squared,
)

DEFAULT_PUSH_CELLS = 64
MAX_ADM_POINTS = 8


@dataclass(frozen=True)
class MapFiber:
    """Fiber ``delta_{a + b*x}`` at each base point x of a piece."""

    a: float
    b: float

    def at(self, x: float) -> float:
        return self.a + self.b * x


@dataclass(frozen=True)
class ConstFiber:
    """The same fiber measure at every base point of a piece."""

    measure: ScalarMeasure


Fiber = Union[MapFiber, ConstFiber]


def as_map(fiber: Fiber) -> Fiber:
    """Rewrite a Dirac ConstFiber as the equivalent constant MapFiber."""
    if isinstance(fiber, ConstFiber) and fiber.measure.is_dirac:
        return MapFiber(fiber.measure.atoms[0][0], 0.0)
    return fiber


@dataclass(frozen=True)
class FiberPlan:
    """A plan gamma(dx, dy) = gamma_x(dy) base(dx) with finitely many fibers."""

    base: ScalarMeasure
    atom_fibers: tuple[ScalarMeasure, ...]
    piece_fibers: tuple[Fiber, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "atom_fibers", tuple(self.atom_fibers))
        object.__setattr__(self, "piece_fibers", tuple(self.piece_fibers))
        if len(self.atom_fibers) != len(self.base.atoms):
            raise DomainError(
                f"{len(self.base.atoms)} base atoms but {len(self.atom_fibers)} atom fibers"
            )
        if len(self.piece_fibers) != len(self.base.pieces):
            raise DomainError(
                f"{len(self.base.pieces)} base pieces but {len(self.piece_fibers)} piece fibers"
            )
        for f in self.atom_fibers:
            if not isinstance(f, ScalarMeasure):
                raise DomainError("atom fibers must be ScalarMeasure instances")
        for f in self.piece_fibers:
            if not isinstance(f, (MapFiber, ConstFiber)):
                raise DomainError("piece fibers must be MapFiber or ConstFiber")

    @property
    def is_atomic(self) -> bool:
        return not self.base.pieces and all(f.is_atomic for f in self.atom_fibers)

    def to_dict(self) -> dict:
        pieces = []
        for k, f in enumerate(self.piece_fibers):
            if isinstance(f, MapFiber):
                pieces.append({"piece": k, "kind": "map", "a": f.a, "b": f.b})
            else:
                pieces.append({"piece": k, "kind": "const", "fiber": f.measure.to_dict()})
        return {
            "base": self.base.to_dict(),
            "atom_fibers": [
                {"x": x, "fiber": f.to_dict()} for (x, _), f in zip(self.base.atoms, self.atom_fibers)
            ],
            "piece_fibers": pieces,
        }

    @classmethod
    def from_dict(cls, data) -> "FiberPlan":
        if not isinstance(data, dict):
            raise DomainError("plan must be a JSON object")
        extra = set(data) - {"base", "atom_fibers", "piece_fibers"}
        if extra:
            raise DomainError(f"unknown plan fields: {sorted(extra)}")
        if "base" not in data:
            raise DomainError("plan needs a 'base'")
        base = ScalarMeasure.from_dict(data["base"])
        xs = [x for x, _ in base.atoms]
        atom_fibers: list = [None] * len(xs)
        for item in data.get("atom_fibers", []):
            if not isinstance(item, dict) or set(item) != {"x", "fiber"}:
                raise DomainError("atom fiber needs exactly the fields ['fiber', 'x']")
            hits = [i for i, x in enumerate(xs) if abs(x - float(item["x"])) <= MERGE_TOL]
            if len(hits) != 1:
                raise DomainError(f"atom fiber at x={item['x']} matches no base atom")
            if atom_fibers[hits[0]] is not None:
                raise DomainError(f"duplicate atom fiber at x={item['x']}")
            atom_fibers[hits[0]] = ScalarMeasure.from_dict(item["fiber"])
        if any(f is None for f in atom_fibers):
            raise DomainError("every base atom needs a fiber")
        piece_fibers: list = [None] * len(base.pieces)
        for item in data.get("piece_fibers", []):
            if not isinstance(item, dict):
                raise DomainError("piece fiber must be a JSON object")
            kind = item.get("kind")
            keys = {"map": {"piece", "kind", "a", "b"}, "const": {"piece", "kind", "fiber"}}
            if kind not in keys:
                raise DomainError(f"piece fiber kind must be 'map' or 'const', got {kind!r}")
            if set(item) != keys[kind]:
                raise DomainError(f"{kind} piece fiber needs exactly {sorted(keys[kind])}")
            k = item["piece"]
            if not isinstance(k, int) or isinstance(k, bool) or not 0 <= k < len(piece_fibers):
                raise DomainError(f"piece index {k!r} out of range")
            if piece_fibers[k] is not None:
                raise DomainError(f"duplicate fiber for piece {k}")
            if kind == "map":
                piece_fibers[k] = MapFiber(float(item["a"]), float(item["b"]))
            else:
                piece_fibers[k] = ConstFiber(ScalarMeasure.from_dict(item["fiber"]))
        if any(f is None for f in piece_fibers):
            raise DomainError("every base piece needs a fiber")
        return cls(base, tuple(atom_fibers), tuple(piece_fibers))


# -- constructors --------------------------------------------------------------


def zero_plan(base: ScalarMeasure) -> FiberPlan:
    """The plan with every fiber equal to delta_0."""
    return FiberPlan(
        base,
        tuple(dirac(0.0) for _ in base.atoms),
        tuple(MapFiber(0.0, 0.0) for _ in base.pieces),
    )


def graph_plan(base: ScalarMeasure, g: PiecewiseAffineMap) -> FiberPlan:
    """(id, g)#base; base pieces are cut at the breakpoints of ``g``."""
    base = base.split_at(g.breakpoints())
    pieces = []
    for a, b, _ in base.pieces:
        ga, gb = g.piece_at(0.5 * (a + b))
        pieces.append(MapFiber(ga, gb))
    return FiberPlan(base, tuple(dirac(g(x)) for x, _ in base.atoms), tuple(pieces))


def refine(p: FiberPlan, points) -> FiberPlan:
    """Same plan with base pieces cut at ``points`` (fibers copied)."""
    pts = sorted(set(float(t) for t in points))
    pieces, fibers = [], []
    for (a, b, m), f in zip(p.base.pieces, p.piece_fibers):
        cuts = [a] + [t for t in pts if a < t < b] + [b]
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            pieces.append((lo, hi, m * (hi - lo) / (b - a)))
            fibers.append(f)
    base = ScalarMeasure(p.base.atoms, tuple(pieces))
    if len(base.pieces) != len(fibers):
        raise DomainError("refinement produced degenerate pieces")
    return FiberPlan(base, p.atom_fibers, tuple(fibers))


def piece_cuts(p: FiberPlan) -> list[float]:
    return [t for a, b, _ in p.base.pieces for t in (a, b)]


def common_refinement(p1: FiberPlan, p2: FiberPlan) -> tuple[FiberPlan, FiberPlan]:
    """Cut both plans' pieces at the union of their endpoints."""
    cuts = piece_cuts(p1) + piece_cuts(p2)
    return refine(p1, cuts), refine(p2, cuts)


def check_same_base(p1: FiberPlan, p2: FiberPlan) -> None:
    diff = p1.base.difference(p2.base)
    if diff is not None:
        raise BaseMismatchError(f"plans have different bases: {diff}")


# -- the fibered distance ------------------------------------------------------


def _map_gap_sq(v0: float, v1: float) -> float:
    """Mean of v**2 for v moving linearly from v0 to v1."""
    return (v0 * v0 + v0 * v1 + v1 * v1) / 3.0


def _piece_cost(f1: Fiber, f2: Fiber, a: float, b: float) -> float:
    """Average over x uniform on [a, b] of W2(f1_x, f2_x)**2."""
    f1, f2 = as_map(f1), as_map(f2)
    if isinstance(f1, MapFiber) and isinstance(f2, MapFiber):
        return _map_gap_sq(f1.at(a) - f2.at(a), f1.at(b) - f2.at(b))
    if isinstance(f1, ConstFiber) and isinstance(f2, ConstFiber):
        return wasserstein2_squared(f1.measure, f2.measure)
    if isinstance(f1, ConstFiber):
        f1, f2 = f2, f1
    # W2(delta_y, nu)**2 = (y - mean)**2 + var, quadratic in y
    nu = f2.measure
    mean = nu.mean()
    return _map_gap_sq(f1.at(a) - mean, f1.at(b) - mean) + nu.variance()


def w_rho_squared(p1: FiberPlan, p2: FiberPlan) -> float:
    check_same_base(p1, p2)
    total = 0.0
    for (_, m), f1, f2 in zip(p1.base.atoms, p1.atom_fibers, p2.atom_fibers):
        total += m * wasserstein2_squared(f1, f2)
    for (a, b, m), f1, f2 in zip(p1.base.pieces, p1.piece_fibers, p2.piece_fibers):
        total += m * _piece_cost(f1, f2, a, b)
    return max(total, 0.0)


def w_rho(p1: FiberPlan, p2: FiberPlan) -> float:
    """Fibered distance: sqrt of the base-average of fiberwise W2**2."""
    return float(np.sqrt(w_rho_squared(p1, p2)))


def plan_second_moment(p: FiberPlan) -> float:
    """Integral of x**2 + y**2 against the plan."""
    total = second_moment(p.base)
    for (_, m), f in zip(p.base.atoms, p.atom_fibers):
        total += m * second_moment(f)
    for (a, b, m), f in zip(p.base.pieces, p.piece_fibers):
        f = as_map(f)
        if isinstance(f, MapFiber):
            total += m * _map_gap_sq(f.at(a), f.at(b))
        else:
            total += m * second_moment(f.measure)
    return total


# -- linear operations ---------------------------------------------------------


def fiber_affine_push(
    p: FiberPlan, c0: float, c1: float, c2: float, cells: int = DEFAULT_PUSH_CELLS
) -> FiberPlan:
    """(pi1, c0 + c1*pi1 + c2*pi2)#p.

    Covers scalar multiples (c0 = c1 = 0), the tangent pushes (c1 = 1) and
    difference quotients (c1 = -1/lam, c2 = 1/lam).  A non-Dirac ConstFiber
    under a base-dependent push (c1 != 0, c2 != 0) is approximated by cutting
    its piece into ``cells`` sub-pieces with the fiber frozen at each
    midpoint; every other case is exact.
    """
    atom_fibers = tuple(
        pushforward(f, PiecewiseAffineMap.affine(c0 + c1 * x, c2))
        for (x, _), f in zip(p.base.atoms, p.atom_fibers)
    )
    pieces, fibers = [], []
    for (a, b, m), f in zip(p.base.pieces, p.piece_fibers):
        f = as_map(f)
        if isinstance(f, MapFiber):
            pieces.append((a, b, m))
            fibers.append(MapFiber(c0 + c2 * f.a, c1 + c2 * f.b))
        elif c2 == 0.0:
            pieces.append((a, b, m))
            fibers.append(MapFiber(c0, c1))
        elif c1 == 0.0:
            pieces.append((a, b, m))
            fibers.append(ConstFiber(pushforward(f.measure, PiecewiseAffineMap.affine(c0, c2))))
        else:
            if cells < 1:
                raise DomainError("cells must be positive")
            edges = np.linspace(a, b, cells + 1)
            for lo, hi in zip(edges[:-1], edges[1:]):
                shift = c0 + c1 * 0.5 * (lo + hi)
                pieces.append((float(lo), float(hi), m / cells))
                fibers.append(ConstFiber(pushforward(f.measure, PiecewiseAffineMap.affine(shift, c2))))
    base = p.base if len(pieces) == len(p.base.pieces) else ScalarMeasure(p.base.atoms, tuple(pieces))
    return FiberPlan(base, atom_fibers, tuple(fibers))


def scale(p: FiberPlan, s: float) -> FiberPlan:
    """Scalar multiple s*gamma = (pi1, s*pi2)#gamma."""
    return fiber_affine_push(p, 0.0, 0.0, s)


@dataclass(frozen=True, eq=False)
class JointFiber:
    """A coupling of two atomic fibers as (y1, y2, mass) rows."""

    y1: np.ndarray
    y2: np.ndarray
    mass: np.ndarray

    def triples(self):
        return list(zip(self.y1.tolist(), self.y2.tolist(), self.mass.tolist()))

    def first(self) -> ScalarMeasure:
        return ScalarMeasure(tuple(zip(self.y1, self.mass)))

    def second(self) -> ScalarMeasure:
        return ScalarMeasure(tuple(zip(self.y2, self.mass)))


@dataclass(frozen=True)
class MapPair:
    """Joint fiber of two map-induced fibers: (a1 + b1*x, a2 + b2*x)."""

    first: MapFiber
    second: MapFiber


@dataclass(frozen=True, eq=False)
class GluedPlan:
    """A three-marginal plan (x, y1, y2) over a shared base."""

    base: ScalarMeasure
    atom_joints: tuple[JointFiber, ...]
    piece_joints: tuple[Union[JointFiber, MapPair], ...]

    def marginals(self) -> tuple[FiberPlan, FiberPlan]:
        """The plans (pi1, pi2)#beta and (pi1, pi3)#beta."""
        out = []
        for which in (0, 1):
            atoms = tuple(j.first() if which == 0 else j.second() for j in self.atom_joints)
            pieces = []
            for j in self.piece_joints:
                if isinstance(j, MapPair):
                    pieces.append(j.first if which == 0 else j.second)
                else:
                    pieces.append(ConstFiber(j.first() if which == 0 else j.second()))
            out.append(FiberPlan(self.base, atoms, tuple(pieces)))
        return out[0], out[1]

    def cost(self) -> float:
        """Integral of |y1 - y2|**2."""
        total = 0.0
        for (_, m), j in zip(self.base.atoms, self.atom_joints):
            total += m * float(np.sum(j.mass * (j.y1 - j.y2) ** 2))
        for (a, b, m), j in zip(self.base.pieces, self.piece_joints):
            if isinstance(j, MapPair):
                total += m * _map_gap_sq(j.first.at(a) - j.second.at(a), j.first.at(b) - j.second.at(b))
            else:
                total += m * float(np.sum(j.mass * (j.y1 - j.y2) ** 2))
        return total


def _require_atomic(mu: ScalarMeasure, where: str) -> None:
    if not mu.is_atomic:
        raise DomainError(f"gluing needs atomic fibers ({where} has diffuse part)")


def couple(mu: ScalarMeasure, nu: ScalarMeasure, strategy: str = "comonotone") -> JointFiber:
    """Product or quantile (comonotone) coupling of two atomic measures."""
    if strategy == "product":
        y1 = np.repeat(mu.positions, len(nu.atoms))
        y2 = np.tile(nu.positions, len(mu.atoms))
        mass = np.outer(mu.masses, nu.masses).ravel()
        return JointFiber(y1, y2, mass)
    if strategy == "comonotone":
        q1, q2 = quantile_vector(mu), quantile_vector(nu)
        grid = np.unique(np.concatenate((q1.breakpoints, q2.breakpoints)))
        mass = np.diff(grid, prepend=0.0)
        keep = mass > 0
        grid, mass = grid[keep], mass[keep]
        i1 = np.minimum(np.searchsorted(q1.breakpoints, grid, side="left"), len(q1.values) - 1)
        i2 = np.minimum(np.searchsorted(q2.breakpoints, grid, side="left"), len(q2.values) - 1)
        return JointFiber(q1.values[i1], q2.values[i2], mass)
    raise DomainError(f"unknown gluing strategy {strategy!r}")


def glue(p1: FiberPlan, p2: FiberPlan, strategy: str = "comonotone") -> GluedPlan:
    """An element of ADM(p1, p2) built fiber by fiber."""
    check_same_base(p1, p2)
    atom_joints = []
    for k, (f1, f2) in enumerate(zip(p1.atom_fibers, p2.atom_fibers)):
        _require_atomic(f1, f"atom {k}")
        _require_atomic(f2, f"atom {k}")
        atom_joints.append(couple(f1, f2, strategy))
    piece_joints = []
    for k, (f1, f2) in enumerate(zip(p1.piece_fibers, p2.piece_fibers)):
        f1, f2 = as_map(f1), as_map(f2)
        if isinstance(f1, MapFiber) and isinstance(f2, MapFiber):
            piece_joints.append(MapPair(f1, f2))
        elif isinstance(f1, ConstFiber) and isinstance(f2, ConstFiber):
            _require_atomic(f1.measure, f"piece {k}")
            _require_atomic(f2.measure, f"piece {k}")
            piece_joints.append(couple(f1.measure, f2.measure, strategy))
        else:
            raise UnsupportedCombinationError(
                f"piece {k}: cannot glue a map fiber with a non-Dirac constant fiber"
            )
    return GluedPlan(p1.base, tuple(atom_joints), tuple(piece_joints))


def oplus_add(g: GluedPlan) -> FiberPlan:
    """The sum (pi1, pi2 + pi3)#beta."""
    atoms = tuple(ScalarMeasure(tuple(zip(j.y1 + j.y2, j.mass))) for j in g.atom_joints)
    pieces = []
    for j in g.piece_joints:
        if isinstance(j, MapPair):
            pieces.append(MapFiber(j.first.a + j.second.a, j.first.b + j.second.b))
        else:
            pieces.append(ConstFiber(ScalarMeasure(tuple(zip(j.y1 + j.y2, j.mass)))))
    return FiberPlan(g.base, atoms, tuple(pieces))


def add(p1: FiberPlan, p2: FiberPlan, strategy: str = "comonotone") -> FiberPlan:
    return oplus_add(glue(p1, p2, strategy))


def w_rho_via_adm(p1: FiberPlan, p2: FiberPlan) -> float:
    """w_rho computed as the minimum of |y1 - y2|**2 over glued plans.

    Each atomic fiber pair is coupled by the transportation-simplex oracle;
    the result is the cost of the assembled optimal three-marginal plan.
    """
    from .oracle import oracle_coupling

    check_same_base(p1, p2)

    def joint(mu, nu, where):
        for f in (mu, nu):
            _require_atomic(f, where)
            if len(f.atoms) > MAX_ADM_POINTS:
                raise SizeError(f"{where}: ADM oracle limited to {MAX_ADM_POINTS} points")
        t = oracle_coupling(mu, nu)
        rows = t.triples()
        return JointFiber(*(np.array(c, dtype=float) for c in zip(*rows)))

    atom_joints = tuple(
        joint(f1, f2, f"atom {k}") for k, (f1, f2) in enumerate(zip(p1.atom_fibers, p2.atom_fibers))
    )
    piece_joints = []
    for k, (f1, f2) in enumerate(zip(p1.piece_fibers, p2.piece_fibers)):
        f1, f2 = as_map(f1), as_map(f2)
        if isinstance(f1, MapFiber) and isinstance(f2, MapFiber):
            piece_joints.append(MapPair(f1, f2))
        elif isinstance(f1, ConstFiber) and isinstance(f2, ConstFiber):
            piece_joints.append(joint(f1.measure, f2.measure, f"piece {k}"))
        else:
            raise UnsupportedCombinationError(
                f"piece {k}: ADM route needs fibers of the same kind"
            )
    g = GluedPlan(p1.base, atom_joints, tuple(piece_joints))
    return float(np.sqrt(max(g.cost(), 0.0)))
