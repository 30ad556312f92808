"""Seeded random instance generators shared by the experiments and the tests.

Every generator takes a ``numpy.random.Generator`` so that one seed fixes a
whole experiment.  The bounded-instance generators document the regime in
which the witness constructions are known to converge at the advertised
rates.
"""

from __future__ import annotations

import numpy as np

from .measures import PiecewiseAffineMap, ScalarMeasure
from .plans import ConstFiber, FiberPlan, MapFiber


def random_atomic_measure(rng, max_points: int = 8, spread: float = 3.0) -> ScalarMeasure:
    k = int(rng.integers(1, max_points + 1))
    xs = rng.uniform(-spread, spread, size=k)
    ms = rng.uniform(0.1, 1.0, size=k)
    return ScalarMeasure(tuple(zip(xs, ms)))


def random_atomic_base(rng, max_atoms: int = 4, spread: float = 3.0) -> ScalarMeasure:
    return random_atomic_measure(rng, max_atoms, spread)


def random_atomic_plan(
    rng, base: ScalarMeasure | None = None, max_atoms: int = 4, max_fiber_points: int = 6
) -> FiberPlan:
    """Atomic base with independent random atomic fibers."""
    base = base if base is not None else random_atomic_base(rng, max_atoms)
    fibers = tuple(random_atomic_measure(rng, max_fiber_points) for _ in base.atoms)
    return FiberPlan(base, fibers, ())


def random_mixed_base(rng, max_atoms: int = 3, max_pieces: int = 2) -> ScalarMeasure:
    """Atoms plus disjoint, non-adjacent uniform pieces."""
    n_pieces = int(rng.integers(1, max_pieces + 1))
    edges = np.sort(rng.uniform(-3.0, 3.0, size=2 * n_pieces))
    pieces = []
    for k in range(n_pieces):
        a, b = edges[2 * k], edges[2 * k + 1]
        if b - a > 1e-3:
            pieces.append((float(a), float(b), float(rng.uniform(0.1, 1.0))))
    atoms = [(float(x), float(rng.uniform(0.1, 1.0))) for x in rng.uniform(-3.0, 3.0, size=int(rng.integers(0, max_atoms + 1)))]
    if not pieces and not atoms:
        atoms = [(0.0, 1.0)]
    return ScalarMeasure(tuple(atoms), tuple(pieces))


def random_map_plan(rng, base: ScalarMeasure, max_fiber_points: int = 5) -> FiberPlan:
    """Random atomic fibers at atoms and random affine maps on pieces."""
    atom_fibers = tuple(random_atomic_measure(rng, max_fiber_points) for _ in base.atoms)
    piece_fibers = tuple(MapFiber(*rng.uniform(-2.0, 2.0, size=2)) for _ in base.pieces)
    return FiberPlan(base, atom_fibers, piece_fibers)


def random_const_plan(rng, base: ScalarMeasure, max_fiber_points: int = 5) -> FiberPlan:
    """Random atomic fibers everywhere, constant along each piece."""
    atom_fibers = tuple(random_atomic_measure(rng, max_fiber_points) for _ in base.atoms)
    piece_fibers = tuple(ConstFiber(random_atomic_measure(rng, max_fiber_points)) for _ in base.pieces)
    return FiberPlan(base, atom_fibers, piece_fibers)


def random_non_tangent_plan(rng) -> FiberPlan:
    """A mixed plan with one non-Dirac constant fiber on a diffuse piece."""
    base = random_mixed_base(rng)
    p = random_map_plan(rng, base)
    k = int(rng.integers(0, len(base.pieces)))
    xs = rng.uniform(-2.0, 2.0, size=int(rng.integers(2, 5)))
    xs[1] = xs[0] + rng.uniform(0.1, 1.0)
    fiber = ConstFiber(ScalarMeasure(tuple((x, 1.0) for x in xs)))
    pieces = p.piece_fibers[:k] + (fiber,) + p.piece_fibers[k + 1 :]
    return FiberPlan(base, p.atom_fibers, pieces)


def random_bounded_tangent_plan(rng, max_atoms: int = 3, max_pieces: int = 2) -> FiberPlan:
    """A tangent plan whose witness sequence converges quickly.

    Pieces are disjoint with gaps of at least 0.1 and affine maps whose
    linear interpolation across the gaps is continuous; atoms sit at least
    0.05 away from pieces and from each other; each atom fiber is the map
    value there plus a spread inside [-0.5, 0.5].
    """
    n_pieces = int(rng.integers(1, max_pieces + 1))
    starts = np.cumsum(rng.uniform(0.6, 1.5, size=n_pieces)) - 2.0
    pieces, maps = [], []
    for s in starts:
        pieces.append((float(s), float(s + rng.uniform(0.2, 0.5)), float(rng.uniform(0.2, 1.0))))
        maps.append(MapFiber(*rng.uniform(-2.0, 2.0, size=2)))
    atoms = []
    for _ in range(int(rng.integers(0, max_atoms + 1))):
        for _attempt in range(50):
            x = float(rng.uniform(-2.5, starts[-1] + 1.0))
            near_piece = any(a - 0.05 < x < b + 0.05 for a, b, _ in pieces)
            near_atom = any(abs(x - y) < 0.05 for y, _ in atoms)
            if not (near_piece or near_atom):
                atoms.append((x, float(rng.uniform(0.1, 1.0))))
                break
    base = ScalarMeasure(tuple(atoms), tuple(pieces))
    g = linking_map_of(base, maps)
    fibers = []
    for x, _ in base.atoms:
        spread = rng.uniform(-0.5, 0.5, size=int(rng.integers(1, 4)))
        fibers.append(ScalarMeasure(tuple((g(x) + s, float(w)) for s, w in zip(spread, rng.uniform(0.2, 1.0, size=len(spread))))))
    return FiberPlan(base, tuple(fibers), tuple(maps))


def linking_map_of(base: ScalarMeasure, maps) -> PiecewiseAffineMap:
    """Affine maps on the base pieces, bridged linearly over the gaps."""
    rows = [(a, b, f.a, f.b) for (a, b, _), f in zip(base.pieces, maps)]
    out = list(rows)
    for (_, b0, ga0, gb0), (a1, _, ga1, gb1) in zip(rows, rows[1:]):
        if a1 > b0:
            y0, y1 = ga0 + gb0 * b0, ga1 + gb1 * a1
            slope = (y1 - y0) / (a1 - b0)
            out.append((b0, a1, y0 - slope * b0, slope))
    a0, _, ga, gb = rows[0]
    out.append((-np.inf, a0, ga + gb * a0, 0.0))
    _, b1, ga, gb = rows[-1]
    out.append((b1, np.inf, ga + gb * b1, 0.0))
    return PiecewiseAffineMap(tuple(out))


def random_atom_witness_instance(rng):
    """(nu, x0, base) in the regime where the atom witness converges monotonically.

    Base atoms are spaced at least one apart, nu lies in [-1, 1], the
    witnessed atom carries mass at least 0.4, and the optional piece has
    mass at most 0.2 spread over a width of at least one.
    """
    k = int(rng.integers(1, 4))
    xs = np.cumsum(rng.uniform(1.0, 2.0, size=k)) - 2.0
    ms = rng.uniform(0.1, 1.0, size=k)
    i0 = int(rng.integers(0, k))
    ms[i0] = max(ms[i0], 0.4 * ms.sum() / (1.0 - 0.4))
    pieces = ()
    if rng.random() < 0.5:
        a = float(rng.uniform(-3.0, 2.0))
        pieces = ((a, a + float(rng.uniform(1.0, 2.0)), float(rng.uniform(0.05, 0.2))),)
    base = ScalarMeasure(tuple(zip(xs, ms)), pieces)
    x0 = float(xs[i0])
    ys = rng.uniform(-1.0, 1.0, size=int(rng.integers(1, 5)))
    nu = ScalarMeasure(tuple(zip(ys, rng.uniform(0.2, 1.0, size=len(ys)))))
    return nu, x0, base


def random_jump_map(rng, lo: float = 0.0, hi: float = 1.0) -> PiecewiseAffineMap:
    """A map on [lo, hi] with one downward jump at an interior point."""
    c = float(rng.uniform(lo + 0.2 * (hi - lo), hi - 0.2 * (hi - lo)))
    a1, b1 = rng.uniform(-1.0, 1.0, size=2)
    h = float(rng.uniform(0.2, 2.0))
    left_end = a1 + b1 * c
    b2 = float(rng.uniform(-1.0, 1.0))
    a2 = left_end - h - b2 * c
    return PiecewiseAffineMap(
        (
            (-np.inf, c, float(a1), float(b1)),
            (c, np.inf, float(a2), b2),
        )
    )
