"""Tangent cone of the monotone cone: membership and explicit witnesses.

A plan is tangent iff it is map-induced on the diffuse part of the base
(arbitrary fibers are allowed over atoms).  Membership in the closure is
certified constructively: every ``witness_*`` function returns, for an index
n, an approximating plan together with a push size tau_n for which
(pi1, pi1 + tau_n*pi2) sends it into the monotone cone, and its w_rho
distance to the target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .cone import is_monotone
from .errors import DomainError, NotMonotoneError, NumericError
from .measures import (
    MERGE_TOL,
    PiecewiseAffineMap,
    ScalarMeasure,
    dirac,
    pushforward,
    second_moment,
    wasserstein2_squared,
)
from .plans import (
    FiberPlan,
    MapFiber,
    add,
    as_map,
    check_same_base,
    common_refinement,
    fiber_affine_push,
    glue,
    graph_plan,
    oplus_add,
    piece_cuts,
    refine,
    w_rho,
    w_rho_squared,
    zero_plan,
)

CHECK_TOL = 1e-9


@dataclass(frozen=True)
class TangentDecomposition:
    """mu = (id, g)#diffuse part + sum_i m_i * nu_i x delta_{y_i}.

    ``map_part`` pairs each base piece index with the map fiber g on it;
    ``atom_part`` lists (y_i, nu_i, m_i) for each base atom y_i.
    """

    map_part: tuple[tuple[int, MapFiber], ...]
    atom_part: tuple[tuple[float, ScalarMeasure, float], ...]

    def reassemble(self, base: ScalarMeasure) -> FiberPlan:
        if [k for k, _ in self.map_part] != list(range(len(base.pieces))):
            raise DomainError("map part must cover exactly the base pieces")
        if len(self.atom_part) != len(base.atoms) or any(
            abs(y - x) > MERGE_TOL for (y, _, _), (x, _) in zip(self.atom_part, base.atoms)
        ):
            raise DomainError("atom part must sit on the base atoms")
        return FiberPlan(
            base, tuple(nu for _, nu, _ in self.atom_part), tuple(g for _, g in self.map_part)
        )

    def u_intervals(self, base: ScalarMeasure):
        """Values of the (set-valued) velocity over each base location, in order.

        Atoms give the hull of their fiber; pieces give the map's values at
        the two ends.
        """
        rows = [(y, *nu.hull()) for y, nu, _ in self.atom_part]
        for (k, g), (a, b, _) in zip(self.map_part, base.pieces):
            rows.append((a, g.at(a), g.at(a)))
            rows.append((b, g.at(b), g.at(b)))
        rows.sort(key=lambda r: r[0])
        return rows

    def to_dict(self) -> dict:
        return {
            "map_part": [{"piece": k, "a": g.a, "b": g.b} for k, g in self.map_part],
            "atom_part": [{"y": y, "m": m, "nu": nu.to_dict()} for y, nu, m in self.atom_part],
        }


def _decompose(p: FiberPlan) -> TangentDecomposition:
    maps = tuple((k, as_map(f)) for k, f in enumerate(p.piece_fibers))
    atoms = tuple((x, f, m) for (x, m), f in zip(p.base.atoms, p.atom_fibers))
    return TangentDecomposition(maps, atoms)


def tangent_membership(p: FiberPlan) -> tuple[bool, Optional[TangentDecomposition]]:
    """Whether ``p`` lies in the tangent cone, with its decomposition if so."""
    if all(isinstance(as_map(f), MapFiber) for f in p.piece_fibers):
        return True, _decompose(p)
    return False, None


def decompose_monotone(p: FiberPlan) -> TangentDecomposition:
    """Split a monotone plan into a nondecreasing map part and atomic spreads."""
    report = is_monotone(p)
    if not report.monotone:
        raise NotMonotoneError("plan support is not monotone", report.violation)
    dec = _decompose(p)
    rows = dec.u_intervals(p.base)
    for (_, _, hi), (_, lo, _) in zip(rows, rows[1:]):
        if hi - lo > 1e-12 * max(1.0, abs(hi), abs(lo)):
            raise NumericError("decomposed velocity is not nondecreasing")
    return dec


# -- witness steps -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WitnessStep:
    """One term of an approximating sequence for a tangent-cone element.

    ``pushed_n`` is (pi1, pi1 + tau_n*pi2)#plan_n and ``monotone_ok``
    records whether it passed :func:`is_monotone`.
    """

    n: int
    plan_n: FiberPlan
    tau_n: float
    pushed_n: FiberPlan
    wrho_to_target: float
    target: FiberPlan
    monotone_ok: bool
    details: dict = field(default_factory=dict)

    def csv_row(self):
        return (self.n, self.tau_n, self.wrho_to_target, self.monotone_ok)


def witness_step(n, plan_n, tau, target, **details) -> WitnessStep:
    """Package a plan and push size as a certified witness step."""
    pushed = fiber_affine_push(plan_n, 0.0, 1.0, tau)
    return WitnessStep(
        n=n,
        plan_n=plan_n,
        tau_n=tau,
        pushed_n=pushed,
        wrho_to_target=w_rho(plan_n, target),
        target=target,
        monotone_ok=is_monotone(pushed).monotone,
        details=details,
    )


def _side_values(g: PiecewiseAffineMap, c: float, bps: list[float]):
    """One-sided limits of ``g`` at breakpoint c, plus its value there."""
    k = bps.index(c)
    left_probe = bps[k - 1] if k > 0 else c - 1.0
    right_probe = bps[k + 1] if k + 1 < len(bps) else c + 1.0
    try:
        a, b = g.piece_at(0.5 * (left_probe + c))
        left = a + b * c
    except DomainError:
        left = None
    try:
        a, b = g.piece_at(0.5 * (c + right_probe))
        right = a + b * c
    except DomainError:
        right = None
    return left, right, g(c)


def _probe(lo: float, hi: float) -> float:
    """An interior point of the interval (lo, hi), which may be unbounded."""
    if math.isfinite(lo) and math.isfinite(hi):
        return 0.5 * (lo + hi)
    if math.isfinite(lo):
        return lo + 1.0
    if math.isfinite(hi):
        return hi - 1.0
    return 0.0


def ramp_smoothing(g: PiecewiseAffineMap, width: float):
    """Replace each downward jump of ``g`` by a linear ramp of the given width.

    The ramp lies on the side of the jump not containing the point value
    g(c), so the result agrees with g at every breakpoint.  Returns the
    new map and the list of (jump point, height, ramp window).
    """
    bps = g.breakpoints()
    ramps = []
    for c in bps:
        left, right, here = _side_values(g, c, bps)
        if left is None or right is None or left <= right:
            continue
        h = left - right
        if abs(here - right) <= abs(here - left):
            ramps.append((c, h, (c - width, c)))
        else:
            ramps.append((c, h, (c, c + width)))

    def correction(x):
        """(intercept, slope) added to g at x."""
        da = db = 0.0
        for c, h, (lo, hi) in ramps:
            if hi == c and lo <= x < c:
                # g - h * (x - lo) / width
                db -= h / width
                da += h * lo / width
            elif lo == c and c < x <= hi:
                # g + h * (hi - x) / width
                db -= h / width
                da += h * hi / width
        return da, db

    cuts = sorted(set(bps) | {t for _, _, win in ramps for t in win})
    pieces = []
    # point values first so the map agrees with g exactly at every cut
    for t in cuts:
        try:
            v = g(t)
        except DomainError:
            continue
        da, db = correction(t)
        pieces.append((t, t, v + da + db * t, 0.0))
    edges = [-math.inf] + cuts + [math.inf]
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = _probe(lo, hi)
        try:
            a, b = g.piece_at(mid)
        except DomainError:
            continue
        da, db = correction(mid)
        pieces.append((lo, hi, a + da, b + db))
    return PiecewiseAffineMap(tuple(pieces)), ramps


def witness_function(g_spec: PiecewiseAffineMap, base: ScalarMeasure, n: int) -> WitnessStep:
    """Witness for the map-induced plan (id, g_spec)#base.

    Downward jumps are smoothed by ramps of width 1/n and
    tau_n = 1/2 / max(1, max |g_n'|), so x + tau_n*g_n(x) is nondecreasing.
    """
    if n < 1:
        raise DomainError("n must be a positive integer")
    g_n, ramps = ramp_smoothing(g_spec, 1.0 / n)
    base_ref = base.split_at(g_spec.breakpoints() + g_n.breakpoints())
    lo, hi = base_ref.hull()
    tau = 0.5 / max(1.0, g_n.max_abs_slope(lo, hi))
    plan_n = graph_plan(base_ref, g_n)
    target = graph_plan(base_ref, g_spec)
    bound = 0.0
    for _, h, (w_lo, w_hi) in ramps:
        mass = sum(m for x, m in base_ref.atoms if w_lo <= x <= w_hi)
        for a, b, m in base_ref.pieces:
            overlap = min(b, w_hi) - max(a, w_lo)
            if overlap > 0:
                mass += m * overlap / (b - a)
        bound += mass * h * h
    return witness_step(n, plan_n, tau, target, ramp_bound_sq=bound, jumps=len(ramps))


def _atom_index(base: ScalarMeasure, x0: float) -> int:
    for i, (x, _) in enumerate(base.atoms):
        if abs(x - x0) <= MERGE_TOL:
            return i
    raise DomainError(f"{x0} is not an atom of the base")


def _s_bar_sq_integral(base: ScalarMeasure, skip: int, x0: float, n: int, alpha_n: float):
    """Integral of |S_bar_n|**2 against the base without the atom at x0,
    and the largest |S_bar_n| seen on the evaluation points."""
    h = alpha_n / n
    # S_bar_n is affine on each half-window
    left = (x0 - h, x0, n * x0 - alpha_n, -float(n))
    right = (x0, x0 + h, n * x0 + alpha_n, -float(n))

    def value(x):
        if x0 - h < x < x0:
            return left[2] + left[3] * x
        if x0 < x < x0 + h:
            return right[2] + right[3] * x
        return 0.0

    total, biggest = 0.0, 0.0
    for i, (x, m) in enumerate(base.atoms):
        if i == skip:
            continue
        v = value(x)
        total += m * v * v
        biggest = max(biggest, abs(v))
    for a, b, m in base.pieces:
        dens = m / (b - a)
        for lo, hi, c0, c1 in (left, right):
            s, e = max(a, lo), min(b, hi)
            if e > s:
                v0, v1 = c0 + c1 * s, c0 + c1 * e
                total += dens * (e - s) * (v0 * v0 + v0 * v1 + v1 * v1) / 3.0
                biggest = max(biggest, abs(v0), abs(v1))
    return total, biggest


def witness_atom(nu: ScalarMeasure, x0: float, base: ScalarMeasure, n: int) -> WitnessStep:
    """Witness for mu = m0 * nu x delta_{x0} + delta_0 x (rest of base).

    With alpha the half-width of the smallest symmetric interval holding
    supp nu and alpha_n = alpha * (1 - 1/(n+1)), the monotone plan m_n
    squeezes nu into [x0 - alpha_n/n, x0 + alpha_n/n] and pushes the rest
    of the base out of that window; mu_n is its difference quotient at
    step 1/n.
    """
    if n < 1:
        raise DomainError("n must be a positive integer")
    i0 = _atom_index(base, x0)
    x0, m0 = base.atoms[i0]
    lo_nu, hi_nu = nu.hull()
    alpha = max(abs(lo_nu), abs(hi_nu))
    alpha_n = alpha * (1.0 - 1.0 / (n + 1))
    h = alpha_n / n
    base_ref = base.split_at([x0 - h, x0, x0 + h])

    squeeze = PiecewiseAffineMap(
        (
            (-alpha_n, alpha_n, x0, 1.0 / n),
            (-math.inf, -alpha_n, x0 - h, 0.0),
            (alpha_n, math.inf, x0 + h, 0.0),
        )
    )

    def s_n(x):
        if x0 - h < x < x0:
            return x0 - h
        if x0 <= x < x0 + h:
            return x0 + h
        return x

    atom_fibers, target_atoms = [], []
    for i, (x, _) in enumerate(base_ref.atoms):
        if i == i0:
            atom_fibers.append(pushforward(nu, squeeze))
            target_atoms.append(nu)
        else:
            atom_fibers.append(dirac(s_n(x)))
            target_atoms.append(dirac(0.0))
    piece_fibers = []
    for a, b, _ in base_ref.pieces:
        mid = 0.5 * (a + b)
        piece_fibers.append(MapFiber(0.0, 1.0) if s_n(mid) == mid else MapFiber(s_n(mid), 0.0))
    m_n = FiberPlan(base_ref, tuple(atom_fibers), tuple(piece_fibers))
    target = FiberPlan(base_ref, tuple(target_atoms), tuple(MapFiber(0.0, 0.0) for _ in piece_fibers))
    mu_n = fiber_affine_push(m_n, 0.0, -float(n), float(n))

    s_bar_sq, s_bar_max = _s_bar_sq_integral(base_ref, i0, x0, n, alpha_n)
    clipped = pushforward(nu, PiecewiseAffineMap.clip(-alpha_n, alpha_n))
    nu_term = m0 * wasserstein2_squared(clipped, nu)
    step = witness_step(
        n,
        mu_n,
        1.0 / n,
        target,
        alpha=alpha,
        alpha_n=alpha_n,
        m_n=m_n,
        m_n_monotone=is_monotone(m_n).monotone,
        s_bar_sq=s_bar_sq,
        nu_term=nu_term,
        s_bar_max=s_bar_max,
    )
    gap = abs(step.wrho_to_target**2 - (s_bar_sq + nu_term))
    step.details["decomposition_gap"] = gap
    return step


# -- truncations ---------------------------------------------------------------


def _support_clip(level: float) -> PiecewiseAffineMap:
    """xi -> xi if |xi| <= level else 0."""
    return PiecewiseAffineMap(
        ((-level, level, 0.0, 1.0), (-math.inf, -level, 0.0, 0.0), (level, math.inf, 0.0, 0.0))
    )


def truncate_support(p: FiberPlan, level: float) -> FiberPlan:
    """Send all fiber mass outside [-level, level] to 0.

    Map-fiber pieces are cut where |a + b*x| = level, so the base piece
    list may be refined.
    """
    if level <= 0:
        raise DomainError("truncation level must be positive")
    clip = _support_clip(level)
    atom_fibers = []
    for f in p.atom_fibers:
        g = pushforward(f, clip)
        if wasserstein2_squared(g, f) > f.tail_second_moment(level) + 1e-12:
            raise NumericError("support truncation exceeded its tail bound")
        atom_fibers.append(g)
    cuts = []
    for (a, b, _), f in zip(p.base.pieces, p.piece_fibers):
        f = as_map(f)
        if isinstance(f, MapFiber) and f.b != 0.0:
            cuts += [(level - f.a) / f.b, (-level - f.a) / f.b]
    q = refine(FiberPlan(p.base, tuple(atom_fibers), p.piece_fibers), cuts)
    fibers = []
    for (a, b, _), f in zip(q.base.pieces, q.piece_fibers):
        f = as_map(f)
        if isinstance(f, MapFiber):
            keep = abs(f.at(0.5 * (a + b))) <= level
            fibers.append(f if keep else MapFiber(0.0, 0.0))
        else:
            fibers.append(type(f)(pushforward(f.measure, clip)))
    return FiberPlan(q.base, q.atom_fibers, tuple(fibers))


def support_tail_bound(p: FiberPlan, level: float) -> float:
    """Base-average of the fiber tail moments int_{|xi| > level} xi**2."""
    total = 0.0
    for (_, m), f in zip(p.base.atoms, p.atom_fibers):
        total += m * f.tail_second_moment(level)
    for (a, b, m), f in zip(p.base.pieces, p.piece_fibers):
        f = as_map(f)
        if isinstance(f, MapFiber):
            cuts = [a, b]
            if f.b != 0.0:
                cuts += [t for t in ((level - f.a) / f.b, (-level - f.a) / f.b) if a < t < b]
            cuts.sort()
            for lo, hi in zip(cuts[:-1], cuts[1:]):
                if abs(f.at(0.5 * (lo + hi))) > level:
                    y0, y1 = f.at(lo), f.at(hi)
                    total += m * (hi - lo) / (b - a) * (y0 * y0 + y0 * y1 + y1 * y1) / 3.0
        else:
            total += m * f.measure.tail_second_moment(level)
    return total


def atom_order(base: ScalarMeasure) -> list[int]:
    """Atom indices by decreasing mass, ties by increasing position."""
    return sorted(range(len(base.atoms)), key=lambda i: (-base.atoms[i][1], base.atoms[i][0]))


def truncate_atoms(p: FiberPlan, N: int) -> FiberPlan:
    """Keep the fibers of the N heaviest atoms; the others become delta_0."""
    if N < 0:
        raise DomainError("N must be nonnegative")
    dropped = set(atom_order(p.base)[N:])
    fibers = tuple(dirac(0.0) if i in dropped else f for i, f in enumerate(p.atom_fibers))
    out = FiberPlan(p.base, fibers, p.piece_fibers)
    expected = truncate_atoms_error_sq(p, N)
    if abs(w_rho_squared(out, p) - expected) > CHECK_TOL:
        raise NumericError("atom truncation error differs from its closed form")
    return out


def truncate_atoms_error_sq(p: FiberPlan, N: int) -> float:
    """sum over dropped atoms of m_i * int |xi|**2 d nu_i."""
    order = atom_order(p.base)
    return sum(p.base.atoms[i][1] * second_moment(p.atom_fibers[i]) for i in order[N:])


# -- convexity -----------------------------------------------------------------


def zero_witness(base: ScalarMeasure, tau: float, n: int = 1) -> WitnessStep:
    z = zero_plan(base)
    return witness_step(n, z, tau, z)


def refine_witness(w: WitnessStep, points) -> WitnessStep:
    plan_n = refine(w.plan_n, points)
    target = refine(w.target, points)
    return replace(
        w,
        plan_n=plan_n,
        target=target,
        pushed_n=fiber_affine_push(plan_n, 0.0, 1.0, w.tau_n),
    )


def align_witnesses(w1: WitnessStep, w2: WitnessStep) -> tuple[WitnessStep, WitnessStep]:
    """Put two witnesses on a common base refinement and the smaller tau."""
    cuts = piece_cuts(w1.plan_n) + piece_cuts(w2.plan_n) + piece_cuts(w1.target) + piece_cuts(w2.target)
    w1, w2 = refine_witness(w1, cuts), refine_witness(w2, cuts)
    tau = min(w1.tau_n, w2.tau_n)
    out = []
    for w in (w1, w2):
        if w.tau_n != tau:
            pushed = fiber_affine_push(w.plan_n, 0.0, 1.0, tau)
            w = replace(w, tau_n=tau, pushed_n=pushed, monotone_ok=is_monotone(pushed).monotone)
        out.append(w)
    return out[0], out[1]


def _midpoints_ok(summed_pushed: FiberPlan, g1: FiberPlan, g2: FiberPlan) -> bool:
    """Support of the pushed sum lies in fiberwise midpoints of g1, g2 supports."""
    for f, f1, f2 in zip(summed_pushed.atom_fibers, g1.atom_fibers, g2.atom_fibers):
        mids = 0.5 * (f1.positions[:, None] + f2.positions[None, :]).ravel()
        for y in f.positions:
            if np.min(np.abs(mids - y)) > 1e-9 * max(1.0, abs(y)):
                return False
    for f, f1, f2 in zip(summed_pushed.piece_fibers, g1.piece_fibers, g2.piece_fibers):
        f, f1, f2 = as_map(f), as_map(f1), as_map(f2)
        if isinstance(f, MapFiber):
            if abs(f.a - 0.5 * (f1.a + f2.a)) > 1e-9 or abs(f.b - 0.5 * (f1.b + f2.b)) > 1e-9:
                return False
    return True


def convexity_witness(w1: WitnessStep, w2: WitnessStep, strategy: str = "comonotone") -> WitnessStep:
    """Witness for a sum of two tangent elements.

    Both inputs must share base and tau.  The glued sum pushed with tau/2
    is fiberwise the midpoint of the two pushed witnesses, hence monotone.
    """
    check_same_base(w1.plan_n, w2.plan_n)
    check_same_base(w1.target, w2.target)
    if not math.isclose(w1.tau_n, w2.tau_n, rel_tol=1e-15, abs_tol=0.0):
        raise DomainError(f"witness push sizes differ: {w1.tau_n} vs {w2.tau_n}")
    summed = oplus_add(glue(w1.plan_n, w2.plan_n, strategy))
    target = add(w1.target, w2.target, strategy)
    step = witness_step(max(w1.n, w2.n), summed, 0.5 * w1.tau_n, target)
    step.details["midpoints_ok"] = _midpoints_ok(step.pushed_n, w1.pushed_n, w2.pushed_n)
    return step


# -- assembly ------------------------------------------------------------------


def linking_map(p: FiberPlan) -> PiecewiseAffineMap:
    """The map part g of a tangent plan, extended off the diffuse support.

    Gaps between pieces are bridged linearly and the ends held constant, so
    the only discontinuities are jumps between abutting pieces.
    """
    ok, dec = tangent_membership(p)
    if not ok:
        raise DomainError("plan is not in the tangent cone")
    if not p.base.pieces:
        return PiecewiseAffineMap.affine(0.0, 0.0)
    rows = []
    pieces = p.base.pieces
    for (k, g), (a, b, _) in zip(dec.map_part, pieces):
        rows.append((a, b, g.a, g.b))
    out = list(rows)
    for (a0, b0, ga0, gb0), (a1, b1, ga1, gb1) in zip(rows, rows[1:]):
        if a1 > b0:
            y0, y1 = ga0 + gb0 * b0, ga1 + gb1 * a1
            slope = (y1 - y0) / (a1 - b0)
            out.append((b0, a1, y0 - slope * b0, slope))
    a_first, _, ga, gb = rows[0]
    out.append((-math.inf, a_first, ga + gb * a_first, 0.0))
    _, b_last, ga, gb = rows[-1]
    out.append((b_last, math.inf, ga + gb * b_last, 0.0))
    return PiecewiseAffineMap(tuple(out))


def assemble_witness(p: FiberPlan, n: int, strategy: str = "comonotone") -> WitnessStep:
    """Witness step n for a tangent plan built from the constructive lemmas.

    The map part is handled by :func:`witness_function`; each atom fiber,
    shifted by the map value there, by :func:`witness_atom`; the pieces are
    added with :func:`convexity_witness`.
    """
    g = linking_map(p)
    step = witness_function(g, p.base, n)
    for (x, _), nu in zip(p.base.atoms, p.atom_fibers):
        shifted = pushforward(nu, PiecewiseAffineMap.translation(g(x)))
        if shifted.is_dirac and shifted.atoms[0][0] == 0.0:
            continue
        atom_step = witness_atom(shifted, x, p.base, n)
        step = convexity_witness(*align_witnesses(step, atom_step), strategy=strategy)
    return step


def witness_sequence(p: FiberPlan, ns, strategy: str = "comonotone") -> list[WitnessStep]:
    return [assemble_witness(p, int(n), strategy) for n in ns]


def refined_w_rho(p1: FiberPlan, p2: FiberPlan) -> float:
    """w_rho after cutting both plans on a common piece refinement."""
    return w_rho(*common_refinement(p1, p2))
