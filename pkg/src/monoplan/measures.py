"""Probability measures on the real line with exact quantile calculus.

A :class:`ScalarMeasure` is a finite sum of point masses plus finitely many
uniform pieces.  Every quantity used downstream (quantiles, second moments,
the quadratic Wasserstein distance) is computed in closed form: the quantile
function of such a measure is piecewise affine in the mass variable, so the
L2 distance between two quantile functions is an exact sum of integrals of
quadratics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError

MERGE_TOL = 1e-12
MASS_TOL = 1e-12

_MEASURE_KEYS = {"atoms", "pieces"}
_ATOM_KEYS = {"x", "m"}
_PIECE_KEYS = {"a", "b", "m"}


def _canonical_atoms(atoms):
    rows = []
    for x, m in atoms:
        x, m = float(x), float(m)
        if not (np.isfinite(x) and np.isfinite(m)):
            raise DomainError(f"non-finite atom ({x}, {m})")
        if m < 0:
            raise DomainError(f"negative atom mass {m} at {x}")
        if m > 0:
            rows.append((x, m))
    rows.sort()
    merged = []
    for x, m in rows:
        if merged and x - merged[-1][0] < MERGE_TOL:
            merged[-1] = (merged[-1][0], merged[-1][1] + m)
        else:
            merged.append((x, m))
    return merged


def _canonical_pieces(pieces):
    rows = []
    for a, b, m in pieces:
        a, b, m = float(a), float(b), float(m)
        if not (np.isfinite(a) and np.isfinite(b) and np.isfinite(m)):
            raise DomainError(f"non-finite piece ({a}, {b}, {m})")
        if not b > a:
            raise DomainError(f"piece [{a}, {b}] has non-positive length")
        if m < 0:
            raise DomainError(f"negative piece mass {m} on [{a}, {b}]")
        if m > 0:
            rows.append((a, b, m))
    rows.sort()
    for (a0, b0, _), (a1, _, _) in zip(rows, rows[1:]):
        if a1 < b0 - MERGE_TOL:
            raise DomainError(f"pieces [{a0}, {b0}] and [{a1}, ...] overlap")
    return rows


def disjoint_pieces(pieces: Iterable[tuple[float, float, float]]):
    """Rewrite possibly overlapping uniform pieces as disjoint ones.

    Densities add on overlaps, so the represented measure is unchanged.
    """
    pieces = [(float(a), float(b), float(m)) for a, b, m in pieces if m > 0 and b > a]
    if not pieces:
        return []
    cuts = np.unique(np.array([p[0] for p in pieces] + [p[1] for p in pieces]))
    out = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (lo + hi)
        dens = sum(m / (b - a) for a, b, m in pieces if a <= mid <= b)
        if dens > 0:
            out.append((float(lo), float(hi), dens * (hi - lo)))
    return out


@dataclass(frozen=True)
class ScalarMeasure:
    """Point masses plus uniform pieces, normalised to total mass one.

    Atoms closer than ``MERGE_TOL`` are merged, zero masses dropped and the
    total rescaled to one; the total seen before rescaling is kept on
    ``raw_total``.  An atom may sit inside a piece (the measure is the sum).
    """

    atoms: tuple[tuple[float, float], ...] = ()
    pieces: tuple[tuple[float, float, float], ...] = ()
    raw_total: float = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        atoms = _canonical_atoms(self.atoms)
        pieces = _canonical_pieces(self.pieces)
        total = sum(m for _, m in atoms) + sum(m for _, _, m in pieces)
        if total <= 0:
            raise DomainError("measure has zero total mass")
        object.__setattr__(self, "raw_total", total)
        if abs(total - 1.0) <= 1e-14:
            # already normalised up to rounding; rescaling would only jitter masses
            total = 1.0
        object.__setattr__(self, "atoms", tuple((x, m / total) for x, m in atoms))
        object.__setattr__(
            self, "pieces", tuple((a, b, m / total) for a, b, m in pieces)
        )

    # -- basic views -------------------------------------------------------

    @property
    def positions(self) -> np.ndarray:
        return np.array([x for x, _ in self.atoms], dtype=float)

    @property
    def masses(self) -> np.ndarray:
        return np.array([m for _, m in self.atoms], dtype=float)

    @property
    def is_atomic(self) -> bool:
        return not self.pieces

    @property
    def is_dirac(self) -> bool:
        return not self.pieces and len(self.atoms) == 1

    @property
    def diffuse_mass(self) -> float:
        return sum(m for _, _, m in self.pieces)

    def hull(self) -> tuple[float, float]:
        """Smallest closed interval containing the support."""
        lo = [x for x, _ in self.atoms] + [a for a, _, _ in self.pieces]
        hi = [x for x, _ in self.atoms] + [b for _, b, _ in self.pieces]
        return min(lo), max(hi)

    def mean(self) -> float:
        return sum(x * m for x, m in self.atoms) + sum(
            0.5 * (a + b) * m for a, b, m in self.pieces
        )

    def variance(self) -> float:
        return max(second_moment(self) - self.mean() ** 2, 0.0)

    def tail_second_moment(self, level: float) -> float:
        """Integral of x**2 over {|x| > level}."""
        total = sum(m * x * x for x, m in self.atoms if abs(x) > level)
        for a, b, m in self.pieces:
            dens = m / (b - a)
            for lo, hi in ((a, min(b, -level)), (max(a, level), b)):
                if hi > lo:
                    total += dens * (hi**3 - lo**3) / 3.0
        return total

    def split_at(self, points: Iterable[float]) -> "ScalarMeasure":
        """Same measure with pieces cut at every given interior point."""
        pts = sorted(set(float(p) for p in points))
        pieces = []
        for a, b, m in self.pieces:
            cuts = [a] + [p for p in pts if a < p < b] + [b]
            for lo, hi in zip(cuts[:-1], cuts[1:]):
                pieces.append((lo, hi, m * (hi - lo) / (b - a)))
        return ScalarMeasure(self.atoms, tuple(pieces))

    def difference(self, other: "ScalarMeasure", tol: float = MERGE_TOL):
        """Describe the first component differing from ``other``, or ``None``."""
        if len(self.atoms) != len(other.atoms):
            return f"atom count {len(self.atoms)} != {len(other.atoms)}"
        if len(self.pieces) != len(other.pieces):
            return f"piece count {len(self.pieces)} != {len(other.pieces)}"
        for i, (p, q) in enumerate(zip(self.atoms, other.atoms)):
            if abs(p[0] - q[0]) > tol or abs(p[1] - q[1]) > tol:
                return f"atom {i}: {p} != {q}"
        for i, (p, q) in enumerate(zip(self.pieces, other.pieces)):
            if any(abs(u - v) > tol for u, v in zip(p, q)):
                return f"piece {i}: {p} != {q}"
        return None

    # -- quantile representation ------------------------------------------

    @cached_property
    def _segments(self):
        """Quantile function as affine segments over mass intervals.

        Row k covers masses (s_lo[k], s_hi[k]] and maps them affinely onto
        [t_lo[k], t_hi[k]]; atoms have t_lo == t_hi.
        """
        atom_at = dict(self.atoms)
        crit = sorted(
            set(atom_at) | {a for a, _, _ in self.pieces} | {b for _, b, _ in self.pieces}
        )
        lefts = np.array([a for a, _, _ in self.pieces])
        rows = []
        cum = 0.0
        for k, c in enumerate(crit):
            if c in atom_at:
                m = atom_at[c]
                rows.append((cum, cum + m, c, c))
                cum += m
            if k + 1 < len(crit) and len(lefts):
                nxt = crit[k + 1]
                mid = 0.5 * (c + nxt)
                j = int(np.searchsorted(lefts, mid, side="right")) - 1
                if j >= 0:
                    a, b, m = self.pieces[j]
                    if a <= c and nxt <= b:
                        mass = m * (nxt - c) / (b - a)
                        rows.append((cum, cum + mass, c, nxt))
                        cum += mass
        seg = np.array(rows, dtype=float)
        seg[:, :2] /= cum
        seg[-1, 1] = 1.0
        seg[1:, 0] = seg[:-1, 1]
        return seg

    # -- serialisation -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "atoms": [{"x": x, "m": m} for x, m in self.atoms],
            "pieces": [{"a": a, "b": b, "m": m} for a, b, m in self.pieces],
        }

    @classmethod
    def from_dict(cls, data) -> "ScalarMeasure":
        if not isinstance(data, dict):
            raise DomainError("measure must be a JSON object")
        extra = set(data) - _MEASURE_KEYS
        if extra:
            raise DomainError(f"unknown measure fields: {sorted(extra)}")
        atoms, pieces = [], []
        for item in data.get("atoms", []):
            _check_keys(item, _ATOM_KEYS, "atom")
            atoms.append((item["x"], item["m"]))
        for item in data.get("pieces", []):
            _check_keys(item, _PIECE_KEYS, "piece")
            pieces.append((item["a"], item["b"], item["m"]))
        return cls(tuple(atoms), tuple(pieces))


def _check_keys(item, keys, what):
    if not isinstance(item, dict):
        raise DomainError(f"{what} must be a JSON object")
    if set(item) != keys:
        raise DomainError(f"{what} needs exactly the fields {sorted(keys)}, got {sorted(item)}")
    for k in keys:
        if isinstance(item[k], bool) or not isinstance(item[k], (int, float)):
            raise DomainError(f"{what} field {k!r} must be a number")


# -- constructors --------------------------------------------------------------


def dirac(x: float) -> ScalarMeasure:
    return ScalarMeasure(((x, 1.0),))


def uniform(a: float, b: float) -> ScalarMeasure:
    return ScalarMeasure((), ((a, b, 1.0),))


def discrete(xs: Sequence[float], ms: Sequence[float] | None = None) -> ScalarMeasure:
    """Atomic measure; equal weights when ``ms`` is omitted."""
    if ms is None:
        ms = [1.0] * len(xs)
    return ScalarMeasure(tuple(zip(xs, ms)))


def mixture(parts: Sequence[ScalarMeasure], weights: Sequence[float]) -> ScalarMeasure:
    """Convex combination of measures (pieces may overlap; densities add)."""
    atoms, pieces = [], []
    for mu, w in zip(parts, weights):
        atoms += [(x, w * m) for x, m in mu.atoms]
        pieces += [(a, b, w * m) for a, b, m in mu.pieces]
    return ScalarMeasure(tuple(atoms), tuple(disjoint_pieces(pieces)))


# -- piecewise affine maps -----------------------------------------------------


@dataclass(frozen=True)
class PiecewiseAffineMap:
    """x -> a + b*x on finitely many closed intervals.

    ``pieces`` holds ``(lo, hi, a, b)`` rows; where intervals overlap (at a
    shared endpoint, say) the first matching row wins.
    """

    pieces: tuple[tuple[float, float, float, float], ...]

    @classmethod
    def affine(cls, a: float, b: float) -> "PiecewiseAffineMap":
        return cls(((-np.inf, np.inf, float(a), float(b)),))

    @classmethod
    def scaling(cls, lam: float) -> "PiecewiseAffineMap":
        """x -> lam * x."""
        return cls.affine(0.0, lam)

    @classmethod
    def translation(cls, u: float) -> "PiecewiseAffineMap":
        """x -> x - u."""
        return cls.affine(-u, 1.0)

    @classmethod
    def clip(cls, lo: float, hi: float) -> "PiecewiseAffineMap":
        return cls(
            (
                (lo, hi, 0.0, 1.0),
                (-np.inf, lo, float(lo), 0.0),
                (hi, np.inf, float(hi), 0.0),
            )
        )

    def piece_at(self, x: float) -> tuple[float, float]:
        for lo, hi, a, b in self.pieces:
            if lo <= x <= hi:
                return a, b
        raise DomainError(f"map undefined at {x}")

    def __call__(self, x: float) -> float:
        a, b = self.piece_at(x)
        return a + b * x

    def breakpoints(self) -> list[float]:
        pts = {p for lo, hi, _, _ in self.pieces for p in (lo, hi)}
        return sorted(p for p in pts if np.isfinite(p))

    def max_abs_slope(self, lo: float = -np.inf, hi: float = np.inf) -> float:
        """Largest |b| over pieces meeting the open interval (lo, hi)."""
        slopes = [abs(b) for l, h, _, b in self.pieces if h > lo and l < hi]
        return max(slopes, default=0.0)


def pushforward(m: ScalarMeasure, f: PiecewiseAffineMap) -> ScalarMeasure:
    """Image measure f#m.

    Atoms map to atoms; a uniform piece maps to a uniform piece under a
    non-constant affine branch and to an atom under a constant one.
    """
    atoms = [(f(x), w) for x, w in m.atoms]
    pieces = []
    bps = f.breakpoints()
    for l, r, w in m.pieces:
        cuts = [l] + [p for p in bps if l < p < r] + [r]
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            a, b = f.piece_at(0.5 * (lo + hi))
            mass = w * (hi - lo) / (r - l)
            if b == 0.0:
                atoms.append((a, mass))
            else:
                y0, y1 = sorted((a + b * lo, a + b * hi))
                pieces.append((y0, y1, mass))
    return ScalarMeasure(tuple(atoms), tuple(disjoint_pieces(pieces)))


# -- quantiles and distances ---------------------------------------------------


def _eval_segments(seg: np.ndarray, s: np.ndarray, where: np.ndarray) -> np.ndarray:
    """Affine quantile value at masses ``s`` using segment rows ``where``."""
    rows = seg[where]
    s_lo, s_hi, t_lo, t_hi = rows.T
    flat = t_lo == t_hi
    frac = np.where(flat, 0.0, (s - s_lo) / np.where(flat, 1.0, s_hi - s_lo))
    return np.where(flat, t_lo, t_lo + frac * (t_hi - t_lo))


def quantile(m: ScalarMeasure, s: float) -> float:
    """Generalised inverse CDF: inf{t : F(t) >= s} for s in (0, 1)."""
    if not 0.0 < s < 1.0:
        raise DomainError(f"quantile level {s} outside (0, 1)")
    seg = m._segments
    k = min(int(np.searchsorted(seg[:, 1], s, side="left")), len(seg) - 1)
    return float(_eval_segments(seg, np.array([s]), np.array([k]))[0])


def _locate(seg: np.ndarray, s: np.ndarray) -> np.ndarray:
    k = np.searchsorted(seg[:, 1], s, side="left")
    return np.minimum(k, len(seg) - 1)


def wasserstein2_squared(m1: ScalarMeasure, m2: ScalarMeasure) -> float:
    seg1, seg2 = m1._segments, m2._segments
    grid = np.unique(np.concatenate(([0.0], seg1[:, 1], seg2[:, 1])))
    lo, hi = grid[:-1], grid[1:]
    mid = 0.5 * (lo + hi)
    k1, k2 = _locate(seg1, mid), _locate(seg2, mid)
    d0 = _eval_segments(seg1, lo, k1) - _eval_segments(seg2, lo, k2)
    d1 = _eval_segments(seg1, hi, k1) - _eval_segments(seg2, hi, k2)
    return float(np.sum((hi - lo) * (d0 * d0 + d0 * d1 + d1 * d1)) / 3.0)


def wasserstein2(m1: ScalarMeasure, m2: ScalarMeasure) -> float:
    """Quadratic Wasserstein distance, exact for piecewise-uniform measures.

    Computed as the L2(0, 1) distance between quantile functions; both are
    piecewise affine on the merged mass grid, so each cell contributes
    len * (d0**2 + d0*d1 + d1**2) / 3 with d0, d1 the endpoint gaps.
    """
    return float(np.sqrt(max(wasserstein2_squared(m1, m2), 0.0)))


def second_moment(m: ScalarMeasure) -> float:
    return sum(w * x * x for x, w in m.atoms) + sum(
        w * (a * a + a * b + b * b) / 3.0 for a, b, w in m.pieces
    )


# -- quantile vectors ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuantileVector:
    """Step-function quantile on a mass grid.

    ``values[k]`` is the quantile on the mass cell (breakpoints[k-1],
    breakpoints[k]]; ``breakpoints[-1] == 1``.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if bp.shape != vals.shape or bp.ndim != 1 or not len(bp):
            raise DomainError("breakpoints and values must be equal-length vectors")
        if np.any(np.diff(bp) <= 0) or bp[0] <= 0 or abs(bp[-1] - 1.0) > 1e-12:
            raise DomainError("breakpoints must increase strictly to 1")
        if np.any(np.diff(vals) < 0):
            raise DomainError("quantile values must be nondecreasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @property
    def cell_masses(self) -> np.ndarray:
        return np.diff(self.breakpoints, prepend=0.0)

    def to_measure(self) -> ScalarMeasure:
        return ScalarMeasure(tuple(zip(self.values, self.cell_masses)))


def quantile_vector(m: ScalarMeasure, cells: int = 1024) -> QuantileVector:
    """Discretise the quantile function of ``m``.

    Atomic measures are represented exactly (one cell per atom).  Diffuse
    segments are cut by the uniform grid k/cells and each cell carries the
    average of the quantile over it, i.e. the L2-nearest step function.
    """
    seg = m._segments
    if m.is_atomic:
        return QuantileVector(seg[:, 1].copy(), seg[:, 2].copy())
    if cells < 1:
        raise DomainError("cells must be positive")
    grid = np.unique(np.concatenate((seg[:, 1], np.arange(1, cells + 1) / cells)))
    lo = np.concatenate(([0.0], grid[:-1]))
    keep = grid - lo > 0
    grid, lo = grid[keep], lo[keep]
    mid = 0.5 * (lo + grid)
    vals = _eval_segments(seg, mid, _locate(seg, mid))
    return QuantileVector(grid, vals)
