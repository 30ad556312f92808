"""Slow, independent ground-truth solvers used for validation only.

* :func:`oracle_w2` solves the discrete coupling LP with the transportation
  simplex (north-west corner start, MODI potentials, Bland's pivoting rule).
* :func:`oracle_project` computes the metric projection onto the monotone
  cone by Dykstra's cyclic projections onto the pairwise half-spaces
  ``z[k] <= z[k+1]``; it shares no code with the pool-adjacent-violators
  path in :mod:`monoplan.cone`.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError, SizeError
from .measures import ScalarMeasure, quantile_vector

MAX_W2_POINTS = 16
MAX_PROJECT_ATOMS = 4
MAX_PROJECT_CELLS = 6
DYKSTRA_TOL = 1e-11
DYKSTRA_MAX_SWEEPS = 10**6


@dataclass(frozen=True, eq=False)
class CouplingTable:
    """A coupling of two discrete measures given as a mass table."""

    row_positions: np.ndarray
    col_positions: np.ndarray
    row_masses: np.ndarray
    col_masses: np.ndarray
    cells: np.ndarray
    cost: float

    def __post_init__(self):
        if np.any(self.cells < -1e-15):
            raise NumericError("negative cell mass in coupling")
        if np.max(np.abs(self.cells.sum(axis=1) - self.row_masses)) > 1e-12:
            raise NumericError("row marginal mismatch")
        if np.max(np.abs(self.cells.sum(axis=0) - self.col_masses)) > 1e-12:
            raise NumericError("column marginal mismatch")

    def triples(self):
        """Nonzero cells as (y1, y2, mass) rows."""
        i, j = np.nonzero(self.cells > 0)
        return [
            (float(self.row_positions[a]), float(self.col_positions[b]), float(self.cells[a, b]))
            for a, b in zip(i, j)
        ]


def _northwest_corner(supply, demand):
    m, n = len(supply), len(demand)
    s, d = supply.copy(), demand.copy()
    x = np.zeros((m, n))
    basis = []
    i = j = 0
    while True:
        q = min(s[i], d[j])
        x[i, j] = q
        s[i] -= q
        d[j] -= q
        basis.append((i, j))
        if i == m - 1 and j == n - 1:
            break
        if i == m - 1:
            j += 1
        elif j == n - 1:
            i += 1
        elif s[i] <= d[j]:
            i += 1
        else:
            j += 1
    # leftover rounding lands on the last cell
    x[m - 1, n - 1] += max(s[m - 1], 0.0)
    return x, basis


def _potentials(cost, basis, m, n):
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    u[0] = 0.0
    by_row = [[] for _ in range(m)]
    by_col = [[] for _ in range(n)]
    for i, j in basis:
        by_row[i].append(j)
        by_col[j].append(i)
    queue = deque([("r", 0)])
    while queue:
        kind, k = queue.popleft()
        if kind == "r":
            for j in by_row[k]:
                if np.isnan(v[j]):
                    v[j] = cost[k, j] - u[k]
                    queue.append(("c", j))
        else:
            for i in by_col[k]:
                if np.isnan(u[i]):
                    u[i] = cost[i, k] - v[k]
                    queue.append(("r", i))
    return u, v


def _tree_path(basis, m, start_row, end_col):
    """Cells on the basis-tree path from row ``start_row`` to column ``end_col``."""
    adj = {}
    for i, j in basis:
        adj.setdefault(("r", i), []).append((("c", j), (i, j)))
        adj.setdefault(("c", j), []).append((("r", i), (i, j)))
    start, goal = ("r", start_row), ("c", end_col)
    prev = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nxt, cell in adj.get(node, []):
            if nxt not in prev:
                prev[nxt] = (node, cell)
                queue.append(nxt)
    path = []
    node = goal
    while prev[node] is not None:
        node, cell = prev[node]
        path.append(cell)
    return path[::-1]


def transport_simplex(supply, demand, cost, max_pivots: int = 100_000):
    """Minimise <cost, x> over couplings of ``supply`` and ``demand``.

    Returns the optimal mass table.
    """
    supply = np.asarray(supply, dtype=float)
    demand = np.asarray(demand, dtype=float)
    cost = np.asarray(cost, dtype=float)
    m, n = cost.shape
    x, basis = _northwest_corner(supply, demand)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(cost))))
    for _ in range(max_pivots):
        u, v = _potentials(cost, basis, m, n)
        reduced = cost - u[:, None] - v[None, :]
        in_basis = np.zeros((m, n), dtype=bool)
        for i, j in basis:
            in_basis[i, j] = True
        reduced[in_basis] = 0.0
        neg = np.argwhere(reduced < -tol)
        if not len(neg):
            return x
        ei, ej = (int(neg[0][0]), int(neg[0][1]))  # Bland: lowest index enters
        path = _tree_path(basis, m, ei, ej)
        minus = path[0::2]
        theta = min(x[c] for c in minus)
        leaving = min(c for c in minus if x[c] == theta)
        x[ei, ej] += theta
        for k, c in enumerate(path):
            x[c] += -theta if k % 2 == 0 else theta
        x[leaving] = 0.0
        basis.remove(leaving)
        basis.append((ei, ej))
    raise NumericError("transportation simplex exceeded pivot budget")


def oracle_coupling(m1: ScalarMeasure, m2: ScalarMeasure) -> CouplingTable:
    """Optimal quadratic-cost coupling of two small atomic measures."""
    for mu in (m1, m2):
        if not mu.is_atomic:
            raise DomainError("oracle handles purely atomic measures only")
        if len(mu.atoms) > MAX_W2_POINTS:
            raise SizeError(f"oracle limited to {MAX_W2_POINTS} support points")
    xs, ys = m1.positions, m2.positions
    cost = (xs[:, None] - ys[None, :]) ** 2
    cells = np.clip(transport_simplex(m1.masses, m2.masses, cost), 0.0, None)
    return CouplingTable(xs, ys, m1.masses, m2.masses, cells, float(np.sum(cells * cost)))


def oracle_w2(m1: ScalarMeasure, m2: ScalarMeasure) -> float:
    return float(np.sqrt(max(oracle_coupling(m1, m2).cost, 0.0)))


def _dykstra_chain(target, weights, tol=DYKSTRA_TOL, max_sweeps=DYKSTRA_MAX_SWEEPS):
    """Weighted projection of ``target`` onto nondecreasing vectors."""
    x = [float(t) for t in target]
    w = [float(c) for c in weights]
    k_max = len(x) - 1
    incr = [[0.0, 0.0] for _ in range(k_max)]
    for _ in range(max_sweeps):
        prev = x[:]
        for k in range(k_max):
            p = incr[k]
            a = x[k] + p[0]
            b = x[k + 1] + p[1]
            if a > b:
                pa = pb = (w[k] * a + w[k + 1] * b) / (w[k] + w[k + 1])
            else:
                pa, pb = a, b
            p[0], p[1] = a - pa, b - pb
            x[k], x[k + 1] = pa, pb
        if max(abs(a - b) for a, b in zip(x, prev)) < tol:
            return np.array(x)
    raise NumericError(f"Dykstra did not converge in {max_sweeps} sweeps")


def oracle_project(p, grid_cells: int = 6):
    """Metric projection onto the monotone cone by Dykstra's algorithm.

    Returns ``(projected_plan, distance)`` for plans with an atomic base of at
    most four atoms and fibers of at most six quantile cells.
    """
    from .plans import FiberPlan, w_rho

    if p.base.pieces:
        raise DomainError("oracle_project needs an atomic base")
    if len(p.base.atoms) > MAX_PROJECT_ATOMS:
        raise SizeError(f"oracle_project limited to {MAX_PROJECT_ATOMS} base atoms")
    vectors = [quantile_vector(f, grid_cells) for f in p.atom_fibers]
    if any(len(q.values) > MAX_PROJECT_CELLS for q in vectors):
        raise SizeError(f"oracle_project limited to {MAX_PROJECT_CELLS} cells per fiber")
    target = np.concatenate([q.values for q in vectors])
    weights = np.concatenate([m * q.cell_masses for (_, m), q in zip(p.base.atoms, vectors)])
    solved = _dykstra_chain(target, weights)
    fibers, start = [], 0
    for q in vectors:
        k = len(q.values)
        fibers.append(ScalarMeasure(tuple(zip(solved[start : start + k], q.cell_masses))))
        start += k
    proj = FiberPlan(p.base, tuple(fibers), ())
    return proj, w_rho(p, proj)


def oracle_chain_values(p, grid_cells: int = 6) -> np.ndarray:
    """Concatenated projected quantile values, for grid-wise comparison."""
    vectors = [quantile_vector(f, grid_cells) for f in p.atom_fibers]
    target = np.concatenate([q.values for q in vectors])
    weights = np.concatenate([m * q.cell_masses for (_, m), q in zip(p.base.atoms, vectors)])
    return _dykstra_chain(target, weights)
