"""Exact discrete optimal transport via the transportation simplex.

The solver returns a *vertex* of the transportation polytope, i.e. a basic
feasible solution with at most ``m + n - 1`` positive entries.  Vertex
solutions matter here: the policy-improvement step of the exact coupling
solver is only guaranteed to terminate when every row it adopts is an
extreme point of its row polytope.

Pivot selection is Dantzig's rule (most negative reduced cost, smallest
flat index on ties) for speed, degrading permanently to Bland's rule after
a pivot budget so degenerate instances cannot cycle.  Both rules are
deterministic, so equal-cost vertices resolve the same way on every run.
Costs may be signed; optimality is decided from reduced costs, so adding a
constant to the cost shifts the objective by that constant and nothing
else.

``solve_exact_ot_lexico`` minimizes a secondary cost over the optimal face
of a primary cost without leaving the vertex set: after the primary stage
it keeps pivoting on the secondary, admitting only entering cells whose
primary reduced cost is zero at the current basis, so the primary value
never moves.

Row solves inside policy iteration hit the same marginals over and over
with changing costs, so both entry points accept a warm-start plan whose
support seeds the initial basis tree.
"""

from __future__ import annotations

import numpy as np

from .markov import InvalidInputError, NumericalError, validate_distribution

PIVOT_REL_TOL = 1e-11
MAX_PIVOTS = 200_000


def _cost_scale(C: np.ndarray) -> float:
    return max(1.0, float(np.abs(C).max()))


def _northwest_corner(r: np.ndarray, c: np.ndarray) -> list[tuple[int, int]]:
    """Initial spanning basis of m + n - 1 cells."""
    m, n = r.size, c.size
    a = r.copy()
    b = c.copy()
    basis = []
    i = j = 0
    for _ in range(m + n - 1):
        basis.append((i, j))
        t = min(a[i], b[j])
        a[i] -= t
        b[j] -= t
        if i == m - 1:
            j += 1
        elif j == n - 1:
            i += 1
        elif a[i] <= b[j]:
            i += 1
        else:
            j += 1
    return basis


def _basis_from_support(support: np.ndarray) -> list[tuple[int, int]] | None:
    """Grow a support forest into a spanning basis tree, deterministically.

    ``support`` is a boolean (m, n) mask; any vertex plan's support is a
    forest on the bipartite row/column graph.  Missing edges are added in
    flat-index order, each joining two components.  Returns None when the
    mask cannot seed a basis (a cycle, or too many cells), so callers fall
    back to a cold start.
    """
    m, n = support.shape
    parent = list(range(m + n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    basis: list[tuple[int, int]] = []
    for i, j in zip(*np.nonzero(support)):
        ra, rb = find(int(i)), find(m + int(j))
        if ra == rb:
            return None
        parent[ra] = rb
        basis.append((int(i), int(j)))
    if len(basis) > m + n - 1:
        return None
    for flat in range(m * n):
        if len(basis) == m + n - 1:
            break
        i, j = divmod(flat, n)
        ra, rb = find(i), find(m + j)
        if ra != rb:
            parent[ra] = rb
            basis.append((i, j))
    return basis if len(basis) == m + n - 1 else None


class _BasisTree:
    """Spanning-tree basis with flows, duals and pivoting.

    Nodes 0..m-1 are rows, m..m+n-1 are columns.  ``adj`` maps node ->
    list of (neighbor, basis slot); slots are stable across pivots so
    ``flows`` tracks cells by slot.
    """

    def __init__(self, basis: list[tuple[int, int]], r: np.ndarray, c: np.ndarray):
        self.m, self.n = r.size, c.size
        self.basis = list(basis)
        self.adj: list[list[tuple[int, int]]] = [[] for _ in range(self.m + self.n)]
        for k, (i, j) in enumerate(self.basis):
            self.adj[i].append((self.m + j, k))
            self.adj[self.m + j].append((i, k))
        self.flows = self._flows_from_marginals(r, c)

    def _flows_from_marginals(self, r: np.ndarray, c: np.ndarray) -> np.ndarray:
        """Leaf elimination: flows telescoped exactly from the marginals."""
        m = self.m
        a = r.copy()
        b = c.copy()
        deg = np.zeros(m + self.n, dtype=int)
        for i, j in self.basis:
            deg[i] += 1
            deg[m + j] += 1
        alive = [True] * len(self.basis)
        flows = np.zeros(len(self.basis))
        stack = [v for v in range(m + self.n) if deg[v] == 1]
        while stack:
            node = stack.pop()
            if deg[node] != 1:
                continue
            k = next(k for nbr, k in self.adj[node] if alive[k])
            i, j = self.basis[k]
            f = a[i] if node < m else b[j]
            flows[k] = max(f, 0.0)
            a[i] -= f
            b[j] -= f
            alive[k] = False
            deg[i] -= 1
            deg[m + j] -= 1
            for other in (i, m + j):
                if deg[other] == 1:
                    stack.append(other)
        return flows

    def duals(self, cost: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Node potentials with u[i] + v[j] = cost[i, j] on basis cells."""
        m = self.m
        u = np.empty(m)
        v = np.empty(self.n)
        seen = [False] * (m + self.n)
        u[0] = 0.0
        seen[0] = True
        stack = [0]
        while stack:
            node = stack.pop()
            for nbr, k in self.adj[node]:
                if not seen[nbr]:
                    seen[nbr] = True
                    i, j = self.basis[k]
                    if nbr >= m:
                        v[nbr - m] = cost[i, j] - u[i]
                    else:
                        u[nbr] = cost[i, j] - v[j]
                    stack.append(nbr)
        return u, v

    def _path(self, start: int, goal: int) -> list[int]:
        """Basis slots along the unique tree path from start to goal."""
        prev: dict[int, tuple[int, int]] = {start: (-1, -1)}
        stack = [start]
        while stack:
            node = stack.pop()
            if node == goal:
                break
            for nbr, k in self.adj[node]:
                if nbr not in prev:
                    prev[nbr] = (node, k)
                    stack.append(nbr)
        path = []
        node = goal
        while prev[node][0] != -1:
            node, k = prev[node]
            path.append(k)
        path.reverse()
        return path

    def pivot(self, enter: tuple[int, int]) -> tuple[int, int]:
        """Bring ``enter`` into the basis along its cycle; drop the blocker.

        The tree path from enter's row to its column alternates signs
        starting with minus, so even path positions lose flow; the smallest
        such flow leaves (smallest flat index on ties).  Returns the cell
        that left.
        """
        m, n = self.m, self.n
        path = self._path(enter[0], m + enter[1])
        minus = path[0::2]
        theta = min(self.flows[k] for k in minus)
        leave = min(
            (k for k in minus if self.flows[k] <= theta),
            key=lambda k: self.basis[k][0] * n + self.basis[k][1],
        )
        for pos, k in enumerate(path):
            self.flows[k] += theta if pos % 2 else -theta
        old = self.basis[leave]
        self.adj[old[0]] = [(nb, k) for nb, k in self.adj[old[0]] if k != leave]
        self.adj[m + old[1]] = [(nb, k) for nb, k in self.adj[m + old[1]] if k != leave]
        self.basis[leave] = enter
        self.flows[leave] = theta
        self.adj[enter[0]].append((m + enter[1], leave))
        self.adj[m + enter[1]].append((enter[0], leave))
        return old

    def plan(self, r: np.ndarray, c: np.ndarray) -> np.ndarray:
        """Dense plan from the final basis, flows rebalanced to the marginals."""
        flows = self._flows_from_marginals(r, c)
        out = np.zeros((self.m, self.n))
        for k, (i, j) in enumerate(self.basis):
            out[i, j] = flows[k]
        return out


def _optimize(tree: _BasisTree, objective: np.ndarray, face_of=None, face_tol=None) -> None:
    """Pivot until no admissible entering cell improves ``objective``.

    With ``face_of`` set, entering cells must also have zero reduced cost
    (within ``face_tol``) for that primary objective at the current basis,
    which confines the walk to the primary-optimal face.
    """
    m, n = tree.m, tree.n
    tol = PIVOT_REL_TOL * _cost_scale(objective)
    if face_of is not None and face_tol is None:
        face_tol = PIVOT_REL_TOL * _cost_scale(face_of)
    dantzig_budget = 20 * (m + n)
    basis_mask = np.zeros((m, n), dtype=bool)
    for i, j in tree.basis:
        basis_mask[i, j] = True
    for pivots in range(MAX_PIVOTS):
        u, v = tree.duals(objective)
        reduced = objective - u[:, None] - v[None, :]
        admissible = ~basis_mask & (reduced < -tol)
        if face_of is not None:
            up, vp = tree.duals(face_of)
            admissible &= np.abs(face_of - up[:, None] - vp[None, :]) <= face_tol
        flat = np.flatnonzero(admissible.ravel())
        if flat.size == 0:
            return
        if pivots < dantzig_budget:
            enter_flat = int(flat[np.argmin(reduced.ravel()[flat])])
        else:
            enter_flat = int(flat[0])  # Bland fallback: smallest index, cannot cycle
        enter = (enter_flat // n, enter_flat % n)
        left = tree.pivot(enter)
        basis_mask[left] = False
        basis_mask[enter] = True
    raise NumericalError("transportation simplex exceeded pivot limit")


def _solve_core(r, c, cost, secondary=None, face_tol=None, warm=None) -> np.ndarray:
    m, n = r.size, c.size
    if m == 1 or n == 1:
        return np.outer(r, c) / r.sum()  # forced: the polytope is a point
    basis = _basis_from_support(warm > 0) if warm is not None else None
    if basis is None:
        basis = _northwest_corner(r, c)
    tree = _BasisTree(basis, r, c)
    _optimize(tree, cost)
    if secondary is not None:
        _optimize(tree, secondary, face_of=cost, face_tol=face_tol)
    return tree.plan(r, c)


def _validate_pair(r, c, cost):
    r = validate_distribution(r, "row marginal")
    c = validate_distribution(c, "column marginal")
    cost = np.asarray(cost, dtype=float)
    if cost.shape != (r.size, c.size):
        raise InvalidInputError(
            f"cost must have shape ({r.size}, {c.size}), got {cost.shape}"
        )
    if not np.all(np.isfinite(cost)):
        raise InvalidInputError("cost has non-finite entries")
    return r, c, cost


def _strip(r, c, warm):
    ridx = np.flatnonzero(r > 0)
    cidx = np.flatnonzero(c > 0)
    r_s = r[ridx]
    c_s = c[cidx]
    c_s = c_s * (r_s.sum() / c_s.sum())  # balance rounding gap between the sums
    warm_s = warm[np.ix_(ridx, cidx)] if warm is not None else None
    return ridx, cidx, r_s, c_s, warm_s


def solve_exact_ot(r, c, cost, warm_start=None) -> tuple[np.ndarray, float]:
    """Optimal coupling of r and c for the given cost, at a vertex.

    Returns ``(plan, value)`` where ``plan`` is an (m, n) basic optimal
    solution (at most m + n - 1 positive entries) and ``value`` is
    ``<cost, plan>``.  Zero-mass rows/columns are stripped before solving
    and reinserted as zero rows/columns of the plan.  ``warm_start`` may be
    a feasible vertex plan whose support seeds the initial basis.
    """
    r, c, cost = _validate_pair(r, c, cost)
    ridx, cidx, r_s, c_s, warm_s = _strip(r, c, warm_start)
    sub = _solve_core(r_s, c_s, cost[np.ix_(ridx, cidx)], warm=warm_s)
    plan = np.zeros_like(cost)
    plan[np.ix_(ridx, cidx)] = sub
    return plan, float(np.sum(plan * cost))


def solve_exact_ot_lexico(r, c, primary, secondary, face_tol=None, warm_start=None):
    """Lexicographic OT: minimize ``secondary`` over the ``primary``-optimal face.

    Both objectives are evaluated at a single vertex of the transportation
    polytope (vertices of a face are vertices of the polytope).  Returns
    ``(plan, primary_value, secondary_value)``.
    """
    r, c, primary = _validate_pair(r, c, primary)
    secondary = np.asarray(secondary, dtype=float)
    if secondary.shape != primary.shape:
        raise InvalidInputError("secondary cost shape mismatch")
    ridx, cidx, r_s, c_s, warm_s = _strip(r, c, warm_start)
    sub = _solve_core(
        r_s,
        c_s,
        primary[np.ix_(ridx, cidx)],
        secondary=secondary[np.ix_(ridx, cidx)],
        face_tol=face_tol,
        warm=warm_s,
    )
    plan = np.zeros_like(primary)
    plan[np.ix_(ridx, cidx)] = sub
    return plan, float(np.sum(plan * primary)), float(np.sum(plan * secondary))
