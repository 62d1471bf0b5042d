"""Shared helpers: fixture paths, random chain generators, brute-force OT oracle."""

from __future__ import annotations

from itertools import combinations
from pathlib import Path

import numpy as np

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def load_greedy_trap():
    from otc import io

    P = io.read_matrix_csv(FIXTURES / "greedy_trap_p.csv")
    Q = io.read_matrix_csv(FIXTURES / "greedy_trap_q.csv")
    C = io.read_matrix_csv(FIXTURES / "greedy_trap_cost.csv")
    return P, Q, C


def load_reducible():
    from otc import io

    P = io.read_matrix_csv(FIXTURES / "reducible_p.csv")
    Q = io.read_matrix_csv(FIXTURES / "reducible_q.csv")
    R = io.read_matrix_csv(FIXTURES / "reducible_coupling.csv")
    return P, Q, R


def random_stochastic(rng: np.random.Generator, d: int, floor: float = 0.02) -> np.ndarray:
    """Strictly positive random row-stochastic matrix (aperiodic, irreducible)."""
    M = rng.random((d, d)) + floor
    return M / M.sum(axis=1, keepdims=True)


def random_distribution(rng: np.random.Generator, n: int, floor: float = 0.02) -> np.ndarray:
    w = rng.random(n) + floor
    return w / w.sum()


def transport_vertices(r: np.ndarray, c: np.ndarray) -> list[np.ndarray]:
    """All vertices of the transportation polytope by basis enumeration.

    Independent oracle for the simplex solver: every subset of m + n - 1
    cells forming a spanning tree of the bipartite graph yields one basic
    solution; the feasible ones are exactly the vertices.  Exponential, so
    only for small m, n.
    """
    m, n = r.size, c.size
    cells = [(i, j) for i in range(m) for j in range(n)]
    vertices: list[np.ndarray] = []
    for subset in combinations(cells, m + n - 1):
        parent = list(range(m + n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        acyclic = True
        for i, j in subset:
            ra, rb = find(i), find(m + j)
            if ra == rb:
                acyclic = False
                break
            parent[ra] = rb
        if not acyclic:
            continue
        # solve flows by leaf elimination on the tree
        a = r.copy()
        b = c.copy()
        deg = {}
        incident = {}
        for i, j in subset:
            deg[i] = deg.get(i, 0) + 1
            deg[m + j] = deg.get(m + j, 0) + 1
            incident.setdefault(i, []).append((i, j))
            incident.setdefault(m + j, []).append((i, j))
        flows = {}
        alive = set(subset)
        stack = [v for v in deg if deg[v] == 1]
        while stack:
            node = stack.pop()
            if deg.get(node, 0) != 1:
                continue
            cell = next(cl for cl in incident[node] if cl in alive)
            i, j = cell
            f = a[i] if node < m else b[j]
            flows[cell] = f
            a[i] -= f
            b[j] -= f
            alive.discard(cell)
            deg[i] -= 1
            deg[m + j] -= 1
            for other in (i, m + j):
                if deg.get(other, 0) == 1:
                    stack.append(other)
        if min(flows.values()) < -1e-12:
            continue
        V = np.zeros((m, n))
        for (i, j), f in flows.items():
            V[i, j] = max(f, 0.0)
        if not any(np.abs(V - W).max() < 1e-12 for W in vertices):
            vertices.append(V)
    return vertices


def hamming(d: int) -> np.ndarray:
    return 1.0 - np.eye(d)
