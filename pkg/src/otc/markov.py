"""Finite-state Markov chain primitives.

Conventions used throughout the package:

- A transition matrix is a row-stochastic ``(d, d)`` ndarray: ``T[i, j]`` is
  the probability of moving from state ``i`` to state ``j``.
- A distribution is a length-``d`` probability vector.
- A transition coupling of two ``d``-state chains ``P`` and ``Q`` is a
  ``(d*d, d*d)`` row-stochastic matrix ``R`` whose row at paired state
  ``(x, y)`` is a coupling of ``P[x, :]`` and ``Q[y, :]``.  Paired states are
  flattened row-major: ``(x, y) -> x * d + y`` (see :class:`PairIndexer`).
- Structural zeros: entries below ``ZERO_THRESHOLD`` are treated as absent
  edges when building support digraphs, so float dust never creates
  spurious connectivity.

This module provides validation helpers, structural analysis (strongly
connected components, recurrent classes, irreducibility, aperiodicity),
stationary distributions, Cesaro limits, the independent (product) coupling,
maximum-likelihood transition estimation from observed paths, and a seeded
path simulator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csgraph, csr_matrix

ROW_SUM_TOL = 1e-12
ZERO_THRESHOLD = 1e-15


class OtcError(Exception):
    """Base class for all package errors."""


class InvalidInputError(OtcError, ValueError):
    """An input violates a documented precondition."""


class NumericalError(OtcError, RuntimeError):
    """A numerical procedure failed or did not converge."""


def validate_transition_matrix(T, name: str = "transition matrix") -> np.ndarray:
    """Return ``T`` as a float ndarray after checking row-stochasticity.

    Entries must lie in [0, 1] and every row must sum to 1 within 1e-12.
    """
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] < 1:
        raise InvalidInputError(f"{name} must be a square matrix, got shape {T.shape}")
    if not np.all(np.isfinite(T)):
        raise InvalidInputError(f"{name} has non-finite entries")
    if T.min() < -ROW_SUM_TOL or T.max() > 1.0 + ROW_SUM_TOL:
        raise InvalidInputError(f"{name} has entries outside [0, 1]")
    row_err = np.abs(T.sum(axis=1) - 1.0).max()
    if row_err > ROW_SUM_TOL:
        raise InvalidInputError(f"{name} rows must sum to 1 (max deviation {row_err:.3e})")
    return T


def validate_distribution(w, name: str = "distribution") -> np.ndarray:
    """Return ``w`` as a float ndarray after checking it is a probability vector."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size < 1:
        raise InvalidInputError(f"{name} must be a 1-d vector, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise InvalidInputError(f"{name} has non-finite entries")
    if w.min() < -ROW_SUM_TOL:
        raise InvalidInputError(f"{name} has negative entries")
    if abs(w.sum() - 1.0) > ROW_SUM_TOL:
        raise InvalidInputError(f"{name} must sum to 1 (got {w.sum()!r})")
    return w


def validate_cost_matrix(C, name: str = "cost matrix") -> np.ndarray:
    """Return ``C`` as a float ndarray after checking finite nonnegative entries."""
    C = np.asarray(C, dtype=float)
    if C.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-d, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise InvalidInputError(f"{name} has non-finite entries")
    if C.min() < 0:
        raise InvalidInputError(f"{name} has negative entries")
    return C


@dataclass(frozen=True)
class PairIndexer:
    """Row-major bijection between state pairs (x, y) and flat indices.

    ``index(x, y) = x * d + y``.  Every module uses this single convention
    for vectors and matrices indexed by paired states.
    """

    d: int

    def index(self, x: int, y: int) -> int:
        return x * self.d + y

    def unindex(self, k: int) -> tuple[int, int]:
        return divmod(k, self.d)

    @property
    def n_pairs(self) -> int:
        return self.d * self.d

    def to_matrix(self, v: np.ndarray) -> np.ndarray:
        """View a length-d^2 vector as a (d, d) matrix over (x, y)."""
        return np.asarray(v, dtype=float).reshape(self.d, self.d)

    def to_vector(self, M: np.ndarray) -> np.ndarray:
        """Flatten a (d, d) matrix over (x, y) to a length-d^2 vector."""
        return np.asarray(M, dtype=float).reshape(self.d * self.d)


def support_adjacency(T: np.ndarray) -> np.ndarray:
    """Boolean adjacency of the support digraph (entries > ZERO_THRESHOLD)."""
    return np.asarray(T) > ZERO_THRESHOLD


def strongly_connected_components(T: np.ndarray) -> list[list[int]]:
    """Strongly connected components of the support digraph.

    Components are sorted by their smallest member so output order is
    deterministic.
    """
    adj = support_adjacency(T)
    n_comp, labels = csgraph.connected_components(
        csr_matrix(adj), directed=True, connection="strong"
    )
    comps: list[list[int]] = [[] for _ in range(n_comp)]
    for state, lab in enumerate(labels):
        comps[lab].append(state)
    comps.sort(key=lambda c: c[0])
    return comps


def recurrent_classes(T) -> list[list[int]]:
    """Closed communicating classes of the chain.

    A strongly connected component is recurrent iff no edge leaves it.
    Transient states belong to no returned class.  Classes are disjoint,
    nonempty, and sorted by smallest member; a finite chain always has at
    least one.
    """
    T = validate_transition_matrix(T)
    adj = support_adjacency(T)
    classes = []
    for comp in strongly_connected_components(T):
        members = np.array(comp)
        outside = np.ones(T.shape[0], dtype=bool)
        outside[members] = False
        if not adj[np.ix_(members, outside)].any():
            classes.append(comp)
    return classes


def is_irreducible(T) -> bool:
    """True iff the support digraph is strongly connected."""
    T = validate_transition_matrix(T)
    comps = strongly_connected_components(T)
    return len(comps) == 1


def _component_period(adj: np.ndarray, comp: list[int]) -> int:
    """Period of one strongly connected component via BFS levels.

    gcd over internal edges (u -> v) of (level(u) + 1 - level(v)); exact
    integer arithmetic, no floating tolerance.  Returns 0 for a single
    state with no self-loop (no cycle through it).
    """
    members = set(comp)
    root = comp[0]
    if len(comp) == 1 and not adj[root, root]:
        return 0
    level = {root: 0}
    queue = [root]
    g = 0
    while queue:
        nxt = []
        for u in queue:
            for v in np.flatnonzero(adj[u]):
                v = int(v)
                if v not in members:
                    continue
                if v not in level:
                    level[v] = level[u] + 1
                    nxt.append(v)
                else:
                    g = int(np.gcd(g, level[u] + 1 - level[v]))
        queue = nxt
    return abs(g)


def is_aperiodic(T) -> bool:
    """True iff every cyclic strongly connected component has period 1.

    Components containing no cycle (single states without self-loops) carry
    no period and are ignored.
    """
    T = validate_transition_matrix(T)
    adj = support_adjacency(T)
    for comp in strongly_connected_components(T):
        p = _component_period(adj, comp)
        if p > 1:
            return False
    return True


def _class_stationary(T: np.ndarray, comp: list[int]) -> np.ndarray:
    """Unique stationary distribution of one recurrent class, embedded in R^n.

    Solves lam (T_C - I) = 0 with sum(lam) = 1 on the class.
    """
    n = T.shape[0]
    idx = np.array(comp)
    Tc = T[np.ix_(idx, idx)]
    k = len(comp)
    A = Tc.T - np.eye(k)
    A[-1, :] = 1.0
    b = np.zeros(k)
    b[-1] = 1.0
    try:
        lam_c = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise NumericalError(f"stationary solve failed on class {comp}: {exc}") from exc
    lam_c = np.maximum(lam_c, 0.0)
    lam_c /= lam_c.sum()
    lam = np.zeros(n)
    lam[idx] = lam_c
    return lam


def stationary_distributions(T) -> list[np.ndarray]:
    """One stationary distribution per recurrent class, in class order.

    Each returned vector lambda satisfies ``lambda @ T == lambda`` to solver
    precision and is supported on its class.  The list is nonempty for every
    row-stochastic T.
    """
    T = validate_transition_matrix(T)
    return [_class_stationary(T, comp) for comp in recurrent_classes(T)]


def cesaro_projection(T) -> np.ndarray:
    """Exact limiting matrix ``Tbar = lim (1/N) sum_{t<N} T^t``.

    Built structurally: rows of recurrent states equal their class
    stationary distribution; rows of transient states mix the class
    distributions by absorption probability.
    """
    T = validate_transition_matrix(T)
    n = T.shape[0]
    classes = recurrent_classes(T)
    lams = [_class_stationary(T, comp) for comp in classes]
    tbar = np.zeros((n, n))
    recurrent = np.zeros(n, dtype=bool)
    for comp, lam in zip(classes, lams):
        for s in comp:
            tbar[s] = lam
        recurrent[list(comp)] = True
    transient = np.flatnonzero(~recurrent)
    if transient.size:
        # absorption probabilities: (I - T_tt) B = [mass sent to each class]
        Ttt = T[np.ix_(transient, transient)]
        rhs = np.column_stack([T[np.ix_(transient, list(comp))].sum(axis=1) for comp in classes])
        try:
            B = np.linalg.solve(np.eye(transient.size) - Ttt, rhs)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
            raise NumericalError(f"absorption solve failed: {exc}") from exc
        for row, s in enumerate(transient):
            tbar[s] = sum(B[row, i] * lams[i] for i in range(len(classes)))
    return tbar


def cesaro_limit(T, tol: float = 1e-10, max_power: int = 2**60) -> np.ndarray:
    """Cesaro average of matrix powers, by doubling partial averages.

    Uses ``A_{2N} = (A_N + A_N T^N) / 2`` so the averaging horizon grows
    geometrically; stops once ``||A T - A||_inf <= tol``.  Raises
    :class:`NumericalError` if the horizon exceeds ``max_power``.
    """
    T = validate_transition_matrix(T)
    avg = np.eye(T.shape[0])
    power = T.copy()
    horizon = 1
    while True:
        if np.abs(avg @ T - avg).max() <= tol:
            return avg
        if horizon > max_power:
            raise NumericalError(
                f"Cesaro average did not reach tol={tol} within horizon {max_power}"
            )
        avg = 0.5 * (avg + avg @ power)
        power = power @ power
        # repeated squaring is unstable along the row-sum direction: rows of
        # a stochastic power must sum to 1, so project that drift out
        power /= power.sum(axis=1, keepdims=True)
        avg /= avg.sum(axis=1, keepdims=True)
        horizon *= 2


def independent_coupling(P, Q) -> np.ndarray:
    """Product transition coupling: R[(x,y),(x',y')] = P[x,x'] * Q[y,y'].

    With the row-major pair convention this is exactly the Kronecker
    product, and it satisfies both marginal constraints algebraically.
    """
    P = validate_transition_matrix(P, "P")
    Q = validate_transition_matrix(Q, "Q")
    if P.shape != Q.shape:
        raise InvalidInputError(f"dimension mismatch: P is {P.shape}, Q is {Q.shape}")
    return np.kron(P, Q)


def coupling_marginal_error(R, P, Q) -> tuple[float, float]:
    """Max deviation of R's row couplings from the marginals P and Q.

    Returns (err_P, err_Q) where err_P is the largest absolute difference
    between ``sum_{y'} R[(x,y), (x',y')]`` and ``P[x, x']`` over all rows,
    and err_Q is the analogue for Q.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    d = P.shape[0]
    R4 = np.asarray(R, dtype=float).reshape(d, d, d, d)
    err_p = np.abs(R4.sum(axis=3) - P[:, None, :]).max()
    err_q = np.abs(R4.sum(axis=2) - Q[None, :, :]).max()
    return float(err_p), float(err_q)


def validate_transition_coupling(R, P, Q, tol: float = 1e-9) -> np.ndarray:
    """Check that R is a transition coupling of P and Q within ``tol``."""
    P = validate_transition_matrix(P, "P")
    Q = validate_transition_matrix(Q, "Q")
    d = P.shape[0]
    R = validate_transition_matrix(np.asarray(R, dtype=float), "transition coupling")
    if R.shape != (d * d, d * d):
        raise InvalidInputError(f"coupling must be ({d*d}, {d*d}), got {R.shape}")
    err_p, err_q = coupling_marginal_error(R, P, Q)
    if err_p > tol or err_q > tol:
        raise InvalidInputError(
            f"coupling violates marginal constraints (errors {err_p:.3e}, {err_q:.3e})"
        )
    return R


def estimate_transition_matrix(sequence, d: int) -> tuple[np.ndarray, list[int]]:
    """Relative-frequency transition estimate from one observed path.

    ``P_hat[i, j] = count(i -> j) / count(i was left)``.  States never left
    get a uniform row so the estimate stays row-stochastic; the list of such
    rows is returned alongside the matrix.
    """
    seq = np.asarray(sequence, dtype=int)
    if seq.ndim != 1 or seq.size < 2:
        raise InvalidInputError("sequence must contain at least 2 observations")
    if seq.min() < 0 or seq.max() >= d:
        raise InvalidInputError(f"sequence contains states outside 0..{d - 1}")
    counts = np.zeros((d, d))
    np.add.at(counts, (seq[:-1], seq[1:]), 1.0)
    visits = counts.sum(axis=1)
    P_hat = np.empty((d, d))
    uniform_rows = []
    for i in range(d):
        if visits[i] > 0:
            P_hat[i] = counts[i] / visits[i]
        else:
            P_hat[i] = 1.0 / d
            uniform_rows.append(i)
    return P_hat, uniform_rows


def simulate_chain(T, start: int, steps: int, seed=None) -> np.ndarray:
    """Sample a path of ``steps`` transitions starting at ``start``.

    Returns ``steps + 1`` states including the start.  ``seed`` may be an
    int or a ``numpy.random.Generator``; randomness comes from numpy's
    default PCG64 generator so paths are reproducible from the seed alone.
    """
    T = validate_transition_matrix(T)
    d = T.shape[0]
    if not (0 <= start < d):
        raise InvalidInputError(f"start state {start} outside 0..{d - 1}")
    if steps < 0:
        raise InvalidInputError("steps must be >= 0")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cdf = np.cumsum(T, axis=1)
    path = np.empty(steps + 1, dtype=int)
    path[0] = start
    u = rng.random(steps)
    s = start
    for t in range(steps):
        s = int(np.searchsorted(cdf[s], u[t], side="right"))
        if s >= d:  # guard against cumsum rounding at the top edge
            s = d - 1
        path[t + 1] = s
    return path


def sample_from_distribution(w, rng: np.random.Generator) -> int:
    """Draw one index from a probability vector by inverse CDF."""
    cdf = np.cumsum(np.asarray(w, dtype=float))
    k = int(np.searchsorted(cdf, rng.random(), side="right"))
    return min(k, len(cdf) - 1)
