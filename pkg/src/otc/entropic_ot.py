"""Entropy-regularized optimal transport.

Three layers, each usable on its own:

- :func:`sinkhorn`: alternating row/column scaling of a positive kernel
  ``K``, tracking log-scaling vectors ``u, v`` so the iterate is always
  ``diag(e^u) K diag(e^v)``.  Stops when the summed L1 marginal gap drops
  below ``eps_prime``, or after a fixed iteration count when one is given.
- :func:`round_to_feasible`: projects a nonnegative matrix onto the
  coupling polytope; the output moves by at most twice the input's marginal
  gap in L1.
- :func:`approx_ot`: subsets to the positive support of the marginals,
  runs Sinkhorn on ``K = exp(-xi * C)`` with the accuracy schedule
  ``eps' = eps^2 / 8J``, rounds to feasibility, and re-embeds zeros.

Kernels are evaluated in the log domain whenever ``xi * max(C)`` is large
enough that ``exp(-xi * C)`` risks underflowing to exact zeros.

The module also ships batched fixed-iteration variants of the scaling and
rounding steps.  A transition-coupling improvement sweep solves one small
OT problem per paired state against a shared cost matrix; when every
marginal row is strictly positive those solves share the same kernel and
can be advanced in lockstep as (batch, m, n) arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .markov import InvalidInputError, NumericalError

LOG_DOMAIN_EXPONENT = 500.0
DEFAULT_SINKHORN_CAP = 10_000_000


@dataclass(frozen=True)
class ApproxOtParams:
    """Accuracy knobs for :func:`approx_ot`.

    ``xi`` is the regularization coefficient (> 0) and ``eps`` the target
    L1 accuracy in (0, 1).  When ``max_sinkhorn_iters`` is set it replaces
    the eps-derived stopping rule with a fixed iteration count.
    """

    xi: float
    eps: float
    max_sinkhorn_iters: int | None = None

    def __post_init__(self):
        if not self.xi > 0:
            raise InvalidInputError(f"xi must be > 0, got {self.xi}")
        if not 0 < self.eps < 1:
            raise InvalidInputError(f"eps must lie in (0, 1), got {self.eps}")
        if self.max_sinkhorn_iters is not None and self.max_sinkhorn_iters < 0:
            raise InvalidInputError("max_sinkhorn_iters must be >= 0")


@dataclass
class SinkhornResult:
    plan: np.ndarray
    log_u: np.ndarray
    log_v: np.ndarray
    iterations: int
    converged: bool
    marginal_gap: float


def _marginal_gap(X: np.ndarray, r: np.ndarray, c: np.ndarray) -> float:
    return float(np.abs(X.sum(axis=1) - r).sum() + np.abs(X.sum(axis=0) - c).sum())


def sinkhorn(
    K,
    r,
    c,
    eps_prime: float,
    max_iters: int | None = None,
    fixed_iters: int | None = None,
    log_K: bool = False,
) -> SinkhornResult:
    """Scale ``K`` toward marginals ``(r, c)`` by alternating normalization.

    Odd iterations rescale rows, even iterations rescale columns; the gap
    ``||X 1 - r||_1 + ||X' 1 - c||_1`` is checked before each update, so an
    already-feasible ``K / ||K||_1`` returns after zero iterations.  With
    ``fixed_iters`` set, exactly that many updates run and the gap check is
    skipped.  Pass ``log_K=True`` when ``K`` holds ``log`` entries; the
    scaling then runs fully in the log domain.
    """
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(r <= 0) or np.any(c <= 0):
        raise InvalidInputError("sinkhorn requires strictly positive marginals")
    K = np.asarray(K, dtype=float)
    if K.shape != (r.size, c.size):
        raise InvalidInputError(f"kernel shape {K.shape} does not match marginals")
    if log_K:
        logK = K
        if not np.all(np.isfinite(logK)):
            raise InvalidInputError("log-kernel has non-finite entries")
    else:
        if np.any(K <= 0):
            raise InvalidInputError("kernel must be strictly positive")
        logK = np.log(K)

    log_r = np.log(r)
    log_c = np.log(c)
    # start at X_0 = K / ||K||_1, folded into the row scaling
    u = np.full(r.size, -logsumexp(logK))
    v = np.zeros(c.size)
    cap = fixed_iters if fixed_iters is not None else (max_iters or DEFAULT_SINKHORN_CAP)

    k = 0
    converged = False
    while True:
        log_X = u[:, None] + logK + v[None, :]
        X = np.exp(log_X)
        gap = _marginal_gap(X, r, c)
        if fixed_iters is None and gap <= eps_prime:
            converged = True
            break
        if k >= cap:
            converged = fixed_iters is not None
            break
        k += 1
        if k % 2 == 1:
            u += log_r - logsumexp(log_X, axis=1)
        else:
            v += log_c - logsumexp(log_X, axis=0)
    return SinkhornResult(X, u, v, k, converged, gap)


def round_to_feasible(F, r, c) -> np.ndarray:
    """Project a nonnegative matrix onto the coupling polytope of (r, c).

    Rows are scaled down to at most their targets, then columns; the
    leftover mass is restored as the rank-one outer product of the marginal
    deficits.  The output is exactly feasible and differs from ``F`` by at
    most twice F's L1 marginal gap.
    """
    F = np.asarray(F, dtype=float)
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    if F.shape != (r.size, c.size):
        raise InvalidInputError(f"matrix shape {F.shape} does not match marginals")
    if np.any(F < 0):
        raise InvalidInputError("matrix must be nonnegative")
    if F.sum() == 0.0 and (r.sum() > 0 or c.sum() > 0):
        raise InvalidInputError("cannot round an all-zero matrix to nonzero marginals")

    row = F.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(row > 0, np.minimum(r / np.where(row > 0, row, 1.0), 1.0), 1.0)
    F1 = x[:, None] * F
    col = F1.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.where(col > 0, np.minimum(c / np.where(col > 0, col, 1.0), 1.0), 1.0)
    F2 = F1 * y[None, :]
    err_r = r - F2.sum(axis=1)
    err_c = c - F2.sum(axis=0)
    total = err_r.sum()
    if total <= 0:
        return F2
    return F2 + np.outer(err_r, err_c) / total


def _subset_plan(r, c):
    ridx = np.flatnonzero(r > 0)
    cidx = np.flatnonzero(c > 0)
    return ridx, cidx


def approx_ot(r, c, cost, params: ApproxOtParams) -> np.ndarray:
    """Approximate the entropic-OT optimum and return a feasible coupling.

    The output lies in the coupling polytope of (r, c) with support inside
    ``supp(r) x supp(c)``; with the eps-driven stop it is within ``eps`` of
    the unique entropic optimum in L1.
    """
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    cost = np.asarray(cost, dtype=float)
    if cost.shape != (r.size, c.size):
        raise InvalidInputError(f"cost shape {cost.shape} does not match marginals")
    if np.any(cost < 0) or not np.all(np.isfinite(cost)):
        raise InvalidInputError("cost must be finite and nonnegative")

    ridx, cidx = _subset_plan(r, c)
    r_s = r[ridx]
    c_s = c[cidx]
    C_s = cost[np.ix_(ridx, cidx)]
    m, n = C_s.shape
    plan = np.zeros_like(cost)
    if m == 1 or n == 1:
        plan[np.ix_(ridx, cidx)] = np.outer(r_s, c_s) / r_s.sum()  # forced coupling
        return plan

    n_eff = max(m, n)
    c_max = float(np.abs(C_s).max())
    b = float(min(r_s.min(), c_s.min()))
    J = 4.0 * np.log(n_eff) * c_max / params.eps - np.log(b)
    eps_prime = params.eps**2 / (8.0 * J)
    if n_eff == 2:
        eps_prime *= np.log(2.0)

    log_domain = params.xi * c_max > LOG_DOMAIN_EXPONENT
    kernel = -params.xi * C_s if log_domain else np.exp(-params.xi * C_s)
    if params.max_sinkhorn_iters is not None:
        result = sinkhorn(
            kernel, r_s, c_s, eps_prime, fixed_iters=params.max_sinkhorn_iters, log_K=log_domain
        )
    else:
        result = sinkhorn(kernel, r_s, c_s, eps_prime, log_K=log_domain)
        if not result.converged:
            raise NumericalError(
                f"sinkhorn did not reach eps'={eps_prime:.3e} within {DEFAULT_SINKHORN_CAP} iterations"
            )
    plan[np.ix_(ridx, cidx)] = round_to_feasible(result.plan, r_s, c_s)
    return plan


# -- batched fixed-iteration kernels ---------------------------------------


def sinkhorn_fixed_batch(cost, xi, row_marginals, col_marginals, iters: int) -> np.ndarray:
    """Run ``iters`` Sinkhorn updates for a batch of problems in lockstep.

    All problems share the cost matrix; only the (strictly positive)
    marginals differ.  Mirrors the single-problem schedule: start from
    ``K / ||K||_1``, odd updates rescale rows, even updates rescale columns.
    Returns a ``(batch, m, n)`` array of iterates (not yet feasible).
    """
    R = np.asarray(row_marginals, dtype=float)
    C = np.asarray(col_marginals, dtype=float)
    if np.any(R <= 0) or np.any(C <= 0):
        raise InvalidInputError("batched sinkhorn requires strictly positive marginals")
    cost = np.asarray(cost, dtype=float)
    c_max = float(np.abs(cost).max())
    log_domain = xi * c_max > LOG_DOMAIN_EXPONENT
    logK = -xi * cost
    nbatch = R.shape[0]
    log_R = np.log(R)
    log_C = np.log(C)
    U = np.full(R.shape, -logsumexp(logK))
    V = np.zeros(C.shape)

    if not log_domain:
        K = np.exp(logK)
        eU = np.exp(U)
        eV = np.exp(V)
        for k in range(1, iters + 1):
            if k % 2 == 1:
                rows = eU * (eV @ K.T)
                eU *= R / rows
            else:
                cols = eV * (eU @ K)
                eV *= C / cols
        return eU[:, :, None] * K[None, :, :] * eV[:, None, :]

    for k in range(1, iters + 1):
        log_X = U[:, :, None] + logK[None, :, :] + V[:, None, :]
        if k % 2 == 1:
            U += log_R - logsumexp(log_X, axis=2)
        else:
            V += log_C - logsumexp(log_X, axis=1)
    return np.exp(U[:, :, None] + logK[None, :, :] + V[:, None, :])


def round_batch(F, row_marginals, col_marginals) -> np.ndarray:
    """Batched :func:`round_to_feasible` over a (batch, m, n) stack."""
    F = np.asarray(F, dtype=float)
    R = np.asarray(row_marginals, dtype=float)
    C = np.asarray(col_marginals, dtype=float)
    row = F.sum(axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(row > 0, np.minimum(R / np.where(row > 0, row, 1.0), 1.0), 1.0)
    F1 = F * x[:, :, None]
    col = F1.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.where(col > 0, np.minimum(C / np.where(col > 0, col, 1.0), 1.0), 1.0)
    F2 = F1 * y[:, None, :]
    err_r = R - F2.sum(axis=2)
    err_c = C - F2.sum(axis=1)
    total = err_r.sum(axis=1)
    safe = np.where(total > 0, total, 1.0)
    corr = err_r[:, :, None] * err_c[:, None, :] / safe[:, None, None]
    return np.where(total[:, None, None] > 0, F2 + corr, F2)
