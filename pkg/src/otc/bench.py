"""Random-instance generator and solver benchmark harness.

Instances: every entry of P, Q and the cost matrix is drawn iid standard
normal from one seeded PCG64 stream (P block first, then Q, then the
cost).  Transition rows go through a softmax with weight 0.1, which makes
them strictly positive, hence aperiodic and irreducible; the cost takes
absolute values and is scaled by its maximum so ``max(c) == 1`` exactly.

The sweep runs the exact solver once per (d, seed) cell and the entropic
solver once per configured (xi, sinkhorn iteration) pairing, recording
start-to-convergence wall time, the reported cost, and the absolute cost
gap to the exact run.  Failures are recorded in the row's error column
rather than aborting the sweep, and the CSV lands atomically.

Cells may run in parallel processes (worker count capped by the
OTC_THREADS environment variable), at the price of noisier timings.
"""

from __future__ import annotations

import multiprocessing
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from .io import FLOAT_FMT, _atomic_write_text
from .markov import InvalidInputError, OtcError
from .otc_entropic import EntropicParams, entropic_otc
from .otc_exact import exact_otc

CSV_COLUMNS = (
    "d",
    "seed",
    "algorithm",
    "xi",
    "runtime_seconds",
    "cost",
    "abs_error_vs_exact",
    "iterations",
    "error",
)


@dataclass(frozen=True)
class BenchConfig:
    """Sweep layout: dimensions, seeds per dimension, xi/iteration pairs."""

    dims: tuple[int, ...]
    n_seeds: int
    xis: tuple[float, ...]
    sinkhorn_iters: tuple[int, ...]
    out_path: str
    adaptive_tol: float = 1e-12
    l_max: int = 100
    t_max: int = 1000
    parallel: bool = False

    def __post_init__(self):
        if not self.dims or not self.xis:
            raise InvalidInputError("dims and xis must be nonempty")
        if self.n_seeds < 1:
            raise InvalidInputError("n_seeds must be >= 1")
        if len(self.xis) != len(self.sinkhorn_iters):
            raise InvalidInputError("xis and sinkhorn_iters must pair up")


@dataclass
class BenchRecord:
    d: int
    seed: int
    algorithm: str
    xi: float | None
    runtime_seconds: float
    cost: float | None
    abs_error_vs_exact: float | None
    iterations: int | None
    error: str = ""

    def csv_row(self) -> str:
        def fmt(x):
            if x is None:
                return ""
            if isinstance(x, float):
                return FLOAT_FMT % x
            return str(x)

        vals = [
            fmt(self.d),
            fmt(self.seed),
            self.algorithm,
            fmt(self.xi),
            fmt(self.runtime_seconds),
            fmt(self.cost),
            fmt(self.abs_error_vs_exact),
            fmt(self.iterations),
            self.error.replace(",", ";").replace("\n", " "),
        ]
        return ",".join(vals)


def gen_instance(d: int, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded random (P, Q, cost) instance; identical bytes for identical args."""
    if d < 2:
        raise InvalidInputError("instance dimension must be >= 2")
    rng = np.random.default_rng(seed)
    zp = rng.standard_normal((d, d))
    zq = rng.standard_normal((d, d))
    zc = rng.standard_normal((d, d))

    def softmax_rows(z):
        e = np.exp(0.1 * z)
        return e / e.sum(axis=1, keepdims=True)

    c = np.abs(zc)
    return softmax_rows(zp), softmax_rows(zq), c / c.max()


def _run_cell(args) -> list[BenchRecord]:
    """All solver runs for one (d, seed) cell; never raises."""
    d, seed, xis, iters, adaptive_tol, l_max, t_max = args
    P, Q, C = gen_instance(d, seed)
    records = []

    start = time.perf_counter()
    exact_cost = None
    try:
        sol = exact_otc(P, Q, C)
        elapsed = time.perf_counter() - start
        exact_cost = sol.cost
        records.append(BenchRecord(d, seed, "exact", None, elapsed, sol.cost, None, sol.iterations))
    except OtcError as exc:
        elapsed = time.perf_counter() - start
        records.append(
            BenchRecord(d, seed, "exact", None, elapsed, None, None, None, str(exc))
        )

    for xi, n_iter in zip(xis, iters):
        params = EntropicParams(
            xi=xi,
            sinkhorn_iters=n_iter,
            adaptive=True,
            adaptive_tol=adaptive_tol,
            L_max=l_max,
            T_max=t_max,
        )
        start = time.perf_counter()
        try:
            sol = entropic_otc(P, Q, C, params)
            elapsed = time.perf_counter() - start
            err = abs(sol.cost - exact_cost) if exact_cost is not None else None
            records.append(
                BenchRecord(d, seed, "entropic", xi, elapsed, sol.cost, err, sol.iterations)
            )
        except OtcError as exc:
            elapsed = time.perf_counter() - start
            records.append(
                BenchRecord(d, seed, "entropic", xi, elapsed, None, None, None, str(exc))
            )
    return records


def _worker_count() -> int:
    cap = os.environ.get("OTC_THREADS")
    n = multiprocessing.cpu_count()
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n


def run_bench(cfg: BenchConfig) -> list[BenchRecord]:
    """Run the configured sweep and write its CSV atomically."""
    cells = [
        (d, seed, cfg.xis, cfg.sinkhorn_iters, cfg.adaptive_tol, cfg.l_max, cfg.t_max)
        for d in cfg.dims
        for seed in range(cfg.n_seeds)
    ]
    if cfg.parallel and len(cells) > 1:
        print(
            "warning: --parallel shares cores between cells; timings will be noisy",
            file=sys.stderr,
        )
        with multiprocessing.Pool(min(_worker_count(), len(cells))) as pool:
            per_cell = pool.map(_run_cell, cells)
    else:
        per_cell = [_run_cell(cell) for cell in cells]
    records = [rec for recs in per_cell for rec in recs]
    lines = [",".join(CSV_COLUMNS)] + [rec.csv_row() for rec in records]
    _atomic_write_text(cfg.out_path, "\n".join(lines) + "\n")
    return records
