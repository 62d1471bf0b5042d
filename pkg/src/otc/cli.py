"""Command-line interface.

Machine-readable output goes only to the path given by ``--out``; progress
and diagnostics go to stderr, so commands are safe in pipelines.  Exit
codes: 0 on success, 1 on usage errors, 2 on precondition or numerical
failures (the failure class and reason are printed to stderr).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import io
from .bench import BenchConfig, run_bench
from .hmm import couple_hmms, sample_coupled
from .markov import OtcError, estimate_transition_matrix
from .otc_entropic import EntropicParams, entropic_otc
from .otc_exact import exact_otc, one_step_otc


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we reserve that
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok]


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok]


def _cmd_exact(args) -> int:
    P = io.read_matrix_csv(args.p)
    Q = io.read_matrix_csv(args.q)
    C = io.read_matrix_csv(args.cost)
    sol = exact_otc(P, Q, C)
    io.write_solution_json(args.out, sol)
    print(f"exact: cost={sol.cost:.12g} iterations={sol.iterations}", file=sys.stderr)
    return 0


def _cmd_one_step(args) -> int:
    P = io.read_matrix_csv(args.p)
    Q = io.read_matrix_csv(args.q)
    C = io.read_matrix_csv(args.cost)
    sol = one_step_otc(P, Q, C)
    io.write_solution_json(args.out, sol)
    print(f"one-step: cost={sol.cost:.12g}", file=sys.stderr)
    return 0


def _entropic_params(args) -> EntropicParams:
    return EntropicParams(
        xi=args.xi,
        L=args.L,
        T=args.T,
        sinkhorn_iters=args.sinkhorn_iters,
        adaptive=args.adaptive,
        adaptive_tol=args.tol,
        L_max=args.lmax,
        T_max=args.tmax,
    )


def _cmd_entropic(args) -> int:
    P = io.read_matrix_csv(args.p)
    Q = io.read_matrix_csv(args.q)
    C = io.read_matrix_csv(args.cost)
    sol = entropic_otc(P, Q, C, _entropic_params(args))
    io.write_solution_json(args.out, sol)
    print(
        f"entropic: cost={sol.cost:.12g} iterations={sol.iterations}"
        f" stopped_by={sol.extras['stopped_by']}",
        file=sys.stderr,
    )
    return 0


def _cmd_estimate(args) -> int:
    seq = io.read_sequence(args.seq)
    P_hat, uniform_rows = estimate_transition_matrix(seq, args.d)
    io.write_matrix_csv(args.out, P_hat)
    if uniform_rows:
        print(f"estimate: rows never left, filled uniform: {uniform_rows}", file=sys.stderr)
    print(f"estimate: {len(seq)} observations over {args.d} states", file=sys.stderr)
    return 0


def _cmd_hmm_couple(args) -> int:
    A = io.read_hmm_json(args.a)
    B = io.read_hmm_json(args.b)
    obs_cost = io.read_matrix_csv(args.obs_cost)
    params = None
    if args.solver == "entropic":
        params = EntropicParams(
            xi=args.xi,
            L=args.L,
            T=args.T,
            sinkhorn_iters=args.sinkhorn_iters,
            adaptive=args.adaptive,
            adaptive_tol=args.tol,
            L_max=args.lmax,
            T_max=args.tmax,
        )
    coupled, sol = couple_hmms(A, B, obs_cost, solver=args.solver, entropic_params=params)
    io.write_coupled_json(args.out, coupled, sol, obs_cost)
    print(f"hmm-couple[{args.solver}]: cost={sol.cost:.12g}", file=sys.stderr)
    return 0


def _cmd_sample(args) -> int:
    coupled, obs_cost = io.read_coupled_json(args.coupled)
    sample = sample_coupled(coupled, args.steps, args.seed)
    io.write_samples_csv(args.out, sample, obs_cost)
    mean_cost = float(np.mean([obs_cost[u, v] for u, v in zip(sample.obs_u, sample.obs_v)]))
    print(f"sample: {args.steps} steps, mean pair cost {mean_cost:.6g}", file=sys.stderr)
    return 0


def _cmd_bench(args) -> int:
    cfg = BenchConfig(
        dims=tuple(_int_list(args.dims)),
        n_seeds=args.seeds,
        xis=tuple(_float_list(args.xi)),
        sinkhorn_iters=tuple(_int_list(args.iters)),
        out_path=args.out,
        adaptive_tol=args.tol,
        l_max=args.lmax,
        t_max=args.tmax,
        parallel=args.parallel,
    )
    records = run_bench(cfg)
    failures = sum(1 for r in records if r.error)
    print(f"bench: {len(records)} rows written to {args.out}, {failures} failures", file=sys.stderr)
    return 0


def _add_instance_args(p):
    p.add_argument("--p", required=True, help="transition matrix CSV for the first chain")
    p.add_argument("--q", required=True, help="transition matrix CSV for the second chain")
    p.add_argument("--cost", required=True, help="cost matrix CSV over state pairs")
    p.add_argument("--out", required=True, help="result JSON path")


def _add_entropic_args(p, xi_default=None):
    p.add_argument("--xi", type=float, default=xi_default, required=xi_default is None)
    p.add_argument("--sinkhorn-iters", type=int, default=100, dest="sinkhorn_iters")
    p.add_argument("--L", type=int, default=100)
    p.add_argument("--T", type=int, default=1000)
    p.add_argument("--adaptive", action="store_true")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--lmax", type=int, default=100)
    p.add_argument("--tmax", type=int, default=1000)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="otc", description="Optimal transition couplings of Markov chains")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", help="exact policy-iteration solver")
    _add_instance_args(p)
    p.set_defaults(func=_cmd_exact)

    p = sub.add_parser("entropic", help="fast entropic solver")
    _add_instance_args(p)
    _add_entropic_args(p)
    p.set_defaults(func=_cmd_entropic)

    p = sub.add_parser("one-step", help="greedy next-step baseline")
    _add_instance_args(p)
    p.set_defaults(func=_cmd_one_step)

    p = sub.add_parser("estimate", help="transition matrix from an observed sequence")
    p.add_argument("--seq", required=True, help="sequence file, one state id per line")
    p.add_argument("--d", type=int, required=True, help="number of states")
    p.add_argument("--out", required=True, help="output matrix CSV path")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("hmm-couple", help="couple two HMMs against an observation cost")
    p.add_argument("--a", required=True, help="first HMM JSON")
    p.add_argument("--b", required=True, help="second HMM JSON")
    p.add_argument("--obs-cost", required=True, dest="obs_cost", help="observation cost CSV")
    p.add_argument("--solver", choices=("exact", "entropic"), default="exact")
    p.add_argument("--out", required=True, help="coupled HMM JSON path")
    _add_entropic_args(p, xi_default=50.0)
    p.set_defaults(func=_cmd_hmm_couple, sinkhorn_iters=20)

    p = sub.add_parser("sample", help="sample a trajectory from a coupled HMM")
    p.add_argument("--coupled", required=True, help="coupled HMM JSON from hmm-couple")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="samples CSV path")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("bench", help="runtime/error sweep over random instances")
    p.add_argument("--dims", required=True, help="comma-separated dimensions, e.g. 10,20,30")
    p.add_argument("--seeds", type=int, required=True, help="seeds 0..n-1 per dimension")
    p.add_argument("--xi", required=True, help="comma-separated xi values")
    p.add_argument("--iters", required=True, help="sinkhorn iteration counts paired with --xi")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--lmax", type=int, default=100)
    p.add_argument("--tmax", type=int, default=1000)
    p.add_argument("--parallel", action="store_true", help="run cells in parallel (noisy timings)")
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits for usage errors and --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except OtcError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
