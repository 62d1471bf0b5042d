"""Optimal transition couplings of stationary finite-state Markov chains.

Exact policy-iteration solver, fast entropic solver, an extension to
hidden Markov models, and a benchmark harness.  See README.md for the file
formats and the command-line interface.
"""

from .bench import BenchConfig, BenchRecord, gen_instance, run_bench
from .entropic_ot import ApproxOtParams, SinkhornResult, approx_ot, round_to_feasible, sinkhorn
from .exact_ot import solve_exact_ot, solve_exact_ot_lexico
from .hmm import (
    CoupledHmm,
    CoupledSample,
    Hmm,
    couple_hmms,
    lift_cost,
    note_cost,
    note_cost_matrix,
    sample_coupled,
)
from .markov import (
    InvalidInputError,
    NumericalError,
    OtcError,
    PairIndexer,
    cesaro_limit,
    cesaro_projection,
    coupling_marginal_error,
    estimate_transition_matrix,
    independent_coupling,
    is_aperiodic,
    is_irreducible,
    recurrent_classes,
    simulate_chain,
    stationary_distributions,
    validate_transition_coupling,
    validate_transition_matrix,
)
from .otc_entropic import EntropicParams, approx_tce, approx_tce_adaptive, entropic_otc, entropic_tci
from .otc_exact import GainBias, OtcSolution, exact_otc, exact_tce, exact_tci, one_step_otc, otc_cost

__all__ = [
    "ApproxOtParams",
    "BenchConfig",
    "BenchRecord",
    "CoupledHmm",
    "CoupledSample",
    "EntropicParams",
    "GainBias",
    "Hmm",
    "InvalidInputError",
    "NumericalError",
    "OtcError",
    "OtcSolution",
    "PairIndexer",
    "SinkhornResult",
    "approx_ot",
    "approx_tce",
    "approx_tce_adaptive",
    "cesaro_limit",
    "cesaro_projection",
    "couple_hmms",
    "coupling_marginal_error",
    "entropic_otc",
    "entropic_tci",
    "estimate_transition_matrix",
    "exact_otc",
    "exact_tce",
    "exact_tci",
    "gen_instance",
    "independent_coupling",
    "is_aperiodic",
    "is_irreducible",
    "lift_cost",
    "note_cost",
    "note_cost_matrix",
    "one_step_otc",
    "otc_cost",
    "recurrent_classes",
    "round_to_feasible",
    "run_bench",
    "sample_coupled",
    "simulate_chain",
    "sinkhorn",
    "solve_exact_ot",
    "solve_exact_ot_lexico",
    "stationary_distributions",
    "validate_transition_coupling",
    "validate_transition_matrix",
]

__version__ = "0.1.0"
