"""Coupling hidden Markov models over finite observation alphabets.

A cost defined on observations lifts to hidden states by optimally
coupling the emission distributions of every state pair: the lifted cost
``c'(x, y)`` is the exact OT cost between emissions of ``x`` and ``y``,
and the minimizing vertex coupling ``theta(x, y)`` is stored.  Coupling
the hidden chains against ``c'`` then yields a joint HMM: hidden pairs
evolve by the transition coupling and each step emits an observation pair
drawn from ``theta`` at the current hidden pair.

``note_cost`` supplies the two pitch costs used for musical sequences:
``octave`` (free iff the pitches agree modulo 12) and ``tiered`` (free
unison/octave, cheap perfect consonance, mid imperfect consonance, dear
everything else).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exact_ot import solve_exact_ot
from .markov import (
    InvalidInputError,
    is_aperiodic,
    is_irreducible,
    sample_from_distribution,
    validate_cost_matrix,
    validate_distribution,
    validate_transition_matrix,
)
from .otc_exact import OtcSolution, exact_otc, otc_cost
from .otc_entropic import EntropicParams, entropic_otc


@dataclass(frozen=True)
class Hmm:
    """Hidden chain plus one emission distribution per hidden state.

    ``transitions`` is (d, d) row-stochastic; ``emissions`` is (d, m) with
    each row a distribution over the m observation symbols.
    """

    transitions: np.ndarray
    emissions: np.ndarray

    def __post_init__(self):
        T = validate_transition_matrix(self.transitions, "hidden transitions")
        E = np.asarray(self.emissions, dtype=float)
        if E.ndim != 2 or E.shape[0] != T.shape[0]:
            raise InvalidInputError(
                f"emissions must have one row per hidden state, got shape {E.shape}"
            )
        for i in range(E.shape[0]):
            validate_distribution(E[i], f"emission row {i}")
        object.__setattr__(self, "transitions", T)
        object.__setattr__(self, "emissions", E)

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_observations(self) -> int:
        return self.emissions.shape[1]


@dataclass
class CoupledHmm:
    """Joint HMM built from a transition coupling of two hidden chains.

    ``coupling`` is the (d^2, d^2) hidden-pair transition matrix;
    ``joint_emissions[x, y]`` is an (m_a, m_b) coupling of the two
    emission rows; ``lifted_cost[x, y]`` equals its transport value.
    """

    coupling: np.ndarray
    joint_emissions: np.ndarray
    lifted_cost: np.ndarray


def lift_cost(A: Hmm, B: Hmm, obs_cost) -> tuple[np.ndarray, np.ndarray]:
    """Optimal-transport lift of an observation cost to hidden state pairs.

    For every pair (x, y) solves exact OT between emission rows
    ``A.emissions[x]`` and ``B.emissions[y]``, returning the (d_a, d_b)
    matrix of transport values and the (d_a, d_b, m_a, m_b) stack of
    optimal vertex couplings.
    """
    obs_cost = validate_cost_matrix(obs_cost, "observation cost")
    if obs_cost.shape != (A.n_observations, B.n_observations):
        raise InvalidInputError(
            f"observation cost must be ({A.n_observations}, {B.n_observations}),"
            f" got {obs_cost.shape}"
        )
    da, db = A.n_states, B.n_states
    lifted = np.zeros((da, db))
    joint = np.zeros((da, db, A.n_observations, B.n_observations))
    for x in range(da):
        for y in range(db):
            plan, value = solve_exact_ot(A.emissions[x], B.emissions[y], obs_cost)
            joint[x, y] = plan
            lifted[x, y] = value
    return lifted, joint


def couple_hmms(
    A: Hmm,
    B: Hmm,
    obs_cost,
    solver: str = "exact",
    entropic_params: EntropicParams | None = None,
) -> tuple[CoupledHmm, OtcSolution]:
    """Optimally couple two HMMs against an observation cost.

    Lifts the cost to hidden-state pairs, then solves the transition
    coupling problem on the hidden chains with the requested solver.  The
    solution's cost is the coupling cost between the HMMs.
    """
    if A.n_states != B.n_states:
        raise InvalidInputError("hidden chains must have the same number of states")
    lifted, joint = lift_cost(A, B, obs_cost)
    if solver == "exact":
        for name, M in (("A", A), ("B", B)):
            if not is_irreducible(M.transitions):
                raise InvalidInputError(f"hidden chain of {name} must be irreducible")
        solution = exact_otc(A.transitions, B.transitions, lifted)
    elif solver == "entropic":
        if entropic_params is None:
            raise InvalidInputError("entropic solver requires entropic_params")
        for name, M in (("A", A), ("B", B)):
            if not (is_irreducible(M.transitions) and is_aperiodic(M.transitions)):
                raise InvalidInputError(
                    f"hidden chain of {name} must be aperiodic and irreducible"
                )
        solution = entropic_otc(A.transitions, B.transitions, lifted, entropic_params)
    else:
        raise InvalidInputError(f"unknown solver {solver!r}; use 'exact' or 'entropic'")
    return CoupledHmm(solution.coupling, joint, lifted), solution


@dataclass
class CoupledSample:
    """One sampled trajectory of a coupled HMM, step-aligned arrays."""

    hidden_x: np.ndarray
    hidden_y: np.ndarray
    obs_u: np.ndarray
    obs_v: np.ndarray


def sample_coupled(C: CoupledHmm, steps: int, seed=None) -> CoupledSample:
    """Draw a stationary trajectory of hidden pairs and observation pairs.

    The hidden pair starts from the stationary distribution of the
    coupling's cheapest recurrent class (cheapest w.r.t. the lifted cost),
    evolves by the coupling, and at each step emits an observation pair
    from the joint emission coupling of the current hidden pair.
    """
    if steps < 1:
        raise InvalidInputError("steps must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    da, db = C.joint_emissions.shape[:2]
    _, start = otc_cost(C.coupling, C.lifted_cost.reshape(-1))
    n_pairs = C.coupling.shape[0]
    pair_cdf = np.cumsum(C.coupling, axis=1)

    hidden_x = np.empty(steps, dtype=int)
    hidden_y = np.empty(steps, dtype=int)
    obs_u = np.empty(steps, dtype=int)
    obs_v = np.empty(steps, dtype=int)
    s = sample_from_distribution(start, rng)
    for t in range(steps):
        x, y = divmod(s, db)
        hidden_x[t] = x
        hidden_y[t] = y
        flat = C.joint_emissions[x, y].reshape(-1)
        k = sample_from_distribution(flat, rng)
        obs_u[t], obs_v[t] = divmod(k, C.joint_emissions.shape[3])
        if t + 1 < steps:
            u = rng.random()
            s = int(np.searchsorted(pair_cdf[s], u, side="right"))
            s = min(s, n_pairs - 1)
    return CoupledSample(hidden_x, hidden_y, obs_u, obs_v)


def note_cost(kind: str) -> Callable[[int, int], float]:
    """Pitch-pair costs on MIDI-style integers, by interval class mod 12.

    ``octave``: 0 if the pitches are equal or whole octaves apart, else 1.
    ``tiered``: 0 for unison/octave, 1 for perfect consonance (5 or 7
    semitones), 2 for imperfect consonance (4 or 9 semitones), 10 for
    everything else.
    """
    if kind == "octave":

        def cost(a: int, b: int) -> float:
            return 0.0 if abs(int(a) - int(b)) % 12 == 0 else 1.0

    elif kind == "tiered":

        def cost(a: int, b: int) -> float:
            interval = abs(int(a) - int(b)) % 12
            if interval == 0:
                return 0.0
            if interval in (5, 7):
                return 1.0
            if interval in (4, 9):
                return 2.0
            return 10.0

    else:
        raise InvalidInputError(f"unknown note cost kind {kind!r}; use 'octave' or 'tiered'")
    return cost


def note_cost_matrix(kind: str, pitches_a, pitches_b) -> np.ndarray:
    """Tabulate :func:`note_cost` over two pitch alphabets."""
    cost = note_cost(kind)
    pa = [int(p) for p in pitches_a]
    pb = [int(p) for p in pitches_b]
    return np.array([[cost(a, b) for b in pb] for a in pa], dtype=float)
