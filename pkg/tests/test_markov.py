import numpy as np
import pytest

from otc.markov import (
    InvalidInputError,
    NumericalError,
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
    validate_distribution,
    validate_transition_coupling,
    validate_transition_matrix,
)

from conftest import load_reducible, random_stochastic


def test_validate_transition_matrix_rejects_bad_rows():
    with pytest.raises(InvalidInputError):
        validate_transition_matrix([[0.5, 0.4], [0.5, 0.5]])
    with pytest.raises(InvalidInputError):
        validate_transition_matrix([[1.2, -0.2], [0.5, 0.5]])
    with pytest.raises(InvalidInputError):
        validate_transition_matrix([[0.5, 0.5]])


def test_validate_distribution():
    validate_distribution([0.25, 0.75])
    with pytest.raises(InvalidInputError):
        validate_distribution([0.5, 0.6])
    with pytest.raises(InvalidInputError):
        validate_distribution([-0.1, 1.1])


def test_pair_indexer_bijection():
    idx = PairIndexer(7)
    seen = set()
    for x in range(7):
        for y in range(7):
            k = idx.index(x, y)
            assert idx.unindex(k) == (x, y)
            seen.add(k)
    assert seen == set(range(49))
    v = np.arange(49.0)
    assert np.array_equal(idx.to_vector(idx.to_matrix(v)), v)


def test_stationary_two_cycle():
    lams = stationary_distributions([[0.0, 1.0], [1.0, 0.0]])
    assert len(lams) == 1
    np.testing.assert_allclose(lams[0], [0.5, 0.5], atol=1e-12)


def test_stationary_hand_solved():
    # balance: lam0 * 0.1 = lam1 * 0.5 with lam0 + lam1 = 1
    lams = stationary_distributions([[0.9, 0.1], [0.5, 0.5]])
    assert len(lams) == 1
    np.testing.assert_allclose(lams[0], [5 / 6, 1 / 6], atol=1e-12)


def test_stationary_identity_two_classes():
    lams = stationary_distributions(np.eye(2))
    assert len(lams) == 2
    np.testing.assert_allclose(lams[0], [1.0, 0.0])
    np.testing.assert_allclose(lams[1], [0.0, 1.0])


def test_stationary_residual_invariant():
    rng = np.random.default_rng(11)
    for _ in range(25):
        T = random_stochastic(rng, int(rng.integers(2, 7)))
        for lam in stationary_distributions(T):
            assert np.abs(lam @ T - lam).sum() <= 1e-9


def test_recurrent_classes_basic():
    assert recurrent_classes([[0.0, 1.0], [1.0, 0.0]]) == [[0, 1]]
    assert recurrent_classes(np.eye(2)) == [[0], [1]]


def test_recurrent_classes_exclude_transient():
    # state 0 leaks into the closed pair {1, 2}
    T = np.array([[0.5, 0.5, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    assert recurrent_classes(T) == [[1, 2]]


def test_reducible_coupling_fixture_structure():
    P, Q, R = load_reducible()
    assert is_irreducible(P)
    assert is_irreducible(Q)
    errs = coupling_marginal_error(R, P, Q)
    assert max(errs) == 0.0
    assert not is_irreducible(R)
    classes = recurrent_classes(R)
    flat = [s for cls in classes for s in cls]
    assert 4 not in flat  # pair (1,1) is transient


def test_irreducible_aperiodic_small_cases():
    assert is_irreducible([[0.0, 1.0], [1.0, 0.0]])
    assert not is_aperiodic([[0.0, 1.0], [1.0, 0.0]])
    assert is_aperiodic([[0.5, 0.5], [0.5, 0.5]])
    assert not is_irreducible(np.eye(2))
    # period 3 ring
    ring = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=float)
    assert is_irreducible(ring) and not is_aperiodic(ring)
    # self loop breaks the period
    mixed = np.array([[0.5, 0.5, 0], [0, 0, 1], [1, 0, 0]], dtype=float)
    assert is_irreducible(mixed) and is_aperiodic(mixed)


def test_irreducible_iff_single_class_covering_all_states():
    rng = np.random.default_rng(33)
    cases = [np.eye(3), np.array([[0.5, 0.5, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])]
    for _ in range(30):
        d = int(rng.integers(2, 6))
        T = rng.random((d, d)) * (rng.random((d, d)) < 0.5)
        T += np.eye(d) * (T.sum(axis=1, keepdims=True) == 0).ravel()[:, None]
        cases.append(T / T.sum(axis=1, keepdims=True))
    for T in cases:
        classes = recurrent_classes(T)
        single_covering = len(classes) == 1 and len(classes[0]) == T.shape[0]
        assert is_irreducible(T) == single_covering


def test_irreducibility_ignores_float_dust():
    T = np.array([[1.0 - 1e-16, 1e-16], [1e-16, 1.0 - 1e-16]])
    assert not is_irreducible(T)


def test_independent_coupling_identity():
    R = independent_coupling(np.eye(2), np.eye(2))
    np.testing.assert_array_equal(R, np.eye(4))


def test_independent_coupling_hand_product():
    P = np.array([[0.5, 0.5], [0.5, 0.5]])
    Q = np.array([[0.0, 1.0], [1.0, 0.0]])
    R = independent_coupling(P, Q)
    # from (x, y): Q forces the second coordinate, P splits the first
    np.testing.assert_allclose(R[0], [0.0, 0.5, 0.0, 0.5])
    np.testing.assert_allclose(R[1], [0.5, 0.0, 0.5, 0.0])
    np.testing.assert_allclose(R[3], [0.5, 0.0, 0.5, 0.0])
    assert max(coupling_marginal_error(R, P, Q)) == 0.0


def test_independent_coupling_power_identity():
    rng = np.random.default_rng(5)
    P = random_stochastic(rng, 3)
    Q = random_stochastic(rng, 3)
    R = independent_coupling(P, Q)
    for k in (2, 3, 5):
        lhs = np.linalg.matrix_power(R, k)
        rhs = independent_coupling(
            np.linalg.matrix_power(P, k), np.linalg.matrix_power(Q, k)
        )
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_independent_coupling_preserves_mixing():
    rng = np.random.default_rng(6)
    for _ in range(10):
        P = random_stochastic(rng, 3)
        Q = random_stochastic(rng, 3)
        R = independent_coupling(P, Q)
        assert is_irreducible(R)
        assert is_aperiodic(R)


def test_independent_coupling_dim_mismatch():
    with pytest.raises(InvalidInputError):
        independent_coupling(np.eye(2), np.eye(3))


def test_cesaro_limit_periodic():
    T = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(cesaro_limit(T, tol=1e-12), np.full((2, 2), 0.5), atol=1e-11)


def test_cesaro_limit_idempotent_uniform():
    T = np.full((2, 2), 0.5)
    np.testing.assert_allclose(cesaro_limit(T), T, atol=1e-12)


def test_cesaro_limit_matches_stationary():
    T = np.array([[0.9, 0.1], [0.5, 0.5]])
    lim = cesaro_limit(T, tol=1e-12)
    np.testing.assert_allclose(lim, [[5 / 6, 1 / 6], [5 / 6, 1 / 6]], atol=1e-10)


def test_cesaro_limit_max_power_failure():
    # tolerance below float precision is unreachable for any horizon
    T = np.array([[0.9, 0.1], [0.5, 0.5]])
    with pytest.raises(NumericalError):
        cesaro_limit(T, tol=1e-18, max_power=2**20)


def test_cesaro_projection_matches_limit():
    rng = np.random.default_rng(7)
    for _ in range(10):
        T = random_stochastic(rng, 4)
        np.testing.assert_allclose(
            cesaro_projection(T), cesaro_limit(T, tol=1e-13), atol=1e-10
        )


def test_cesaro_limit_reducible_chain():
    T = np.array([[0.5, 0.5, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    np.testing.assert_allclose(
        cesaro_limit(T, tol=1e-12), cesaro_projection(T), atol=1e-10
    )


def test_cesaro_projection_reducible():
    T = np.array([[0.5, 0.5, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    tbar = cesaro_projection(T)
    # every start ends in the closed pair {1, 2} with its 50/50 stationary law
    np.testing.assert_allclose(tbar, np.tile([0.0, 0.5, 0.5], (3, 1)), atol=1e-12)


def test_estimate_alternating():
    P, rows = estimate_transition_matrix([0, 1, 0, 1, 0], 2)
    np.testing.assert_array_equal(P, [[0.0, 1.0], [1.0, 0.0]])
    assert rows == []


def test_estimate_unvisited_row_uniform():
    P, rows = estimate_transition_matrix([0, 0, 0, 1], 2)
    np.testing.assert_allclose(P[0], [2 / 3, 1 / 3])
    np.testing.assert_allclose(P[1], [0.5, 0.5])
    assert rows == [1]


def test_estimate_rejects_bad_sequences():
    with pytest.raises(InvalidInputError):
        estimate_transition_matrix([0], 2)
    with pytest.raises(InvalidInputError):
        estimate_transition_matrix([0, 3], 2)


def test_simulate_identity_and_deterministic_cycle():
    path = simulate_chain(np.eye(2), 0, 5, seed=1)
    np.testing.assert_array_equal(path, [0, 0, 0, 0, 0, 0])
    path = simulate_chain([[0.0, 1.0], [1.0, 0.0]], 0, 4, seed=1)
    np.testing.assert_array_equal(path, [0, 1, 0, 1, 0])


def test_simulate_seed_reproducible():
    T = random_stochastic(np.random.default_rng(0), 3)
    a = simulate_chain(T, 0, 200, seed=42)
    b = simulate_chain(T, 0, 200, seed=42)
    np.testing.assert_array_equal(a, b)
    with pytest.raises(InvalidInputError):
        simulate_chain(T, 3, 5, seed=0)


def test_estimate_simulate_round_trip():
    rng = np.random.default_rng(0)
    P = random_stochastic(rng, 3, floor=0.1)
    path = simulate_chain(P, 0, 100_000, seed=7)
    P_hat, rows = estimate_transition_matrix(path, 3)
    assert rows == []
    assert np.abs(P_hat - P).max() <= 0.05


def test_validate_transition_coupling():
    rng = np.random.default_rng(2)
    P = random_stochastic(rng, 3)
    Q = random_stochastic(rng, 3)
    R = independent_coupling(P, Q)
    validate_transition_coupling(R, P, Q)
    R_bad = R.copy()
    R_bad[0] = np.roll(R_bad[0], 1)
    with pytest.raises(InvalidInputError):
        validate_transition_coupling(R_bad, P, Q)
