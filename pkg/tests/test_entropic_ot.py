import numpy as np
import pytest

from otc.entropic_ot import (
    ApproxOtParams,
    approx_ot,
    round_batch,
    round_to_feasible,
    sinkhorn,
    sinkhorn_fixed_batch,
)
from otc.markov import InvalidInputError

from conftest import random_distribution

HALF = np.array([0.5, 0.5])


def test_sinkhorn_uniform_kernel_needs_no_iterations():
    res = sinkhorn(np.ones((2, 2)), HALF, HALF, eps_prime=1e-9)
    assert res.iterations == 0
    assert res.converged
    np.testing.assert_allclose(res.plan, np.full((2, 2), 0.25), atol=1e-15)


def test_sinkhorn_symmetric_two_by_two_fixed_point():
    # K = exp(-C) with swap cost: scaled iterate puts e/(2(e+1)) on the diagonal
    K = np.exp(-np.array([[0.0, 1.0], [1.0, 0.0]]))
    res = sinkhorn(K, HALF, HALF, eps_prime=1e-13)
    target = np.e / (2.0 * (np.e + 1.0))
    assert res.plan[0, 0] == pytest.approx(target, abs=1e-12)
    assert res.plan[1, 1] == pytest.approx(target, abs=1e-12)
    assert res.plan[0, 1] == pytest.approx(0.5 - target, abs=1e-12)


def test_sinkhorn_converges_on_random_kernel():
    rng = np.random.default_rng(0)
    K = rng.random((5, 5)) + 0.05
    r = random_distribution(rng, 5)
    c = random_distribution(rng, 5)
    res = sinkhorn(K, r, c, eps_prime=1e-10)
    assert res.converged
    assert res.marginal_gap <= 1e-10
    # iterate keeps the scaling structure diag(e^u) K diag(e^v)
    rebuilt = np.exp(res.log_u)[:, None] * K * np.exp(res.log_v)[None, :]
    np.testing.assert_allclose(res.plan, rebuilt, atol=1e-15)


def test_sinkhorn_scaling_invariant_on_support():
    with pytest.raises(InvalidInputError):
        sinkhorn(np.array([[1.0, 0.0], [1.0, 1.0]]), HALF, HALF, 1e-6)
    with pytest.raises(InvalidInputError):
        sinkhorn(np.ones((2, 2)), np.array([1.0, 0.0]), HALF, 1e-6)


def test_sinkhorn_unique_limit_from_scaled_kernel():
    # scaling K by outer(a, b) does not change the limit coupling
    rng = np.random.default_rng(3)
    K = rng.random((4, 4)) + 0.1
    r = random_distribution(rng, 4)
    c = random_distribution(rng, 4)
    res1 = sinkhorn(K, r, c, eps_prime=1e-12)
    a = rng.random(4) + 0.5
    b = rng.random(4) + 0.5
    res2 = sinkhorn(K * np.outer(a, b), r, c, eps_prime=1e-12)
    assert np.abs(res1.plan - res2.plan).sum() <= 1e-8


def test_round_feasible_input_unchanged():
    F = np.outer(HALF, HALF)
    out = round_to_feasible(F, HALF, HALF)
    np.testing.assert_allclose(out, F, atol=1e-15)


def test_round_hand_traced():
    F = np.array([[0.5, 0.0], [0.0, 0.25]])
    out = round_to_feasible(F, HALF, HALF)
    # scalings leave F alone; deficits (0, 0.25) land on the (1,1) cell
    np.testing.assert_allclose(out, [[0.5, 0.0], [0.0, 0.5]], atol=1e-15)
    gap = np.abs(F.sum(1) - HALF).sum() + np.abs(F.sum(0) - HALF).sum()
    assert np.abs(out - F).sum() <= 2 * gap


def test_round_rescaling_path():
    X = np.array([[0.25, 0.25], [0.25, 0.25]])
    out = round_to_feasible(0.5 * X, HALF, HALF)
    np.testing.assert_allclose(out.sum(axis=1), HALF, atol=1e-15)
    np.testing.assert_allclose(out.sum(axis=0), HALF, atol=1e-15)


def test_round_always_feasible_and_l1_bounded():
    rng = np.random.default_rng(1)
    for _ in range(200):
        m = int(rng.integers(1, 6))
        n = int(rng.integers(1, 6))
        F = rng.random((m, n)) * rng.random()
        r = random_distribution(rng, m)
        c = random_distribution(rng, n)
        out = round_to_feasible(F, r, c)
        assert np.abs(out.sum(axis=1) - r).max() <= 1e-12
        assert np.abs(out.sum(axis=0) - c).max() <= 1e-12
        assert out.min() >= 0
        gap = np.abs(F.sum(1) - r).sum() + np.abs(F.sum(0) - c).sum()
        assert np.abs(out - F).sum() <= 2 * gap + 1e-12


def test_round_rejects_zero_matrix():
    with pytest.raises(InvalidInputError):
        round_to_feasible(np.zeros((2, 2)), HALF, HALF)


def test_approx_ot_forced_by_degenerate_marginal():
    plan = approx_ot(
        np.array([1.0, 0.0]), np.array([0.3, 0.7]), np.ones((2, 2)), ApproxOtParams(5.0, 0.5)
    )
    np.testing.assert_allclose(plan, [[0.3, 0.7], [0.0, 0.0]], atol=1e-15)


def test_approx_ot_close_to_entropic_optimum():
    params = ApproxOtParams(xi=5.0, eps=0.1)
    cost = np.array([[0.0, 1.0], [1.0, 0.0]])
    plan = approx_ot(HALF, HALF, cost, params)
    ref = sinkhorn(np.exp(-5.0 * cost), HALF, HALF, eps_prime=1e-14).plan
    assert np.abs(plan - ref).sum() <= 0.1
    np.testing.assert_allclose(plan.sum(axis=1), HALF, atol=1e-10)


def test_approx_ot_large_xi_approaches_exact_value():
    cost = np.array([[0.0, 1.0], [1.0, 0.0]])
    plan = approx_ot(HALF, HALF, cost, ApproxOtParams(xi=200.0, eps=0.05))
    assert float(np.sum(plan * cost)) <= 0.02  # exact value is 0


def test_approx_ot_support_containment():
    rng = np.random.default_rng(5)
    r = np.array([0.4, 0.0, 0.6])
    c = np.array([0.0, 0.5, 0.5])
    cost = rng.random((3, 3))
    plan = approx_ot(r, c, cost, ApproxOtParams(3.0, 0.2))
    assert plan[1, :].max() == 0.0
    assert plan[:, 0].max() == 0.0
    np.testing.assert_allclose(plan.sum(axis=1), r, atol=1e-10)
    np.testing.assert_allclose(plan.sum(axis=0), c, atol=1e-10)


def test_approx_ot_monotone_in_xi():
    rng = np.random.default_rng(11)
    cost = rng.random((6, 6))
    r = random_distribution(rng, 6)
    c = random_distribution(rng, 6)
    eps = 0.05
    values = []
    for xi in (2.0, 8.0, 32.0):
        plan = approx_ot(r, c, cost, ApproxOtParams(xi, eps))
        values.append(float(np.sum(plan * cost)))
    assert values[1] <= values[0] + 2 * eps
    assert values[2] <= values[1] + 2 * eps


def test_approx_ot_log_domain_guard():
    # xi * max cost far beyond exp underflow; linear-domain kernel would be 0
    cost = np.array([[0.0, 1.0], [1.0, 0.0]])
    plan = approx_ot(HALF, HALF, cost, ApproxOtParams(xi=2000.0, eps=0.05))
    assert np.isfinite(plan).all()
    np.testing.assert_allclose(plan.sum(axis=1), HALF, atol=1e-10)
    assert float(np.sum(plan * cost)) <= 0.01


def test_approx_ot_param_validation():
    with pytest.raises(InvalidInputError):
        ApproxOtParams(xi=-1.0, eps=0.1)
    with pytest.raises(InvalidInputError):
        ApproxOtParams(xi=1.0, eps=1.5)
    with pytest.raises(InvalidInputError):
        approx_ot(HALF, HALF, -np.ones((2, 2)), ApproxOtParams(1.0, 0.5))


def test_batched_kernels_match_single_path():
    rng = np.random.default_rng(42)
    d = 4
    cost = rng.random((d, d))
    P = rng.random((d, d)) + 0.1
    P /= P.sum(axis=1, keepdims=True)
    Q = rng.random((d, d)) + 0.1
    Q /= Q.sum(axis=1, keepdims=True)
    row_marg = np.repeat(P, d, axis=0)
    col_marg = np.tile(Q, (d, 1))
    iters = 37
    batch = sinkhorn_fixed_batch(cost, 6.0, row_marg, col_marg, iters)
    rounded = round_batch(batch, row_marg, col_marg)
    K = np.exp(-6.0 * cost)
    for s in range(d * d):
        single = sinkhorn(K, row_marg[s], col_marg[s], eps_prime=0.0, fixed_iters=iters)
        np.testing.assert_allclose(batch[s], single.plan, atol=1e-12)
        np.testing.assert_allclose(
            rounded[s], round_to_feasible(single.plan, row_marg[s], col_marg[s]), atol=1e-12
        )


def test_batched_log_domain_matches_linear(monkeypatch):
    import otc.entropic_ot as eot

    rng = np.random.default_rng(4)
    d = 3
    cost = rng.random((d, d))
    P = rng.random((d, d)) + 0.2
    P /= P.sum(axis=1, keepdims=True)
    row_marg = np.repeat(P, d, axis=0)
    col_marg = np.tile(P, (d, 1))
    lin = sinkhorn_fixed_batch(cost, 10.0, row_marg, col_marg, 25)
    monkeypatch.setattr(eot, "LOG_DOMAIN_EXPONENT", 0.0)  # force the log path
    log = sinkhorn_fixed_batch(cost, 10.0, row_marg, col_marg, 25)
    np.testing.assert_allclose(log, lin, atol=1e-12)
