import numpy as np
import pytest
from hypothesis import given, settings

from mblab import markov
from mblab.errors import (
    NegativeEntry,
    NoConvergence,
    NotIrreducible,
    RowSumViolation,
    StructureUnsupported,
)
from mblab.markov import (
    RewardFunction,
    StochasticMatrix,
    Trajectory,
    check_generator,
    is_irreducible,
    mean_return_time,
    new_stochastic_matrix,
    perron_frobenius,
    simulate,
    stationary_distribution,
)
from mblab.rng import stream

from conftest import CHAIN
from strategies import irreducible_stochastic, positive_stochastic


# stochastic matrices


def test_identity_is_valid():
    P = new_stochastic_matrix([[1, 0], [0, 1]])
    assert P.n == 2


def test_chain_is_valid():
    assert isinstance(new_stochastic_matrix(CHAIN), StochasticMatrix)


def test_row_sum_violation_reports_row_and_deviation():
    with pytest.raises(RowSumViolation) as err:
        new_stochastic_matrix([[0.5, 0.6], [0.2, 0.8]])
    assert err.value.row == 0
    assert err.value.deviation == pytest.approx(0.1)


def test_negative_entry():
    with pytest.raises(NegativeEntry) as err:
        new_stochastic_matrix([[1.1, -0.1], [0.2, 0.8]])
    assert (err.value.row, err.value.col) == (0, 1)


def test_needs_two_states():
    with pytest.raises(ValueError):
        new_stochastic_matrix([[1.0]])


def test_row_sum_tolerance_is_tight():
    new_stochastic_matrix([[0.5, 0.5 + 5e-13], [0.2, 0.8]])
    with pytest.raises(RowSumViolation):
        new_stochastic_matrix([[0.5, 0.5 + 5e-12], [0.2, 0.8]])


def test_matrix_is_immutable():
    P = new_stochastic_matrix(CHAIN)
    with pytest.raises(ValueError):
        P.entries[0, 0] = 0.5


@settings(max_examples=50, deadline=None)
@given(positive_stochastic(max_n=6))
def test_rows_sum_to_one(P):
    S = new_stochastic_matrix(P)
    assert np.abs(S.entries.sum(axis=1) - 1).max() <= 1e-12


# rewards


def test_reward_sets():
    f = RewardFunction([0.0, 1.0, 1.0, 0.5])
    assert (f.M, f.m) == (1.0, 0.0)
    assert f.S_M == (1, 2) and f.S_m == (0,)


def test_constant_reward_rejected():
    with pytest.raises(ValueError):
        RewardFunction([1.0, 1.0])


# irreducibility and generator conditions


@pytest.mark.parametrize(
    "P, expected",
    [(CHAIN, True), ([[1, 0], [0, 1]], False), ([[0, 1], [1, 0]], True)],
)
def test_is_irreducible(P, expected):
    assert is_irreducible(P) is expected


def test_chain_passes_generator_conditions():
    assert check_generator(CHAIN, [0, 1]).passed


@settings(max_examples=50, deadline=None)
@given(positive_stochastic(max_n=5))
def test_positive_matrix_always_passes(P):
    f = np.arange(P.shape[0], dtype=float)
    assert check_generator(P, f).passed


def test_periodic_singleton_fails_top_condition():
    rep = check_generator([[0, 1], [1, 0]], [0, 1])
    assert not rep.top_block_irreducible
    assert rep.reaches_top
    assert not rep.passed


def test_check_generator_needs_irreducible():
    with pytest.raises(NotIrreducible):
        check_generator([[1, 0], [0, 1]], [0, 1])


def test_missing_edge_into_top_block():
    P = [[0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]]
    rep = check_generator(P, [0, 0.5, 1])
    assert rep.top_block_irreducible
    assert not rep.reaches_top
    assert rep.details["top"]["states_without_edge"] == [0]


# stationary distribution


@pytest.mark.parametrize(
    "P, pi",
    [
        (CHAIN, [2 / 3, 1 / 3]),
        ([[0.5, 0.5], [0.5, 0.5]], [0.5, 0.5]),
        ([[0, 1], [1, 0]], [0.5, 0.5]),
    ],
)
def test_stationary_examples(P, pi):
    np.testing.assert_allclose(stationary_distribution(P), pi, atol=1e-15)


def test_stationary_needs_irreducible():
    with pytest.raises(NotIrreducible):
        stationary_distribution([[1, 0], [0, 1]])


@settings(max_examples=60, deadline=None)
@given(irreducible_stochastic(max_n=6))
def test_stationary_is_invariant_and_unique(P):
    pi = stationary_distribution(P)
    assert np.all(pi >= 0)
    assert abs(pi.sum() - 1) <= 1e-12
    assert np.abs(pi @ P - pi).max() <= 1e-12
    # one-dimensional null space of P^T - I
    assert np.linalg.matrix_rank(P.T - np.eye(len(P))) == len(P) - 1


# Perron-Frobenius


def test_pf_of_stochastic_matrix():
    pf = perron_frobenius(CHAIN)
    assert pf.rho == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(pf.u, [2 / 3, 1 / 3], atol=1e-11)
    np.testing.assert_allclose(pf.v, [1, 1], atol=1e-11)


def test_pf_block_shape():
    pf = perron_frobenius([[0, 0.1], [0, 0.8]])
    assert pf.rho == pytest.approx(0.8, abs=1e-12)
    assert pf.u[0] == 0.0 and pf.u[1] == pytest.approx(1.0)
    assert pf.v[1] / pf.v[0] == pytest.approx(8.0, rel=1e-10)
    assert np.all(pf.v > 0)


def test_pf_rank_one():
    pf = perron_frobenius([[0.3, 0.3], [0.3, 0.3]])
    assert pf.rho == pytest.approx(0.6, rel=1e-12)
    assert pf.v[0] == pytest.approx(pf.v[1], rel=1e-12)


def test_pf_periodic():
    pf = perron_frobenius([[0, 1], [1, 0]])
    assert pf.rho == pytest.approx(1.0, abs=1e-12)


def test_pf_rejects_unsupported_shape():
    with pytest.raises(StructureUnsupported):
        perron_frobenius([[1, 0], [0, 1]])


def test_pf_reports_nonconvergence():
    with pytest.raises(NoConvergence) as err:
        perron_frobenius([[0.5, 0.5], [0.1, 0.9]], max_iter=1)
    assert err.value.residual > 0


def _pf_invariants(M, pf):
    M = np.asarray(M)
    assert np.abs(pf.u @ M - pf.rho * pf.u).max() <= 1e-10 * pf.rho
    assert np.abs(M @ pf.v - pf.rho * pf.v).max() <= 1e-10 * pf.rho
    assert abs(pf.u.sum() - 1) <= 1e-12
    assert abs(pf.u @ pf.v - 1) <= 1e-12
    assert np.all(pf.u >= 0) and np.all(pf.v > 0)


@settings(max_examples=60, deadline=None)
@given(irreducible_stochastic(max_n=6))
def test_pf_invariants_on_stochastic(P):
    pf = perron_frobenius(P)
    _pf_invariants(P, pf)
    assert abs(pf.rho - 1) <= 1e-10
    assert (pf.v.max() - pf.v.min()) / pf.v.max() <= 1e-9


@settings(max_examples=60, deadline=None)
@given(irreducible_stochastic(max_n=6))
def test_pf_invariants_on_scaled_columns(P):
    M = P * np.linspace(0.2, 3.0, len(P))[None, :]
    _pf_invariants(M, perron_frobenius(M))


# simulation


def test_zero_steps():
    tr = simulate(CHAIN, [1, 0], 0, stream(1))
    assert tr.states.tolist() == [0]


def test_deterministic_cycle():
    tr = simulate([[0, 1], [1, 0]], [1, 0], 4, stream(1))
    assert tr.states.tolist() == [0, 1, 0, 1, 0]


def test_simulate_is_reproducible():
    a = simulate(CHAIN, [0.5, 0.5], 1000, stream(7, "x"))
    b = simulate(CHAIN, [0.5, 0.5], 1000, stream(7, "x"))
    assert np.array_equal(a.states, b.states)


def test_transition_frequencies_match():
    steps = 100_000
    tr = simulate(CHAIN, [0.5, 0.5], steps, stream(3))
    counts = tr.pair_counts(2)
    assert counts.sum() == steps
    P = np.array(CHAIN)
    for x in range(2):
        n = counts[x].sum()
        p_hat = counts[x] / n
        se = np.sqrt(P[x] * (1 - P[x]) / n)
        assert np.all(np.abs(p_hat - P[x]) <= 4 * se)


def test_simulate_many_matches_single_path_law():
    paths = markov.simulate_many(CHAIN, [1, 0], 1, 100_000, stream(5))
    share = paths[:, 1].mean()
    assert abs(share - 0.1) <= 4 * np.sqrt(0.09 / 100_000)


def test_trajectory_support():
    tr = Trajectory([0, 1, 0])
    assert tr.is_supported_by([[0, 1], [1, 0]])
    assert not tr.is_supported_by([[1, 0], [0, 1]])


# mean return time


@pytest.mark.parametrize("q, R", [([1, 0], 1.5), ([0.5, 0.5], 2.25), ([2 / 3, 1 / 3], 2.0)])
def test_mean_return_time_examples(q, R):
    assert mean_return_time(CHAIN, q) == pytest.approx(R, abs=1e-12)


def test_return_time_by_first_step_analysis():
    # h(x) = expected hitting time of state 0 from x; R_0 = 1 + sum_y P(0,y) h(y)
    P = np.array(CHAIN)
    h1 = 1 / P[1, 0]
    assert mean_return_time(P, [1, 0]) == pytest.approx(1 + P[0, 1] * h1, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(irreducible_stochastic(max_n=6))
def test_kac_consistency(P):
    pi = stationary_distribution(P)
    for x in range(len(P)):
        q = np.zeros(len(P))
        q[x] = 1
        assert mean_return_time(P, q) * pi[x] == pytest.approx(1, abs=1e-10)


def test_mean_return_time_monte_carlo():
    reps = 100_000
    times = markov.first_return_times(CHAIN, [0.5, 0.5], reps, stream(11))
    est, se = times.mean(), times.std(ddof=1) / np.sqrt(reps)
    assert abs(est - 2.25) <= 3 * se


def test_mean_return_time_with_degenerate_q():
    assert np.isfinite(mean_return_time(CHAIN, [0, 1]))
