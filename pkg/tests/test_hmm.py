import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lyapbound import fixtures
from lyapbound.ensemble import EnsembleError
from lyapbound.hmm import (
    EntropyRateReport,
    HmmModel,
    block_entropy,
    bsc,
    entropy_rate_bounds,
    entropy_rate_mc,
    forward_log_normalisers,
    markov_entropy_rate,
    stationary_distribution,
    transfer_matrices,
)

M = np.array([[0.9, 0.1], [0.1, 0.9]])


def test_transfer_noiseless_and_uniform():
    A = transfer_matrices(HmmModel(M, np.eye(2)))
    assert np.array_equal(A[0], np.array([[0.9, 0.0], [0.1, 0.0]]))
    assert np.array_equal(A[1], np.array([[0.0, 0.1], [0.0, 0.9]]))
    A = transfer_matrices(HmmModel(M, np.full((2, 2), 0.5)))
    assert np.array_equal(A[0], M / 2) and np.array_equal(A[1], M / 2)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 4), st.integers(2, 4), st.integers(0, 2**31))
def test_transfer_sum_is_M(k, m, seed):
    rng = np.random.default_rng(seed)
    Mr = rng.dirichlet(np.ones(k), size=k)
    W = rng.dirichlet(np.ones(m), size=k)
    W[:, -1] = 1.0 - W[:, :-1].sum(axis=1)
    model = HmmModel(Mr, W)
    # exact up to the rounding of the row sums of W
    assert np.max(np.abs(transfer_matrices(model).sum(axis=0) - model.M)) <= 4 * np.finfo(float).eps


def test_stationary():
    Mr = np.array([[0.5, 0.5], [0.2, 0.8]])
    mu = stationary_distribution(Mr)
    assert np.allclose(mu, [2 / 7, 5 / 7], atol=1e-14)


def test_model_validation():
    with pytest.raises(EnsembleError, match="rows"):
        HmmModel([[0.5, 0.6], [0.5, 0.5]], np.eye(2))
    with pytest.raises(EnsembleError, match="stationary"):
        HmmModel(M, np.eye(2), mu=[0.3, 0.7])
    with pytest.raises(EnsembleError, match="mismatch"):
        HmmModel(M, np.eye(3))


def test_mc_uniform_and_noiseless():
    est = entropy_rate_mc(fixtures.model("hmm_uniform"), n=2000, trials=8)
    assert abs(est.value - np.log(2)) <= 3 * est.stderr + 1e-12
    est = entropy_rate_mc(fixtures.model("hmm_noiseless"), n=5000, trials=16)
    assert abs(est.value - markov_entropy_rate(M)) <= 3 * est.stderr


def test_normalisers_are_probabilities():
    model = fixtures.model("hmm_bsc005")
    ys = np.random.default_rng(0).integers(0, 2, size=(4, 200))
    logs = forward_log_normalisers(model, ys)
    assert np.all(logs <= 0)


def test_block_entropy_decreasing_to_mc():
    model = fixtures.model("hmm_bsc005")
    vals = [block_entropy(model, n) for n in (4, 8, 12)]
    assert vals[0] > vals[1] > vals[2]
    est = entropy_rate_mc(model, n=10_000, trials=16)
    assert est.value <= vals[2] + 3 * est.stderr


def test_bounds_uniform_exact():
    r = entropy_rate_bounds(fixtures.model("hmm_uniform"), n=500, trials=4)
    assert abs(r.lower - np.log(2)) <= 1e-9 and abs(r.upper - np.log(2)) <= 1e-9


def test_bounds_noiseless_contains_markov_rate():
    r = entropy_rate_bounds(fixtures.model("hmm_noiseless"), n=500, trials=4)
    assert r.lower <= markov_entropy_rate(M) <= r.upper


def test_grid_matches_vertices():
    model = fixtures.model("hmm_bsc005")
    a = entropy_rate_bounds(model, with_mc=False)
    b = entropy_rate_bounds(model, belief_search="grid", with_mc=False)
    assert abs(a.lower - b.lower) <= 1e-9 and abs(a.upper - b.upper) <= 1e-9


def test_grid_too_many_states():
    k = 9
    model = HmmModel(np.full((k, k), 1 / k), np.eye(k))
    with pytest.raises(EnsembleError, match="limited"):
        entropy_rate_bounds(model, belief_search="grid", with_mc=False)


def test_degradation_ordering():
    ests = [entropy_rate_mc(HmmModel(M, bsc(e)), n=5000, trials=16) for e in (0.0, 0.25)]
    assert ests[0].value <= ests[1].value <= np.log(2) + 3 * ests[1].stderr


def test_report_round_trip():
    r = entropy_rate_bounds(fixtures.model("hmm_bsc005"), n=200, trials=3)
    again = EntropyRateReport.from_dict(r.to_dict())
    assert again.to_dict() == r.to_dict()
    r = entropy_rate_bounds(fixtures.model("hmm_bsc005"), with_mc=False)
    assert r.to_dict()["mc_estimate"] is None
