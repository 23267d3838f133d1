import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lyapbound import fixtures
from lyapbound.ensemble import (
    LOG_FLOOR,
    EnsembleError,
    MarkovEnsemble,
    SamplerEnsemble,
    discrete,
    dumps,
    expect_log_form,
    invert_ensemble,
    loads,
    scale_ensemble,
    validate,
)


def test_rank_one_pair_flags():
    ens = fixtures.ensemble("rank_one_pair")
    assert not ens.invertible
    assert not ens.commuting


def test_identity_flags():
    ens = validate({"dim": 2, "kind": "discrete", "matrices": [[[1, 0], [0, 1]]], "probs": [1.0]})
    assert ens.invertible and ens.commuting


@pytest.mark.parametrize("spec, message", [
    ({"dim": 1, "matrices": [[[1]], [[2]]], "probs": [0.5, 0.6]}, "probabilities do not sum to 1"),
    ({"dim": 1, "matrices": [[[1]], [[2]]], "probs": [1.5, -0.5]}, "negative probability"),
    ({"dim": 2, "matrices": [[[1]]], "probs": [1.0]}, "dimension mismatch"),
    ({"dim": 1, "matrices": [], "probs": []}, "empty support"),
    ({"dim": 1, "kind": "markov", "matrices": [[[1]], [[2]]], "transition": [[0.5, 0.6], [0.5, 0.5]],
      "initial": [0.5, 0.5]}, "not stochastic"),
])
def test_validation_errors(spec, message):
    with pytest.raises(EnsembleError, match=message):
        validate(spec)


def test_zero_weight_atoms_dropped():
    ens = discrete([[[1.0]], [[2.0]]], [1.0, 0.0])
    assert ens.size == 1


def test_complex_entries_parse():
    ens = validate({"dim": 1, "matrices": [[[[0.0, 1.0]]]], "probs": [1.0]})
    assert ens.matrices[0, 0, 0] == 1j


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(-64, 64), st.integers(0, 6)), min_size=4, max_size=4))
def test_rational_round_trip_bit_exact(entries):
    vals = [a / 2**b for a, b in entries]
    mats = [[[vals[0], vals[1]], [vals[2], vals[3]]]]
    ens = validate({"dim": 2, "matrices": mats, "probs": [1.0]})
    again = loads(dumps(ens))
    assert np.array_equal(again.matrices, ens.matrices)
    assert dumps(again) == dumps(ens)


def test_fixture_round_trip():
    for name in fixtures.ENSEMBLES:
        ens = fixtures.ensemble(name)
        assert dumps(loads(dumps(ens))) == dumps(ens)


def test_expect_log_form_exact_discrete():
    ens = fixtures.ensemble("diag_rotation_pair")
    est = expect_log_form(ens, np.eye(2) / 2)
    G = np.einsum("kab,kcb->kac", ens.matrices, ens.matrices)
    want = np.mean(np.log(np.einsum("kaa->k", G) / 2))
    assert abs(est.value - want) <= 1e-15 and est.stderr == 0.0


def test_expect_log_form_clamps_zero_trace():
    ens = fixtures.ensemble("rank_one_pair")
    est = expect_log_form(ens, np.diag([0.0, 1.0]))
    assert est.value == 0.5 * (np.log(LOG_FLOOR) + np.log(0.5))


def test_expect_log_form_rank_one_pair():
    ens = fixtures.ensemble("rank_one_pair")
    est = expect_log_form(ens, np.diag([1.0, 0.0]))
    assert abs(est.value - 0.5 * np.log(0.5)) <= 1e-15


def test_expect_log_form_unitary_is_zero(rng):
    q, _ = np.linalg.qr(rng.standard_normal((3, 3, 3)))
    X = np.diag([0.2, 0.3, 0.5])
    assert abs(expect_log_form(discrete(q), X).value) <= 1e-14


def test_expect_log_form_haar_deterministic_trace():
    est = expect_log_form(fixtures.ensemble("haar_diag_5_1"), np.eye(2) / 2, samples=1000)
    assert abs(est.value - np.log(13)) <= 1e-12


def test_sampler_replay():
    ens = fixtures.ensemble("haar_diag_5_1")
    assert np.array_equal(ens.sample(3), ens.sample(3))
    assert not np.array_equal(ens.sample(3), ens.sample(4))
    s = np.linalg.svd(ens.sample(7), compute_uv=False)
    assert np.allclose(s, [5, 1])


def test_invert_and_scale():
    ens = fixtures.ensemble("transfer_pm1")
    inv = invert_ensemble(ens)
    assert np.allclose(inv.matrices @ ens.matrices, np.eye(2))
    with pytest.raises(EnsembleError, match="singular"):
        invert_ensemble(fixtures.ensemble("rank_one_pair"))
    assert np.allclose(scale_ensemble(ens, 3.0).matrices, 3 * ens.matrices)


def test_markov_rows():
    m = MarkovEnsemble(np.array([[[2.0]], [[0.5]]]), [[0.0, 1.0], [1.0, 0.0]], [1.0, 0.0])
    assert list(m.reachable_states()) == [0, 1]
    assert m.row_ensemble(0).size == 1


def test_custom_sampler_shape_check():
    ens = SamplerEnsemble(2, "custom", sampler=lambda rng, k: rng.standard_normal((k, 3, 3)))
    with pytest.raises(EnsembleError, match="dimension mismatch"):
        ens.draw(np.random.default_rng(0), 2)
