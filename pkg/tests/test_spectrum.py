import numpy as np
import pytest

from lyapbound import fixtures
from lyapbound.ensemble import NEG_INF, EnsembleError, discrete, scale_ensemble
from lyapbound.spectrum import (
    SpectrumEstimate,
    exterior_power,
    log_abs_det_mean,
    lyapunov_spectrum_qr,
    nonasymptotic_gamma,
    spectrum_via_exterior,
)


def test_identity_is_zero():
    est = lyapunov_spectrum_qr(fixtures.ensemble("identity"), n=200, trials=3)
    assert np.all(est.gammas == 0.0) and np.all(est.stderr == 0.0)


def test_diagonal_constant_exact():
    ens = discrete([np.diag([3.0, 0.5])])
    est = lyapunov_spectrum_qr(ens, n=50, trials=2)
    assert np.allclose(est.gammas, [np.log(3), np.log(0.5)], atol=1e-12)


def test_sorted_and_deterministic_across_threads(monkeypatch):
    ens = fixtures.ensemble("integer5")
    a = lyapunov_spectrum_qr(ens, n=300, trials=6, seed=5, threads=1)
    b = lyapunov_spectrum_qr(ens, n=300, trials=6, seed=5, threads=3)
    assert np.array_equal(a.per_trial, b.per_trial)
    assert np.all(np.diff(a.gammas) <= 0)
    assert np.all(np.diff(a.per_trial, axis=1) <= 0)


def test_determinant_identity_per_trial():
    ens = fixtures.ensemble("integer5")
    est = lyapunov_spectrum_qr(ens, n=400, trials=4, seed=1)
    dets = log_abs_det_mean(ens, 400, 4, 1)
    assert np.max(np.abs(est.per_trial.sum(axis=1) - dets)) <= 1e-9


def test_singular_support_sentinel():
    est = lyapunov_spectrum_qr(fixtures.ensemble("rank_one_pair"), n=500, trials=4)
    assert est.gammas[1] == NEG_INF
    assert est.rank_deficient_fraction == 1.0
    assert "-inf" in est.to_csv()


def test_scaling_shift():
    ens = fixtures.ensemble("diag_rotation_pair")
    a = lyapunov_spectrum_qr(ens, n=500, trials=4)
    b = lyapunov_spectrum_qr(scale_ensemble(ens, 3.0), n=500, trials=4)
    assert np.allclose(b.gammas - a.gammas, np.log(3.0), atol=1e-10)


def test_exterior_power_oracle(rng):
    for _ in range(20):
        d = int(rng.integers(2, 6))
        L = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        s = np.linalg.svd(L, compute_uv=False)
        for j in range(1, d + 1):
            top = np.linalg.svd(exterior_power(L, j), compute_uv=False)[0]
            assert abs(top - np.prod(s[:j])) <= 1e-9 * np.prod(s[:j])


def test_exterior_matches_qr():
    ens = fixtures.ensemble("transfer_pm1")
    a = lyapunov_spectrum_qr(ens, n=2000, trials=8)
    b = spectrum_via_exterior(ens, n=2000, trials=8)
    assert np.all(np.abs(a.gammas - b.gammas) <= 3 * np.hypot(a.stderr, b.stderr) + 1e-12)


def test_nonasymptotic_gamma_index():
    ens = fixtures.ensemble("transfer_pm1")
    est = nonasymptotic_gamma(ens, 1, n=100, trials=4)
    assert est.value == lyapunov_spectrum_qr(ens, n=100, trials=4).gammas[0]
    with pytest.raises(EnsembleError):
        nonasymptotic_gamma(ens, 3, n=10, trials=1)


def test_markov_alternation():
    # deterministic alternation of diag(2, 1) and diag(1, 2): both exponents log(2)/2
    from lyapbound.ensemble import MarkovEnsemble

    m = MarkovEnsemble(np.array([np.diag([2.0, 1.0]), np.diag([1.0, 2.0])]),
                       [[0.0, 1.0], [1.0, 0.0]], [1.0, 0.0])
    est = lyapunov_spectrum_qr(m, n=1000, trials=2)
    assert np.allclose(est.gammas, 0.5 * np.log(2), atol=1e-12)


def test_json_round_trip():
    est = lyapunov_spectrum_qr(fixtures.ensemble("rank_one_pair"), n=50, trials=2)
    again = SpectrumEstimate.from_dict(est.to_dict())
    assert again.to_dict() == est.to_dict()


def test_invalid_knobs():
    with pytest.raises(EnsembleError):
        lyapunov_spectrum_qr(fixtures.ensemble("identity"), n=0, trials=1)
