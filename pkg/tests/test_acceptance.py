"""Acceptance criteria 1-11.

Each test evaluates every sub-check of its criterion, prints one PASS/FAIL
line (plus one line per sub-check) and records the outcome for the summary
printed at the end of the session. Tolerances are pinned as module constants.
"""

import time
from math import log, sqrt

import numpy as np

from lyapbound import fixtures
from lyapbound.bounds import (
    commutative_closed_form,
    convex_upper_fw,
    eat_verify,
    finite_set_upper,
    group_parametric_bounds,
    inverse_improved_bounds,
    jensen_sdp_upper,
    nonasymptotic_bounds,
    rank_one_lower,
    rank_one_upper,
    trivial_bounds,
)
from lyapbound.ensemble import discrete, scale_ensemble
from lyapbound.hmm import entropy_rate_bounds, entropy_rate_mc, markov_entropy_rate
from lyapbound.spectrum import exterior_power, lyapunov_spectrum_qr, spectrum_via_exterior

from conftest import ACCEPTANCE, random_ensemble

SIGMAS = 3.0
MC_N, MC_TRIALS = 10_000, 32
SAMPLES = 100_000

# criterion 1
C1_GROUP_TOL = 1e-4
C1_INVERSE_TOL = 1e-4
C1_TRIVIAL_TOL = 1e-6
C1_MC_CEILING = 0.0558
# criterion 2
C2_SET_TOL = 1e-6
C2_FW_TOL = 1e-3
# criterion 3
C3_TOL = 1e-5
C3_TRIVIAL_TOL = 1e-6
# criterion 4
C4_JENSEN_TOL = 1e-3
C4_RANK_ONE_TOL = 0.01
C4_TRIVIAL_TOL = 1e-3
C4_REFERENCE = 1.18
# criterion 5
C5_TOL = 5e-3
C5_GAP = 1e-6
C5_SECONDS = 10.0
# criteria 6-8
C6_TOL = 1e-6
C7_TOL = 1e-6
C8_TOL = 1e-6
# criterion 9
C9_REL = 1e-9
# criterion 10
C10_SLACK = -1e-9
# criterion 11
C11_TOL = 1e-6
# floor for 3-sigma checks when an estimate has zero spread
SE_FLOOR = 1e-12


def within_mc(value, reference, stderr):
    return abs(value - reference) <= SIGMAS * max(stderr, SE_FLOOR)


def record(number, title, checks):
    ok = all(passed for _, passed, _ in checks)
    failing = [label for label, passed, _ in checks if not passed]
    summary = title if ok else f"{title}; failing: {', '.join(failing)}"
    ACCEPTANCE[number] = (ok, summary)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
    for label, passed, info in checks:
        print(f"    [{'pass' if passed else 'FAIL'}] {label}: {info}")
    assert ok, summary


def check_abs(label, value, reference, tol):
    delta = abs(value - reference)
    return (label, bool(delta <= tol), f"{value:.9g} vs {reference:.9g}, |delta|={delta:.3g} <= {tol:g}")


def check_mc(label, est, k, reference):
    g, s = float(est.gammas[k]), float(est.stderr[k])
    return (label, within_mc(g, reference, s), f"{g:.6g} +- {s:.2g} vs {reference:.6g}")


def test_criterion_01_transfer_matrices():
    ens = fixtures.ensemble("transfer_pm1")
    up, lo = group_parametric_bounds(ens, "sl2_real")
    inv_up, _ = inverse_improved_bounds(ens, family="sl2_real")
    triv, _ = trivial_bounds(ens)
    est = lyapunov_spectrum_qr(ens, n=MC_N, trials=MC_TRIALS, seed=42)
    g, s = float(est.gammas[0]), float(est.stderr[0])
    record(1, "SL(2,R) transfer matrices", [
        check_abs("group upper", up.value, 0.25 * log(4), C1_GROUP_TOL),
        check_abs("group lower gamma2", lo.value, 0.25 * log(4 / 5), C1_GROUP_TOL),
        check_abs("inverse-improved upper", inv_up.value, -0.25 * log(4 / 5), C1_INVERSE_TOL),
        check_abs("trivial upper", triv.value, 0.5 * log((3 + sqrt(5)) / 2), C1_TRIVIAL_TOL),
        ("mc gamma1 in (0, 0.0558 + 3se]", bool(0 < g <= C1_MC_CEILING + SIGMAS * s),
         f"{g:.6g} +- {s:.2g}"),
    ])


def test_criterion_02_rank_one_pair():
    ens = fixtures.ensemble("rank_one_pair")
    pair = finite_set_upper(ens, [np.diag([1.0, 0.0]), np.full((2, 2), 0.5)])
    fw = convex_upper_fw(ens)
    triv, _ = trivial_bounds(ens)
    est = lyapunov_spectrum_qr(ens, n=MC_N, trials=MC_TRIALS, seed=42)
    record(2, "rank-one pair", [
        check_abs("two-atom set upper", pair.value, -0.25 * log(2), C2_SET_TOL),
        check_abs("convex upper", fw.value, -0.0792, C2_FW_TOL),
        ("trivial upper exact", triv.value == 0.0, f"{triv.value!r}"),
        check_mc("mc gamma1", est, 0, -0.1733),
    ])


def test_criterion_03_diag_rotation_pair():
    ens = fixtures.ensemble("diag_rotation_pair")
    up, lo = group_parametric_bounds(ens, "diag_conjugacy")
    t_up, t_lo = trivial_bounds(ens)
    est = lyapunov_spectrum_qr(ens, n=MC_N, trials=MC_TRIALS, seed=42)
    record(3, "diagonal/rotation pair", [
        check_abs("group upper", up.value, 0.5 * log(35 / 24), C3_TOL),
        check_abs("group upper certificate c", float(up.certificate["c"]), sqrt(19 / 29), C3_TOL),
        check_abs("group lower gamma2", lo.value, 0.25 * log(3 / 4), C3_TOL),
        check_abs("trivial upper", t_up.value, 0.25 * log(6), C3_TRIVIAL_TOL),
        check_abs("trivial lower", t_lo.value, -0.25 * log(6), C3_TRIVIAL_TOL),
        check_mc("mc gamma1", est, 0, 0.0),
    ])


def test_criterion_04_haar_conjugated_diagonal():
    ens = fixtures.ensemble("haar_diag_5_1")
    jen = jensen_sdp_upper(ens, samples=SAMPLES, seed=42)
    r_up = rank_one_upper(ens, samples=SAMPLES, seed=42)
    r_lo = rank_one_lower(ens, samples=SAMPLES, seed=42)
    triv, _ = trivial_bounds(ens, samples=SAMPLES, seed=42)
    est = lyapunov_spectrum_qr(ens, n=MC_N, trials=MC_TRIALS, seed=42)
    record(4, "Haar-conjugated diag(5, 1)", [
        check_abs("jensen upper", jen.value, 0.5 * log(13), C4_JENSEN_TOL),
        check_abs("rank-one upper", r_up.value, C4_REFERENCE, C4_RANK_ONE_TOL),
        check_abs("rank-one lower", r_lo.value, C4_REFERENCE, C4_RANK_ONE_TOL),
        check_abs("trivial upper", triv.value, log(5), C4_TRIVIAL_TOL),
        check_mc("mc gamma1", est, 0, C4_REFERENCE),
        check_mc("mc gamma2", est, 1, C4_REFERENCE),
    ])


def test_criterion_05_integer_matrices():
    ens = fixtures.ensemble("integer5")
    t0 = time.perf_counter()
    fw = convex_upper_fw(ens)
    triv, _ = trivial_bounds(ens)
    elapsed = time.perf_counter() - t0
    gap = fw.diagnostics["duality_gap"]
    record(5, "four 5x5 integer matrices", [
        check_abs("convex upper", fw.value, 2.86, C5_TOL),
        ("frank-wolfe gap", bool(gap <= C5_GAP), f"{gap:.3g} <= {C5_GAP:g}"),
        check_abs("trivial upper", triv.value, 3.05, C5_TOL),
        ("runtime", bool(elapsed <= C5_SECONDS), f"{elapsed:.3f} s <= {C5_SECONDS:g} s"),
    ])


def _commuting_diag(i):
    rng = np.random.default_rng(600 + i)
    K = int(rng.integers(2, 5))
    mod = np.exp(rng.normal(0.0, 1.0, size=(K, 3)))
    phase = np.exp(2j * np.pi * rng.random((K, 3))) if i % 2 else np.sign(rng.standard_normal((K, 3)))
    mats = np.array([np.diag(d) for d in mod * phase])
    p = rng.dirichlet(np.ones(K))
    return discrete(mats, p), np.sort(p @ np.log(mod))[::-1]


def test_criterion_06_commutative_tightness():
    worst_rank_one, mc_fail = 0.0, []
    for i in range(20):
        ens, exact = _commuting_diag(i)
        g1, gd = commutative_closed_form(ens)
        worst_rank_one = max(worst_rank_one, abs(rank_one_upper(ens).value - g1),
                             abs(rank_one_lower(ens).value - gd), abs(g1 - exact[0]), abs(gd - exact[-1]))
        est = lyapunov_spectrum_qr(ens, n=MC_N, trials=MC_TRIALS, seed=42)
        for k in range(3):
            if not within_mc(est.gammas[k], exact[k], est.stderr[k]):
                mc_fail.append((i, k))
    record(6, "commutative tightness on 20 diagonal ensembles", [
        ("rank-one equals closed form", bool(worst_rank_one <= C6_TOL),
         f"max |delta| = {worst_rank_one:.3g} <= {C6_TOL:g}"),
        ("mc spectrum within 3se", not mc_fail, f"failures {mc_fail}"),
    ])


def test_criterion_07_ordering_chain():
    chain_fail, upper_fail, lower_fail = [], [], []
    for i in range(100):
        e = random_ensemble(i)
        t_up, t_lo = trivial_bounds(e)
        jen = jensen_sdp_upper(e)
        fw = convex_upper_fw(e)
        r_up, r_lo = rank_one_upper(e), rank_one_lower(e)
        i_up, i_lo = inverse_improved_bounds(e)
        if not (r_up.value <= fw.value + C7_TOL and fw.value <= jen.value + C7_TOL
                and fw.value <= t_up.value + C7_TOL):
            chain_fail.append(i)
        est = lyapunov_spectrum_qr(e, n=2000, trials=16, seed=42)
        g1, s1 = est.gammas[0], est.stderr[0]
        gd, sd = est.gammas[-1], est.stderr[-1]
        for r in (t_up, jen, fw, r_up, i_up):
            if r.value < g1 - SIGMAS * s1:
                upper_fail.append((i, r.method))
        for r in (t_lo, r_lo, i_lo):
            if r.value > gd + SIGMAS * sd:
                lower_fail.append((i, r.method))

    def tally(fails):
        counts = {}
        for _, m in fails:
            counts[m] = counts.get(m, 0) + 1
        return counts

    record(7, "ordering chain and soundness on 100 random ensembles", [
        ("rank1 <= convex <= jensen, convex <= trivial", not chain_fail, f"violations at {chain_fail}"),
        ("every upper >= mc gamma1 - 3se", not upper_fail,
         f"{len(upper_fail)} violations by method {tally(upper_fail)}"),
        ("every lower <= mc gamma_d + 3se", not lower_fail,
         f"{len(lower_fail)} violations by method {tally(lower_fail)}"),
    ])


def _bound_values(e):
    t_up, t_lo = trivial_bounds(e)
    i_up, i_lo = inverse_improved_bounds(e)
    na = nonasymptotic_bounds(e, 100)
    return {"trivial upper": t_up.value, "trivial lower": t_lo.value,
            "jensen": jensen_sdp_upper(e).value, "convex": convex_upper_fw(e).value,
            "rank1 upper": rank_one_upper(e).value, "rank1 lower": rank_one_lower(e).value,
            "inverse upper": i_up.value, "inverse lower": i_lo.value,
            "nonasymptotic upper": na.upper.value, "nonasymptotic lower": na.lower.value}


def test_criterion_08_scaling_covariance():
    worst, mc_fail = 0.0, []
    for i in range(20):
        e = random_ensemble(200 + i)
        base = _bound_values(e)
        est = lyapunov_spectrum_qr(e, n=1000, trials=8, seed=42)
        for c in (0.5, 3.0):
            s = scale_ensemble(e, c)
            shifted = _bound_values(s)
            worst = max(worst, max(abs(shifted[k] - base[k] - log(c)) for k in base))
            est_c = lyapunov_spectrum_qr(s, n=1000, trials=8, seed=42)
            se = np.hypot(est.stderr, est_c.stderr)
            bad = np.abs(est_c.gammas - est.gammas - log(c)) > SIGMAS * np.maximum(se, SE_FLOOR)
            if bad.any():
                mc_fail.append((i, c))
    record(8, "scaling covariance on 20 ensembles, c in {0.5, 3}", [
        ("bounds shift by log c", bool(worst <= C8_TOL), f"max |delta| = {worst:.3g} <= {C8_TOL:g}"),
        ("mc shifts by log c within 3se", not mc_fail, f"failures {mc_fail}"),
    ])


def test_criterion_09_exterior_power():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(50):
        d = int(rng.integers(1, 6))
        L = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        s = np.linalg.svd(L, compute_uv=False)
        for j in range(1, d + 1):
            top = np.linalg.svd(exterior_power(L, j), compute_uv=False)[0]
            worst = max(worst, abs(top - np.prod(s[:j])) / np.prod(s[:j]))
    disagree = []
    for name in ("transfer_pm1", "rank_one_pair", "diag_rotation_pair", "haar_diag_5_1", "integer5"):
        ens = fixtures.ensemble(name)
        a = lyapunov_spectrum_qr(ens, n=2000, trials=16, seed=42)
        b = spectrum_via_exterior(ens, n=2000, trials=16, seed=42)
        both_dead = (a.gammas == b.gammas)
        se = np.hypot(a.stderr, b.stderr)
        close = both_dead | (np.abs(a.gammas - b.gammas) <= SIGMAS * np.maximum(se, SE_FLOOR))
        if not close.all():
            disagree.append(name)
    record(9, "exterior-power oracle", [
        ("sigma1(wedge^j L) = prod sigma_i", bool(worst <= C9_REL), f"max rel error {worst:.3g} <= {C9_REL:g}"),
        ("exterior spectrum agrees with QR on fixtures", not disagree, f"disagreements {disagree}"),
    ])


def test_criterion_10_entropy_inequality():
    checks = []
    for name in ("rank_one_pair", "diag_rotation_pair"):
        res = eat_verify(fixtures.ensemble(name), 6)
        checks.append((f"{name} n=6", bool(res["slack"] >= C10_SLACK and res["words"] == 64),
                       f"slack {res['slack']:.6g} over {res['words']} words"))
    record(10, "finite-n entropy inequality by enumeration", checks)


def test_criterion_11_hidden_markov():
    uni = entropy_rate_bounds(fixtures.model("hmm_uniform"), n=MC_N, trials=MC_TRIALS, seed=42)
    noiseless = entropy_rate_mc(fixtures.model("hmm_noiseless"), n=MC_N, trials=MC_TRIALS, seed=42)
    rate = markov_entropy_rate(fixtures.model("hmm_noiseless").M)
    b = entropy_rate_bounds(fixtures.model("hmm_bsc005"), n=MC_N, trials=MC_TRIALS, seed=42)
    record(11, "hidden Markov entropy rate", [
        ("uniform bracket within log 2 +- 1e-6",
         bool(log(2) - C11_TOL <= uni.lower and uni.upper <= log(2) + C11_TOL),
         f"[{uni.lower:.12g}, {uni.upper:.12g}]"),
        ("uniform mc = log 2 within 3se", within_mc(uni.mc_estimate, log(2), uni.mc_stderr),
         f"{uni.mc_estimate:.12g} +- {uni.mc_stderr:.2g}"),
        ("noiseless mc = markov rate within 3se", within_mc(noiseless.value, rate, noiseless.stderr),
         f"{noiseless.value:.6g} +- {noiseless.stderr:.2g} vs {rate:.6g}"),
        ("bsc(0.05) lower <= mc <= upper", bool(b.lower <= b.mc_estimate <= b.upper),
         f"{b.lower:.6g} <= {b.mc_estimate:.6g} <= {b.upper:.6g}"),
    ])


if __name__ == "__main__":
    import sys

    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
