"""Closed forms and bounds assembled from the basic methods."""

from __future__ import annotations

from dataclasses import dataclass
from math import log

import numpy as np

from ..ensemble import (
    NEG_INF,
    DiscreteEnsemble,
    EnsembleError,
    MarkovEnsemble,
    atoms,
    clamped_log,
    gram,
    invert_ensemble,
)
from .convex import FW_MAX_ITER, FW_TOL, convex_upper_fw, trivial_lower, trivial_upper
from .group import detect_family, group_parametric_bounds
from .objective import DEFAULT_SAMPLES, DEFAULT_SEED, log_form
from .rankone import RANK_ONE_TOL, RESTARTS, common_eigenbasis, rank_one_lower, rank_one_upper
from .report import LOWER, POS_INF, UPPER, BoundReport

SINGULAR_EIG = 1e-14
EAT_BUDGET = 1_000_000


def commutative_closed_form(ensemble, samples=DEFAULT_SAMPLES, seed=DEFAULT_SEED):
    """``((1/2) lambda_max(E log L L^dagger), (1/2) lambda_min(E log L L^dagger))``.

    Exact Lyapunov exponents for commuting normal invertible support.

    Raises
    ------
    EnsembleError
        For non-commuting (or non-normal) support, or a Gram eigenvalue below
        ``1e-14 * lambda_max`` where the matrix logarithm is undefined.
    """
    if not ensemble.commuting or (hasattr(ensemble, "matrices") and common_eigenbasis(ensemble) is None):
        raise EnsembleError("non-commuting support: closed form needs commuting normal matrices")
    mats, w = atoms(ensemble, samples, seed)
    G = gram(mats)
    ev, U = np.linalg.eigh(G)
    if np.any(ev[:, 0] <= SINGULAR_EIG * ev[:, -1]) or np.any(ev[:, -1] <= 0):
        raise EnsembleError("singular matrix: matrix logarithm undefined")
    logs = np.einsum("kab,kb,kcb->kac", U, np.log(ev), np.conj(U))
    mean = np.einsum("k,kab->ab", w, logs)
    lam = np.linalg.eigvalsh(0.5 * (mean + np.conj(mean.T)))
    return 0.5 * float(lam[-1]), 0.5 * float(lam[0])


def _safe(fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except EnsembleError:
        return None


def _candidates(ensemble, tol, restarts, samples, seed, family):
    """All applicable (upper, lower) reports for one ensemble."""
    uppers, lowers = [], []
    uppers.append(trivial_upper(ensemble, samples, seed))
    if ensemble.invertible:
        lowers.append(trivial_lower(ensemble, samples, seed))
    fw = _safe(convex_upper_fw, ensemble, tol, FW_MAX_ITER, samples, seed)
    if fw is not None:
        uppers.append(fw)
    if ensemble.invertible and getattr(ensemble, "compact", True):
        uppers.append(rank_one_upper(ensemble, restarts, RANK_ONE_TOL, samples, seed))
        lowers.append(rank_one_lower(ensemble, restarts, RANK_ONE_TOL, samples, seed))
    fam = family if family is not None else detect_family(ensemble)
    if fam is not None:
        g = _safe(group_parametric_bounds, ensemble, fam, samples=samples, seed=seed)
        if g is not None:
            uppers.append(g[0])
            lowers.append(g[1])
    cf = _safe(commutative_closed_form, ensemble, samples, seed)
    if cf is not None:
        uppers.append(BoundReport(cf[0], UPPER, "commutative"))
        lowers.append(BoundReport(cf[1], LOWER, "commutative"))
    return uppers, lowers


def _log_abs_det(ensemble, samples, seed) -> float:
    mats, w = atoms(ensemble, samples, seed)
    _, ld = np.linalg.slogdet(mats)
    return float(np.dot(w, ld))


def inverse_improved_bounds(ensemble, tol: float = FW_TOL, restarts: int = RESTARTS,
                            samples=DEFAULT_SAMPLES, seed=DEFAULT_SEED, family: str | None = None):
    """Best bounds from the ensemble, its inverse and (for d = 2) the determinant.

    upper = min(best upper, -(best lower of the inverse), E log|det| - best lower)
    lower = max(best lower, -(best upper of the inverse), E log|det| - best upper)
    where the determinant terms apply only for ``d = 2``.
    """
    if not ensemble.invertible:
        raise EnsembleError("singular support: inverse improvement needs invertible matrices")
    inv = invert_ensemble(ensemble)
    ups, los = _candidates(ensemble, tol, restarts, samples, seed, family)
    inv_ups, inv_los = _candidates(inv, tol, restarts, samples, seed, family)
    upper_opts = [(r.value, f"{r.method}") for r in ups]
    upper_opts += [(-r.value, f"inverse:{r.method}") for r in inv_los]
    lower_opts = [(r.value, f"{r.method}") for r in los]
    lower_opts += [(-r.value, f"inverse:{r.method}") for r in inv_ups]
    if ensemble.dim == 2:
        delta = _log_abs_det(ensemble, samples, seed)
        base_low = max(lower_opts)[0]
        base_up = min(upper_opts)[0]
        upper_opts.append((delta - base_low, "det_symmetry"))
        lower_opts.append((delta - base_up, "det_symmetry"))
    up = min(upper_opts)
    lo = max(lower_opts)
    table = {"upper_candidates": {m: v for v, m in upper_opts},
             "lower_candidates": {m: v for v, m in lower_opts}}
    return (BoundReport(up[0], UPPER, "inverse", {"source": up[1]}, dict(table)),
            BoundReport(lo[0], LOWER, "inverse", {"source": lo[1]}, dict(table)))


def _first_term(ensemble, samples, seed) -> float:
    """``E log tr(L L^dagger)`` (tau)."""
    mats, w = atoms(ensemble, samples, seed)
    tr = np.einsum("kaa->k", gram(mats)).real
    return float(np.dot(w, clamped_log(tr)))


@dataclass(frozen=True)
class Nonasymptotic:
    upper: BoundReport
    lower: BoundReport


def _assemble(n, tau, max_term, min_term, d, method, diag):
    """Finite-``n`` bounds on the gamma scale from per-step 2-gamma terms."""
    up = 0.5 * (tau / n + (n - 1) / n * max_term)
    up = NEG_INF if max_term <= NEG_INF / 2 or tau <= NEG_INF / 2 else up
    lo = NEG_INF if min_term <= NEG_INF / 2 else 0.5 * (min_term - log(d) / n)
    return (BoundReport(up, UPPER, method, None, dict(diag, n=n, tau=tau, step_max=max_term)),
            BoundReport(lo, LOWER, method, None, dict(diag, n=n, step_min=min_term)))


def nonasymptotic_bounds(ensemble, n: int, tol: float = FW_TOL, restarts: int = RESTARTS,
                         samples=DEFAULT_SAMPLES, seed=DEFAULT_SEED):
    """Bounds on ``gamma_{1,n}`` and ``gamma_{d,n}`` for i.i.d. products of length ``n``.

    ``2 gamma_{1,n} <= tau/n + (n-1)/n * max_X f(X)`` with ``tau = E log tr L L^dagger``
    and ``2 gamma_{d,n} >= min_X f(X) - log(d)/n``. The maximum is the certified
    Frank-Wolfe value, the minimum the rank-one value. Values are on the gamma
    scale (halved).
    """
    if n < 1:
        raise EnsembleError("n must be positive")
    tau = _first_term(ensemble, samples, seed)
    fw = convex_upper_fw(ensemble, tol, FW_MAX_ITER, samples, seed)
    max_term = NEG_INF if fw.value <= NEG_INF else 2.0 * fw.value
    if ensemble.invertible:
        min_term = 2.0 * rank_one_lower(ensemble, restarts, RANK_ONE_TOL, samples, seed, restrict="none").value
    else:
        min_term = NEG_INF
    up, lo = _assemble(n, tau, max_term, min_term, ensemble.dim, "nonasymptotic", {})
    return Nonasymptotic(up, lo)


def markov_bounds(ensemble: MarkovEnsemble, n: int, tol: float = FW_TOL, restarts: int = RESTARTS):
    """Finite-``n`` bounds for a Markov-driven product ``L_1 L_2 ... L_n``.

    The per-step maximum runs Frank-Wolfe on each reachable conditional row
    ``P(. | l)`` and takes the largest; the minimum uses the rank-one lower
    bound per row (and the initial law for the first step).
    """
    if not isinstance(ensemble, MarkovEnsemble):
        raise EnsembleError("markov_bounds needs a MarkovEnsemble")
    if n < 1:
        raise EnsembleError("n must be positive")
    init = ensemble.initial_ensemble()
    tau = _first_term(init, 0, 0)
    rows = [int(r) for r in ensemble.reachable_states()]
    max_term, arg_max = NEG_INF, None
    for r in rows:
        fw = convex_upper_fw(ensemble.row_ensemble(r), tol, FW_MAX_ITER)
        v = NEG_INF if fw.value <= NEG_INF else 2.0 * fw.value
        if v > max_term:
            max_term, arg_max = v, r
    if ensemble.invertible:
        first = 2.0 * rank_one_lower(init, restarts, RANK_ONE_TOL, restrict="none").value
        later = min(2.0 * rank_one_lower(ensemble.row_ensemble(r), restarts, RANK_ONE_TOL,
                                         restrict="none").value for r in rows)
        min_term = (first + (n - 1) * later) / n if n > 1 else first
    else:
        min_term = NEG_INF
    return Nonasymptotic(*_assemble(n, tau, max_term, min_term, ensemble.dim, "markov",
                                    {"argmax_row": arg_max, "rows": rows}))


def eat_verify(ensemble: DiscreteEnsemble, n: int, tol: float = FW_TOL):
    """Check ``-(1/n) E log tr(P P^dagger) >= -tau/n - (n-1)/n * max_X f(X)``.

    ``P = L_{w_n} ... L_{w_1}`` ranges over all words of length ``n`` with their
    exact probabilities; ``max_X f`` is replaced by its certified upper value
    ``f(X_T) + g_T``. Returns a dict with ``lhs``, ``rhs``, ``slack``, ``gap``.
    """
    if not isinstance(ensemble, DiscreteEnsemble):
        raise EnsembleError("eat_verify needs a discrete ensemble")
    if n < 1:
        raise EnsembleError("n must be positive")
    K = ensemble.size
    if K**n > EAT_BUDGET:
        raise EnsembleError(f"enumeration budget exceeded: {K}^{n} > {EAT_BUDGET}")
    mats, p = ensemble.matrices, ensemble.probs
    prods = mats.copy()
    probs = p.copy()
    for _ in range(n - 1):
        prods = np.einsum("jab,wbc->jwac", mats, prods).reshape(-1, *mats.shape[1:])
        probs = np.multiply.outer(p, probs).ravel()
    tr = np.einsum("wab,wab->w", prods, np.conj(prods)).real
    lhs = -float(np.dot(probs, clamped_log(tr))) / n
    fw = convex_upper_fw(ensemble, tol)
    tau = _first_term(ensemble, 0, 0)
    f_upper = NEG_INF if fw.value <= NEG_INF else 2.0 * fw.value
    rhs = -tau / n - (n - 1) / n * f_upper
    slack = lhs - rhs
    return {"lhs": lhs, "rhs": rhs, "slack": slack, "gap": fw.diagnostics.get("duality_gap", 0.0),
            "n": n, "words": int(K**n), "holds": bool(slack >= -1e-9)}


__all__ = [
    "commutative_closed_form",
    "inverse_improved_bounds",
    "nonasymptotic_bounds",
    "markov_bounds",
    "eat_verify",
    "Nonasymptotic",
    "POS_INF",
]
