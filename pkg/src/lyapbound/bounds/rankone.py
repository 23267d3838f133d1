"""Rank-one bounds: optimise ``g(v) = E log(v^dagger L L^dagger v)`` over unit vectors.

The problem is non-convex, so it is attacked with many seeded restarts of a
Riemannian gradient method on the sphere, warm-started from the extreme
eigenvectors of ``E[L L^dagger]``. For real support the search stays on the
real sphere: the top projectors of real Gram matrices are real. For ``d = 2``
with real support an angle sweep adds a near-global search.

When the support consists of commuting normal matrices the rank-one set is
restricted to the common eigenbasis, the diagonal-group instance of the
group-restricted rank-one bound. There the bound coincides with the
commutative closed form.
"""

from __future__ import annotations

import numpy as np

from ..ensemble import EnsembleError, clamped_log
from .objective import DEFAULT_SAMPLES, DEFAULT_SEED, LogForm, log_form
from .report import LOWER, UPPER, BoundReport, UnitVector

RESTARTS = 64
RANK_ONE_TOL = 1e-12
MAX_STEPS = 2000
ANGLE_GRID = 10_000
NORMAL_TOL = 1e-10
COARSE_ATOMS = 10_000
POLISH = 4


def _quad_flat(Gf: np.ndarray, V: np.ndarray) -> np.ndarray:
    """``v^dagger G_i v`` for all atoms and vectors using one gemm: (K, R)."""
    outer = (np.conj(V)[:, :, None] * V[:, None, :]).reshape(V.shape[0], -1)
    return (Gf @ outer.T).real


def _grad_flat(Gf: np.ndarray, w: np.ndarray, q: np.ndarray, V: np.ndarray, d: int) -> np.ndarray:
    """Euclidean gradient ``2 sum_i w_i G_i v / q_i`` for each vector: (R, d)."""
    coef = (w[:, None] / q).T                      # (R, K)
    M = (coef @ Gf).reshape(V.shape[0], d, d)       # sum_i c_ri G_i
    return 2.0 * np.einsum("rab,rb->ra", M, V)


def _value(w, q):
    return w @ clamped_log(q)


def _normalise(V):
    return V / np.linalg.norm(V, axis=1, keepdims=True)


def sphere_ascent(form: LogForm, V0: np.ndarray, sign: float = 1.0, tol: float = RANK_ONE_TOL,
                  max_steps: int = MAX_STEPS):
    """Batched projected-gradient ascent of ``sign * g`` with Armijo backtracking.

    Returns the final vectors and their objective values (unsigned).
    """
    d = form.dim
    Gf = form.grams.reshape(form.grams.shape[0], -1)
    w = form.weights
    V = _normalise(np.array(V0, dtype=form.grams.dtype))
    q = _quad_flat(Gf, V)
    val = sign * _value(w, q)
    step = np.full(V.shape[0], 0.5)
    active = np.ones(V.shape[0], dtype=bool)
    for _ in range(max_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Va, qa = V[idx], q[:, idx]
        g = sign * _grad_flat(Gf, w, np.maximum(qa, 1e-300), Va, d)
        # tangent projection (real inner product on C^d viewed as R^2d)
        g -= np.real(np.sum(np.conj(Va) * g, axis=1))[:, None] * Va
        gnorm2 = np.sum(np.abs(g) ** 2, axis=1)
        base = val[idx]
        t = step[idx] * 2.0
        accepted = np.zeros(idx.size, dtype=bool)
        Vn, qn, vn = Va.copy(), qa.copy(), base.copy()
        for _ in range(40):
            pending = ~accepted
            if not pending.any():
                break
            P = np.flatnonzero(pending)
            trial = _normalise(Va[P] + t[P, None] * g[P])
            qt = _quad_flat(Gf, trial)
            vt = sign * _value(w, qt)
            ok = vt >= base[P] + 1e-4 * t[P] * gnorm2[P]
            acc = P[ok]
            Vn[acc], qn[:, acc], vn[acc] = trial[ok], qt[:, ok], vt[ok]
            accepted[acc] = True
            t[P[~ok]] *= 0.5
        improve = vn - base
        V[idx], q[:, idx], val[idx] = Vn, qn, vn
        step[idx] = t
        converged = (~accepted) | (improve <= tol * np.maximum(1.0, np.abs(base))) | (gnorm2 <= tol**2)
        active[idx[converged]] = False
    return V, sign * val


def _golden(fun, lo, hi, tol=1e-12, iterations=200):
    """Maximise a unimodal function on [lo, hi]."""
    phi = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - phi * (b - a)
    dd = a + phi * (b - a)
    fc, fd = fun(c), fun(dd)
    for _ in range(iterations):
        if b - a <= tol:
            break
        if fc >= fd:
            b, dd, fd = dd, c, fc
            c = b - phi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, dd, fd
            dd = a + phi * (b - a)
            fd = fun(dd)
    x = 0.5 * (a + b)
    return x, fun(x)


def _angle_sweep(form: LogForm, sign: float, grid: int = ANGLE_GRID):
    """Best real unit vector ``(cos t, sin t)`` on a grid plus golden refinement."""
    G = form.grams.real
    w = form.weights
    theta = np.linspace(0.0, np.pi, grid, endpoint=False)
    c, s = np.cos(theta), np.sin(theta)
    vals = np.empty(grid)
    chunk = max(1, int(2e7 // max(1, G.shape[0])))
    for lo in range(0, grid, chunk):
        cc, ss = c[lo:lo + chunk], s[lo:lo + chunk]
        q = (G[:, 0, 0, None] * cc**2 + 2 * G[:, 0, 1, None] * cc * ss + G[:, 1, 1, None] * ss**2)
        vals[lo:lo + chunk] = sign * (w @ clamped_log(q))
    k = int(np.argmax(vals))
    h = np.pi / grid

    def fun(t):
        q = G[:, 0, 0] * np.cos(t) ** 2 + 2 * G[:, 0, 1] * np.cos(t) * np.sin(t) + G[:, 1, 1] * np.sin(t) ** 2
        return sign * float(w @ clamped_log(q))

    t, v = _golden(fun, theta[k] - h, theta[k] + h)
    if vals[k] > v:
        t, v = theta[k], vals[k]
    return np.array([np.cos(t), np.sin(t)]), sign * v


def common_eigenbasis(ensemble) -> np.ndarray | None:
    """Unitary diagonalising every support matrix, or None if the support is not
    commuting and normal."""
    if not getattr(ensemble, "commuting", False) or not hasattr(ensemble, "matrices"):
        return None
    mats = ensemble.matrices
    for L in mats:
        n2 = np.linalg.norm(L) ** 2
        if np.linalg.norm(L @ np.conj(L.T) - np.conj(L.T) @ L) > NORMAL_TOL * max(n2, 1e-300):
            return None
    rng = np.random.default_rng(12345)
    # a generic real combination of the commuting Hermitian parts separates the joint eigenspaces
    H = np.zeros(mats.shape[1:], dtype=np.complex128)
    for L in mats:
        a, b = rng.standard_normal(2)
        H += a * (L + np.conj(L.T)) + 1j * b * (L - np.conj(L.T))
    _, U = np.linalg.eigh(0.5 * (H + np.conj(H.T)))
    if not np.iscomplexobj(mats) and np.allclose(U.imag, 0):
        U = U.real
    return U


def _rank_one(ensemble, sign, side, restarts, tol, samples, seed, restrict):
    if not ensemble.invertible:
        raise EnsembleError("singular support: rank-one bounds need invertible matrices")
    if not getattr(ensemble, "compact", True):
        raise EnsembleError("rank-one bounds need a compactly supported law")
    form = log_form(ensemble, samples, seed)
    d = form.dim
    basis = common_eigenbasis(ensemble) if restrict in ("auto", "eigenbasis") else None
    if restrict == "eigenbasis" and basis is None:
        raise EnsembleError("eigenbasis restriction needs commuting normal support")
    if basis is not None:
        V = basis.T.copy()
        vals = _value(form.weights, _quad_flat(form.grams.reshape(len(form.weights), -1), V))
        k = int(np.argmax(sign * vals))
        v = V[k] / np.linalg.norm(V[k])
        return BoundReport(0.5 * float(vals[k]), side, "rank1", UnitVector(v),
                           {"restarts": d, "spread": float(np.ptp(vals)) / 2, "restricted": "eigenbasis",
                            "samples": len(form.weights) if form.sampled else 0})

    rng = np.random.default_rng(seed)
    real = form.real
    if real:
        starts = rng.standard_normal((restarts, d))
    else:
        starts = rng.standard_normal((restarts, d)) + 1j * rng.standard_normal((restarts, d))
    ev, U = np.linalg.eigh(form.mean_gram())
    warm = U[:, -1] if sign > 0 else U[:, 0]
    V0 = np.vstack([warm[None, :].astype(starts.dtype), starts])
    K = len(form.weights)
    if K > COARSE_ATOMS:
        # locate basins on a subsample, then polish the best few on the full sample
        sub = LogForm(form.grams[:COARSE_ATOMS], np.full(COARSE_ATOMS, 1.0 / COARSE_ATOMS),
                      form.sampled, form.real)
        Vc, vals_c = sphere_ascent(sub, V0, sign, tol)
        keep = np.argsort(-sign * vals_c, kind="stable")[:POLISH]
        V, vals = sphere_ascent(form, Vc[keep], sign, tol)
        spread = 0.5 * float(np.ptp(vals_c))
    else:
        V, vals = sphere_ascent(form, V0, sign, tol)
        spread = 0.5 * float(np.ptp(vals))
    k = int(np.argmax(sign * vals))
    best_v, best = V[k], float(vals[k])
    diag = {"restarts": int(V0.shape[0]), "spread": spread,
            "samples": K if form.sampled else 0}
    if real and d == 2:
        v_a, val_a = _angle_sweep(form, sign)
        diag["angle_sweep"] = 0.5 * float(val_a)
        if sign * val_a > sign * best:
            best_v, best = v_a, float(val_a)
    if form.sampled:
        diag["stderr"] = 0.5 * form.stderr(np.outer(best_v, np.conj(best_v)))
    return BoundReport(0.5 * best, side, "rank1", UnitVector(best_v / np.linalg.norm(best_v)), diag)


def rank_one_upper(ensemble, restarts: int = RESTARTS, tol: float = RANK_ONE_TOL,
                   samples: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED, restrict: str = "auto"):
    """``(1/2) max_v E log(v^dagger L L^dagger v)`` (heuristic global maximum).

    ``restrict``: ``"auto"`` uses the common eigenbasis for commuting normal
    support, ``"none"`` always searches the full sphere, ``"eigenbasis"``
    insists on the restriction.
    """
    return _rank_one(ensemble, 1.0, UPPER, restarts, tol, samples, seed, restrict)


def rank_one_lower(ensemble, restarts: int = RESTARTS, tol: float = RANK_ONE_TOL,
                   samples: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED, restrict: str = "auto"):
    """``(1/2) min_v E log(v^dagger L L^dagger v)``; also the minimum of ``f/2``
    over all density matrices, since a concave function attains its minimum at
    extreme points."""
    return _rank_one(ensemble, -1.0, LOWER, restarts, tol, samples, seed, restrict)
