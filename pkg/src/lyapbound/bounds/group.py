"""Bounds restricted to the orbit set of a known 2x2 matrix group.

Two families are hard-coded:

``diag_conjugacy``
    The group of ``diag(a, 1/a)`` and ``[[0, 1/b], [-b, 0]]``. Its set of
    normalised ``Y^dagger Y`` is ``diag(c, 1/c) / (c + 1/c)`` for ``c > 0``.
``sl2_real``
    ``SL(2, R)``. Its set of normalised ``Y^dagger Y`` is
    ``[[a, s], [s, c]] / (a + c)`` with ``ac - s^2 = 1``, i.e.
    ``s = +-sqrt(ac - 1)``.

Both sets are scanned on log-spaced grids over ``[1e-6, 1e6]`` and refined
locally. The closure points of the diagonal family (the two coordinate
projectors) are included so that boundary suprema and infima are reported.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

from ..ensemble import EnsembleError, clamped_log
from .objective import DEFAULT_SAMPLES, DEFAULT_SEED, log_form
from .report import LOWER, UPPER, BoundReport
from .rankone import _golden

FAMILY_TOL = 1e-10
GRID_POINTS = 10_000
REFINE_TOL = 1e-10
LOG_RANGE = (np.log(1e-6), np.log(1e6))
FAMILIES = ("sl2_real", "diag_conjugacy")


def _real_2x2(mats) -> np.ndarray:
    mats = np.asarray(mats)
    if mats.shape[1:] != (2, 2):
        raise EnsembleError("group families are defined for 2x2 matrices")
    if np.iscomplexobj(mats):
        if np.max(np.abs(mats.imag)) > FAMILY_TOL:
            raise EnsembleError("family membership check failed: complex entries")
        mats = mats.real
    return mats


def in_family(mats, family: str) -> bool:
    try:
        m = _real_2x2(mats)
    except EnsembleError:
        return False
    if family == "sl2_real":
        det = m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0]
        return bool(np.all(np.abs(det - 1.0) <= FAMILY_TOL))
    if family == "diag_conjugacy":
        for L in m:
            diag_like = abs(L[0, 1]) <= FAMILY_TOL and abs(L[1, 0]) <= FAMILY_TOL \
                and abs(L[0, 0] * L[1, 1] - 1.0) <= FAMILY_TOL
            anti_like = abs(L[0, 0]) <= FAMILY_TOL and abs(L[1, 1]) <= FAMILY_TOL \
                and abs(L[0, 1] * L[1, 0] + 1.0) <= FAMILY_TOL
            if not (diag_like or anti_like):
                return False
        return True
    raise EnsembleError(f"unknown group family {family!r}")


def detect_family(ensemble) -> str | None:
    if not hasattr(ensemble, "matrices") or ensemble.dim != 2:
        return None
    for fam in ("diag_conjugacy", "sl2_real"):
        if in_family(ensemble.matrices, fam):
            return fam
    return None


def _diag_values(G, w, logc):
    """``E log tr(X(c) G)`` for the diagonal family; ``logc`` may be an array."""
    t = np.exp(2.0 * np.asarray(logc, dtype=np.float64))
    # tr(diag(c, 1/c) G)/(c + 1/c) = (t G00 + G11)/(t + 1) with t = c^2
    num = np.multiply.outer(t, G[:, 0, 0]) + G[:, 1, 1]
    tr = num / (t[..., None] + 1.0)
    return clamped_log(tr) @ w


def _diag_family(form, grid, refine_tol):
    G, w = form.grams.real, form.weights
    logs = np.linspace(*LOG_RANGE, grid)
    vals = _diag_values(G, w, logs)
    # closure points c -> 0 and c -> inf (coordinate projectors)
    ends = np.array([G[:, 1, 1], G[:, 0, 0]])
    end_vals = clamped_log(ends) @ w
    out = {}
    for sign, key in ((1.0, "max"), (-1.0, "min")):
        k = int(np.argmax(sign * vals))
        lo, hi = logs[max(k - 1, 0)], logs[min(k + 1, grid - 1)]
        x, v = _golden(lambda s: sign * float(_diag_values(G, w, s)), lo, hi, tol=refine_tol)
        v = sign * v
        best = (v, {"c": float(np.exp(x))})
        if sign * vals[k] > sign * v:
            best = (float(vals[k]), {"c": float(np.exp(logs[k]))})
        for e, label in ((end_vals[0], 0.0), (end_vals[1], float("inf"))):
            if sign * e > sign * best[0]:
                best = (float(e), {"c": "0" if label == 0.0 else "inf"})
        out[key] = best
    return out


def _sl2_matrix(loga, logc, sgn):
    a = np.exp(loga)
    c = np.maximum(np.exp(logc), 1.0 / a)
    s = sgn * np.sqrt(np.maximum(a * c - 1.0, 0.0))
    return a, c, s


def _sl2_values(G, w, loga, logc, sgn):
    a, c, s = _sl2_matrix(np.asarray(loga, dtype=np.float64), np.asarray(logc, dtype=np.float64), sgn)
    tr = (np.multiply.outer(a, G[:, 0, 0]) + 2 * np.multiply.outer(s, G[:, 0, 1])
          + np.multiply.outer(c, G[:, 1, 1])) / (a + c)[..., None]
    return clamped_log(tr) @ w


def _sl2_family(form, grid, refine_tol):
    G, w = form.grams.real, form.weights
    side = max(2, int(round(np.sqrt(grid))))
    axis = np.linspace(*LOG_RANGE, side)
    A, C = np.meshgrid(axis, axis, indexing="ij")
    out = {}
    for sign, key in ((1.0, "max"), (-1.0, "min")):
        best = None
        for sgn in (1.0, -1.0):
            vals = _sl2_values(G, w, A.ravel(), C.ravel(), sgn)
            k = int(np.argmax(sign * vals))
            x0 = np.array([A.ravel()[k], C.ravel()[k]])

            def neg(p, sgn=sgn):
                p = np.clip(p, *LOG_RANGE)
                return -sign * float(_sl2_values(G, w, p[:1], p[1:], sgn)[0])

            res = minimize(neg, x0, method="Nelder-Mead",
                           options={"xatol": refine_tol, "fatol": refine_tol * 1e-2, "maxiter": 4000})
            cand = [(float(vals[k]), x0), (-float(res.fun), np.clip(res.x, *LOG_RANGE))]
            for v, p in cand:
                score = sign * v
                if best is None or score > best[0]:
                    a, c, s = _sl2_matrix(p[0], p[1], sgn)
                    best = (score, sign * score, {"a": float(a), "c": float(c), "s": float(s)})
        out[key] = (best[1], best[2])
    return out


def group_parametric_bounds(ensemble, family: str, grid: int = GRID_POINTS,
                            refine_tol: float = REFINE_TOL, samples=DEFAULT_SAMPLES, seed=DEFAULT_SEED):
    """Max and min of ``(1/2) E log tr(X L L^dagger)`` over the family's orbit set.

    Returns ``(upper on gamma_1, lower on gamma_2)``; the certificates are the
    optimal parameters.

    Raises
    ------
    EnsembleError
        If a support matrix is not in the declared family within 1e-10.
    """
    if family not in FAMILIES:
        raise EnsembleError(f"unknown group family {family!r}")
    if not hasattr(ensemble, "matrices") or not in_family(ensemble.matrices, family):
        raise EnsembleError(f"family membership check failed for {family}")
    form = log_form(ensemble, samples, seed)
    res = (_diag_family if family == "diag_conjugacy" else _sl2_family)(form, grid, refine_tol)
    method = f"group:{'sl2' if family == 'sl2_real' else 'diag'}"
    diag = {"grid": grid, "family": family}
    up = BoundReport(0.5 * res["max"][0], UPPER, method, res["max"][1], dict(diag))
    lo = BoundReport(0.5 * res["min"][0], LOWER, method, res["min"][1], dict(diag))
    return up, lo
