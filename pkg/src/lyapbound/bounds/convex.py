"""Trivial, Jensen and Frank-Wolfe bounds, plus finite certificate sets."""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

from ..ensemble import NEG_INF, EnsembleError, clamped_log
from .objective import DEFAULT_SAMPLES, DEFAULT_SEED, LogForm, hermitian_extreme_eigs, log_form
from .report import LOWER, UPPER, BoundReport, DensityMatrix

FW_TOL = 1e-6
FW_MAX_ITER = 100_000
LINE_SEARCH_STEPS = 50
POLISH_EVERY = 500


def _extended_mean(weights, logs):
    v = float(np.dot(weights, logs))
    return max(v, NEG_INF)


def _clamped_half(x: float) -> float:
    # halving the sentinel would make it look finite
    return NEG_INF if x <= NEG_INF / 2 else 0.5 * x


def trivial_upper(ensemble, samples=DEFAULT_SAMPLES, seed=DEFAULT_SEED, form: LogForm | None = None):
    form = form or log_form(ensemble, samples, seed)
    _, lmax = hermitian_extreme_eigs(form.grams)
    terms = clamped_log(lmax)
    value = 0.5 * float(np.dot(form.weights, terms))
    diag = {"samples": len(form.weights) if form.sampled else 0}
    if form.sampled:
        diag["stderr"] = 0.5 * float(np.std(terms, ddof=1) / np.sqrt(len(terms)))
    return BoundReport(value, UPPER, "trivial", None, diag)


def trivial_lower(ensemble, samples=DEFAULT_SAMPLES, seed=DEFAULT_SEED, form: LogForm | None = None):
    if not ensemble.invertible:
        raise EnsembleError("singular support: trivial lower bound needs invertible matrices")
    form = form or log_form(ensemble, samples, seed)
    lmin, _ = hermitian_extreme_eigs(form.grams)
    terms = clamped_log(lmin)
    value = 0.5 * float(np.dot(form.weights, terms))
    diag = {"samples": len(form.weights) if form.sampled else 0}
    if form.sampled:
        diag["stderr"] = 0.5 * float(np.std(terms, ddof=1) / np.sqrt(len(terms)))
    return BoundReport(value, LOWER, "trivial", None, diag)


def trivial_bounds(ensemble, samples=DEFAULT_SAMPLES, seed=DEFAULT_SEED):
    """``(1/2) E log lambda_max(L L^dagger)`` and ``(1/2) E log lambda_min(L L^dagger)``.

    For singular support the lower report carries the ``-inf`` sentinel (which is
    the exact value of ``gamma_d`` there) and a note in its diagnostics.
    """
    form = log_form(ensemble, samples, seed)
    upper = trivial_upper(ensemble, form=form)
    if ensemble.invertible:
        lower = trivial_lower(ensemble, form=form)
    else:
        lower = BoundReport(NEG_INF, LOWER, "trivial", None, {"note": "singular support"})
    return upper, lower


def jensen_sdp_upper(ensemble, samples=DEFAULT_SAMPLES, seed=DEFAULT_SEED, form: LogForm | None = None):
    """``(1/2) log lambda_max(E[L L^dagger])``, certified by the top eigenprojector."""
    form = form or log_form(ensemble, samples, seed)
    m = form.mean_gram()
    ev, V = np.linalg.eigh(m)
    _, lmax = hermitian_extreme_eigs(m[None])
    value = 0.5 * float(clamped_log(lmax[0]))
    v = V[:, -1] / np.linalg.norm(V[:, -1])
    cert = DensityMatrix.project(np.outer(v, np.conj(v)))
    return BoundReport(value, UPPER, "jensen", cert,
                       {"samples": len(form.weights) if form.sampled else 0})


def _line_search(w, a, b, t):
    """Maximiser over [0, 1] of ``sum w log(a + eta (b - a))``."""

    def slope(eta):
        with np.errstate(divide="ignore", invalid="ignore"):
            return float(np.sum(w * (b - a) / (a + eta * (b - a))))

    s1 = slope(1.0)
    if not np.isfinite(slope(0.0)):
        return 2.0 / (t + 2.0)
    if s1 >= 0 and np.isfinite(s1):
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(LINE_SEARCH_STEPS):
        mid = 0.5 * (lo + hi)
        s = slope(mid)
        if not np.isfinite(s):
            return 2.0 / (t + 2.0)
        if s > 0:
            lo = mid
        else:
            hi = mid
    return lo


def _polish(form: LogForm, X: np.ndarray) -> np.ndarray:
    """Local ascent over ``X = B B^dagger / tr(B B^dagger)`` started at ``X``.

    Frank-Wolfe crawls when the maximiser sits on a low-rank face; any feasible
    point can be handed back because the gap is recomputed wherever we land.
    """
    G, w = form.grams, form.weights
    d = form.dim
    cplx = np.iscomplexobj(G)
    ev, V = np.linalg.eigh(X)
    B0 = V * np.sqrt(np.clip(ev, 0.0, None))
    # keep a little mass everywhere so no direction is stuck at zero
    B0 = B0 + 1e-6 * np.eye(d)

    def unpack(z):
        if cplx:
            return (z[: d * d] + 1j * z[d * d:]).reshape(d, d)
        return z.reshape(d, d)

    def neg(z):
        B = unpack(z)
        GB = G @ B
        a = np.einsum("ab,iab->i", np.conj(B), GB).real
        nrm = float(np.sum(np.abs(B) ** 2))
        if np.any(a <= 0) or nrm <= 0:
            return np.inf, np.zeros_like(z)
        val = float(w @ np.log(a)) - np.log(nrm)
        g = 2.0 * (np.einsum("i,iab->ab", w / a, GB) - B / nrm)
        gz = np.concatenate([g.real.ravel(), g.imag.ravel()]) if cplx else g.real.ravel()
        return -val, -gz

    z0 = np.concatenate([B0.real.ravel(), B0.imag.ravel()]) if cplx else B0.real.ravel()
    res = minimize(neg, z0, jac=True, method="L-BFGS-B", options={"maxiter": 2000, "gtol": 1e-14, "ftol": 1e-16})
    B = unpack(res.x)
    Y = B @ np.conj(B.T)
    Y = 0.5 * (Y + np.conj(Y.T))
    return Y / np.trace(Y).real


def frank_wolfe(form: LogForm, tol: float = FW_TOL, max_iter: int = FW_MAX_ITER, X0=None):
    """Maximise ``f`` over density matrices.

    Returns ``(X, f(X), gap, iterations, converged)`` where ``gap`` is the
    Frank-Wolfe duality gap at ``X``; by concavity ``max f <= f(X) + gap``.
    Every ``POLISH_EVERY`` iterations without convergence the iterate is
    refined by a local quasi-Newton ascent and kept if it improves ``f``.
    """
    G, w = form.grams, form.weights
    d = form.dim
    X = np.eye(d, dtype=G.dtype) / d if X0 is None else np.array(X0, dtype=G.dtype)
    gap = np.inf
    f = NEG_INF
    for t in range(max_iter + 1):
        a = np.einsum("ab,iba->i", X, G).real
        if np.any(a <= 0):
            return X, NEG_INF, 0.0, t, True
        f = float(np.dot(w, np.log(a)))
        grad = np.einsum("i,iab->ab", w / a, G)
        grad = 0.5 * (grad + np.conj(grad.T))
        ev, V = np.linalg.eigh(grad)
        s = V[:, -1]
        gap = max(float(ev[-1] - np.einsum("ab,ba->", grad, X).real), 0.0)
        if gap <= tol or t == max_iter:
            break
        if t and t % POLISH_EVERY == 0:
            Xp = _polish(form, X).astype(G.dtype)
            ap = np.einsum("ab,iba->i", Xp, G).real
            if np.all(ap > 0) and float(np.dot(w, np.log(ap))) > f:
                X = Xp
                continue
        b = np.einsum("a,iab,b->i", np.conj(s), G, s).real
        eta = _line_search(w, a, b, t)
        X = (1 - eta) * X + eta * np.outer(s, np.conj(s))
        X = 0.5 * (X + np.conj(X.T))
    return X, f, gap, t, gap <= tol


def convex_upper_fw(ensemble, tol: float = FW_TOL, max_iter: int = FW_MAX_ITER,
                    samples=DEFAULT_SAMPLES, seed=DEFAULT_SEED, form: LogForm | None = None):
    """Certified upper bound ``(f(X_T) + g_T) / 2`` on ``(1/2) max_X f(X)``.

    The value is a valid bound however many iterations ran; when ``max_iter`` is
    reached before ``gap <= tol`` the report carries a warning.
    """
    form = form or log_form(ensemble, samples, seed)
    traces = np.einsum("iaa->i", form.grams).real
    if np.all(traces <= 0):
        raise EnsembleError("objective is identically -inf: every support matrix is zero")
    if np.any(traces <= 0):
        X = np.eye(form.dim) / form.dim
        return BoundReport(NEG_INF, UPPER, "convex", DensityMatrix(X),
                           {"iterations": 0, "duality_gap": 0.0, "note": "zero matrix in support"})
    X, f, gap, it, ok = frank_wolfe(form, tol, max_iter)
    diag = {"iterations": it, "duality_gap": gap, "objective": f,
            "samples": len(form.weights) if form.sampled else 0}
    if form.sampled:
        diag["stderr"] = 0.5 * form.stderr(X)
    warning = None if ok else f"Frank-Wolfe stopped at max_iter={max_iter} with gap {gap:.3e}"
    return BoundReport(_clamped_half(f + gap), UPPER, "convex", DensityMatrix.project(X), diag, warning)


def finite_set_upper(ensemble, candidates, samples=DEFAULT_SAMPLES, seed=DEFAULT_SEED,
                     method="finite_set", form: LogForm | None = None):
    """``(1/2) max_{X in candidates} f(X)`` for an explicit list of density matrices."""
    form = form or log_form(ensemble, samples, seed)
    mats = [c.entries if isinstance(c, DensityMatrix) else np.asarray(c) for c in candidates]
    vals = [form.value(X) for X in mats]
    k = int(np.argmax(vals))
    return BoundReport(_clamped_half(vals[k]), UPPER, method,
                       [DensityMatrix.project(X) for X in mats],
                       {"best_index": k, "set_size": len(mats)})


def finite_set_lower(ensemble, candidates, samples=DEFAULT_SAMPLES, seed=DEFAULT_SEED,
                     method="finite_set", form: LogForm | None = None):
    form = form or log_form(ensemble, samples, seed)
    mats = [c.entries if isinstance(c, DensityMatrix) else np.asarray(c) for c in candidates]
    vals = [form.value(X) for X in mats]
    k = int(np.argmin(vals))
    return BoundReport(_clamped_half(vals[k]), LOWER, method,
                       [DensityMatrix.project(X) for X in mats],
                       {"best_index": k, "set_size": len(mats)})


def _canonical_key(X: np.ndarray, digits: int = 9):
    return tuple(np.round(np.concatenate([X.real.ravel(), X.imag.ravel()]), digits) + 0.0)


def semigroup_closure(matrices, max_elements: int = 1000, digits: int = 9) -> list[np.ndarray]:
    """The set ``{Y^dagger Y / tr Y^dagger Y}`` over the semigroup generated by ``matrices``.

    Built by breadth-first search with the maps ``X -> L^dagger X L / tr``
    (right multiplication of ``Y`` by a generator). Zero products are skipped.
    Elements are identified after rounding to ``digits`` decimals.

    Raises
    ------
    EnsembleError
        If more than ``max_elements`` distinct elements appear.
    """
    mats = [np.asarray(L) for L in matrices]
    seen: dict = {}
    queue = []
    for L in mats:
        Y = np.conj(L.T) @ L
        tr = np.trace(Y).real
        if tr > 0:
            X = Y / tr
            key = _canonical_key(X, digits)
            if key not in seen:
                seen[key] = X
                queue.append(X)
    while queue:
        X = queue.pop(0)
        for L in mats:
            Y = np.conj(L.T) @ X @ L
            tr = np.trace(Y).real
            if tr <= 1e-300:
                continue
            Z = Y / tr
            Z = 0.5 * (Z + np.conj(Z.T))
            key = _canonical_key(Z, digits)
            if key not in seen:
                if len(seen) >= max_elements:
                    raise EnsembleError(
                        f"semigroup closure exceeds {max_elements} elements; use convex_upper_fw")
                seen[key] = Z
                queue.append(Z)
    return list(seen.values())


def semigroup_upper(ensemble, max_elements: int = 1000, samples=DEFAULT_SAMPLES, seed=DEFAULT_SEED):
    """Upper bound over the exact semigroup set; needs a finitely closing support."""
    if not hasattr(ensemble, "matrices"):
        raise EnsembleError("semigroup closure needs a discrete ensemble")
    members = semigroup_closure(ensemble.matrices, max_elements)
    return finite_set_upper(ensemble, members, samples, seed, method="semigroup")

