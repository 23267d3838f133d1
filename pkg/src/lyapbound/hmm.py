"""Entropy rate of a hidden Markov process through its transfer matrices.

With hidden chain ``M`` and memoryless channel ``W`` the output law is
``P(y_1..y_n) = mu^T A_{y_1} ... A_{y_n} 1`` where
``(A_y)_{x,x'} = M_{x,x'} W_{x',y}``, so the entropy rate equals ``-gamma_1`` of
the (dependent) sequence ``A_{Y_1}, A_{Y_2}, ...``.

Bounds use the dependent form of the product bound. Conditioning on the past
enters only through the belief ``pi`` over the previous hidden state, with
``P(y | pi) = sum_x (pi M)_x W_{x,y}``. For fixed ``X`` the per-step objective is
linear in ``pi``, so its extremes over the belief simplex sit at vertices,
i.e. at the rows of ``M W``. The simplex grid search is kept as an
independent check (``belief_search="grid"``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .bounds.convex import FW_TOL, frank_wolfe
from .bounds.objective import LogForm
from .bounds.rankone import RANK_ONE_TOL, RESTARTS, sphere_ascent
from .ensemble import INVERTIBLE_COND, PROB_TOL, EnsembleError, Estimate, clamped_log

STATIONARY_TOL = 1e-10
MAX_GRID_STATES = 8
GRID_POINTS = {2: 200, 3: 50}


def _stochastic(A, name: str) -> np.ndarray:
    A = np.array(A, dtype=np.float64)
    if A.ndim != 2:
        raise EnsembleError(f"{name} must be a matrix")
    if np.any(A < 0) or not np.all(np.isfinite(A)):
        raise EnsembleError(f"{name} must have finite nonnegative entries")
    if np.any(np.abs(A.sum(axis=1) - 1.0) > PROB_TOL):
        raise EnsembleError(f"{name} rows must sum to 1")
    return A


def stationary_distribution(M: np.ndarray) -> np.ndarray:
    """Solve ``(M^T - I) mu = 0`` with ``sum(mu) = 1`` by dense least squares."""
    k = M.shape[0]
    A = np.vstack([M.T - np.eye(k), np.ones((1, k))])
    b = np.zeros(k + 1)
    b[-1] = 1.0
    mu, *_ = np.linalg.lstsq(A, b, rcond=None)
    mu = np.clip(mu, 0.0, None)
    return mu / mu.sum()


@dataclass(frozen=True, eq=False)
class HmmModel:
    """Hidden chain ``M`` (|X| x |X|), channel ``W`` (|X| x |Y|), stationary ``mu``."""

    M: np.ndarray
    W: np.ndarray
    mu: np.ndarray = field(default=None)

    def __post_init__(self):
        M = _stochastic(self.M, "M")
        W = _stochastic(self.W, "W")
        if M.shape[0] != M.shape[1] or W.shape[0] != M.shape[0]:
            raise EnsembleError("dimension mismatch between M and W")
        mu = stationary_distribution(M) if self.mu is None else np.array(self.mu, dtype=np.float64)
        if mu.shape != (M.shape[0],) or np.any(mu < 0) or abs(mu.sum() - 1.0) > PROB_TOL:
            raise EnsembleError("mu must be a probability vector")
        if np.max(np.abs(mu @ M - mu)) > STATIONARY_TOL:
            raise EnsembleError("mu is not stationary for M")
        for a in (M, W, mu):
            a.setflags(write=False)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "mu", mu)

    @property
    def states(self) -> int:
        return self.M.shape[0]

    @property
    def symbols(self) -> int:
        return self.W.shape[1]

    @classmethod
    def from_spec(cls, spec: dict) -> "HmmModel":
        if not isinstance(spec, dict) or "M" not in spec or "W" not in spec:
            raise EnsembleError("model description needs fields M and W")
        return cls(spec["M"], spec["W"], spec.get("mu"))

    def to_spec(self) -> dict:
        return {"M": self.M.tolist(), "W": self.W.tolist()}


def load_model(path) -> HmmModel:
    with open(path, encoding="utf-8") as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise EnsembleError(f"malformed model file: {exc}") from None
    return HmmModel.from_spec(spec)


def transfer_matrices(model: HmmModel) -> np.ndarray:
    """Stack of ``A_y = M * W[:, y]`` (column ``x'`` of ``M`` scaled by ``W[x', y]``)."""
    return model.M[None, :, :] * model.W.T[:, None, :]


@dataclass(frozen=True)
class EntropyRateReport:
    lower: float
    upper: float
    mc_estimate: float
    mc_stderr: float
    n: int
    trials: int
    seed: int
    metadata: dict = field(default_factory=dict)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def to_dict(self) -> dict:
        def num(x):
            return None if np.isnan(x) else float(x)

        return {"lower": self.lower, "upper": self.upper, "mc_estimate": num(self.mc_estimate),
                "mc_stderr": num(self.mc_stderr), "width": self.width, "n": self.n,
                "trials": self.trials, "seed": self.seed,
                "metadata": {k: self.metadata[k] for k in sorted(self.metadata)}}

    @classmethod
    def from_dict(cls, d: dict) -> "EntropyRateReport":
        def num(x):
            return float("nan") if x is None else float(x)

        return cls(float(d["lower"]), float(d["upper"]), num(d["mc_estimate"]), num(d["mc_stderr"]),
                   int(d["n"]), int(d["trials"]), int(d["seed"]), dict(d.get("metadata") or {}))


def _sample_paths(model: HmmModel, n: int, trials: int, seed: int) -> np.ndarray:
    """Observation paths (trials, n); trial ``t`` uses ``default_rng(seed + t)``."""
    u = np.stack([np.random.default_rng(seed + t).random((n + 1, 2)) for t in range(trials)])
    cumM = np.cumsum(model.M, axis=1)
    cumW = np.cumsum(model.W, axis=1)
    last = model.states - 1
    x = np.minimum(np.searchsorted(np.cumsum(model.mu), u[:, 0, 0], side="right"), last)
    ys = np.empty((trials, n), dtype=np.int64)
    for i in range(n):
        # previous state x, next hidden state then its observation
        x = np.minimum((u[:, i + 1, 0][:, None] >= cumM[x]).sum(axis=1), last)
        ys[:, i] = np.minimum((u[:, i + 1, 1][:, None] >= cumW[x]).sum(axis=1), model.symbols - 1)
    return ys


def forward_log_normalisers(model: HmmModel, ys: np.ndarray) -> np.ndarray:
    """``log P(y_i | y_1..y_{i-1})`` along each path via the normalised recursion."""
    A = transfer_matrices(model)
    trials, n = ys.shape
    pi = np.broadcast_to(model.mu, (trials, model.states)).copy()
    out = np.empty((trials, n))
    for i in range(n):
        nxt = np.einsum("tx,txz->tz", pi, A[ys[:, i]])
        c = nxt.sum(axis=1)
        if np.any(c <= 0):
            raise EnsembleError("zero-probability observation under the model")
        out[:, i] = np.log(c)
        pi = nxt / c[:, None]
    return out


def entropy_rate_mc(model: HmmModel, n: int = 10_000, trials: int = 32, seed: int = 42) -> Estimate:
    """Monte-Carlo ``-(1/n) log P(Y^n)`` averaged over sampled paths."""
    if n < 1 or trials < 1:
        raise EnsembleError("n and trials must be positive")
    ys = _sample_paths(model, n, trials, seed)
    per = -forward_log_normalisers(model, ys).sum(axis=1) / n
    err = float(per.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return Estimate(float(per.mean()), err)


def block_entropy(model: HmmModel, n: int) -> float:
    """Exact ``-(1/n) E log P(Y^n)`` by enumerating all ``|Y|^n`` words."""
    if model.symbols**n > 2**22:
        raise EnsembleError("block entropy enumeration too large")
    A = transfer_matrices(model)
    alpha = model.mu[None, :]
    for _ in range(n):
        alpha = np.einsum("wx,yxz->wyz", alpha, A).reshape(-1, model.states)
    p = alpha.sum(axis=1)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum() / n)


def output_entropy(model: HmmModel) -> float:
    """``H(Y_1)``, an upper bound on the entropy rate of a stationary process."""
    q = model.mu @ model.W
    q = q[q > 0]
    return float(-(q * np.log(q)).sum())


def _row_forms(model: HmmModel, beliefs: np.ndarray):
    A = transfer_matrices(model)
    G = A @ np.swapaxes(A, 1, 2)
    for pi in beliefs:
        law = pi @ model.M @ model.W
        keep = law > 0
        yield LogForm(G[keep], law[keep] / law[keep].sum(), False, True), A[keep]


def _simplex_grid(k: int, points: int) -> np.ndarray:
    if k == 2:
        t = np.linspace(0.0, 1.0, points)
        return np.stack([t, 1 - t], axis=1)
    if k == 3:
        t = np.linspace(0.0, 1.0, points)
        pts = [(a, b, 1 - a - b) for a, b in product(t, t) if a + b <= 1 + 1e-12]
        return np.clip(np.array(pts), 0.0, None)
    raise EnsembleError("dense simplex grid only for 2 or 3 hidden states")


def _beliefs(model: HmmModel, belief_search: str, seed: int) -> np.ndarray:
    k = model.states
    vertices = np.eye(k)
    if belief_search == "vertices":
        return vertices
    if belief_search != "grid":
        raise EnsembleError(f"unknown belief search {belief_search!r}")
    if k > MAX_GRID_STATES:
        raise EnsembleError(f"belief simplex search limited to {MAX_GRID_STATES} hidden states")
    if k in GRID_POINTS:
        pts = _simplex_grid(k, GRID_POINTS[k])
    else:
        pts = np.random.default_rng(seed).dirichlet(np.ones(k), size=2000)
    return np.vstack([vertices, pts])


def entropy_rate_bounds(model: HmmModel, n: int = 10_000, trials: int = 32, seed: int = 42,
                        belief_search: str = "vertices", tol: float = FW_TOL,
                        restarts: int = RESTARTS, with_mc: bool = True) -> EntropyRateReport:
    """Bracket ``[lower, upper]`` on the entropy rate, plus a Monte-Carlo estimate.

    ``lower = -(1/2) max_{pi, X} E_{y ~ P(.|pi)} log tr(X A_y A_y^T)`` (certified
    Frank-Wolfe value), ``upper = min(H(Y_1), -(1/2) min_{pi, v} E log v^T A_y A_y^T v)``;
    the second term needs every positive-probability ``A_y`` to be invertible.
    """
    beliefs = _beliefs(model, belief_search, seed)
    max_term, min_term = -np.inf, np.inf
    invertible = True
    gaps = []
    for form, A in _row_forms(model, beliefs):
        _, f, gap, _, _ = frank_wolfe(form, tol)
        max_term = max(max_term, f + gap)
        gaps.append(gap)
        if invertible:
            with np.errstate(all="ignore"):
                cond = np.linalg.cond(A)
            if not np.all(np.isfinite(cond) & (cond < INVERTIBLE_COND)):
                invertible = False
                continue
            rng = np.random.default_rng(seed)
            V0 = np.vstack([np.linalg.eigh(form.mean_gram())[1][:, 0], rng.standard_normal((restarts, form.dim))])
            _, vals = sphere_ascent(form, V0, -1.0, RANK_ONE_TOL)
            min_term = min(min_term, float(vals.min()))
    lower = -0.5 * max_term
    h1 = output_entropy(model)
    upper = min(h1, -0.5 * min_term) if invertible else h1
    meta = {"belief_search": belief_search, "beliefs": int(len(beliefs)), "max_gap": float(max(gaps)),
            "output_entropy": h1, "invertible_transfer": invertible,
            "relaxation": "belief-simplex conditioning"}
    if with_mc:
        est = entropy_rate_mc(model, n, trials, seed)
    else:
        est = Estimate(float("nan"), float("nan"))
    return EntropyRateReport(float(lower), float(upper), est.value, est.stderr, n, trials, seed, meta)


def bsc(eps: float) -> np.ndarray:
    return np.array([[1 - eps, eps], [eps, 1 - eps]])


def markov_entropy_rate(M: np.ndarray, mu: np.ndarray | None = None) -> float:
    """``-sum_x mu_x sum_x' M_{x,x'} log M_{x,x'}``."""
    M = np.asarray(M, dtype=np.float64)
    mu = stationary_distribution(M) if mu is None else mu
    return float(-np.sum(mu[:, None] * M * clamped_log(M) * (M > 0)))
