"""Monte-Carlo estimates of the Lyapunov spectrum.

Products are taken in the order ``P_n = L_1 L_2 ... L_n``. The singular values of
``P_n`` coincide with those of ``P_n^dagger = L_n^dagger ... L_1^dagger``, so the
frame is propagated by left multiplication with ``L_i^dagger``. For i.i.d. laws the
order is immaterial; for Markov laws it matches the conditioning used by the
bounds.

Every trial ``t`` owns ``np.random.default_rng(seed + t)``. Trials are split into
contiguous chunks that may run on worker threads; each trial's arithmetic does
not depend on which chunk it lands in, so results are bitwise reproducible for
any thread count.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .ensemble import (
    NEG_INF,
    DiscreteEnsemble,
    EnsembleError,
    Estimate,
    MarkovEnsemble,
    SamplerEnsemble,
)

# relative threshold below which a diagonal factor counts as a rank drop
RANK_TOL = 1e-13
BLOCK = 256
MAX_EXTERIOR_DIM = 6


@dataclass(frozen=True, eq=False)
class SpectrumEstimate:
    """Estimated ``gamma_{k,n}`` for ``k = 1..d`` with standard errors.

    ``per_trial`` holds the per-trial exponents (rows = trials) before
    averaging; dead components carry the ``NEG_INF`` sentinel.
    """

    gammas: np.ndarray
    stderr: np.ndarray
    n: int
    trials: int
    seed: int
    rank_deficient_fraction: float
    per_trial: np.ndarray

    def to_rows(self) -> list[dict]:
        return [
            {"k": k + 1, "gamma": float(g), "stderr": float(s), "n": self.n,
             "trials": self.trials, "seed": self.seed}
            for k, (g, s) in enumerate(zip(self.gammas, self.stderr))
        ]

    def to_dict(self) -> dict:
        return {
            "gammas": [_encode(g) for g in self.gammas],
            "stderr": [float(x) for x in self.stderr],
            "n": self.n, "trials": self.trials, "seed": self.seed,
            "rank_deficient_fraction": float(self.rank_deficient_fraction),
            "per_trial": [[_encode(g) for g in row] for row in self.per_trial],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpectrumEstimate":
        per = np.array([[_decode(g) for g in row] for row in d["per_trial"]], dtype=np.float64)
        return cls(np.array([_decode(g) for g in d["gammas"]], dtype=np.float64),
                   np.asarray(d["stderr"], dtype=np.float64), int(d["n"]), int(d["trials"]),
                   int(d["seed"]), float(d["rank_deficient_fraction"]), per.reshape(-1, len(d["gammas"])))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["k", "gamma", "stderr", "n", "trials", "seed"],
                                lineterminator="\n")
        writer.writeheader()
        for row in self.to_rows():
            row["gamma"] = format_extended(row["gamma"])
            row["stderr"] = repr(row["stderr"])
            writer.writerow(row)
        return buf.getvalue()


def format_extended(x: float) -> str:
    """``repr`` of a float, with the sentinel rendered as ``-inf``."""
    return "-inf" if x <= NEG_INF else repr(float(x))


def _encode(x):
    return "-inf" if x <= NEG_INF else float(x)


def _decode(x) -> float:
    return NEG_INF if x == "-inf" else float(x)


def worker_count() -> int:
    raw = os.environ.get("LYAPBOUND_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


# -- matrix streams -------------------------------------------------------------


class _Stream:
    """Per-trial generator of the factors ``L_1, L_2, ...`` in blocks."""

    def __init__(self, ensemble, rng: np.random.Generator, n: int):
        self.ensemble = ensemble
        self.rng = rng
        if isinstance(ensemble, (DiscreteEnsemble, MarkovEnsemble)):
            self.index = ensemble.index_stream(rng, n)
        else:
            self.index = None
        self.pos = 0

    def take(self, count: int) -> np.ndarray:
        if self.index is not None:
            out = self.ensemble.matrices[self.index[self.pos:self.pos + count]]
        else:
            out = self.ensemble.draw(self.rng, count)
        self.pos += count
        return out


def _check_inputs(ensemble, n: int, trials: int):
    if n < 1 or trials < 1:
        raise EnsembleError("n and trials must be positive")
    if not isinstance(ensemble, (DiscreteEnsemble, MarkovEnsemble, SamplerEnsemble)):
        raise EnsembleError("unsupported ensemble type")


def _dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def _qr_chunk(ensemble, n: int, seeds: range, transform=None, columns: int | None = None):
    """Accumulated log-diagonals for ``len(seeds)`` trials, shape (trials, k).

    Also returns a boolean mask of components that hit a rank drop.
    """
    streams = [_Stream(ensemble, np.random.default_rng(s), n) for s in seeds]
    T = len(streams)
    d = ensemble.dim if transform is None else transform.dim
    k = d if columns is None else columns
    complex_ = np.iscomplexobj(ensemble.matrices) if hasattr(ensemble, "matrices") else not ensemble.is_real
    dtype = np.complex128 if complex_ else np.float64
    Q = np.broadcast_to(np.eye(d, k, dtype=dtype), (T, d, k)).copy()
    acc = np.zeros((T, k))
    dead = np.zeros((T, k), dtype=bool)
    done = 0
    while done < n:
        b = min(BLOCK, n - done)
        mats = np.stack([s.take(b) for s in streams], axis=0)
        if transform is not None:
            mats = transform(mats)
        mats = _dagger(mats).astype(dtype, copy=False)
        for step in range(b):
            Y = mats[:, step] @ Q
            q, r = np.linalg.qr(Y)
            diag = np.diagonal(r, axis1=1, axis2=2)
            mag = np.abs(diag)
            scale = np.linalg.norm(Y, axis=(1, 2))
            dead |= mag <= RANK_TOL * scale[:, None]
            with np.errstate(divide="ignore"):
                acc += np.log(mag)
            phase = np.where(mag > 0, diag / np.where(mag > 0, mag, 1), 1)
            Q = q * phase[:, None, :]
        done += b
    return acc, dead


def _run_trials(ensemble, n, trials, seed, threads, transform=None, columns=None):
    threads = worker_count() if threads is None else max(1, int(threads))
    threads = min(threads, trials)
    bounds = np.linspace(0, trials, threads + 1).astype(int)
    chunks = [range(seed + lo, seed + hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    if len(chunks) == 1:
        parts = [_qr_chunk(ensemble, n, chunks[0], transform, columns)]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(lambda c: _qr_chunk(ensemble, n, c, transform, columns), chunks))
    acc = np.concatenate([p[0] for p in parts], axis=0)
    dead = np.concatenate([p[1] for p in parts], axis=0)
    return acc, dead


def _summarise(per_trial: np.ndarray, dead: np.ndarray):
    """Mean and stderr per component; any dead trial makes the mean the sentinel."""
    trials = per_trial.shape[0]
    vals = np.where(dead, 0.0, per_trial)
    mean = vals.mean(axis=0)
    if trials > 1:
        err = vals.std(axis=0, ddof=1) / np.sqrt(trials)
    else:
        err = np.zeros(per_trial.shape[1])
    any_dead = dead.any(axis=0)
    mean = np.where(any_dead, NEG_INF, mean)
    err = np.where(any_dead, 0.0, err)
    order = np.argsort(-mean, kind="stable")
    return mean[order], err[order]


def _tail_dead(per_trial: np.ndarray, dead: np.ndarray):
    """Move each trial's dead components behind its live ones."""
    out = per_trial.copy()
    mask = dead.copy()
    for t in np.flatnonzero(dead.any(axis=1)):
        order = np.argsort(dead[t], kind="stable")
        out[t] = per_trial[t, order]
        mask[t] = dead[t, order]
    out[mask] = NEG_INF
    return out, mask


def lyapunov_spectrum_qr(ensemble, n: int = 10_000, trials: int = 32, seed: int = 42,
                         threads: int | None = None) -> SpectrumEstimate:
    """Benettin QR estimate of ``gamma_{1,n} >= ... >= gamma_{d,n}``.

    Each step forms ``L^dagger Q``, re-orthonormalises it with a QR factorisation
    whose ``R`` has a nonnegative diagonal, and accumulates ``log R_kk``. A
    component whose diagonal factor falls below ``1e-13 * ||L^dagger Q||_F`` is
    dead for that trial and its exponent is the ``-inf`` sentinel.

    Parameters
    ----------
    ensemble : DiscreteEnsemble, MarkovEnsemble or SamplerEnsemble
    n : int
        Product length.
    trials : int
        Independent replicas; trial ``t`` uses seed ``seed + t``.
    threads : int, optional
        Worker threads (default ``LYAPBOUND_THREADS`` or the CPU count).
    """
    _check_inputs(ensemble, n, trials)
    acc, dead = _run_trials(ensemble, n, trials, seed, threads)
    per_trial, dead = _tail_dead(acc / n, dead)
    gammas, stderr = _summarise(per_trial, dead)
    frac = float(dead.any(axis=1).mean())
    per_trial.setflags(write=False)
    return SpectrumEstimate(gammas, stderr, n, trials, seed, frac, per_trial)


def nonasymptotic_gamma(ensemble, k: int, n: int = 10_000, trials: int = 32, seed: int = 42,
                        threads: int | None = None) -> Estimate:
    """Estimate of ``gamma_{k,n} = (1/n) E log sigma_k(L_1 ... L_n)``."""
    if not 1 <= k <= ensemble.dim:
        raise EnsembleError(f"k must lie in 1..{ensemble.dim}")
    est = lyapunov_spectrum_qr(ensemble, n, trials, seed, threads)
    return Estimate(float(est.gammas[k - 1]), float(est.stderr[k - 1]))


def log_abs_det_mean(ensemble, n: int, trials: int, seed: int) -> np.ndarray:
    """Per-trial ``(1/n) log |det(L_1 ... L_n)|`` on the same random streams."""
    out = np.empty(trials)
    for t in range(trials):
        stream = _Stream(ensemble, np.random.default_rng(seed + t), n)
        total, done = 0.0, 0
        while done < n:
            b = min(BLOCK, n - done)
            _, logdet = np.linalg.slogdet(stream.take(b))
            total += float(np.sum(logdet))
            done += b
        out[t] = total / n
    return out


# -- exterior powers ------------------------------------------------------------


def _subsets(d: int, j: int) -> np.ndarray:
    return np.array(list(combinations(range(d), j)), dtype=np.intp)


def exterior_power(L, j: int) -> np.ndarray:
    """The ``j``-th compound matrix of ``L`` (works on stacks too).

    Entry ``(I, J)`` is the minor ``det L[I, J]`` for increasing index subsets in
    lexicographic order.
    """
    L = np.asarray(L)
    d = L.shape[-1]
    if L.shape[-2] != d:
        raise EnsembleError("exterior_power needs square matrices")
    if not 1 <= j <= d:
        raise EnsembleError(f"order j must lie in 1..{d}")
    if j == 1:
        return L.copy()
    idx = _subsets(d, j)
    sub = L[..., idx[:, None, :, None], idx[None, :, None, :]]  # (..., C, C, j, j)
    return np.linalg.det(sub)


class _Wedge:
    def __init__(self, d: int, j: int):
        self.j = j
        self.dim = comb(d, j)

    def __call__(self, mats):
        return exterior_power(mats, self.j)


def spectrum_via_exterior(ensemble, n: int = 10_000, trials: int = 32, seed: int = 42,
                          threads: int | None = None) -> SpectrumEstimate:
    """Spectrum from the top exponents of the wedge ensembles.

    ``xi_j`` = top exponent of ``wedge^j L``; then ``gamma_j = xi_j - xi_{j-1}``.
    Each ``xi_j`` is tracked with a single propagated vector on the same random
    streams as :func:`lyapunov_spectrum_qr`.
    """
    _check_inputs(ensemble, n, trials)
    d = ensemble.dim
    if d > MAX_EXTERIOR_DIM:
        raise EnsembleError(f"exterior-power check limited to d <= {MAX_EXTERIOR_DIM}")
    xi = np.zeros((trials, d + 1))
    xi_dead = np.zeros((trials, d + 1), dtype=bool)
    for j in range(1, d + 1):
        acc, dead = _run_trials(ensemble, n, trials, seed, threads, transform=_Wedge(d, j), columns=1)
        xi[:, j] = acc[:, 0] / n
        xi_dead[:, j] = dead[:, 0]
    # once a wedge dies all higher ones do too
    xi_dead = np.logical_or.accumulate(xi_dead, axis=1)
    gam = np.diff(np.where(xi_dead, 0.0, xi), axis=1)
    dead = xi_dead[:, 1:]
    gam[dead] = NEG_INF
    gammas, stderr = _summarise(gam, dead)
    frac = float(dead.any(axis=1).mean())
    gam.setflags(write=False)
    return SpectrumEstimate(gammas, stderr, n, trials, seed, frac, gam)
