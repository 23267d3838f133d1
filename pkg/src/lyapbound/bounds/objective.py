"""The concave objective ``f(X) = E log tr(X L L^dagger)`` in evaluable form."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ensemble import (
    DiscreteEnsemble,
    EnsembleError,
    MarkovEnsemble,
    SamplerEnsemble,
    atoms,
    clamped_log,
    gram,
)

DEFAULT_SAMPLES = 100_000
DEFAULT_SEED = 42


@dataclass(frozen=True, eq=False)
class LogForm:
    """Weighted Gram matrices ``G_i = L_i L_i^dagger`` with weights ``w_i``."""

    grams: np.ndarray
    weights: np.ndarray
    sampled: bool
    real: bool

    @property
    def dim(self) -> int:
        return self.grams.shape[1]

    def traces(self, X) -> np.ndarray:
        return np.einsum("ab,iba->i", X, self.grams).real

    def terms(self, X) -> np.ndarray:
        return clamped_log(self.traces(X))

    def value(self, X) -> float:
        return float(np.dot(self.weights, self.terms(X)))

    def stderr(self, X) -> float:
        if not self.sampled:
            return 0.0
        t = self.terms(X)
        return float(np.std(t, ddof=1) / np.sqrt(len(t)))

    def mean_gram(self) -> np.ndarray:
        m = np.einsum("i,iab->ab", self.weights, self.grams)
        return 0.5 * (m + np.conj(m.T))

    def quad(self, V: np.ndarray) -> np.ndarray:
        """``v^dagger G_i v`` for a stack of vectors ``V`` (R, d) -> (K, R)."""
        GV = np.einsum("iab,rb->ira", self.grams, V)
        return np.einsum("ra,ira->ir", np.conj(V), GV).real


def log_form(ensemble, samples: int = DEFAULT_SAMPLES, seed: int = DEFAULT_SEED) -> LogForm:
    if isinstance(ensemble, MarkovEnsemble):
        raise EnsembleError("use the Markov-specific bounds for Markov ensembles")
    mats, w = atoms(ensemble, samples, seed)
    G = gram(mats)
    real = not np.iscomplexobj(G) or bool(np.all(G.imag == 0))
    if real:
        G = np.ascontiguousarray(G.real) if np.iscomplexobj(G) else G
    return LogForm(G, np.asarray(w, dtype=np.float64), isinstance(ensemble, SamplerEnsemble), real)


def form_from(matrices, weights) -> LogForm:
    ens = DiscreteEnsemble(np.asarray(matrices), np.asarray(weights))
    return log_form(ens)


def hermitian_extreme_eigs(G: np.ndarray):
    """(lambda_min, lambda_max) of a stack of Hermitian matrices.

    The 2x2 case uses the closed form so that exact inputs give exact outputs.
    """
    if G.shape[-1] == 2:
        a = G[..., 0, 0].real
        d = G[..., 1, 1].real
        b = np.abs(G[..., 0, 1])
        tr = a + d
        disc = np.hypot(a - d, 2 * b)
        lmax = 0.5 * (tr + disc)
        det = a * d - b * b
        with np.errstate(divide="ignore", invalid="ignore"):
            lmin = np.where(lmax > 0, det / np.where(lmax > 0, lmax, 1), 0.0)
        return np.maximum(lmin, 0.0), lmax
    ev = np.linalg.eigvalsh(G)
    return np.maximum(ev[..., 0], 0.0), ev[..., -1]
