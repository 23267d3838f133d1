"""Distributions over square matrices.

Three flavours are supported:

* :class:`DiscreteEnsemble` -- finitely many matrices with probability weights.
  Expectations over it are exact weighted sums.
* :class:`MarkovEnsemble` -- the matrix index evolves as a finite Markov chain.
* :class:`SamplerEnsemble` -- a continuous law given by a seeded sampler, e.g.
  ``U diag(alpha) U^dagger`` with ``U`` Haar distributed.

Ensembles are immutable once built. The ``validate`` entry point turns a parsed
JSON description into one of the above; ``to_spec`` goes the other way.
"""

from __future__ import annotations

import json
import sys
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Union

import numpy as np

# floor applied to tr(X L L^dagger) before taking the log
LOG_FLOOR = 1e-300
# most negative finite double, stands in for -inf in reports
NEG_INF = -sys.float_info.max

PROB_TOL = 1e-12
COMMUTE_TOL = 1e-10
INVERTIBLE_COND = 1e12


class EnsembleError(ValueError):
    """Raised for malformed or inconsistent ensemble descriptions."""


class Estimate(NamedTuple):
    """A scalar with its standard error (zero for exact evaluations)."""

    value: float
    stderr: float = 0.0


def clamped_log(t):
    return np.log(np.maximum(t, LOG_FLOOR))


def _as_matrix_stack(matrices) -> np.ndarray:
    arr = np.asarray(matrices)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise EnsembleError("dimension mismatch: matrices must be square and of equal size")
    if arr.shape[0] == 0:
        raise EnsembleError("empty support")
    if np.iscomplexobj(arr):
        if np.all(arr.imag == 0):
            arr = arr.real
        arr = arr.astype(np.complex128) if np.iscomplexobj(arr) else arr
    arr = np.array(arr, dtype=np.complex128 if np.iscomplexobj(arr) else np.float64)
    if not np.all(np.isfinite(arr)):
        raise EnsembleError("matrix entries must be finite")
    arr.setflags(write=False)
    return arr


def _normalise_probs(probs, count: int, name: str = "probabilities") -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64).ravel()
    if p.shape[0] != count:
        raise EnsembleError(f"{name}: expected {count} entries, got {p.shape[0]}")
    if not np.all(np.isfinite(p)):
        raise EnsembleError(f"{name} must be finite")
    if np.any(p < 0):
        raise EnsembleError("negative probability")
    if abs(p.sum() - 1.0) > PROB_TOL:
        raise EnsembleError(f"{name} do not sum to 1")
    return p / p.sum()


def gram(matrices: np.ndarray) -> np.ndarray:
    """Return the stack of Hermitian matrices ``L L^dagger``."""
    g = matrices @ np.conj(np.swapaxes(matrices, -1, -2))
    return 0.5 * (g + np.conj(np.swapaxes(g, -1, -2)))


def _all_invertible(matrices: np.ndarray) -> bool:
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(matrices)
    return bool(np.all(np.isfinite(cond) & (cond < INVERTIBLE_COND)))


def _pairwise_commute(matrices: np.ndarray) -> bool:
    norms = np.linalg.norm(matrices, axis=(1, 2))
    k = matrices.shape[0]
    for i in range(k):
        for j in range(i + 1, k):
            a, b = matrices[i], matrices[j]
            if np.linalg.norm(a @ b - b @ a) > COMMUTE_TOL * norms[i] * norms[j]:
                return False
    return True


def _is_real(matrices: np.ndarray) -> bool:
    return not np.iscomplexobj(matrices)


@dataclass(frozen=True, eq=False)
class DiscreteEnsemble:
    """Finite-support law ``sum_i p_i delta_{L_i}``.

    Zero-weight atoms are dropped on construction; ``invertible`` and
    ``commuting`` are computed once from the remaining support.
    """

    matrices: np.ndarray
    probs: np.ndarray
    invertible: bool = field(init=False)
    commuting: bool = field(init=False)

    def __post_init__(self):
        mats = _as_matrix_stack(self.matrices)
        p = _normalise_probs(self.probs, mats.shape[0])
        keep = p > 0
        mats, p = mats[keep], p[keep]
        mats.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "invertible", _all_invertible(mats))
        object.__setattr__(self, "commuting", _pairwise_commute(mats))

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    @property
    def size(self) -> int:
        return self.matrices.shape[0]

    @property
    def is_real(self) -> bool:
        return _is_real(self.matrices)

    compact = True

    def atoms(self, samples: int | None = None, seed: int | None = None):
        return self.matrices, self.probs

    def index_stream(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.choice(self.size, size=n, p=self.probs)


@dataclass(frozen=True, eq=False)
class MarkovEnsemble:
    """Matrices ``L_{s_1}, L_{s_2}, ...`` driven by a Markov chain ``s``."""

    matrices: np.ndarray
    transition: np.ndarray
    initial: np.ndarray
    invertible: bool = field(init=False)
    commuting: bool = field(init=False)

    def __post_init__(self):
        mats = _as_matrix_stack(self.matrices)
        k = mats.shape[0]
        P = np.array(self.transition, dtype=np.float64)
        if P.shape != (k, k):
            raise EnsembleError(f"dimension mismatch: transition must be {k}x{k}")
        if np.any(P < 0):
            raise EnsembleError("negative probability")
        for r, row in enumerate(P):
            if abs(row.sum() - 1.0) > PROB_TOL:
                raise EnsembleError(f"transition row {r} is not stochastic")
        P = P / P.sum(axis=1, keepdims=True)
        init = _normalise_probs(self.initial, k, name="initial probabilities")
        P.setflags(write=False)
        init.setflags(write=False)
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "initial", init)
        object.__setattr__(self, "invertible", _all_invertible(mats))
        object.__setattr__(self, "commuting", _pairwise_commute(mats))

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    @property
    def size(self) -> int:
        return self.matrices.shape[0]

    @property
    def is_real(self) -> bool:
        return _is_real(self.matrices)

    def reachable_states(self) -> np.ndarray:
        """States that occur with positive probability at some step."""
        seen = self.initial > 0
        frontier = seen.copy()
        while frontier.any():
            nxt = (self.transition[frontier] > 0).any(axis=0) & ~seen
            seen |= nxt
            frontier = nxt
        return np.flatnonzero(seen)

    def row_ensemble(self, state: int) -> DiscreteEnsemble:
        return DiscreteEnsemble(self.matrices, self.transition[state])

    def initial_ensemble(self) -> DiscreteEnsemble:
        return DiscreteEnsemble(self.matrices, self.initial)

    def index_stream(self, rng: np.random.Generator, n: int) -> np.ndarray:
        cum = np.cumsum(self.transition, axis=1)
        u = rng.random(n)
        out = np.empty(n, dtype=np.int64)
        s = int(np.searchsorted(np.cumsum(self.initial), u[0], side="right"))
        out[0] = min(s, self.size - 1)
        for t in range(1, n):
            s = int(np.searchsorted(cum[out[t - 1]], u[t], side="right"))
            out[t] = min(s, self.size - 1)
        return out


def haar_unitaries(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Draw ``count`` Haar-distributed ``dim x dim`` unitaries.

    QR of a complex Ginibre matrix with the phases of ``R``'s diagonal moved into
    ``Q`` (Mezzadri's construction).
    """
    z = (rng.standard_normal((count, dim, dim)) + 1j * rng.standard_normal((count, dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=1, axis2=2)
    phase = diag / np.abs(diag)
    return q * phase[:, None, :]


@dataclass(frozen=True, eq=False)
class SamplerEnsemble:
    """Continuous law defined by a seeded sampler.

    ``draw(rng, count)`` must return a ``(count, dim, dim)`` array and consume
    the generator deterministically. For ``kind == "haar_diag"`` the sampler is
    built from ``diag``; ``custom`` ensembles pass their own callable, and the
    integrability / compactness / invertibility flags are taken on trust.
    """

    dim: int
    kind: str
    diag: tuple | None = None
    sampler: Callable[[np.random.Generator, int], np.ndarray] | None = None
    compact: bool = True
    invertible: bool = True
    is_real: bool = False
    commuting: bool = False

    def __post_init__(self):
        if self.kind == "haar_diag":
            if self.diag is None or len(self.diag) != self.dim:
                raise EnsembleError("dimension mismatch: haar_diag needs one diagonal entry per dimension")
            alpha = tuple(float(a) for a in self.diag)
            if any(not np.isfinite(a) or a <= 0 for a in alpha):
                raise EnsembleError("haar_diag entries must be positive")
            object.__setattr__(self, "diag", alpha)
            object.__setattr__(self, "invertible", True)
            object.__setattr__(self, "compact", True)
            object.__setattr__(self, "is_real", False)
            object.__setattr__(self, "commuting", len(set(alpha)) == 1)
        elif self.kind == "custom":
            if self.sampler is None:
                raise EnsembleError("custom sampler ensemble needs a sampler callable")
        else:
            raise EnsembleError(f"unknown sampler kind {self.kind!r}")

    def draw(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.kind == "haar_diag":
            u = haar_unitaries(rng, count, self.dim)
            return (u * np.asarray(self.diag)[None, None, :]) @ np.conj(np.swapaxes(u, 1, 2))
        out = np.asarray(self.sampler(rng, count))
        if out.shape != (count, self.dim, self.dim):
            raise EnsembleError("dimension mismatch: sampler returned wrong shape")
        return out

    def sample(self, seed: int) -> np.ndarray:
        """One matrix from a fresh generator seeded with ``seed``."""
        return self.draw(np.random.default_rng(seed), 1)[0]

    def atoms(self, samples: int = 100_000, seed: int = 42):
        """Empirical support: ``samples`` seeded draws with equal weights."""
        mats = self.draw(np.random.default_rng(seed), samples)
        return mats, np.full(samples, 1.0 / samples)


Ensemble = Union[DiscreteEnsemble, MarkovEnsemble, SamplerEnsemble]


def discrete(matrices, probs=None) -> DiscreteEnsemble:
    mats = _as_matrix_stack(matrices)
    if probs is None:
        probs = np.full(mats.shape[0], 1.0 / mats.shape[0])
    return DiscreteEnsemble(mats, probs)


# -- evaluation -----------------------------------------------------------------


def atoms(ensemble: Ensemble, samples: int = 100_000, seed: int = 42):
    """Matrices and weights used for expectations over ``ensemble``."""
    if isinstance(ensemble, MarkovEnsemble):
        raise EnsembleError("a Markov ensemble has no single-step law; use row_ensemble()")
    return ensemble.atoms(samples, seed)


def _check_density(X, dim):
    X = np.asarray(X)
    if X.shape != (dim, dim):
        raise EnsembleError(f"dimension mismatch: expected a {dim}x{dim} density matrix")
    return X


def log_form_terms(grams: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Clamped ``log tr(X G_i)`` for each Gram matrix ``G_i``."""
    tr = np.einsum("ab,iba->i", X, grams).real
    return clamped_log(tr)


def expect_log_form(ensemble: Ensemble, X, samples: int = 100_000, seed: int = 42) -> Estimate:
    """``E log tr(X L L^dagger)``.

    Exact for a discrete ensemble; for a sampler ensemble a Monte-Carlo mean over
    ``samples`` draws, returned together with its standard error.
    """
    X = _check_density(X, ensemble.dim)
    mats, w = atoms(ensemble, samples, seed)
    terms = log_form_terms(gram(mats), X)
    value = float(np.dot(w, terms))
    if isinstance(ensemble, SamplerEnsemble):
        return Estimate(value, float(np.std(terms, ddof=1) / np.sqrt(len(terms))))
    return Estimate(value, 0.0)


def _invert_stack(mats: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(mats)
    if not np.all(np.isfinite(cond) & (cond < INVERTIBLE_COND)):
        raise EnsembleError("singular support: matrix inverse undefined")
    return np.linalg.inv(mats)


def invert_ensemble(ensemble: Ensemble) -> Ensemble:
    """Replace every matrix by its inverse, keeping the weights/kernel."""
    if isinstance(ensemble, DiscreteEnsemble):
        return DiscreteEnsemble(_invert_stack(ensemble.matrices), ensemble.probs)
    if isinstance(ensemble, MarkovEnsemble):
        return MarkovEnsemble(_invert_stack(ensemble.matrices), ensemble.transition, ensemble.initial)
    if ensemble.kind == "haar_diag":
        return SamplerEnsemble(ensemble.dim, "haar_diag", diag=tuple(1.0 / a for a in ensemble.diag))
    base = ensemble

    def inverse_sampler(rng, count):
        return _invert_stack(base.draw(rng, count))

    return SamplerEnsemble(base.dim, "custom", sampler=inverse_sampler, compact=base.compact,
                           invertible=True, is_real=base.is_real, commuting=base.commuting)


def scale_ensemble(ensemble: Ensemble, c: float) -> Ensemble:
    """The law of ``c L`` for a positive scalar ``c``."""
    if not c > 0:
        raise EnsembleError("scale factor must be positive")
    if isinstance(ensemble, DiscreteEnsemble):
        return DiscreteEnsemble(c * ensemble.matrices, ensemble.probs)
    if isinstance(ensemble, MarkovEnsemble):
        return MarkovEnsemble(c * ensemble.matrices, ensemble.transition, ensemble.initial)
    if ensemble.kind == "haar_diag":
        return SamplerEnsemble(ensemble.dim, "haar_diag", diag=tuple(c * a for a in ensemble.diag))
    base = ensemble
    return SamplerEnsemble(base.dim, "custom", sampler=lambda rng, count: c * base.draw(rng, count),
                           compact=base.compact, invertible=base.invertible, is_real=base.is_real,
                           commuting=base.commuting)


# -- structured-text format -----------------------------------------------------


def _parse_entry(x) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise EnsembleError("complex entries must be [re, im] pairs")
        return complex(float(x[0]), float(x[1]))
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise EnsembleError(f"bad matrix entry {x!r}")
    return complex(float(x), 0.0)


def _parse_matrices(raw, dim: int) -> np.ndarray:
    if not isinstance(raw, list) or not raw:
        raise EnsembleError("empty support")
    out = np.empty((len(raw), dim, dim), dtype=np.complex128)
    for m, mat in enumerate(raw):
        if not isinstance(mat, list) or len(mat) != dim or any(
            not isinstance(row, list) or len(row) != dim for row in mat
        ):
            raise EnsembleError(f"dimension mismatch in matrix {m}: expected {dim}x{dim}")
        for i, row in enumerate(mat):
            for j, x in enumerate(row):
                out[m, i, j] = _parse_entry(x)
    return out


def _encode_entry(z: complex):
    z = complex(z)
    if z.imag == 0:
        return z.real
    return [z.real, z.imag]


def _encode_matrices(mats: np.ndarray) -> list:
    return [[[_encode_entry(x) for x in row] for row in mat] for mat in mats]


def validate(spec: dict[str, Any]) -> Ensemble:
    """Build a validated ensemble from a parsed description.

    Raises
    ------
    EnsembleError
        On a dimension mismatch, negative or non-normalised probabilities,
        non-stochastic transition rows, or an empty support.
    """
    if not isinstance(spec, dict):
        raise EnsembleError("ensemble description must be an object")
    kind = spec.get("kind", "discrete")
    try:
        dim = int(spec["dim"])
    except (KeyError, TypeError, ValueError):
        raise EnsembleError("missing or invalid 'dim'") from None
    if dim < 1:
        raise EnsembleError("'dim' must be positive")
    if kind == "discrete":
        mats = _parse_matrices(spec.get("matrices"), dim)
        probs = spec.get("probs")
        if probs is None:
            raise EnsembleError("discrete ensemble needs 'probs'")
        return DiscreteEnsemble(mats, probs)
    if kind == "markov":
        mats = _parse_matrices(spec.get("matrices"), dim)
        if "transition" not in spec or "initial" not in spec:
            raise EnsembleError("markov ensemble needs 'transition' and 'initial'")
        return MarkovEnsemble(mats, spec["transition"], spec["initial"])
    if kind == "haar_diag":
        return SamplerEnsemble(dim, "haar_diag", diag=tuple(spec.get("diag") or ()))
    raise EnsembleError(f"unknown ensemble kind {kind!r}")


def to_spec(ensemble: Ensemble) -> dict[str, Any]:
    """Inverse of :func:`validate` (custom samplers cannot be serialised)."""
    if isinstance(ensemble, DiscreteEnsemble):
        return {"dim": ensemble.dim, "kind": "discrete",
                "matrices": _encode_matrices(ensemble.matrices),
                "probs": [float(p) for p in ensemble.probs]}
    if isinstance(ensemble, MarkovEnsemble):
        return {"dim": ensemble.dim, "kind": "markov",
                "matrices": _encode_matrices(ensemble.matrices),
                "transition": ensemble.transition.tolist(),
                "initial": [float(p) for p in ensemble.initial]}
    if ensemble.kind == "haar_diag":
        return {"dim": ensemble.dim, "kind": "haar_diag", "diag": list(ensemble.diag)}
    raise EnsembleError("custom sampler ensembles are not serialisable")


def loads(text: str) -> Ensemble:
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise EnsembleError(f"malformed ensemble file: {exc}") from None
    return validate(spec)


def dumps(ensemble: Ensemble) -> str:
    return json.dumps(to_spec(ensemble))


def load(path) -> Ensemble:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def save(ensemble: Ensemble, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(ensemble))


def matrices_equal(a: Sequence, b: Sequence) -> bool:
    a, b = np.asarray(a), np.asarray(b)
    return a.shape == b.shape and bool(np.array_equal(a, b))
