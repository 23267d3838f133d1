"""Certificates and the bound report container."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..ensemble import NEG_INF, EnsembleError

UPPER = "upper_gamma1"
LOWER = "lower_gammad"
POS_INF = -NEG_INF


def encode_extended(x: float):
    x = float(x)
    if x <= NEG_INF:
        return "-inf"
    if x >= POS_INF:
        return "inf"
    return x


def decode_extended(x) -> float:
    if x == "-inf":
        return NEG_INF
    if x == "inf":
        return POS_INF
    return float(x)


def _encode_array(a: np.ndarray):
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return {"re": a.real.tolist(), "im": a.imag.tolist()}
    return {"re": a.tolist()}


def _decode_array(obj) -> np.ndarray:
    re = np.asarray(obj["re"], dtype=np.float64)
    if "im" in obj:
        return re + 1j * np.asarray(obj["im"], dtype=np.float64)
    return re


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit trace (all within 1e-12)."""

    entries: np.ndarray

    def __post_init__(self):
        X = np.array(self.entries)
        if X.ndim != 2 or X.shape[0] != X.shape[1]:
            raise EnsembleError("density matrix must be square")
        scale = max(1.0, float(np.max(np.abs(X))))
        if np.max(np.abs(X - np.conj(X.T))) > 1e-12 * scale:
            raise EnsembleError("density matrix must be Hermitian")
        X = 0.5 * (X + np.conj(X.T))
        if abs(np.trace(X).real - 1.0) > 1e-12:
            raise EnsembleError("density matrix must have unit trace")
        if np.linalg.eigvalsh(X)[0] < -1e-12:
            raise EnsembleError("density matrix must be positive semidefinite")
        X.setflags(write=False)
        object.__setattr__(self, "entries", X)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def maximally_mixed(cls, d: int) -> "DensityMatrix":
        return cls(np.eye(d) / d)

    @classmethod
    def project(cls, X) -> "DensityMatrix":
        """Nearest density matrix after clipping round-off (eigenvalue floor at 0)."""
        X = np.asarray(X)
        X = 0.5 * (X + np.conj(X.T))
        ev, V = np.linalg.eigh(X)
        ev = np.clip(ev, 0.0, None)
        ev /= ev.sum()
        Y = (V * ev) @ np.conj(V.T)
        return cls(0.5 * (Y + np.conj(Y.T)))


@dataclass(frozen=True, eq=False)
class UnitVector:
    """Vector with Euclidean norm 1 within 1e-12."""

    entries: np.ndarray

    def __post_init__(self):
        v = np.array(self.entries).ravel()
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise EnsembleError("unit vector must have norm 1")
        v.setflags(write=False)
        object.__setattr__(self, "entries", v)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def projector(self) -> np.ndarray:
        return np.outer(self.entries, np.conj(self.entries))


@dataclass(frozen=True, eq=False)
class BoundReport:
    """A bound on ``gamma_1`` (``side == UPPER``) or ``gamma_d`` (``LOWER``).

    ``value`` is in nats per step; the ``NEG_INF`` sentinel stands for minus
    infinity. ``certificate`` is a :class:`DensityMatrix`, a :class:`UnitVector`,
    a dict of named parameters, a list of density matrices, or ``None``.
    ``warning`` is set when an iterative method stopped without converging.
    """

    value: float
    side: str
    method: str
    certificate: Any = None
    diagnostics: dict = field(default_factory=dict)
    warning: str | None = None

    def to_dict(self) -> dict:
        return {
            "value": encode_extended(self.value),
            "side": self.side,
            "method": self.method,
            "certificate": _encode_certificate(self.certificate),
            "diagnostics": {k: _plain(v) for k, v in sorted(self.diagnostics.items())},
            "warning": self.warning,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoundReport":
        return cls(
            value=decode_extended(d["value"]),
            side=d["side"],
            method=d["method"],
            certificate=_decode_certificate(d.get("certificate")),
            diagnostics=dict(d.get("diagnostics") or {}),
            warning=d.get("warning"),
        )


def _plain(v):
    if isinstance(v, (np.floating, float)):
        return encode_extended(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in sorted(v.items())}
    return v


def _encode_certificate(c):
    if c is None:
        return None
    if isinstance(c, DensityMatrix):
        return {"kind": "density", "entries": _encode_array(c.entries)}
    if isinstance(c, UnitVector):
        return {"kind": "vector", "entries": _encode_array(c.entries)}
    if isinstance(c, dict):
        return {"kind": "params", "values": {k: _plain(v) for k, v in sorted(c.items())}}
    if isinstance(c, (list, tuple)):
        return {"kind": "set", "members": [_encode_certificate(x) for x in c]}
    raise TypeError(f"cannot encode certificate of type {type(c).__name__}")


def _decode_certificate(obj):
    if obj is None:
        return None
    kind = obj["kind"]
    if kind == "density":
        return DensityMatrix(_decode_array(obj["entries"]))
    if kind == "vector":
        return UnitVector(_decode_array(obj["entries"]))
    if kind == "params":
        return dict(obj["values"])
    if kind == "set":
        return [_decode_certificate(x) for x in obj["members"]]
    raise ValueError(f"unknown certificate kind {kind!r}")
