"""Built-in ensembles and hidden Markov models used by the worked examples."""

from __future__ import annotations

from importlib import resources

from ..ensemble import loads
from ..hmm import HmmModel

ENSEMBLES = (
    "transfer_pm1",
    "rank_one_pair",
    "diag_rotation_pair",
    "haar_diag_5_1",
    "integer5",
    "identity",
)
MODELS = ("hmm_uniform", "hmm_noiseless", "hmm_bsc005")


def path(name: str):
    return resources.files(__name__).joinpath(f"{name}.json")


def text(name: str) -> str:
    return path(name).read_text(encoding="utf-8")


def ensemble(name: str):
    if name not in ENSEMBLES:
        raise KeyError(f"unknown fixture {name!r}")
    return loads(text(name))


def model(name: str) -> HmmModel:
    import json

    if name not in MODELS:
        raise KeyError(f"unknown model fixture {name!r}")
    return HmmModel.from_spec(json.loads(text(name)))
