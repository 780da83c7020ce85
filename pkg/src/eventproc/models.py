"""Model kinds, JSON serialisation and parameter counts."""
from __future__ import annotations

import json
from pathlib import Path

from .classical import DSMPPParams, SEMPPParams
from .ctlstm import CTLSTMParams, param_count

KINDS = ("sempp", "dsmpp", "nsmmpp")
_CLASSES = {"sempp": SEMPPParams, "dsmpp": DSMPPParams, "nsmmpp": CTLSTMParams}


def count_params(kind: str, K: int, D: int | None = None) -> int:
    if kind == "sempp":
        return SEMPPParams.count(K)
    if kind == "dsmpp":
        return DSMPPParams.count(K)
    if kind == "nsmmpp":
        if D is None:
            raise ValueError("nsmmpp needs a hidden size D")
        return param_count(K, D)
    raise ValueError(f"unknown model kind {kind!r}")


def from_vector(kind: str, K: int, vec, D: int | None = None):
    if kind == "nsmmpp":
        return CTLSTMParams.from_vector(K, D, vec)
    return _CLASSES[kind].from_vector(K, vec)


def model_from_dict(d: dict):
    kind = d.get("kind")
    if kind not in _CLASSES:
        raise ValueError(f"unknown model kind {kind!r}")
    return _CLASSES[kind].from_dict(d)


def load_model(path: str | Path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def save_model(model, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh)
        fh.write("\n")
