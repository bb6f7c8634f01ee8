"""Tagged JSON bundles for every estimator kind."""

from __future__ import annotations

import json

from .baselines.ensemble import DeepEnsemble
from .baselines.gp import RbfGpModel
from .baselines.mcdo import McdoModel
from .model import NomuModel


def dump_estimator(est) -> dict:
    if isinstance(est, NomuModel):
        return {"kind": "nomu", "payload": est.to_dict()}
    if isinstance(est, (RbfGpModel, McdoModel, DeepEnsemble)):
        d = est.to_dict()
        return {"kind": d["kind"], "payload": d}
    raise TypeError(f"cannot serialise {type(est).__name__}")


def load_estimator(doc: dict):
    kind, payload = doc["kind"], doc["payload"]
    loaders = {"nomu": NomuModel.from_dict, "gp": RbfGpModel.from_dict,
               "mcdo": McdoModel.from_dict, "de": DeepEnsemble.from_dict}
    if kind not in loaders:
        raise ValueError(f"unknown estimator kind {kind!r}")
    return loaders[kind](payload)


def dumps(est) -> str:
    return json.dumps(dump_estimator(est))


def loads(text: str):
    return load_estimator(json.loads(text))
