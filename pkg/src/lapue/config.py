"""JSON network configs: topology, GBPR parameters, capacity laws and penalty settings.

Layout::

    {
      "name": "...",
      "nodes": [1, 2, ...],
      "arcs": [{"id": 1, "tail": 1, "head": 2, "t0": 16, "b": 0.15, "n": 4,
                "capacity": {"kind": "normal", "mu": 1500, "sigma": 5}}, ...],
      "od_pairs": [{"origin": 1, "destination": 2, "demand": 3500}, ...],
      "paths": [[[1], [3, 4, 5]], [[3, 6], [2]]],      # per OD; optional
      "max_paths": 1000,
      "penalty": {"theta0": 0, "theta1": 1, "theta2": 2, "tau": [27, 22],
                  "t": 0.01, "mode": "smooth"},
      "sampling": {"M": 1000, "seed": 0},
      "overrides": {"3": {"t0": 10.0}},                 # optional, by arc id
      "experiments": {...}                              # optional defaults
    }
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path as FsPath
from typing import Any, Union

from .disutility import PenaltyConfig
from .network import Arc, Network, ODPair, Path, enumerate_all_paths
from .stochastics import CapacityModel, model_from_dict

BUNDLED = ("network1", "nguyen_dupuis")


class ConfigError(ValueError):
    pass


@dataclass
class ProblemConfig:
    network: Network
    penalty: PenaltyConfig
    capacity_models: list[CapacityModel]
    samples: int = 1000
    seed: int = 0
    experiments: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)


def _capacity_spec(arc: dict) -> dict:
    if "capacity" in arc:
        return arc["capacity"]
    if "mu" in arc:
        return {"kind": "normal", "mu": arc["mu"], "sigma": arc.get("sigma", 0.0)}
    raise ConfigError(f"arc {arc.get('id')} has no capacity specification")


def parse_config(doc: dict) -> ProblemConfig:
    doc = copy.deepcopy(doc)
    try:
        overrides = {str(k): v for k, v in doc.get("overrides", {}).items()}
        for arc in doc["arcs"]:
            arc.update(overrides.get(str(arc["id"]), {}))
        arcs = tuple(Arc(int(a["id"]), int(a["tail"]), int(a["head"]), float(a.get("t0", 1.0)),
                         float(a.get("b", 0.15)), float(a.get("n", 4.0))) for a in doc["arcs"])
        ods = tuple(ODPair(int(o["origin"]), int(o["destination"]), float(o["demand"]))
                    for o in doc["od_pairs"])
        net = Network(tuple(doc["nodes"]), arcs, ods, (), doc.get("name", ""))
        if doc.get("paths"):
            groups = doc["paths"]
            if len(groups) != len(ods):
                raise ConfigError(f"paths lists {len(groups)} OD groups, expected {len(ods)}")
            paths = [Path(tuple(p), k) for k, grp in enumerate(groups) for p in grp]
            net = net.with_paths(paths)
        else:
            net = enumerate_all_paths(net, int(doc.get("max_paths", 1000)))
        models = [model_from_dict(_capacity_spec(a)) for a in doc["arcs"]]
        pen = doc.get("penalty", {})
        penalty = PenaltyConfig(
            theta0=float(pen.get("theta0", 0.0)), theta1=float(pen.get("theta1", 1.0)),
            theta2=float(pen.get("theta2", 0.0)), tau=tuple(pen.get("tau", ())),
            t=float(pen.get("t", 0.01)), mode=pen.get("mode", "smooth"), d=pen.get("d"))
        sampling = doc.get("sampling", {})
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed config: {exc!r}") from exc
    return ProblemConfig(net, penalty, models, int(sampling.get("M", 1000)),
                         int(sampling.get("seed", 0)), doc.get("experiments", {}), doc)


def load_config(source: Union[str, FsPath]) -> ProblemConfig:
    """Load a config file, or a bundled one by name (``network1``, ``nguyen_dupuis``)."""
    name = str(source)
    if name in BUNDLED:
        text = resources.files("lapue.data").joinpath(f"{name}.json").read_text()
    else:
        p = FsPath(source)
        if not p.is_file():
            raise ConfigError(f"network file not found: {p}")
        text = p.read_text()
    try:
        doc: Any = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {name}: {exc}") from exc
    return parse_config(doc)
