"""Scenario configuration: JSON schema, validation and sweeps.

A config looks like::

    {
      "schema_version": 1,
      "model": {"omega": 1.0, "hbar": 1.0, "mass": 1.0, "n_modes": 400,
                "fock_cutoff": 32,
                "density": {"kind": "flat", "g": 0.05, "width": 2.0}},
      "outputs": ["poles", "evolve"],
      "seed": 0,
      "tolerances": {"pole": 1e-10},
      "scenario": {"ladder": 3},
      "sweep": [{"path": "model.density.g", "values": [0.04, 0.05]}]
    }

``validate_config`` never raises on bad input; it returns the list of
problems as (path, message) pairs.
"""

from __future__ import annotations

import copy
import itertools
import json
from dataclasses import dataclass, field
from typing import Any

SCHEMA_VERSION = 1

OUTPUTS = ("poles", "evolve", "timescales", "modes", "wigner", "trajectory", "classical")

# module defaults; a config may override any of them by name
DEFAULT_TOLERANCES = {
    "pole": 1e-10,            # |F(z)| at the accepted root
    "fit": 1e-3,              # relative RMS residual of mode fits
    "gap": 1e-8,              # eigenvalue gap below which the MPB is degenerate
    "equilibrium": 1e-3,      # relative derivative threshold for trajectories
    "domain_threshold": 0.5,  # level of the characteristic domains
    "overlap": 0.01,          # allowed pairwise domain overlap
}

DEFAULT_MODEL = {
    "omega": 1.0, "hbar": 1.0, "mass": 1.0, "n_modes": 400, "fock_cutoff": 32,
    "density": {"kind": "flat", "g": 0.05, "width": 2.0},
}

DEFAULT_SCENARIO = {
    "ladder": 3,
    "span": 3.0,                  # survival window in t_R
    "n_times": 601,
    "separations": [1.0, 2.0],
    "excited_population": 0.1,
    "mode_span": 5.0,             # qubit run length in t_R
    "mode_samples": 2001,
    "wigner_times": [0.0, 1.0, 3.0],   # in t_R
    "wigner_sites": 64,
    "trajectory_span": 1.0,       # in t_R
    "trajectory_samples": 201,
    "gauge": "energy",
    "classical_hbar": 1e-2,
    "classical_bands": 4,
    "classical_max_action": 0.16,
    "classical_sites": 256,
}

_POSITIVE = ("omega", "hbar", "mass")
_POSITIVE_INT = ("n_modes", "fock_cutoff")


@dataclass
class ScenarioConfig:
    model: dict
    outputs: list
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    scenario: dict = field(default_factory=dict)
    sweep: list = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    def tolerance(self, name: str) -> float:
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[name]))

    def option(self, name: str):
        return self.scenario.get(name, DEFAULT_SCENARIO[name])

    def to_dict(self) -> dict:
        out = {"schema_version": self.schema_version, "model": self.model,
               "outputs": list(self.outputs), "seed": self.seed}
        if self.tolerances:
            out["tolerances"] = self.tolerances
        if self.scenario:
            out["scenario"] = self.scenario
        if self.sweep:
            out["sweep"] = self.sweep
        return copy.deepcopy(out)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def expand(self) -> list[tuple[dict, "ScenarioConfig"]]:
        """One (assignments, config) per point of the sweep's cartesian product."""
        if not self.sweep:
            return [({}, self)]
        paths = [s["path"] for s in self.sweep]
        out = []
        for combo in itertools.product(*(s["values"] for s in self.sweep)):
            data = self.to_dict()
            data.pop("sweep", None)
            data["model"] = _merged_model(data["model"])
            for path, value in zip(paths, combo):
                _assign(data, path, value)
            out.append((dict(zip(paths, combo)), _build(data)))
        return out


def _lookup(data: dict, path: str) -> tuple[bool, Any]:
    node: Any = data
    for key in path.split("."):
        if not isinstance(node, dict) or key not in node:
            return False, None
        node = node[key]
    return True, node


def _assign(data: dict, path: str, value) -> None:
    keys = path.split(".")
    node = data
    for key in keys[:-1]:
        node = node[key]
    node[keys[-1]] = value


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_model(model, errors: list) -> None:
    if not isinstance(model, dict):
        errors.append(("model", "must be an object"))
        return
    for key in model:
        if key not in DEFAULT_MODEL:
            errors.append((f"model.{key}", "unknown field"))
    for key in _POSITIVE:
        if key in model and (not _is_number(model[key]) or model[key] <= 0):
            errors.append((f"model.{key}", "must be a positive number"))
    for key in _POSITIVE_INT:
        if key in model and (not isinstance(model[key], int) or isinstance(model[key], bool)
                             or model[key] < 1):
            errors.append((f"model.{key}", "must be a positive integer"))
    dens = model.get("density", DEFAULT_MODEL["density"])
    if not isinstance(dens, dict):
        errors.append(("model.density", "must be an object"))
        return
    if dens.get("kind", "flat") not in ("flat", "parabolic"):
        errors.append(("model.density.kind", "must be 'flat' or 'parabolic'"))
    for key in dens:
        if key not in ("kind", "g", "width", "center"):
            errors.append((f"model.density.{key}", "unknown field"))
    if "g" in dens and (not _is_number(dens["g"]) or dens["g"] < 0):
        errors.append(("model.density.g", "must be a non-negative number"))
    if "width" in dens and (not _is_number(dens["width"]) or dens["width"] <= 0):
        errors.append(("model.density.width", "must be a positive number"))
    if "center" in dens and not _is_number(dens["center"]):
        errors.append(("model.density.center", "must be a number"))


def _merged_model(model: dict) -> dict:
    out = copy.deepcopy(DEFAULT_MODEL)
    for k, v in model.items():
        if k == "density":
            out["density"].update(v)
        else:
            out[k] = v
    return out


def _build(data: dict) -> ScenarioConfig:
    return ScenarioConfig(model=data["model"], outputs=list(data["outputs"]),
                          seed=data.get("seed", 0), tolerances=data.get("tolerances", {}),
                          scenario=data.get("scenario", {}), sweep=data.get("sweep", []),
                          schema_version=data.get("schema_version", SCHEMA_VERSION))


def validate_config(text: str) -> ScenarioConfig | list[tuple[str, str]]:
    """Parse ``text``; return a config or the complete list of problems."""
    errors: list[tuple[str, str]] = []
    if not text or not text.strip():
        return [("model", "model missing"), ("outputs", "outputs missing")]
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        return [("", f"invalid JSON: {exc.msg} at line {exc.lineno}")]
    if not isinstance(data, dict):
        return [("", "top level must be an object")]

    for key in data:
        if key not in ("schema_version", "model", "outputs", "seed", "tolerances",
                       "scenario", "sweep"):
            errors.append((key, "unknown field"))
    version = data.get("schema_version")
    if version is None:
        errors.append(("schema_version", "schema_version missing"))
    elif version != SCHEMA_VERSION:
        errors.append(("schema_version", f"unsupported version {version!r}"))
    if "model" not in data:
        errors.append(("model", "model missing"))
    else:
        _check_model(data["model"], errors)

    outputs = data.get("outputs")
    if outputs is None:
        errors.append(("outputs", "outputs missing"))
    elif not isinstance(outputs, list) or not outputs:
        errors.append(("outputs", "must be a non-empty list"))
    else:
        for i, name in enumerate(outputs):
            if name not in OUTPUTS:
                errors.append((f"outputs[{i}]", f"unknown output {name!r}"))

    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        errors.append(("seed", "must be a non-negative integer"))

    tol = data.get("tolerances", {})
    if not isinstance(tol, dict):
        errors.append(("tolerances", "must be an object"))
    else:
        for k, v in tol.items():
            if k not in DEFAULT_TOLERANCES:
                errors.append((f"tolerances.{k}", "unknown tolerance"))
            elif not _is_number(v) or v <= 0:
                errors.append((f"tolerances.{k}", "must be a positive number"))

    scen = data.get("scenario", {})
    if not isinstance(scen, dict):
        errors.append(("scenario", "must be an object"))
    else:
        for k in scen:
            if k not in DEFAULT_SCENARIO:
                errors.append((f"scenario.{k}", "unknown option"))
        if scen.get("gauge", "energy") not in ("energy", "transport"):
            errors.append(("scenario.gauge", "must be 'energy' or 'transport'"))

    sweep = data.get("sweep", [])
    if not isinstance(sweep, list):
        errors.append(("sweep", "must be a list"))
    else:
        for i, item in enumerate(sweep):
            where = f"sweep[{i}]"
            if not isinstance(item, dict) or "path" not in item or "values" not in item:
                errors.append((where, "needs 'path' and 'values'"))
                continue
            if not isinstance(item["values"], list) or not item["values"]:
                errors.append((f"{where}.values", "must be a non-empty list"))
            probe = copy.deepcopy(data)
            if isinstance(probe.get("model"), dict):
                probe["model"] = _merged_model(probe["model"])
            found, _ = _lookup(probe, str(item["path"]))
            if not found:
                errors.append((f"{where}.path", f"no parameter at {item['path']!r}"))
            elif isinstance(item["values"], list) and str(item["path"]).startswith("model"):
                for v in item["values"]:
                    trial = copy.deepcopy(probe)
                    _assign(trial, item["path"], v)
                    sub: list = []
                    _check_model(trial["model"], sub)
                    errors.extend((f"{where}.values", f"{p}: {m}") for p, m in sub)

    if errors:
        return errors
    data = copy.deepcopy(data)
    return _build(data)


def load_config(path) -> ScenarioConfig | list[tuple[str, str]]:
    with open(path, encoding="utf-8") as fh:
        return validate_config(fh.read())
