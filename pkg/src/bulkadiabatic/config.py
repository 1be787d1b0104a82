"""Scenario configuration: strict JSON parsing, defaults, hashing and seeding.

A scenario is one JSON document. Unknown keys, missing required fields and
values of the wrong type are reported with their dotted field path.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .interactions import LipschitzPotential
from .lattice import Lattice
from .models import Ramp, Schedule, TimeDependentInteraction, bond_term_piece, chain_model, hopping_piece


class ConfigError(ValueError):
    """Invalid scenario; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


REQUIRED = object()

SCHEMA = {
    "name": "scenario",
    "seed": 0,
    "lattice": {
        "sites": REQUIRED,
        "geometry": "open",
        "spin": 1,
        "particle_number": None,
    },
    "model": {
        "kind": REQUIRED,
        "hopping": 1.0,
        "long_range_hopping": {},
        "staggered": 0.0,
        "intra": None,
        "inter": None,
        "edge_field": 0.0,
        "density": 0.0,
        "chemical_potential": 0.0,
    },
    "ramp": {
        "kind": "constant",
        "start": 0.0,
        "end": 1.0,
        "deltas": {},
    },
    "perturbation": {
        "field": 0.0,
        "axis": 0,
        "switched": True,
        "local_terms": [],
        "clamp_radius": None,
    },
    "weight": {
        "g": "auto",
        "gap_fraction": 0.5,
        "n_terms": 15,
        "s_max": None,
        "grid_points": 65536,
    },
    "dynamics": {
        "epsilon": 0.1,
        "eta": 0.1,
        "steps": None,
        "tol": 1e-9,
    },
    "experiment": {},
    "thresholds": {},
}

MODEL_KINDS = ("hopping", "staggered", "ssh")
REAL_MODEL_FIELDS = ("staggered", "edge_field", "density", "chemical_potential", "intra", "inter")


def _merge(schema, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(path or "<root>", "expected an object")
    out = {}
    for key in data:
        if key not in schema:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown key")
    for key, default in schema.items():
        where = f"{path}.{key}" if path else key
        if key in data:
            val = data[key]
            if isinstance(default, dict) and default and key not in ("experiment", "thresholds"):
                val = _merge(default, val, where)
            out[key] = copy.deepcopy(val)
        elif default is REQUIRED:
            raise ConfigError(where, "missing required field")
        else:
            out[key] = copy.deepcopy(default)
    return out


def _real(value, where: str, allow_none: bool = False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool):
        raise ConfigError(where, "expected a number")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
        if value[1] != 0:
            raise ConfigError(where, "imaginary part makes the Hamiltonian non-Hermitian")
        return float(value[0])
    raise ConfigError(where, "expected a real number")


def _amplitude(value, where: str) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
        return complex(value[0], value[1])
    raise ConfigError(where, "expected a number or a [re, im] pair")


@dataclass
class Scenario:
    data: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        data = _merge(SCHEMA, raw, "")
        sc = cls(data)
        sc._validate()
        return sc

    @classmethod
    def load(cls, path) -> "Scenario":
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError("config", f"file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON ({exc})")
        return cls.from_dict(raw)

    # ---------------------------------------------------------------- validation

    def _validate(self) -> None:
        d = self.data
        if not isinstance(d["seed"], int) or isinstance(d["seed"], bool) or not 0 <= d["seed"] < 2 ** 64:
            raise ConfigError("seed", "expected an integer in [0, 2^64)")
        lat = d["lattice"]
        if not isinstance(lat["sites"], int) or lat["sites"] < 1:
            raise ConfigError("lattice.sites", "expected a positive integer")
        if lat["geometry"] not in ("open", "torus"):
            raise ConfigError("lattice.geometry", "expected 'open' or 'torus'")
        if lat["spin"] not in (1, 2):
            raise ConfigError("lattice.spin", "expected 1 or 2")
        m = d["model"]
        if m["kind"] not in MODEL_KINDS:
            raise ConfigError("model.kind", f"expected one of {list(MODEL_KINDS)}")
        for key in REAL_MODEL_FIELDS:
            m[key] = _real(m[key], f"model.{key}", allow_none=key in ("intra", "inter"))
        _amplitude(m["hopping"], "model.hopping")
        if not isinstance(m["long_range_hopping"], dict):
            raise ConfigError("model.long_range_hopping", "expected an object distance -> amplitude")
        for k, v in m["long_range_hopping"].items():
            if not k.isdigit() or int(k) < 2:
                raise ConfigError(f"model.long_range_hopping.{k}", "distance must be an integer >= 2")
            _amplitude(v, f"model.long_range_hopping.{k}")
        if m["kind"] == "ssh" and (m["intra"] is None or m["inter"] is None):
            raise ConfigError("model.intra", "ssh models need intra and inter amplitudes")
        r = d["ramp"]
        if r["kind"] not in ("constant", "switch", "linear"):
            raise ConfigError("ramp.kind", "expected 'constant', 'switch' or 'linear'")
        try:
            Ramp(r["kind"], float(r["start"]), float(r["end"]))
        except ValueError as exc:
            raise ConfigError("ramp.end", str(exc))
        for k, v in r["deltas"].items():
            r["deltas"][k] = _real(v, f"ramp.deltas.{k}")
        p = d["perturbation"]
        p["field"] = _real(p["field"], "perturbation.field")
        for i, t in enumerate(p["local_terms"]):
            if not isinstance(t, dict) or set(t) - {"sites", "strength"} or "sites" not in t:
                raise ConfigError(f"perturbation.local_terms[{i}]", "expected {sites, strength}")
            if len(t["sites"]) == 1:
                _real(t.get("strength", 1.0), f"perturbation.local_terms[{i}].strength")
        w = d["weight"]
        if w["g"] != "auto":
            g = _real(w["g"], "weight.g")
            if g <= 0:
                raise ConfigError("weight.g", "must be positive")
        dyn = d["dynamics"]
        for key in ("epsilon", "eta"):
            dyn[key] = _real(dyn[key], f"dynamics.{key}")
        if not 0 <= dyn["epsilon"] <= 1:
            raise ConfigError("dynamics.epsilon", "must lie in [0, 1]")
        if not 0 < dyn["eta"] <= 1:
            raise ConfigError("dynamics.eta", "must lie in (0, 1]")
        try:
            self.model()
        except ValueError as exc:
            raise ConfigError("ramp.deltas", str(exc))

    # ---------------------------------------------------------------- serialization

    def canonical(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True)

    def with_seed(self, seed: int) -> "Scenario":
        data = copy.deepcopy(self.data)
        data["seed"] = seed
        return Scenario.from_dict(data)

    # ---------------------------------------------------------------- builders

    def lattice(self, sites: int | None = None) -> Lattice:
        lat = self.data["lattice"]
        return Lattice.chain(sites or lat["sites"], lat["geometry"], lat["spin"])

    @property
    def ramp(self) -> Ramp:
        r = self.data["ramp"]
        return Ramp(r["kind"], float(r["start"]), float(r["end"]))

    def model(self) -> TimeDependentInteraction:
        m = self.data["model"]
        kw = dict(hopping=_amplitude(m["hopping"], "model.hopping"), staggered=m["staggered"],
                  edge_field=m["edge_field"], density=m["density"],
                  chemical_potential=m["chemical_potential"], ramp=self.ramp,
                  deltas=dict(self.data["ramp"]["deltas"]))
        if m["kind"] == "ssh":
            kw.update(intra=m["intra"], inter=m["inter"])
        H = chain_model(**kw)
        for k, v in sorted(m["long_range_hopping"].items()):
            H.add(Schedule(1.0), hopping_piece(int(k), _amplitude(v, k)), f"hopping_{k}")
        return H

    def potential(self) -> LipschitzPotential | None:
        p = self.data["perturbation"]
        return LipschitzPotential.linear_field(p["field"], p["axis"]) if p["field"] else None

    def local_perturbation(self) -> TimeDependentInteraction | None:
        p = self.data["perturbation"]
        if not p["local_terms"]:
            return None
        sched = Schedule(0.0, 1.0, self.ramp) if p["switched"] and self.ramp.kind != "constant" else Schedule()
        return TimeDependentInteraction().add(sched, bond_term_piece(p["local_terms"]), "local_terms")

    def family(self, epsilon: float | None = None, eta: float | None = None):
        from .dynamics import HamiltonianFamily
        p, dyn = self.data["perturbation"], self.data["dynamics"]
        sched = Schedule(0.0, 1.0, self.ramp) if p["switched"] and self.ramp.kind != "constant" else Schedule()
        return HamiltonianFamily(self.model(), self.local_perturbation(), self.potential(), sched,
                                 dyn["epsilon"] if epsilon is None else epsilon,
                                 dyn["eta"] if eta is None else eta, p["clamp_radius"])

    def space(self, sites: int | None = None):
        from .fock import FockSpace
        return FockSpace(self.lattice(sites), particle_number=self.data["lattice"]["particle_number"])

    def experiment(self, defaults: dict) -> dict:
        return _options(self.data["experiment"], defaults, "experiment")

    def thresholds(self, defaults: dict) -> dict:
        return _options(self.data["thresholds"], defaults, "thresholds")


def _options(given: dict, defaults: dict, where: str) -> dict:
    for k in given:
        if k not in defaults:
            raise ConfigError(f"{where}.{k}", "unknown key")
    out = copy.deepcopy(defaults)
    out.update(copy.deepcopy(given))
    return out


def point_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for sweep point ``index``; independent of evaluation order."""
    return np.random.Generator(np.random.Philox(key=np.array([seed, index], dtype=np.uint64)))
