"""JSON scene files: schema, validation and construction of sampled fields."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from . import quat as Q
from .calculus import GridDomain, QField, discretize
from .expr import ExprError

QUATERNION = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4},
    ]
}
EXPR = {"type": "string", "minLength": 1}
SIDE = {"enum": ["left", "right"]}
CHECKS = ["conformal", "factorization", "area_identity_eta", "superconformal", "lift", "integrability", "gauge", "motion"]

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["domain"],
    "properties": {
        "name": {"type": "string"},
        "domain": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type", "radius", "n"],
            "properties": {
                "type": {"const": "disk"},
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "n": {"type": "integer", "minimum": 5, "not": {"multipleOf": 2}},
            },
        },
        "map": {
            "type": "object",
            "additionalProperties": False,
            "required": ["expr"],
            "properties": {"expr": EXPR},
        },
        "factorization": {
            "type": "object",
            "additionalProperties": False,
            "required": ["a_expr", "b_expr", "eta_expr"],
            "properties": {
                "a_expr": EXPR,
                "b_expr": EXPR,
                "eta_expr": EXPR,
                "base_point": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "base_value": QUATERNION,
            },
        },
        "expect": EXPR,
        "checks": {"type": "array", "items": {"enum": CHECKS}, "uniqueItems": True},
        "transforms": {
            "type": "array",
            "items": {
                "oneOf": [
                    {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["kind", "partner"],
                        "properties": {"kind": {"const": "quotient"}, "side": SIDE, "partner": EXPR},
                    },
                    {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["kind", "partner"],
                        "properties": {
                            "kind": {"const": "darboux"},
                            "side": SIDE,
                            "partner": EXPR,
                            "constant": QUATERNION,
                            "r": {"type": "number", "exclusiveMinimum": 0},
                        },
                    },
                    {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["kind", "lambda", "mu"],
                        "properties": {
                            "kind": {"const": "spin"},
                            "lambda": EXPR,
                            "mu": EXPR,
                            "constant": QUATERNION,
                        },
                    },
                ]
            },
        },
        "bound": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "atilde_expr": EXPR,
                "zeta_expr": EXPR,
                "r": {
                    "type": "array",
                    "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                    "minItems": 1,
                },
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "stem": {"type": "string"},
                "formats": {
                    "type": "array",
                    "items": {"enum": ["json", "text", "csv", "png"]},
                    "uniqueItems": True,
                },
            },
        },
    },
    "oneOf": [{"required": ["map"]}, {"required": ["factorization"]}],
}


class SceneError(ValueError):
    """Malformed scene or unusable input; maps to exit code 2."""


def _path(err: jsonschema.ValidationError) -> str:
    parts = ["scene"] + [f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path]
    return "".join(parts).replace("scene.", "scene.", 1)


def validate(data: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            if e.validator == "oneOf" and not e.absolute_path:
                msg = "exactly one of 'map' or 'factorization' is required"
            elif e.validator == "not" and list(e.absolute_path)[-1:] == ["n"]:
                msg = f"{e.instance} is not odd (the origin must be a node)"
            else:
                msg = e.message
            lines.append(f"{_path(e)}: {msg}")
        raise SceneError("invalid scene:\n  " + "\n  ".join(lines))


def load(path: str | Path) -> dict:
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except FileNotFoundError as exc:
        raise SceneError(f"scene file not found: {p}") from exc
    except json.JSONDecodeError as exc:
        raise SceneError(f"scene is not valid JSON: {exc}") from exc
    validate(data)
    return data


def quaternion(value) -> np.ndarray:
    if isinstance(value, (int, float)):
        return Q.asq(float(value))
    return np.asarray(value, dtype=float)


@dataclass
class Scene:
    data: dict
    grid: int | None = None

    @property
    def name(self) -> str:
        return self.data.get("name", "scene")

    def domain(self) -> GridDomain:
        d = self.data["domain"]
        n = self.grid if self.grid is not None else d["n"]
        if n % 2 == 0 or n < 5:
            raise SceneError(f"grid size {n} must be odd and at least 5")
        return GridDomain(float(d["radius"]), int(n))

    def field(self, domain: GridDomain, text: str, what: str) -> QField:
        try:
            return discretize(domain, text)
        except ExprError as exc:
            raise SceneError(f"{what}: {exc}") from exc

    def complex_field(self, domain: GridDomain, text: str, what: str) -> np.ndarray:
        f = self.field(domain, text, what)
        jk = np.max(np.abs(f.values[..., 2:])[domain.mask])
        if jk > 1e-12:
            raise SceneError(f"{what} must be complex valued (j, k parts up to {jk:.3e})")
        return Q.to_complex(f.values)

    @property
    def has_map(self) -> bool:
        return "map" in self.data

    def output(self) -> dict:
        out = dict(self.data.get("output", {}))
        out.setdefault("formats", ["json", "text", "csv", "png"])
        out.setdefault("stem", self.name)
        return out
