"""Robot parameter documents, actuation inputs and the experiment label scheme."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .geometry import CrossSection, GeometryError, InnerRobotSpec, OuterTubeSpec, inner_section, outer_section
from .tendons import INNER, OUTER, TendonRoute

SCHEMA = "tacter-params/1"


class ConfigError(ValueError):
    """A parameter document is malformed; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


_UNITS = {
    "length": {"mm": 1.0, "um": 1e-3, "µm": 1e-3, "cm": 10.0, "m": 1000.0},
    "pressure": {"MPa": 1.0, "GPa": 1000.0, "kPa": 1e-3, "Pa": 1e-6},
    "force": {"N": 1.0, "mN": 1e-3},
}
_CANONICAL = {"length": "mm", "pressure": "MPa", "force": "N"}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-zµ]+)\s*$")


def parse_quantity(text: Any, kind: str, path: str) -> float:
    """``"84 GPa"`` -> ``84000.0`` (canonical units for ``kind``)."""
    if isinstance(text, bool) or not isinstance(text, str):
        raise ConfigError(path, f"expected a {kind} with a unit suffix, got {text!r}")
    match = _QUANTITY.match(text)
    if match is None:
        raise ConfigError(path, f"cannot parse {text!r} as a {kind}")
    value, unit = match.groups()
    scale = _UNITS[kind].get(unit)
    if scale is None:
        raise ConfigError(path, f"unit {unit!r} is not a {kind} unit ({', '.join(_UNITS[kind])})")
    return float(value) * scale


def format_quantity(value: float, kind: str) -> str:
    return f"{float(value)!r} {_CANONICAL[kind]}"


_OUTER_KEYS = {
    "notch_depth": "length", "notch_spacing": "length", "notch_width": "length",
    "outer_radius": "length", "inner_radius": "length", "tendon_radius": "length",
    "elastic_modulus": "pressure", "shear_modulus": "pressure",
}
_INNER_KEYS = {
    "rod_radius": "length", "outer_radius": "length", "inner_radius": "length",
    "tendon_radius": "length", "tendon_arm": "length",
    "elastic_modulus": "pressure", "shear_modulus": "pressure",
}
_LENGTH_KEYS = {"outer_length": "length", "translation_range": "length", "distal_length": "length"}
_ACTUATION_KEYS = {"outer_bent_tension": "force"}

# Translations reported for the half/full positions, by outer-tube state.
TRANSLATIONS = {
    "OS": {"IN": 0.0, "IH": 15.90, "IF": 30.22},
    "OB": {"IN": 0.0, "IH": 15.28, "IF": 30.36},
}


@dataclass(frozen=True)
class RobotParams:
    outer: OuterTubeSpec
    inner: InnerRobotSpec
    outer_length: float
    translation_range: float
    distal_length: float
    outer_bent_tension: float
    outer_tendon_arm: float | None = None
    left_side: int = 1
    name: str = "unnamed"

    def __post_init__(self):
        if not self.outer_length > 0:
            raise ConfigError("lengths.outer_length", "must be positive")
        if self.translation_range < 0:
            raise ConfigError("lengths.translation_range", "must be non-negative")
        if not self.distal_length > 0:
            raise ConfigError("lengths.distal_length", "must be positive")
        if self.outer_bent_tension < 0:
            raise ConfigError("actuation.outer_bent_tension", "must be non-negative")
        if self.left_side not in (1, -1):
            raise ConfigError("actuation.left_tendon_side", "must be +d2 or -d2")

    @property
    def l1(self) -> float:
        return self.outer_length

    @property
    def l2_max(self) -> float:
        return self.outer_length + self.translation_range + self.distal_length

    def l2(self, translation: float) -> float:
        return self.outer_length + translation + self.distal_length

    def outer_section(self) -> CrossSection:
        return outer_section(self.outer, self.outer_tendon_arm)

    def inner_section(self) -> CrossSection:
        return inner_section(self.inner)

    def routes(self, actuation: "ActuationInput") -> list[TendonRoute]:
        """Tendon layout: outer tendon on -d2, inner "left" on ``left_side * d2``."""
        l2 = self.l2(actuation.inner_translation)
        arm1 = self.outer_section().tendon_arm
        arm2 = self.inner.tendon_arm
        out = []
        if actuation.include_outer:
            out.append(TendonRoute((0.0, -arm1), actuation.outer_tension, OUTER, self.l1))
        out.append(TendonRoute((0.0, self.left_side * arm2), actuation.inner_left_tension, INNER, l2))
        out.append(TendonRoute((0.0, -self.left_side * arm2), actuation.inner_right_tension, INNER, l2))
        return out


@dataclass(frozen=True)
class ActuationInput:
    outer_tension: float = 0.0
    inner_left_tension: float = 0.0
    inner_right_tension: float = 0.0
    inner_translation: float = 0.0
    theta0: float = 0.0
    base_rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    base_position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    include_outer: bool = True

    def __post_init__(self):
        for name in ("outer_tension", "inner_left_tension", "inner_right_tension"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be a finite non-negative tension, got {value!r}")
        if not (math.isfinite(self.inner_translation) and self.inner_translation >= 0):
            raise ValueError("inner_translation must be non-negative")
        R = np.asarray(self.base_rotation, dtype=float)
        if R.shape != (3, 3) or not np.allclose(R.T @ R, np.eye(3), atol=1e-9) or np.linalg.det(R) < 0:
            raise ValueError("base_rotation must be a proper rotation matrix")
        object.__setattr__(self, "base_rotation", R)
        object.__setattr__(self, "base_position", np.asarray(self.base_position, dtype=float).reshape(3))

    def as_dict(self) -> dict:
        return {
            "outer_tension": self.outer_tension,
            "inner_left_tension": self.inner_left_tension,
            "inner_right_tension": self.inner_right_tension,
            "inner_translation": self.inner_translation,
            "theta0": self.theta0,
            "include_outer": self.include_outer,
            "base_rotation": self.base_rotation.tolist(),
            "base_position": self.base_position.tolist(),
        }


@dataclass(frozen=True)
class ConfigurationLabel:
    """``OS-IH-L`` style label; ``outer_state=None`` is the inner robot alone."""

    outer_state: str | None
    translation_state: str | None
    side: str

    def __post_init__(self):
        if self.side not in ("L", "R"):
            raise ValueError(f"side must be L or R, got {self.side!r}")
        if self.outer_state is None:
            if self.translation_state is not None:
                raise ValueError("inner-only labels carry no translation state")
            return
        if self.outer_state not in ("OS", "OB"):
            raise ValueError(f"outer state must be OS or OB, got {self.outer_state!r}")
        if self.translation_state not in ("IN", "IH", "IF"):
            raise ValueError(f"translation state must be IN, IH or IF, got {self.translation_state!r}")

    @property
    def inner_only(self) -> bool:
        return self.outer_state is None

    def __str__(self) -> str:
        if self.inner_only:
            return f"INNER-{self.side}"
        return f"{self.outer_state}-{self.translation_state}-{self.side}"

    @classmethod
    def parse(cls, text: str) -> "ConfigurationLabel":
        parts = text.strip().upper().split("-")
        if len(parts) == 2 and parts[0] == "INNER":
            return cls(None, None, parts[1])
        if len(parts) != 3:
            raise ValueError(f"cannot parse configuration label {text!r}")
        return cls(*parts)


def protocol_labels() -> list[ConfigurationLabel]:
    """The thirteen tested configurations, in a fixed order."""
    labels = [ConfigurationLabel(o, t, s) for o in ("OS", "OB") for t in ("IN", "IH", "IF") for s in ("L", "R")]
    labels.append(ConfigurationLabel(None, None, "L"))
    return labels


def configuration_to_input(label: ConfigurationLabel, params: RobotParams, tension: float) -> ActuationInput:
    """Actuation for one pose of a labelled experiment: ``tension`` goes to the named inner tendon."""
    left = tension if label.side == "L" else 0.0
    right = tension if label.side == "R" else 0.0
    if label.inner_only:
        return ActuationInput(0.0, left, right, params.translation_range, include_outer=False)
    translation = TRANSLATIONS[label.outer_state][label.translation_state]
    outer = params.outer_bent_tension if label.outer_state == "OB" else 0.0
    return ActuationInput(outer, left, right, translation)


def tension_from_sensor(force: float, gamma: float) -> float:
    """Tendon tension from the pushing-unit force and the pulley routing angle (rad)."""
    s = math.sin(2.0 * gamma)
    if abs(s) < 1e-15:
        raise ValueError(f"routing angle {gamma!r} rad gives no force transmission")
    return force / (2.0 * s)


def _section(doc: Any, path: str) -> dict:
    if not isinstance(doc, dict):
        raise ConfigError(path, "expected a mapping")
    return doc


def _read_fields(doc: dict, keys: dict, path: str, optional=()) -> dict:
    unknown = set(doc) - set(keys) - set(optional)
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown key")
    out = {}
    for key, kind in keys.items():
        if key not in doc:
            raise ConfigError(f"{path}.{key}", "missing required field")
        out[key] = parse_quantity(doc[key], kind, f"{path}.{key}")
    return out


def params_from_dict(doc: Any) -> RobotParams:
    doc = _section(doc, "<root>")
    allowed = {"schema", "name", "outer", "inner", "lengths", "actuation"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    if doc.get("schema") != SCHEMA:
        raise ConfigError("schema", f"expected {SCHEMA!r}, got {doc.get('schema')!r}")
    for key in ("outer", "inner", "lengths", "actuation"):
        if key not in doc:
            raise ConfigError(key, "missing required section")

    outer_doc = _section(doc["outer"], "outer")
    outer_vals = _read_fields(outer_doc, _OUTER_KEYS, "outer", optional=("tendon_arm",))
    arm = outer_doc.get("tendon_arm")
    arm = None if arm is None else parse_quantity(arm, "length", "outer.tendon_arm")
    inner_vals = _read_fields(_section(doc["inner"], "inner"), _INNER_KEYS, "inner")
    lengths = _read_fields(_section(doc["lengths"], "lengths"), _LENGTH_KEYS, "lengths")
    act_doc = _section(doc["actuation"], "actuation")
    act = _read_fields(act_doc, _ACTUATION_KEYS, "actuation", optional=("left_tendon_side",))
    side = act_doc.get("left_tendon_side", "+d2")
    if side not in ("+d2", "-d2"):
        raise ConfigError("actuation.left_tendon_side", f"expected '+d2' or '-d2', got {side!r}")

    try:
        outer = OuterTubeSpec(**outer_vals)
    except GeometryError as exc:
        raise ConfigError("outer", str(exc)) from None
    try:
        inner = InnerRobotSpec(**inner_vals)
    except GeometryError as exc:
        raise ConfigError("inner", str(exc)) from None
    params = RobotParams(
        outer=outer, inner=inner, outer_tendon_arm=arm,
        left_side=1 if side == "+d2" else -1,
        name=str(doc.get("name", "unnamed")),
        **lengths, **act,
    )
    try:
        params.outer_section()
        params.inner_section()
    except GeometryError as exc:
        raise ConfigError("outer", str(exc)) from None
    return params


def load_params(path: str | Path) -> RobotParams:
    """Load a parameter document from disk."""
    return loads_params(Path(path).read_text())


def loads_params(text: str) -> RobotParams:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<document>", f"YAML parse error: {exc}") from None
    return params_from_dict(doc)


def params_to_dict(params: RobotParams) -> dict:
    outer = {k: format_quantity(getattr(params.outer, k), kind) for k, kind in _OUTER_KEYS.items()}
    if params.outer_tendon_arm is not None:
        outer["tendon_arm"] = format_quantity(params.outer_tendon_arm, "length")
    return {
        "schema": SCHEMA,
        "name": params.name,
        "outer": outer,
        "inner": {k: format_quantity(getattr(params.inner, k), kind) for k, kind in _INNER_KEYS.items()},
        "lengths": {k: format_quantity(getattr(params, k), kind) for k, kind in _LENGTH_KEYS.items()},
        "actuation": {
            "outer_bent_tension": format_quantity(params.outer_bent_tension, "force"),
            "left_tendon_side": "+d2" if params.left_side == 1 else "-d2",
        },
    }


def dump_params(params: RobotParams) -> str:
    return yaml.safe_dump(params_to_dict(params), sort_keys=False)


def bundled_params(name: str = "tacter_table1") -> RobotParams:
    text = resources.files("tacter").joinpath("data", f"{name}.yaml").read_text()
    return loads_params(text)
