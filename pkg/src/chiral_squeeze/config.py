"""YAML run configuration with line-numbered schema diagnostics.

Frequencies are given in MHz (ordinary frequency, not angular) and converted
once here; the rest of the package works in rad/s or units of gamma_tot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .physics import Drive, EmitterEnsemble, FrequencyGrid

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "SCHEMA"]

MHZ = 1e6


class ConfigError(ValueError):
    pass


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _unit(v):
    return 0 <= v <= 1


# key -> (types, default, check, description of check); REQUIRED default marks mandatory keys
REQUIRED = object()
NUM = (int, float)
SCHEMA: dict[str, dict[str, tuple]] = {
    "ensemble": {
        "beta": (NUM, REQUIRED, _unit, "in [0, 1]"),
        "n_atoms": ((int,), REQUIRED, _nonneg, ">= 0"),
        "gamma_tot_mhz": (NUM, 5.2, _positive, "> 0"),
        "delta_mhz": (NUM, 0.0, math.isfinite, "finite"),
    },
    "drive": {
        "s": (NUM, REQUIRED, _nonneg, ">= 0"),
        "theta": (NUM, 0.0, math.isfinite, "finite"),
    },
    "synth": {
        "eta": (NUM, 0.22, _unit, "in [0, 1]"),
        "electronic_noise": (NUM, 0.0, _nonneg, ">= 0"),
        "f_het_mhz": (NUM, 1.0, _positive, "> 0"),
        "n_repetitions": ((int,), 1, _positive, "> 0"),
        "duration_us": (NUM, 41.0, _positive, "> 0"),
        "sample_rate_mhz": (NUM, 100.0, _positive, "> 0"),
        "beat_amplitude": (NUM, 50.0, _positive, "> 0"),
        "theta_schedule": ((str,), "uniform", lambda v: v in ("uniform", "fixed"), "'uniform' or 'fixed'"),
    },
    "analysis": {
        "f_min_mhz": (NUM, 1.5, _nonneg, ">= 0"),
        "f_max_mhz": (NUM, 23.0, _positive, "> 0"),
        "n_theta_bins": ((int,), 36, lambda v: v >= 6, ">= 6"),
        "theta_half_width_deg": (NUM, 18.0, _positive, "> 0"),
        "tau_max": (NUM, 10.0, _positive, "> 0"),
        "window": ((str, type(None)), None, lambda v: v in (None, "rectangular", "hann", "hamming"), "rectangular, hann or hamming"),
    },
    "grid": {
        "max_gamma": (NUM, 20.0, _positive, "> 0"),
        "n_points": ((int,), 4096, lambda v: v >= 3, ">= 3"),
    },
    "oracle": {
        "window_gamma": (NUM, 5.0, _positive, "> 0"),
        "threshold": (NUM, 0.01, _positive, "> 0"),
        "leading_order": ((bool,), False, lambda v: True, ""),
        "method": ((str,), "trapezoid", lambda v: v in ("trapezoid", "resolvent"), "'trapezoid' or 'resolvent'"),
    },
    "fit_beta": {
        "transmission_csv": ((str, type(None)), None, lambda v: True, ""),
        "wavelength_nm": (NUM, 852.35, _positive, "> 0"),
    },
    "output": {
        "dir": ((str,), "out", lambda v: True, ""),
        "traces": ((str,), "traces.hmdt", lambda v: True, ""),
    },
}
TOP_LEVEL_SCALARS = {"seed": ((int,), 0, lambda v: 0 <= v < 2**64, "an unsigned 64-bit integer")}


@dataclass
class RunConfig:
    seed: int
    sections: dict[str, dict[str, Any]] = field(default_factory=dict)
    source: str = "<config>"

    def get(self, section: str, key: str):
        return self.sections[section][key]

    @property
    def gamma_tot(self) -> float:
        """Total decay rate in rad/s."""
        return 2.0 * math.pi * self.get("ensemble", "gamma_tot_mhz") * MHZ

    def ensemble(self, natural_units: bool = False) -> EmitterEnsemble:
        e = self.sections["ensemble"]
        if natural_units:
            return EmitterEnsemble(e["beta"], 1.0, e["delta_mhz"] / e["gamma_tot_mhz"], e["n_atoms"])
        return EmitterEnsemble(e["beta"], self.gamma_tot, 2.0 * math.pi * e["delta_mhz"] * MHZ, e["n_atoms"])

    def drive(self) -> Drive:
        d = self.sections["drive"]
        return Drive(d["s"], d["theta"])

    def grid(self) -> FrequencyGrid:
        g = self.sections["grid"]
        return FrequencyGrid.symmetric(g["max_gamma"], g["n_points"])

    def override(self, section: str, key: str, value) -> None:
        types, _, check, desc = SCHEMA[section][key]
        if not isinstance(value, types) or isinstance(value, bool) and bool not in types or not check(value):
            raise ConfigError(f"{self.source}: {section}.{key}: must be {desc}")
        self.sections[section][key] = value


def _err(source: str, node, key: str, msg: str) -> ConfigError:
    line = node.start_mark.line + 1 if node is not None else 0
    return ConfigError(f"{source}:{line}: {key}: {msg}")


def _scalar(node, source, key):
    if not isinstance(node, yaml.ScalarNode):
        raise _err(source, node, key, "expected a scalar value")
    return yaml.safe_load(yaml.serialize(node))


def _check_value(value, spec, node, source, key):
    types, _, check, desc = spec
    if isinstance(value, bool) and bool not in types:
        raise _err(source, node, key, f"expected a number, got {value!r}")
    if int in types and float not in types and isinstance(value, float):
        raise _err(source, node, key, f"expected an integer, got {value!r}")
    if not isinstance(value, types):
        raise _err(source, node, key, f"wrong type {type(value).__name__}")
    if float in types and isinstance(value, int):
        value = float(value)
    if not check(value):
        raise _err(source, node, key, f"must be {desc}, got {value!r}")
    return value


def parse_config(text: str, source: str = "<config>", require: bool = True) -> RunConfig:
    """Validate ``text``; with ``require=False`` absent mandatory keys are left as ``None``."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: invalid YAML: {exc}") from exc
    sections = {name: {k: spec[1] for k, spec in keys.items()} for name, keys in SCHEMA.items()}
    seed = TOP_LEVEL_SCALARS["seed"][1]
    seen_required: set[str] = set()
    if root is not None:
        if not isinstance(root, yaml.MappingNode):
            raise _err(source, root, "<root>", "expected a mapping")
        seen_top = set()
        for key_node, val_node in root.value:
            name = key_node.value
            if name in seen_top:
                raise _err(source, key_node, name, "duplicate key")
            seen_top.add(name)
            if name in TOP_LEVEL_SCALARS:
                seed = _check_value(_scalar(val_node, source, name), TOP_LEVEL_SCALARS[name], val_node, source, name)
                continue
            if name not in SCHEMA:
                raise _err(source, key_node, name, f"unknown key (expected one of {sorted([*SCHEMA, *TOP_LEVEL_SCALARS])})")
            if not isinstance(val_node, yaml.MappingNode):
                raise _err(source, val_node, name, "expected a mapping")
            seen = set()
            for k_node, v_node in val_node.value:
                k = k_node.value
                dotted = f"{name}.{k}"
                if k in seen:
                    raise _err(source, k_node, dotted, "duplicate key")
                seen.add(k)
                if k not in SCHEMA[name]:
                    raise _err(source, k_node, dotted, f"unknown key (expected one of {sorted(SCHEMA[name])})")
                spec = SCHEMA[name][k]
                sections[name][k] = _check_value(_scalar(v_node, source, dotted), spec, v_node, source, dotted)
                seen_required.add(dotted)
    missing = [
        f"{name}.{k}" for name, keys in SCHEMA.items() for k, spec in keys.items()
        if spec[1] is REQUIRED and f"{name}.{k}" not in seen_required
    ]
    if missing and require:
        raise ConfigError(f"{source}: missing required keys: {', '.join(missing)}")
    for dotted in missing:
        name, k = dotted.split(".")
        sections[name][k] = None
    a = sections["analysis"]
    if not a["f_min_mhz"] < a["f_max_mhz"]:
        raise ConfigError(f"{source}: analysis.f_min_mhz must be below analysis.f_max_mhz")
    return RunConfig(int(seed), sections, source)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    return parse_config(text, str(path))
