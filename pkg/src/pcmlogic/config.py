"""Presets and JSON configuration files.

A configuration file is JSON with four optional sections, all in SI units
(volts, ohms, seconds, farads)::

    {
      "preset": "experimental-setup",      # base preset to override (optional)
      "device": {"v_th": 1.0, "r_lrs": 5000.0, ...},
      "variability": {"sigma_v_th": 0.05, "sigma_r_lrs": 0.2, ...},
      "circuit": {"c_p": 2e-11, "r_fix": 10000.0, "v_app": 1.2,
                  "nimp_in2": 0.35, "dt": 2.5e-08, "event_tol": 1e-10},
      "timing": {"edge": 1e-07, "settle": 3e-06, "hold": 1e-06,
                 "ramp_rise": 7e-05, "ramp_fall": 1e-06}
    }

Keys left out keep the base preset's values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .device import DeviceParams, VariabilitySpec
from .errors import ConfigError
from .gates import GateSetup, PulseTiming
from .solver import StepPolicy

PRESET_NAMES = ("experimental-setup", "integrated")
DEFAULT_PRESET = "experimental-setup"

_CIRCUIT_KEYS = {"c_p", "r_fix", "v_app", "nimp_in2", "dt", "event_tol"}
_TIMING_KEYS = {"edge", "settle", "hold", "ramp_rise", "ramp_fall"}


@dataclass(frozen=True)
class Preset:
    name: str
    device: DeviceParams
    variability: VariabilitySpec
    setup: GateSetup

    def to_dict(self) -> dict:
        circuit = {
            "c_p": self.setup.c_p,
            "r_fix": self.setup.r_fix,
            "v_app": self.setup.v_app,
            "nimp_in2": self.setup.nimp_in2,
            "dt": self.setup.policy.dt,
            "event_tol": self.setup.policy.event_tol,
        }
        return {
            "name": self.name,
            "device": self.device.to_dict(),
            "variability": self.variability.to_dict(),
            "circuit": circuit,
            "timing": self.setup.timing.to_dict(),
        }


def _from_dict(data: dict, base: Preset | None = None) -> Preset:
    unknown = set(data) - {"name", "preset", "device", "variability", "circuit", "timing"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    merged = base.to_dict() if base else {"device": {}, "variability": {}, "circuit": {}, "timing": {}}
    for section in ("device", "variability", "circuit", "timing"):
        merged[section] = {**merged.get(section, {}), **data.get(section, {})}
    circuit, timing = merged["circuit"], merged["timing"]
    for section, allowed in (("circuit", _CIRCUIT_KEYS), ("timing", _TIMING_KEYS)):
        extra = set(merged[section]) - allowed
        if extra:
            raise ConfigError(f"unknown {section} fields: {sorted(extra)}")
    try:
        setup = GateSetup(
            c_p=float(circuit["c_p"]),
            timing=PulseTiming(**{k: float(v) for k, v in timing.items()}),
            v_app=float(circuit["v_app"]),
            r_fix=float(circuit["r_fix"]),
            nimp_in2=float(circuit["nimp_in2"]),
            policy=StepPolicy(dt=float(circuit["dt"]), event_tol=float(circuit["event_tol"])),
        )
        return Preset(
            name=data.get("name", base.name if base else "custom"),
            device=DeviceParams.from_dict(merged["device"]),
            variability=VariabilitySpec.from_dict(merged["variability"]),
            setup=setup,
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"incomplete configuration: {exc}") from exc


def load_preset(name: str = DEFAULT_PRESET) -> Preset:
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    text = resources.files("pcmlogic.presets").joinpath(f"{name}.json").read_text()
    return _from_dict(json.loads(text))


def load_config(path: str | Path | None = None, preset: str | None = None) -> Preset:
    """Load ``path`` on top of a base preset.

    The base is ``preset`` if given, else the file's own ``"preset"`` key,
    else the default preset.
    """
    if path is None:
        return load_preset(preset or DEFAULT_PRESET)
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    base = load_preset(preset or data.get("preset", DEFAULT_PRESET))
    return _from_dict(data, base)
