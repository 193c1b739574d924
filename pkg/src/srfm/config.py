"""Scenario configuration: flat ``key = value`` files with units in the key names.

Files are read with :mod:`configparser` (no section headers needed).  Any key
can be overridden from the environment as ``SRFM_<KEY>``, e.g.
``SRFM_DENSITY_PER_CM3=2e17`` or ``SRFM_DRIVE_RABI_GHZ=10``.
"""
from __future__ import annotations

import configparser
import dataclasses
import json
import os
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path
from typing import List, Optional

from .model import (CALIBRATION_DENSITY, CALIBRATION_WIDTH_GHZ, AtomSystem, DriveField,
                    ProbeField)
from .reflection import FmParams, WindowMedium
from .units import TWO_PI

ENV_PREFIX = "SRFM_"
PRESET_VERSION = "v1"
PRESETS = ("fig2a", "fig2b", "fig2c", "fig2d", "fig3", "fig4_d0", "fig4_d3")
REPRODUCE_TARGETS = {
    "fig2a": ("fig2a",), "fig2b": ("fig2b",), "fig2c": ("fig2c",), "fig2d": ("fig2d",),
    "fig3": ("fig3",), "fig4": ("fig4_d0", "fig4_d3"),
}


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key."""


@dataclass
class ScenarioConfig:
    scenario_id: str = "custom"
    description: str = ""

    density_per_cm3: float = CALIBRATION_DENSITY
    collisional_shift_GHz: float = 0.0

    # species
    lambda_probe_nm: float = 770.0
    lambda_drive_nm: float = 766.0
    gamma_rad_GHz: float = 1.0 / 26.72 / TWO_PI
    dipole_projection_factor: float = 1.0 / 3.0
    calibration_density_per_cm3: float = CALIBRATION_DENSITY
    calibration_self_width_GHz: float = CALIBRATION_WIDTH_GHZ
    rabi_coefficient_Hz_per_sqrt_W_per_cm2: float = 8e7
    line_strength_factor: float = 1.0 / 3.0
    self_width_rate_fraction: float = 0.5

    # pump
    drive_rabi_GHz: Optional[float] = None
    drive_power_W: Optional[float] = None
    drive_area_cm2: float = 5e-4
    drive_detuning_GHz: float = 0.0
    drive_detuning_reference: str = "bare"
    population_decay_GHz: Optional[float] = None
    excitation_override: Optional[float] = None

    # probe scan
    probe_span_GHz: float = 200.0
    probe_center_GHz: float = 0.0
    probe_points: int = 2001
    probe_rabi_GHz: float = 0.0

    # FM detection
    fm_range_GHz: float = 0.1
    fm_rate_Hz: float = 400.0
    fm_harmonic: int = 1
    fm_cycle_samples: int = 64
    fm_method: str = "lockin"

    window_index: float = 1.76

    # analysis
    fit_doublet: str = "auto"
    fit_phase: str = "free"
    fit_max_iter: int = 500
    through_origin: bool = True

    # population solver
    solver_tol: float = 1e-10
    solver_max_iter: int = 500
    solver_damping: float = 0.5

    # sweep axis; entries pair up element by element
    sweep_rabi_GHz: Optional[List[float]] = None
    sweep_power_W: Optional[List[float]] = None
    sweep_detuning_GHz: Optional[List[float]] = None

    # -- derived objects ------------------------------------------------------

    def atom(self):
        return AtomSystem.calibrated(
            density=self.calibration_density_per_cm3,
            width_ghz=self.calibration_self_width_GHz,
            lambda_probe=self.lambda_probe_nm * 1e-7,
            lambda_drive=self.lambda_drive_nm * 1e-7,
            gamma_rad=TWO_PI * self.gamma_rad_GHz,
            dipole_projection_factor=self.dipole_projection_factor,
            rabi_intensity_coefficient=self.rabi_coefficient_Hz_per_sqrt_W_per_cm2,
            line_strength_factor=self.line_strength_factor,
            self_width_rate_fraction=self.self_width_rate_fraction,
        )

    def drive(self, rabi_ghz=None, power_w=None, detuning_ghz=None):
        if rabi_ghz is None and power_w is None:
            rabi_ghz, power_w = self.drive_rabi_GHz, self.drive_power_W
        detuning = self.drive_detuning_GHz if detuning_ghz is None else detuning_ghz
        return DriveField(
            power=power_w or 0.0,
            beam_area=self.drive_area_cm2,
            rabi=None if rabi_ghz is None else TWO_PI * rabi_ghz,
            detuning=TWO_PI * detuning,
            detuning_reference=self.drive_detuning_reference,
            population_decay=None if self.population_decay_GHz is None
            else TWO_PI * self.population_decay_GHz,
            excitation_override=self.excitation_override,
        )

    def expected_linewidth_GHz(self):
        """Rough full width of the narrowest expected feature."""
        unexcited = self.calibration_self_width_GHz * self.density_per_cm3 / self.calibration_density_per_cm3
        if self.excitation_override is not None:
            return unexcited * (1 - self.excitation_override)
        driven = bool(self.drive_rabi_GHz) or bool(self.drive_power_W) or self.is_sweep
        return unexcited / 2 if driven else unexcited

    def probe(self):
        return ProbeField.from_span(self.probe_span_GHz, self.probe_points,
                                    center_ghz=self.probe_center_GHz,
                                    narrowest_feature_ghz=self.expected_linewidth_GHz(),
                                    rabi_probe=TWO_PI * self.probe_rabi_GHz)

    def fm(self):
        return FmParams(mod_range=self.fm_range_GHz, mod_rate=self.fm_rate_Hz,
                        harmonic=self.fm_harmonic, cycle_samples=self.fm_cycle_samples)

    def window(self):
        return WindowMedium(self.window_index)

    def fit_phase_value(self):
        return None if self.fit_phase == "free" else float(self.fit_phase)

    @property
    def is_sweep(self):
        return self.sweep_rabi_GHz is not None or self.sweep_power_W is not None

    def sweep_points(self):
        """(rabi_GHz or None, power_W or None, detuning_GHz) per sweep point."""
        if self.sweep_rabi_GHz is not None:
            drives = [(r, None) for r in self.sweep_rabi_GHz]
        else:
            drives = [(None, p) for p in self.sweep_power_W]
        detunings = self.sweep_detuning_GHz or [self.drive_detuning_GHz] * len(drives)
        return [(r, p, d) for (r, p), d in zip(drives, detunings)]

    def as_dict(self):
        return dataclasses.asdict(self)

    # -- validation -----------------------------------------------------------

    def validate(self):
        def fail(key, msg):
            raise ConfigError(f"{key}: {msg}")

        if not self.density_per_cm3 > 0:
            fail("density_per_cm3", "must be positive")
        if self.probe_points < 200:
            fail("probe_points", f"need at least 200 points, got {self.probe_points}")
        if not self.probe_span_GHz > 0:
            fail("probe_span_GHz", "must be positive")
        need = 6 * self.expected_linewidth_GHz()
        if self.probe_span_GHz < need:
            fail("probe_span_GHz", f"{self.probe_span_GHz:g} GHz does not cover 6 expected "
                 f"linewidths ({need:.1f} GHz)")
        if self.excitation_override is not None and not 0 <= self.excitation_override <= 1:
            fail("excitation_override", "must lie in [0, 1]")
        if self.population_decay_GHz is not None and not self.population_decay_GHz > 0:
            fail("population_decay_GHz", "must be positive")
        if not self.drive_area_cm2 > 0:
            fail("drive_area_cm2", "must be positive")
        if self.drive_detuning_reference not in ("bare", "shifted"):
            fail("drive_detuning_reference", "must be 'bare' or 'shifted'")
        if self.fm_method not in ("lockin", "derivative"):
            fail("fm_method", "must be 'lockin' or 'derivative'")
        if self.fit_doublet not in ("auto", "yes", "no"):
            fail("fit_doublet", "must be 'auto', 'yes' or 'no'")
        if self.fit_phase != "free":
            try:
                float(self.fit_phase)
            except ValueError:
                fail("fit_phase", "must be 'free' or a number (radians)")

        if self.is_sweep:
            if self.sweep_rabi_GHz is not None and self.sweep_power_W is not None:
                fail("sweep_rabi_GHz", "give either sweep_rabi_GHz or sweep_power_W, not both")
            axis = self.sweep_rabi_GHz if self.sweep_rabi_GHz is not None else self.sweep_power_W
            key = "sweep_rabi_GHz" if self.sweep_rabi_GHz is not None else "sweep_power_W"
            if len(axis) < 2:
                fail(key, "a sweep needs at least two points for the linear fit")
            if self.sweep_detuning_GHz is not None and len(self.sweep_detuning_GHz) != len(axis):
                fail("sweep_detuning_GHz", f"length {len(self.sweep_detuning_GHz)} does not "
                     f"match {key} length {len(axis)}")
            if any(v < 0 for v in axis):
                fail(key, "values must be non-negative")
        else:
            if (self.drive_rabi_GHz is None) == (self.drive_power_W is None):
                fail("drive_rabi_GHz", "specify exactly one of drive_rabi_GHz or drive_power_W")
            if self.drive_rabi_GHz is not None and self.drive_rabi_GHz < 0:
                fail("drive_rabi_GHz", "must be non-negative")
            if self.drive_power_W is not None and self.drive_power_W < 0:
                fail("drive_power_W", "must be non-negative")

        # delegate the remaining invariants to the domain objects
        checks = [("lambda_probe_nm", self.atom), ("drive", self.drive),
                  ("fm_range_GHz", self.fm), ("window_index", self.window),
                  ("probe_span_GHz", self.probe)]
        for key, build in checks:
            try:
                build()
            except ValueError as exc:
                fail(key, str(exc))
        return self


# -- parsing ------------------------------------------------------------------

_FIELDS = {f.name: f for f in fields(ScenarioConfig)}
_LOWER = {name.lower(): name for name in _FIELDS}


def _convert(name, raw):
    kind = _FIELDS[name].type
    if isinstance(raw, str):
        text = raw.strip()
        if text.lower() in ("", "none", "null") and "Optional" in kind:
            return None
    else:
        text = raw
    try:
        if "List" in kind:
            if raw is None:
                return None
            if isinstance(raw, str):
                items = [v for v in text.replace(";", ",").split(",") if v.strip()]
            else:
                items = list(raw)
            return [float(v) for v in items]
        if kind.startswith("bool"):
            if isinstance(text, bool):
                return text
            lowered = str(text).lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if kind.startswith("int"):
            value = float(text)
            if value != int(value):
                raise ValueError(text)
            return int(value)
        if "float" in kind:
            return None if text is None else float(text)
        return str(text)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind}") from None


def config_from_mapping(mapping, source="<mapping>"):
    values = {}
    for key, raw in mapping.items():
        name = _LOWER.get(key.lower())
        if name is None:
            raise ConfigError(f"{key}: unknown key (in {source})")
        values[name] = _convert(name, raw)
    return ScenarioConfig(**values)


def _read_text(text, source):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                       delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string("[scenario]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return dict(parser["scenario"])


def read_mapping(path):
    """Raw key/value mapping from a config file or an echoed JSON report."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        data = json.loads(text)
        return data.get("config", data)
    return _read_text(text, str(path))


def env_overrides(environ=None):
    environ = os.environ if environ is None else environ
    out = {}
    for key, value in environ.items():
        if key.startswith(ENV_PREFIX):
            name = _LOWER.get(key[len(ENV_PREFIX):].lower())
            if name is None:
                raise ConfigError(f"{key}: environment override names no config key")
            out[name] = value
    return out


def load_config(path=None, overrides=None, environ=None):
    """Defaults <- file <- environment <- explicit overrides, then validate."""
    mapping = {}
    source = "<defaults>"
    if path is not None:
        mapping.update(read_mapping(path))
        source = str(path)
    mapping.update(env_overrides(environ))
    mapping.update(overrides or {})
    return config_from_mapping(mapping, source).validate()


def preset_path(name):
    if name not in PRESETS:
        raise ConfigError(f"preset: unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resources.files("srfm") / "presets" / PRESET_VERSION / f"{name}.cfg"


def load_preset(name, overrides=None, environ=None):
    with resources.as_file(preset_path(name)) as path:
        return load_config(path, overrides=overrides, environ=environ)
