"""TOML run configuration with unit-suffixed keys.

Sections: ``[ensemble]``, ``[drive]``, ``[numerics]``, ``[sweep]`` (with
``[[sweep.axis]]`` tables) and ``[tags]``. Unknown keys are rejected so that
a typo never silently falls back to a default.
"""
from __future__ import annotations

import copy
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .atoms import AtomEnsemble, DriveConfig, carriers
from .biphoton import Calibration, FrequencyGrid

TWO_PI_GHZ = 2 * np.pi * 1e9


class ConfigError(ValueError):
    pass


# point parameters that may be swept, with defaults (reference operating point)
POINT_DEFAULTS = {
    "optical_depth": 9.3,
    "temperature_k": 328.15,
    "length_mm": 25.0,
    "omega_p_mhz": 4.6,
    "omega_c_mhz": 11.5,
    "delta_p_mhz": 1000.0,
    "two_photon_mhz": 0.0,
}
SECTION_POINT_KEYS = {
    "ensemble": ("optical_depth", "temperature_k", "length_mm"),
    "drive": ("omega_p_mhz", "omega_c_mhz", "delta_p_mhz", "two_photon_mhz"),
}
ENSEMBLE_EXTRA = {"constants": None, "cascade_repump": "ground"}
NUMERICS_DEFAULTS = {
    "span_ghz": 200.0,
    "samples": 2 ** 18,
    "jitter_ps": 590.0,
    "chi1_denominator": "g31",
    "velocity_extent": 8.0,
}
OUTPUTS = ("R", "g2max", "eta", "fwhm", "singles", "waveform", "tags")
SWEEP_DEFAULTS = {
    "outputs": ["R", "g2max", "eta", "fwhm"],
    "constant_rate_kcps": None,
    "omega_p_bracket_mhz": [0.05, 60.0],
    "rate_tolerance": 0.01,
    "plot": True,
}
TAGS_DEFAULTS = {
    "duration_s": 1.0,
    "background_cps": [0.0, 0.0, 0.0],
    "window_ns": 2.5,
    "windows_ns": [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 6.0, 10.0],
    "bin_ps": 100.0,
    "placement": "max",
}


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    points: int
    scale: str = "linear"

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.min, self.max, self.points)
        return np.linspace(self.min, self.max, self.points)


@dataclass
class RunConfig:
    point: dict = field(default_factory=lambda: dict(POINT_DEFAULTS))
    constants: str | None = None
    cascade_repump: str = "ground"
    numerics: dict = field(default_factory=lambda: dict(NUMERICS_DEFAULTS))
    axes: list = field(default_factory=list)
    sweep: dict = field(default_factory=lambda: copy.deepcopy(SWEEP_DEFAULTS))
    tags: dict = field(default_factory=lambda: copy.deepcopy(TAGS_DEFAULTS))
    source: str = "<defaults>"

    # --- model objects -------------------------------------------------------
    def ensemble(self, point: dict | None = None) -> AtomEnsemble:
        p = self.point if point is None else point
        return AtomEnsemble.from_constants(
            self.constants,
            temperature=p["temperature_k"],
            length=p["length_mm"] * 1e-3,
            optical_depth=p["optical_depth"],
            cascade_repump=self.cascade_repump,
        )

    def drive(self, point: dict | None = None) -> DriveConfig:
        p = self.point if point is None else point
        return DriveConfig.from_mhz(p["omega_p_mhz"], p["omega_c_mhz"], p["delta_p_mhz"],
                                    p["two_photon_mhz"])

    def grid(self, ensemble, drive) -> FrequencyGrid:
        return FrequencyGrid(carriers(ensemble, drive).omega_s,
                             self.numerics["span_ghz"] * TWO_PI_GHZ, int(self.numerics["samples"]))

    @property
    def jitter_fwhm(self) -> float:
        return self.numerics["jitter_ps"] * 1e-12

    def snapshot(self) -> dict:
        return {
            "point": self.point, "constants": self.constants, "cascade_repump": self.cascade_repump,
            "numerics": self.numerics, "axes": [a.__dict__ for a in self.axes], "sweep": self.sweep,
        }


def _check_keys(section: str, table: dict, allowed):
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in [{section}]; valid: {sorted(allowed)}")


def _number(section, key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"[{section}] {key} must be a number, got {value!r}")
    return float(value)


def parse_config(data: dict, source: str = "<dict>") -> RunConfig:
    cfg = RunConfig(source=source)
    top = {"ensemble", "drive", "numerics", "sweep", "tags"}
    _check_keys("<top level>", data, top)

    ens = data.get("ensemble", {})
    _check_keys("ensemble", ens, SECTION_POINT_KEYS["ensemble"] + tuple(ENSEMBLE_EXTRA))
    drv = data.get("drive", {})
    _check_keys("drive", drv, SECTION_POINT_KEYS["drive"])
    for section, table in (("ensemble", ens), ("drive", drv)):
        for k in SECTION_POINT_KEYS[section]:
            if k in table:
                cfg.point[k] = _number(section, k, table[k])
    cfg.constants = ens.get("constants")
    cfg.cascade_repump = ens.get("cascade_repump", "ground")
    if cfg.cascade_repump not in ("ground", "p_level"):
        raise ConfigError("[ensemble] cascade_repump must be 'ground' or 'p_level'")

    num = data.get("numerics", {})
    _check_keys("numerics", num, NUMERICS_DEFAULTS)
    cfg.numerics.update(num)
    if cfg.numerics["chi1_denominator"] not in ("g31", "g21"):
        raise ConfigError("[numerics] chi1_denominator must be 'g31' or 'g21'")

    sw = dict(data.get("sweep", {}))
    axes = sw.pop("axis", [])
    _check_keys("sweep", sw, SWEEP_DEFAULTS)
    cfg.sweep.update(sw)
    bad = sorted(set(cfg.sweep["outputs"]) - set(OUTPUTS))
    if bad:
        raise ConfigError(f"unknown output(s) {bad}; valid: {list(OUTPUTS)}")
    for a in axes:
        _check_keys("sweep.axis", a, ("name", "min", "max", "points", "scale"))
        name = a.get("name")
        if name not in POINT_DEFAULTS:
            raise ConfigError(f"unknown parameter name {name!r}; valid: {sorted(POINT_DEFAULTS)}")
        lo, hi = _number("sweep.axis", "min", a.get("min")), _number("sweep.axis", "max", a.get("max"))
        pts = a.get("points")
        scale = a.get("scale", "linear")
        if not isinstance(pts, int) or pts < 2:
            raise ConfigError(f"axis {name}: points must be an integer >= 2")
        if not lo < hi:
            raise ConfigError(f"axis {name}: min must be below max")
        if scale not in ("linear", "log") or (scale == "log" and lo <= 0):
            raise ConfigError(f"axis {name}: scale must be 'linear' or 'log' (log needs min > 0)")
        cfg.axes.append(Axis(name, lo, hi, pts, scale))
    if len({a.name for a in cfg.axes}) != len(cfg.axes):
        raise ConfigError("an axis name appears twice")
    if cfg.sweep["constant_rate_kcps"] is not None and any(a.name == "omega_p_mhz" for a in cfg.axes):
        raise ConfigError("omega_p_mhz cannot be swept in constant-rate mode")

    tg = data.get("tags", {})
    _check_keys("tags", tg, TAGS_DEFAULTS)
    cfg.tags.update(tg)
    _validate_model(cfg)
    return cfg


def _validate_model(cfg: RunConfig) -> None:
    """Build the model objects at the base point and the axis end points."""
    from .atoms import DomainError
    points = [cfg.point]
    for a in cfg.axes:
        for v in (a.min, a.max):
            points.append({**cfg.point, a.name: v})
    try:
        for p in points:
            ens, drv = cfg.ensemble(p), cfg.drive(p)
        cfg.grid(ens, drv)
    except (DomainError, ValueError, FileNotFoundError) as exc:
        raise ConfigError(f"{cfg.source}: {exc}") from None
    if cfg.numerics["jitter_ps"] < 0:
        raise ConfigError("[numerics] jitter_ps must be >= 0")


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data, str(path))


def load_calibration(path=None) -> Calibration:
    if path is None:
        return Calibration()
    try:
        data = json.loads(Path(path).read_text())
        return Calibration(float(data["c_g"]), float(data["c_R"]), float(data["c_eta"]))
    except FileNotFoundError:
        raise ConfigError(f"calibration file not found: {path}") from None
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad calibration file {path}: {exc}") from None
