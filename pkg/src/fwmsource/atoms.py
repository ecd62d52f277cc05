"""Atomic ensemble and drive parameters, thermal velocity handling and the
complex decay rates shared by the density-matrix solvers.

All rates and detunings are angular frequencies (rad/s). Helper constructors
accept the ``*_mhz`` convention used in the lab, where a quoted "Omega = 4.6 MHz"
means Omega / 2pi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import constants as sc
from scipy.special import wofz

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

TWO_PI = 2.0 * math.pi
MHZ = TWO_PI * 1e6  # rad/s per MHz (Omega/2pi convention)

CONSTANT_KEYS = (
    "mass_kg",
    "gamma_e_hz",
    "gamma_d_hz",
    "dipole_21_cm",
    "dipole_31_cm",
    "dipole_42_cm",
    "dipole_43_cm",
    "lambda_21_m",
    "lambda_42_m",
)


class DomainError(ValueError):
    """An input lies outside the domain where an operation is defined."""


def load_constants(path: str | Path | None = None) -> dict[str, dict]:
    """Read an atomic-constants file.

    Each key maps to a table with ``value`` and ``source``. Without ``path`` the
    bundled 85Rb file is used.
    """
    if path is None:
        text = resources.files("fwmsource.data").joinpath("rb85_constants.toml").read_text()
    else:
        text = Path(path).read_text()
    raw = tomllib.loads(text)
    missing = [k for k in CONSTANT_KEYS if k not in raw]
    if missing:
        raise KeyError(f"constants file lacks keys: {', '.join(missing)}")
    for key, entry in raw.items():
        if not isinstance(entry, dict) or "value" not in entry or "source" not in entry:
            raise ValueError(f"constant {key!r} must be a table with 'value' and 'source'")
    return raw


@dataclass(frozen=True)
class AtomEnsemble:
    """Hot vapor cell: thermodynamic state plus effective four-level constants.

    ``gamma_e`` and ``gamma_d`` are half the population decay rates of |2> and
    |4>; all four dipoles are real effective moments in C m.
    """

    temperature: float = 328.15
    length: float = 0.025
    optical_depth: float = 9.3
    mass: float = 1.409993e-25
    gamma_e: float = TWO_PI * 3.0325e6
    gamma_d: float = TWO_PI * 0.33e6
    dipole_21: float = 2.069e-29
    dipole_31: float = 2.069e-29
    dipole_42: float = 5.87e-30
    dipole_43: float = 5.87e-30
    lambda_21: float = 780.241e-9
    lambda_42: float = 775.978e-9
    # where the |4> decay branch that would feed |3> ends up in the 3-level model
    cascade_repump: str = "ground"

    def __post_init__(self):
        if not self.temperature > 0:
            raise DomainError(f"temperature must be positive, got {self.temperature}")
        if not self.length > 0:
            raise DomainError(f"length must be positive, got {self.length}")
        if not self.optical_depth >= 0:
            raise DomainError(f"optical depth must be >= 0, got {self.optical_depth}")
        if not (self.gamma_e > 0 and self.gamma_d > 0):
            raise DomainError("decay rates must be positive")
        for name in ("dipole_21", "dipole_31", "dipole_42", "dipole_43"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")
        if self.cascade_repump not in ("ground", "p_level"):
            raise DomainError(f"cascade_repump must be 'ground' or 'p_level', got {self.cascade_repump!r}")

    @classmethod
    def from_constants(cls, path=None, **overrides) -> "AtomEnsemble":
        c = {k: v["value"] for k, v in load_constants(path).items()}
        kw = dict(
            mass=c["mass_kg"],
            gamma_e=TWO_PI * c["gamma_e_hz"],
            gamma_d=TWO_PI * c["gamma_d_hz"],
            dipole_21=c["dipole_21_cm"],
            dipole_31=c["dipole_31_cm"],
            dipole_42=c["dipole_42_cm"],
            dipole_43=c["dipole_43_cm"],
            lambda_21=c["lambda_21_m"],
            lambda_42=c["lambda_42_m"],
        )
        kw.update(overrides)
        return cls(**kw)

    def with_od(self, od: float) -> "AtomEnsemble":
        return replace(self, optical_depth=od)

    @property
    def omega_21(self) -> float:
        return TWO_PI * sc.c / self.lambda_21

    @property
    def omega_42(self) -> float:
        return TWO_PI * sc.c / self.lambda_42

    @property
    def density(self) -> float:
        return density_from_od(self)


@dataclass(frozen=True)
class DriveConfig:
    """Classical pump/control fields in the rotating frame.

    The signal detuning is the scan variable; the idler detuning follows from
    the parametric condition ``delta_s + delta_i = delta_p + delta_c``.
    """

    omega_p: float
    omega_c: float
    delta_p: float = TWO_PI * 1e9
    delta_c: float = -TWO_PI * 1e9

    def __post_init__(self):
        if self.omega_p < 0 or self.omega_c < 0:
            raise DomainError("Rabi frequencies must be >= 0")
        if not math.isfinite(self.delta_p + self.delta_c):
            raise DomainError("detunings must be finite")

    @classmethod
    def from_mhz(cls, omega_p_mhz, omega_c_mhz, delta_p_mhz=1000.0, two_photon_mhz=0.0):
        return cls(
            omega_p=omega_p_mhz * MHZ,
            omega_c=omega_c_mhz * MHZ,
            delta_p=delta_p_mhz * MHZ,
            delta_c=(two_photon_mhz - delta_p_mhz) * MHZ,
        )

    @property
    def delta(self) -> float:
        """Two-photon detuning."""
        return self.delta_p + self.delta_c

    def idler_detuning(self, delta_s):
        return self.delta - np.asarray(delta_s)

    def with_rabi(self, omega_p=None, omega_c=None) -> "DriveConfig":
        return replace(
            self,
            omega_p=self.omega_p if omega_p is None else omega_p,
            omega_c=self.omega_c if omega_c is None else omega_c,
        )


@dataclass(frozen=True)
class Carriers:
    """Optical carrier frequencies (rad/s) and vacuum wavenumbers (rad/m).

    Pump and signal travel along +z, control and idler along -z; the
    wavenumbers here are magnitudes and the signs enter via the rate formulas.
    """

    omega_p: float
    omega_c: float
    omega_s: float
    omega_i: float

    @property
    def k_p(self):
        return self.omega_p / sc.c

    @property
    def k_c(self):
        return self.omega_c / sc.c

    @property
    def k_s(self):
        return self.omega_s / sc.c

    @property
    def k_i(self):
        return self.omega_i / sc.c

    @property
    def wavelengths(self) -> dict[str, float]:
        return {name: TWO_PI * sc.c / getattr(self, f"omega_{name}") for name in "pcsi"}


def carriers(ensemble: AtomEnsemble, drive: DriveConfig) -> Carriers:
    # |3> shares the 5P3/2 energy with |2>; the signal centre sits on the D2
    # resonance and the idler centre on the |4>->|3> line shifted by delta.
    wp = ensemble.omega_21 + drive.delta_p
    wc = ensemble.omega_42 + drive.delta_c
    ws = ensemble.omega_21
    wi = ensemble.omega_42 + drive.delta
    return Carriers(wp, wc, ws, wi)


def field_amplitudes(ensemble: AtomEnsemble, drive: DriveConfig) -> tuple[float, float]:
    """Pump and control field amplitudes E = hbar*Omega/mu in V/m."""
    if ensemble.dipole_21 == 0 or ensemble.dipole_42 == 0:
        raise DomainError("field amplitudes need nonzero pump and control dipoles")
    return (
        sc.hbar * drive.omega_p / ensemble.dipole_21,
        sc.hbar * drive.omega_c / ensemble.dipole_42,
    )


def thermal_velocity(ensemble: AtomEnsemble) -> float:
    """One-dimensional thermal speed sqrt(k_B T / m) in m/s."""
    if not ensemble.temperature > 0:
        raise DomainError("temperature must be positive")
    return math.sqrt(sc.k * ensemble.temperature / ensemble.mass)


def maxwell_boltzmann(v, v_thermal):
    """Normalized 1D velocity density f(v)."""
    v = np.asarray(v, dtype=float)
    return np.exp(-0.5 * (v / v_thermal) ** 2) / (math.sqrt(TWO_PI) * v_thermal)


@dataclass(frozen=True)
class VelocityGrid:
    nodes: np.ndarray
    weights: np.ndarray
    v_thermal: float
    # node spacing for uniform grids, None for Gauss-Hermite
    step: float | None = field(default=None)

    def __len__(self):
        return len(self.nodes)

    def average(self, values, axis=-1):
        """Weighted sum over the velocity axis, accumulated in node order."""
        return np.tensordot(np.asarray(values), self.weights, axes=([axis], [0]))


def build_velocity_grid(ensemble: AtomEnsemble, order: int = 64) -> VelocityGrid:
    """Gauss-Hermite rule for integrals against the Maxwell-Boltzmann density."""
    if order < 2:
        raise DomainError(f"quadrature order must be >= 2, got {order}")
    x, w = np.polynomial.hermite.hermgauss(order)
    vt = thermal_velocity(ensemble)
    nodes = math.sqrt(2.0) * vt * x
    # symmetrize exactly; hermgauss is symmetric to rounding only
    nodes = 0.5 * (nodes - nodes[::-1])
    w = 0.5 * (w + w[::-1])
    return VelocityGrid(nodes, w / w.sum(), vt)


def uniform_velocity_grid(ensemble: AtomEnsemble, step: float, extent: float = 8.0) -> VelocityGrid:
    """Trapezoid rule on v = j*step, |v| <= extent*v_T.

    Resolves the natural-linewidth Lorentzians (width gamma_e/k ~ 0.013 v_T),
    which a Gauss-Hermite rule of moderate order cannot.
    """
    if not step > 0:
        raise DomainError("velocity step must be positive")
    vt = thermal_velocity(ensemble)
    n = int(math.ceil(extent * vt / step))
    nodes = step * np.arange(-n, n + 1, dtype=float)
    w = maxwell_boltzmann(nodes, vt)
    return VelocityGrid(nodes, w / w.sum(), vt, step)


@dataclass(frozen=True)
class ComplexRates:
    g21: np.ndarray
    g31: np.ndarray
    g42: np.ndarray
    g43: np.ndarray
    g41: np.ndarray
    g32: np.ndarray


def complex_rates(v, ensemble: AtomEnsemble, drive: DriveConfig, k_s: float, k_i: float,
                  delta_s=0.0) -> ComplexRates:
    """Velocity-dependent complex decay rates of the four-level ladder.

    ``v`` and ``delta_s`` broadcast against each other; the idler detuning is
    fixed by the parametric condition.
    """
    v = np.asarray(v, dtype=float)
    ds = np.asarray(delta_s, dtype=float)
    car = carriers(ensemble, drive)
    kp, kc = car.k_p, car.k_c
    G, g = ensemble.gamma_e, ensemble.gamma_d
    di = drive.delta - ds
    return ComplexRates(
        g21=G - 1j * (drive.delta_p - kp * v) + 0 * ds,
        g31=G - 1j * (ds - k_s * v),
        g42=(G + g) - 1j * (drive.delta_c + kc * v) + 0 * ds,
        g43=(G + g) + 1j * (di + k_i * v),
        g41=g - 1j * (drive.delta - (kp - kc) * v) + 0 * ds,
        g32=2 * G - 1j * (drive.delta_c - di + (kc - k_i) * v),
    )


def doppler_lorentzian(delta, k, gamma, v_thermal):
    """Exact Maxwell-Boltzmann average of 1/(gamma - i(delta - k v)).

    Real part is the Voigt profile (times pi); used as the quadrature oracle
    and for the resonant cross-section.
    """
    s = math.sqrt(2.0) * k * v_thermal
    z = (np.asarray(delta, dtype=float) + 1j * gamma) / s
    return math.sqrt(math.pi) / s * wofz(z)


def cross_section(ensemble: AtomEnsemble) -> float:
    """Peak Doppler-broadened absorption cross-section of the D2 manifold (m^2)."""
    k = TWO_PI / ensemble.lambda_21
    peak = doppler_lorentzian(0.0, k, ensemble.gamma_e, thermal_velocity(ensemble)).real
    return k * ensemble.dipole_31 ** 2 / (sc.epsilon_0 * sc.hbar) * peak


def density_from_od(ensemble: AtomEnsemble) -> float:
    """Atomic density in m^-3 from OD = n * sigma_eff * L."""
    if not ensemble.length > 0:
        raise DomainError("cell length must be positive")
    return ensemble.optical_depth / (cross_section(ensemble) * ensemble.length)


def od_from_density(ensemble: AtomEnsemble, density: float) -> float:
    if not ensemble.length > 0:
        raise DomainError("cell length must be positive")
    return density * cross_section(ensemble) * ensemble.length
