"""Bi-photon wavefunction, detector-jitter convolution and source figures of merit."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy import constants as sc
from scipy.optimize import brentq, minimize_scalar

from .atoms import (AtomEnsemble, DomainError, DriveConfig, carriers, uniform_velocity_grid,
                    TWO_PI)
from .steady_state import VelocityResolvedState, velocity_average
from .susceptibility import signal_doppler_step, susceptibility_spectrum

DEFAULT_SAMPLES = 2 ** 18
DEFAULT_SPAN = TWO_PI * 200e9
DEFAULT_JITTER_FWHM = 590e-12


class ResolutionError(ValueError):
    """A sampling grid is too coarse or too short for the requested quantity."""


class AmbiguityError(ValueError):
    """A width is ill-defined because the curve has several half-maximum crossings."""


class UndefinedFigureError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid of signal detunings; ``center`` is the signal carrier (rad/s)."""

    center: float
    span: float = DEFAULT_SPAN
    samples: int = DEFAULT_SAMPLES

    def __post_init__(self):
        if self.samples < 2 ** 12 or self.samples & (self.samples - 1):
            raise ResolutionError("samples must be a power of two >= 4096")
        if not self.span > 0:
            raise ResolutionError("span must be positive")

    @property
    def step(self) -> float:
        return self.span / self.samples

    @property
    def values(self) -> np.ndarray:
        return (np.arange(self.samples) - self.samples // 2) * self.step

    @property
    def tau_step(self) -> float:
        return TWO_PI / self.span

    @property
    def tau(self) -> np.ndarray:
        return (np.arange(self.samples) - self.samples // 2) * self.tau_step

    def doubled(self) -> "FrequencyGrid":
        """Twice the span at the same spacing."""
        return FrequencyGrid(self.center, 2 * self.span, 2 * self.samples)


def default_grid(ensemble: AtomEnsemble, drive: DriveConfig, **kw) -> FrequencyGrid:
    return FrequencyGrid(carriers(ensemble, drive).omega_s, **kw)


@dataclass
class BiphotonWaveform:
    tau: np.ndarray
    psi: np.ndarray
    delta_s: np.ndarray
    integrand: np.ndarray  # kappa * sinc * propagation phase, per detuning
    length: float
    metadata: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return self.tau[1] - self.tau[0]

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    @property
    def rate(self) -> float:
        """Pair generation rate, the time integral of |psi|^2."""
        return float(self.intensity.sum() * self.dt)

    def spectral_rate(self) -> float:
        """Same integral through the frequency domain."""
        dw = self.delta_s[1] - self.delta_s[0]
        return float(self.length ** 2 / TWO_PI * np.sum(np.abs(self.integrand) ** 2) * dw)

    def psi_at(self, t):
        """Band-limited evaluation of psi at arbitrary times."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        dw = self.delta_s[1] - self.delta_s[0]
        phase = np.exp(-1j * np.outer(t, self.delta_s))
        return self.length / TWO_PI * dw * (phase @ self.integrand)

    def intensity_at(self, t):
        return np.abs(self.psi_at(t)) ** 2


def wavenumbers(delta_s, chi1_s, ensemble: AtomEnsemble, drive: DriveConfig):
    """Signal and idler wavenumbers; the signal carries the medium response."""
    car = carriers(ensemble, drive)
    ds = np.asarray(delta_s, dtype=float)
    root = np.sqrt(1.0 + np.asarray(chi1_s, dtype=complex))
    if np.any(root.real <= 0):
        raise DomainError("sqrt(1 + chi1) has non-positive real part; branch is ambiguous")
    ks = root * (car.omega_s + ds) / sc.c
    ki = (car.omega_i - ds) / sc.c
    return ks, ki


def phase_mismatch(k_s, k_i, k_p, k_c):
    """Delta k = (k_s - k_i) - (k_p - k_c) for counter-propagating pairs."""
    return (np.asarray(k_s) - k_i) - (k_p - k_c)


def _csinc(x):
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x * x / 6.0, np.sin(safe) / safe)


def spectral_to_time(integrand, step: float, length: float) -> np.ndarray:
    """psi on the conjugate tau grid: (L/2pi) sum_k integrand_k exp(-i delta_k tau) d_omega.

    Both grids are centred so that delta = 0 and tau = 0 are samples.
    """
    return length / TWO_PI * step * np.fft.fftshift(np.fft.fft(np.fft.ifftshift(integrand)))


def biphoton_wavefunction(grid: FrequencyGrid, ensemble: AtomEnsemble, drive: DriveConfig,
                          state: VelocityResolvedState | None = None,
                          chi1_denominator: str = "g31", edge_tol: float = 1e-4,
                          velocity_extent: float = 8.0) -> BiphotonWaveform:
    """Temporal bi-photon amplitude psi(tau) by discrete Fourier transform.

    The constant carrier phase exp(-i w_s tau) and the constant propagation
    phase of the vacuum wavenumbers are dropped; neither affects |psi|^2.
    """
    car = carriers(ensemble, drive)
    vgrid = uniform_velocity_grid(ensemble, signal_doppler_step(ensemble, drive, grid.step),
                                  velocity_extent)
    if state is None:
        state = velocity_average(vgrid, ensemble, drive)
    ds = grid.values
    spec = susceptibility_spectrum(ds, ensemble, drive, vgrid, state, chi1_denominator)
    L = ensemble.length
    ws = car.omega_s + ds
    root_m1 = spec.chi1_s / (np.sqrt(1.0 + spec.chi1_s) + 1.0)  # sqrt(1+chi)-1 without cancellation
    if np.any((1.0 + root_m1).real <= 0):
        raise DomainError("sqrt(1 + chi1) has non-positive real part; branch is ambiguous")
    dk_medium = root_m1 * ws / sc.c
    dk = ((car.omega_s - car.omega_p) + (car.omega_c - car.omega_i) + 2 * ds) / sc.c + dk_medium
    integrand = spec.kappa * _csinc(dk * L / 2) * np.exp(1j * dk_medium * L / 2)

    peak = np.max(np.abs(integrand))
    if peak > 0:
        edge = max(abs(integrand[0]), abs(integrand[-1])) ** 2 / peak ** 2
        if edge > edge_tol:
            raise ResolutionError(f"spectral power at grid edge is {edge:.2e} of peak; widen the span")
    psi = spectral_to_time(integrand, grid.step, L)
    meta = {
        "od": ensemble.optical_depth,
        "omega_p_mhz": drive.omega_p / (TWO_PI * 1e6),
        "omega_c_mhz": drive.omega_c / (TWO_PI * 1e6),
        "delta_p_mhz": drive.delta_p / (TWO_PI * 1e6),
        "delta_c_mhz": drive.delta_c / (TWO_PI * 1e6),
        "temperature_k": ensemble.temperature,
        "length_m": L,
        "span_ghz": grid.span / (TWO_PI * 1e9),
        "samples": grid.samples,
        "chi1_denominator": chi1_denominator,
    }
    wf = BiphotonWaveform(grid.tau, psi, ds, integrand, L, meta)
    wf.chi1 = spec.chi1_s
    wf.chi3 = spec.chi3
    wf.state = state
    return wf


# ----------------------------------------------------------------------------
# Jitter
# ----------------------------------------------------------------------------

def sech_width(fwhm: float) -> float:
    """t0 such that sech(t/t0) has the given full width at half maximum."""
    return fwhm / (2.0 * math.acosh(2.0))


def sech_kernel(t, fwhm: float):
    """Unit-area sech(t/t0)/(pi t0) kernel."""
    t0 = sech_width(fwhm)
    x = np.abs(np.asarray(t, dtype=float)) / t0
    # sech(x) = 2 e^-x / (1 + e^-2x), overflow-free
    e = np.exp(-x)
    return 2 * e / (1 + e * e) / (math.pi * t0)


def convolve_jitter(waveform: BiphotonWaveform, jitter_fwhm: float, mass_tol: float = 1e-6) -> np.ndarray:
    """|psi|^2 convolved with the detector timing response, on the waveform grid."""
    if jitter_fwhm < 0:
        raise DomainError("jitter FWHM must be >= 0")
    inten = waveform.intensity
    if jitter_fwhm == 0:
        return inten.copy()
    return _convolve_sech(inten, waveform.dt, jitter_fwhm, mass_tol)


def _convolve_sech(samples, dt, jitter_fwhm, mass_tol=1e-6):
    n = len(samples)
    t = (np.arange(n) - n // 2) * dt
    # mass of the unit-area kernel outside the window
    t0 = sech_width(jitter_fwhm)
    outside = 1.0 - (4 / math.pi) * math.atan(math.tanh(t[-1] / (2 * t0)))
    if outside > mass_tol:
        raise ResolutionError(f"jitter kernel truncated: {outside:.2e} of its mass lies off-grid")
    kern = sech_kernel(t, jitter_fwhm) * dt
    kern /= kern.sum()
    out = np.fft.ifft(np.fft.fft(samples) * np.fft.fft(np.fft.ifftshift(kern)))
    return out.real


def _jittered_at(waveform, jitter_fwhm, t):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    k = sech_kernel(t[:, None] - waveform.tau[None, :], jitter_fwhm)
    norm = sech_kernel(waveform.tau - waveform.tau[len(waveform.tau) // 2], jitter_fwhm).sum() * waveform.dt
    return (k @ waveform.intensity) * waveform.dt / norm


# ----------------------------------------------------------------------------
# Widths and peaks
# ----------------------------------------------------------------------------

def _half_max_crossings(y):
    y = np.asarray(y, dtype=float)
    half = 0.5 * y.max()
    above = y >= half
    return np.flatnonzero(above[1:] != above[:-1]), half


def fwhm(samples, dt: float) -> float:
    """Full width at half of the global maximum, linearly interpolated."""
    y = np.asarray(samples, dtype=float)
    idx, half = _half_max_crossings(y)
    if len(idx) > 2:
        raise AmbiguityError(f"{len(idx)} half-maximum crossings at samples {idx.tolist()}")
    if len(idx) < 2:
        raise ResolutionError("curve does not fall below half maximum on both sides")

    def cross(i):
        return i + (half - y[i]) / (y[i + 1] - y[i])

    return (cross(idx[1]) - cross(idx[0])) * dt


def _refined(func, x, y):
    """Peak value and FWHM of a smooth function sampled as (x, y), refined on func."""
    i = int(np.argmax(y))
    dx = x[1] - x[0]
    res = minimize_scalar(lambda t: -func(t)[0], bounds=(x[i] - dx, x[i] + dx),
                          method="bounded", options={"xatol": dx * 1e-9})
    peak = max(-res.fun, y[i])
    half = 0.5 * peak
    above = y >= half
    idx = np.flatnonzero(above[1:] != above[:-1])
    if len(idx) > 2:
        raise AmbiguityError(f"{len(idx)} half-maximum crossings at samples {idx.tolist()}")
    if len(idx) < 2:
        raise ResolutionError("curve does not fall below half maximum on both sides")
    edges = [brentq(lambda t: func(t)[0] - half, x[j], x[j + 1], xtol=dx * 1e-10) for j in idx]
    return peak, edges[1] - edges[0], x[i]


@dataclass(frozen=True)
class Calibration:
    """Multiplicative rescaling of (g2 peak, pair rate, heralding efficiency)."""

    c_g: float = 1.0
    c_R: float = 1.0
    c_eta: float = 1.0


@dataclass
class SourceFigures:
    pair_rate: float
    singles_s: float
    singles_i: float
    g2si_max: float
    heralding_eta: float
    duration_fwhm: float
    duration_fwhm_jitter: float
    peak_tau: float
    calibration: Calibration
    jitter_fwhm: float
    undefined: tuple = ()

    def as_dict(self) -> dict:
        d = asdict(self)
        d["calibration"] = asdict(self.calibration)
        return d


def heralding_efficiency(pair_rate: float, singles_i: float) -> float:
    if singles_i == 0:
        raise UndefinedFigureError("idler singles rate is zero; heralding efficiency undefined")
    return pair_rate / singles_i


def singles_rates(state: VelocityResolvedState, ensemble: AtomEnsemble) -> tuple[float, float]:
    """Model (uncalibrated) signal and idler singles: 2 rho22 Gamma OD, 2 rho44 gamma OD."""
    od = ensemble.optical_depth
    return 2 * state.p22 * ensemble.gamma_e * od, 2 * state.p44 * ensemble.gamma_d * od


def source_figures(waveform: BiphotonWaveform, state: VelocityResolvedState, ensemble: AtomEnsemble,
                   calibration: Calibration = Calibration(),
                   jitter_fwhm: float = DEFAULT_JITTER_FWHM) -> SourceFigures:
    """Pair rate, singles, peak cross-correlation, heralding efficiency and duration.

    The g2 peak is taken from the jitter-convolved intensity, as measured;
    durations are reported both before and after the jitter convolution.
    """
    c = calibration
    R = waveform.rate
    Ns, Ni = singles_rates(state, ensemble)
    undefined = []
    if R == 0:
        nan = float("nan")
        return SourceFigures(0.0, (c.c_eta / c.c_g) * Ns, (c.c_R / c.c_eta) * Ni, nan, nan,
                             nan, nan, nan, c, jitter_fwhm,
                             ("g2si_max", "heralding_eta", "duration_fwhm", "duration_fwhm_jitter"))
    inten = waveform.intensity
    _, width, _ = _refined(waveform.intensity_at, waveform.tau, inten)
    if jitter_fwhm > 0:
        conv = convolve_jitter(waveform, jitter_fwhm)
        peak, width_j, tpk = _refined(lambda t: _jittered_at(waveform, jitter_fwhm, t),
                                      waveform.tau, conv)
    else:
        peak, width_j, tpk = _refined(waveform.intensity_at, waveform.tau, inten)
    try:
        eta = c.c_eta * heralding_efficiency(R, Ni)
    except UndefinedFigureError:
        eta = float("nan")
        undefined.append("heralding_eta")
    if Ni * Ns > 0:
        g2 = c.c_g * peak / (Ni * Ns)
    else:
        g2 = float("nan")
        undefined.append("g2si_max")
    return SourceFigures(
        pair_rate=c.c_R * R,
        singles_s=(c.c_eta / c.c_g) * Ns,
        singles_i=(c.c_R / c.c_eta) * Ni,
        g2si_max=g2,
        heralding_eta=eta,
        duration_fwhm=width,
        duration_fwhm_jitter=width_j,
        peak_tau=tpk,
        calibration=c,
        jitter_fwhm=jitter_fwhm,
        undefined=tuple(undefined),
    )


def write_waveform_csv(path, waveform: BiphotonWaveform, window=(-5e-9, 30e-9)):
    """Two-column (tau_seconds, |psi|^2) file with a '#' header of generating parameters."""
    path = Path(path)
    sel = (waveform.tau >= window[0]) & (waveform.tau <= window[1])
    with path.open("w", newline="") as fh:
        for key in sorted(waveform.metadata):
            fh.write(f"# {key} = {waveform.metadata[key]}\n")
        w = csv.writer(fh)
        w.writerow(["tau_s", "intensity"])
        for t, y in zip(waveform.tau[sel], waveform.intensity[sel]):
            w.writerow([f"{t:.6e}", f"{y:.10e}"])
    return path


def read_waveform_csv(path):
    meta, rows = {}, []
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].partition("=")
                meta[k.strip()] = v.strip()
            elif line.startswith("tau_s"):
                continue
            elif line.strip():
                t, y = line.split(",")
                rows.append((float(t), float(y)))
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1], meta
