"""Doppler-averaged signal susceptibilities and the nonlinear coupling kappa.

Every quantity here is an average over velocity classes of the form
``sum_j w_j g(v_j) / Gamma_31(v_j, delta_s)``. Two evaluation routes exist:

* the direct sums (``chi3``, ``chi1_signal``, ...) for arbitrary detunings and
  velocity grids;
* :func:`susceptibility_spectrum`, which evaluates the same sums on a uniform
  detuning grid as one discrete convolution, using a velocity grid whose step
  maps onto the detuning step through the signal Doppler shift.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants as sc
from scipy.signal import fftconvolve

from .atoms import (AtomEnsemble, DomainError, DriveConfig, VelocityGrid, carriers,
                    complex_rates, field_amplitudes)
from .steady_state import VelocityResolvedState, velocity_average

CHI1_DENOMINATORS = ("g31", "g21")


@dataclass(frozen=True)
class SusceptibilitySample:
    delta_s: np.ndarray
    chi1_s: np.ndarray
    chi3: np.ndarray
    kappa: np.ndarray


def _state(grid, ensemble, drive, state):
    return velocity_average(grid, ensemble, drive) if state is None else state


def _zero_field(drive):
    return drive.omega_p == 0 or drive.omega_c == 0


def chi3_prefactor(ensemble: AtomEnsemble, drive: DriveConfig) -> float:
    """n mu_31 mu_43 / (eps0 hbar Ep Ec), multiplying the kernel i rho41 / Gamma31.

    Raises DomainError for a vanishing pump or control field, where the
    ratio rho41 / (Ep Ec) has to be taken as a limit (use ``chi3_weak_pump``).
    """
    if _zero_field(drive):
        raise DomainError("chi3 prefactor is singular for zero pump or control field")
    Ep, Ec = field_amplitudes(ensemble, drive)
    return (ensemble.density * ensemble.dipole_31 * ensemble.dipole_43
            / (sc.epsilon_0 * sc.hbar * Ep * Ec))


def chi1_prefactor(ensemble: AtomEnsemble) -> float:
    return ensemble.density * ensemble.dipole_31 ** 2 / (sc.epsilon_0 * sc.hbar)


def _direct_sum(delta_s, grid, numer, ensemble, drive, denominator="g31", chunk=256):
    ds = np.atleast_1d(np.asarray(delta_s, dtype=float))
    car = carriers(ensemble, drive)
    out = np.empty(ds.shape, dtype=complex)
    wn = grid.weights * numer
    for start in range(0, ds.size, chunk):
        d = ds[start:start + chunk, None]
        r = complex_rates(grid.nodes[None, :], ensemble, drive, car.k_s, car.k_i, d)
        den = r.g31 if denominator == "g31" else r.g21
        out[start:start + chunk] = (1j * wn / den).sum(axis=1)
    return out


def chi3(delta_s, ensemble: AtomEnsemble, drive: DriveConfig, grid: VelocityGrid,
         state: VelocityResolvedState | None = None):
    """Third-order susceptibility (m/V)^2 from the numerically solved rho_41(v)."""
    if ensemble.density == 0:
        return np.zeros(np.shape(np.atleast_1d(delta_s)), dtype=complex)
    pref = chi3_prefactor(ensemble, drive)
    st = _state(grid, ensemble, drive, state)
    return pref * _direct_sum(delta_s, grid, st.rho[:, 3, 0], ensemble, drive)


def chi3_weak_pump(delta_s, ensemble: AtomEnsemble, drive: DriveConfig, grid: VelocityGrid):
    """Weak-pump closed form of chi3, velocity-averaged on ``grid``."""
    car = carriers(ensemble, drive)
    ds = np.atleast_1d(np.asarray(delta_s, dtype=float))
    mu = ensemble.dipole_31 * ensemble.dipole_43 * ensemble.dipole_21 * ensemble.dipole_42
    pref = ensemble.density / (1j * sc.epsilon_0 * sc.hbar ** 3) * mu
    r = complex_rates(grid.nodes[None, :], ensemble, drive, car.k_s, car.k_i, ds[:, None])
    integrand = 1.0 / (r.g31 * (r.g21 * r.g41 + abs(drive.omega_c) ** 2))
    return pref * (integrand * grid.weights).sum(axis=1)


def chi1_signal(delta_s, ensemble: AtomEnsemble, drive: DriveConfig, grid: VelocityGrid,
                state: VelocityResolvedState | None = None, denominator: str = "g31"):
    """Linear signal susceptibility including pump-induced population changes.

    ``denominator="g21"`` reproduces the alternative written with the pump
    coherence rate; the result then does not depend on ``delta_s``.
    """
    if denominator not in CHI1_DENOMINATORS:
        raise ValueError(f"denominator must be one of {CHI1_DENOMINATORS}")
    st = _state(grid, ensemble, drive, state)
    pop = st.rho[:, 0, 0].real - st.rho[:, 2, 2].real
    return chi1_prefactor(ensemble) * _direct_sum(delta_s, grid, pop, ensemble, drive, denominator)


def chi1_idler(delta_i, *args, **kwargs):
    """The idler linear susceptibility is neglected; always zero."""
    return np.zeros(np.shape(np.atleast_1d(delta_i)), dtype=complex)


def kappa_from_chi3(chi3_values, ensemble: AtomEnsemble, drive: DriveConfig):
    car = carriers(ensemble, drive)
    Ep, Ec = field_amplitudes(ensemble, drive)
    return -1j * 2 * math.sqrt(car.omega_s * car.omega_i) / sc.c * np.asarray(chi3_values) * Ep * Ec


def kappa(delta_s, ensemble: AtomEnsemble, drive: DriveConfig, grid: VelocityGrid,
          state: VelocityResolvedState | None = None):
    """Nonlinear coupling in 1/m."""
    return kappa_from_chi3(chi3(delta_s, ensemble, drive, grid, state), ensemble, drive)


def signal_doppler_step(ensemble: AtomEnsemble, drive: DriveConfig, d_omega: float) -> float:
    """Velocity step whose signal Doppler shift equals one detuning step."""
    return d_omega / carriers(ensemble, drive).k_s


def susceptibility_spectrum(delta_s: np.ndarray, ensemble: AtomEnsemble, drive: DriveConfig,
                            grid: VelocityGrid, state: VelocityResolvedState | None = None,
                            denominator: str = "g31") -> SusceptibilitySample:
    """chi1, chi3 and kappa on a uniform detuning grid by FFT convolution.

    ``grid`` must be a uniform velocity grid with step
    ``signal_doppler_step(..., delta_s[1] - delta_s[0])`` and ``delta_s`` must
    contain zero as a grid point; then the result equals the direct sums.
    """
    ds = np.asarray(delta_s, dtype=float)
    d_omega = ds[1] - ds[0]
    car = carriers(ensemble, drive)
    if grid.step is None or not math.isclose(car.k_s * grid.step, d_omega, rel_tol=1e-9):
        raise DomainError("velocity step does not match the detuning step")
    m0 = ds[0] / d_omega
    if abs(m0 - round(m0)) > 1e-6 * max(1.0, abs(m0)):
        raise DomainError("detuning grid must contain zero")
    m0 = int(round(m0))
    st = _state(grid, ensemble, drive, state)
    J = (len(grid.nodes) - 1) // 2
    N = ds.size
    # kernel sampled at offsets m0 - J ... m0 + N - 1 + J (in units of d_omega)
    offsets = np.arange(m0 - J, m0 + N + J) * d_omega
    if denominator not in CHI1_DENOMINATORS:
        raise ValueError(f"denominator must be one of {CHI1_DENOMINATORS}")
    kern = 1j / (ensemble.gamma_e - 1j * offsets)

    def conv(values):
        return fftconvolve(kern, values * grid.weights, mode="valid")

    c3 = np.zeros(N, dtype=complex)
    c1 = np.zeros(N, dtype=complex)
    if ensemble.density > 0:
        if not _zero_field(drive):
            c3 = chi3_prefactor(ensemble, drive) * conv(st.rho[:, 3, 0])
        if denominator == "g31":
            c1 = chi1_prefactor(ensemble) * conv(st.rho[:, 0, 0].real - st.rho[:, 2, 2].real)
        else:
            c1[:] = chi1_signal(0.0, ensemble, drive, grid, st, "g21")[0]
    return SusceptibilitySample(ds, c1, c3, kappa_from_chi3(c3, ensemble, drive))
