"""Steady states of the velocity-resolved ladder system.

Three routes are provided and cross-checked in the tests:

* :func:`solve_three_level` -- explicit optical Bloch equations for the
  |1>, |2>, |4> ladder, batched over velocity (the fast path);
* :func:`liouvillian_null_space` -- generic Lindblad superoperator assembled
  from the Hamiltonian and collapse operators, kernel taken by SVD;
* :func:`weak_pump_rho41` / :func:`weak_pump_rho31` -- closed-form
  first-order solutions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .atoms import AtomEnsemble, DriveConfig, VelocityGrid, carriers, complex_rates

# Level labels 1..4 map onto array indices 0..3.
L1, L2, L3, L4 = 0, 1, 2, 3


class SteadyStateError(ArithmeticError):
    """Steady-state linear system could not be solved."""


class DegeneracyError(SteadyStateError):
    """The Liouvillian kernel is not one-dimensional."""


@dataclass(frozen=True)
class DensityMatrix:
    rho: np.ndarray  # 4x4 complex, levels |1>..|4>
    velocity: float = 0.0

    def __getitem__(self, ij):
        """``dm[4, 1]`` returns rho_41 using 1-based level labels."""
        i, j = ij
        return self.rho[i - 1, j - 1]

    def violations(self, tol=1e-12, psd_tol=1e-10) -> list[str]:
        """List of broken density-matrix invariants (empty when valid)."""
        r = self.rho
        out = []
        if np.max(np.abs(r - r.conj().T)) > tol:
            out.append("not Hermitian")
        if abs(np.trace(r) - 1.0) > tol:
            out.append(f"trace {np.trace(r).real:.3e} != 1")
        d = np.diag(r)
        if np.max(np.abs(d.imag)) > tol or d.real.min() < -tol or d.real.max() > 1 + tol:
            out.append("diagonal outside [0, 1]")
        if np.linalg.eigvalsh(0.5 * (r + r.conj().T)).min() < -psd_tol:
            out.append("not positive semidefinite")
        return out


def _decay_split(ensemble: AtomEnsemble) -> tuple[float, float]:
    """Rates (to |1>, to |2>) at which |4> population is returned in the ladder."""
    g = ensemble.gamma_d
    if ensemble.cascade_repump == "ground":
        return g, g
    return 0.0, 2 * g


# Unknown ordering for the explicit equations.
_IDX = {"11": 0, "22": 1, "44": 2, "21": 3, "12": 4, "41": 5, "14": 6, "42": 7, "24": 8}


def _ladder_matrices(v, ensemble: AtomEnsemble, drive: DriveConfig):
    """Assemble A x = b for the ladder, with the rho_11 row replaced by the trace."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    car = carriers(ensemble, drive)
    rates = complex_rates(v, ensemble, drive, car.k_s, car.k_i)
    G = ensemble.gamma_e
    g = ensemble.gamma_d
    to_ground, to_p = _decay_split(ensemble)
    Wp, Wc = drive.omega_p, drive.omega_c
    g21, g41, g42 = rates.g21, rates.g41, rates.g42

    n = v.size
    A = np.zeros((n, 9, 9), dtype=complex)
    I = _IDX

    def put(row, col, val):
        A[:, I[row], I[col]] += val

    # d rho21/dt
    put("21", "21", -g21)
    put("21", "11", 1j * Wp)
    put("21", "22", -1j * Wp)
    put("21", "41", 1j * np.conj(Wc))
    # d rho12/dt
    put("12", "12", -np.conj(g21))
    put("12", "11", -1j * np.conj(Wp))
    put("12", "22", 1j * np.conj(Wp))
    put("12", "14", -1j * Wc)
    # d rho42/dt
    put("42", "42", -g42)
    put("42", "22", 1j * Wc)
    put("42", "44", -1j * Wc)
    put("42", "41", -1j * np.conj(Wp))
    # d rho24/dt
    put("24", "24", -np.conj(g42))
    put("24", "22", -1j * np.conj(Wc))
    put("24", "44", 1j * np.conj(Wc))
    put("24", "14", 1j * Wp)
    # d rho41/dt
    put("41", "41", -g41)
    put("41", "42", -1j * Wp)
    put("41", "21", 1j * Wc)
    # d rho14/dt
    put("14", "14", -np.conj(g41))
    put("14", "24", 1j * np.conj(Wp))
    put("14", "12", -1j * np.conj(Wc))
    # d rho22/dt
    put("22", "22", -2 * G)
    put("22", "44", to_p)
    put("22", "12", 1j * Wp)
    put("22", "21", -1j * np.conj(Wp))
    put("22", "42", 1j * np.conj(Wc))
    put("22", "24", -1j * Wc)
    # d rho44/dt
    put("44", "44", -2 * g)
    put("44", "24", 1j * Wc)
    put("44", "42", -1j * np.conj(Wc))
    # trace row in place of d rho11/dt
    A[:, I["11"], :] = 0
    A[:, I["11"], [I["11"], I["22"], I["44"]]] = 1.0

    b = np.zeros((n, 9), dtype=complex)
    b[:, I["11"]] = 1.0
    return v, A, b


def solve_three_level_batch(v, ensemble: AtomEnsemble, drive: DriveConfig) -> np.ndarray:
    """Steady-state 4x4 density matrices (level |3> empty) for each velocity.

    Returns an array of shape ``(len(v), 4, 4)``.
    """
    v, A, b = _ladder_matrices(v, ensemble, drive)
    try:
        x = np.linalg.solve(A, b[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        conds = np.linalg.cond(A)
        worst = int(np.argmax(conds))
        raise SteadyStateError(
            f"singular ladder system at v={v[worst]:.6g} m/s (cond={conds[worst]:.3g})"
        ) from exc
    rho = np.zeros((v.size, 4, 4), dtype=complex)
    for key, col in _IDX.items():
        i, j = int(key[0]) - 1, int(key[1]) - 1
        rho[:, i, j] = x[:, col]
    return rho


def solve_three_level(v: float, ensemble: AtomEnsemble, drive: DriveConfig) -> DensityMatrix:
    return DensityMatrix(solve_three_level_batch([v], ensemble, drive)[0], float(v))


def weak_pump_rho41(v, ensemble: AtomEnsemble, drive: DriveConfig):
    """Spin-wave coherence to first order in the pump."""
    car = carriers(ensemble, drive)
    r = complex_rates(v, ensemble, drive, car.k_s, car.k_i)
    Wp, Wc = drive.omega_p, drive.omega_c
    return -Wp * Wc / (r.g21 * r.g41 + abs(Wc) ** 2)


def weak_pump_rho31(delta_s, v, ensemble: AtomEnsemble, drive: DriveConfig, omega_s, omega_i):
    """Signal coherence: linear term plus the four-wave-mixing term."""
    car = carriers(ensemble, drive)
    r = complex_rates(v, ensemble, drive, car.k_s, car.k_i, delta_s)
    Wp, Wc = drive.omega_p, drive.omega_c
    return (1j * omega_s / r.g31
            - 1j * Wc * Wp * np.conj(omega_i) / (r.g31 * (r.g21 * r.g41 + abs(Wc) ** 2)))


# ----------------------------------------------------------------------------
# Brute-force oracle
# ----------------------------------------------------------------------------

def _ket(n, i):
    e = np.zeros((n, 1), dtype=complex)
    e[i, 0] = 1.0
    return e


def _liouvillian(H, collapse):
    """Column-stacking superoperator: vec(A rho B) = (B^T kron A) vec(rho)."""
    n = H.shape[0]
    eye = np.eye(n)
    L = -1j * (np.kron(eye, H) - np.kron(H.T, eye))
    for C in collapse:
        CdC = C.conj().T @ C
        L += np.kron(C.conj(), C) - 0.5 * np.kron(eye, CdC) - 0.5 * np.kron(CdC.T, eye)
    return L


def ladder_hamiltonian(v, ensemble: AtomEnsemble, drive: DriveConfig, levels=4,
                       omega_s=0.0, omega_i=0.0, delta_s=0.0):
    """Rotating-frame Hamiltonian / hbar in the frame of an atom moving at ``v``."""
    car = carriers(ensemble, drive)
    dp = drive.delta_p - car.k_p * v
    dtp = drive.delta - (car.k_p - car.k_c) * v
    ds = delta_s - car.k_s * v
    n = 4
    k = [_ket(n, i) for i in range(n)]
    H = -dp * k[L2] @ k[L2].T - dtp * k[L4] @ k[L4].T
    couplings = [(drive.omega_p, L2, L1), (drive.omega_c, L4, L2)]
    if levels == 4:
        H = H - ds * k[L3] @ k[L3].T
        couplings += [(omega_i, L4, L3), (omega_s, L3, L1)]
    for W, up, lo in couplings:
        H = H - W * k[up] @ k[lo].T - np.conj(W) * k[lo] @ k[up].T
    return H


def _collapse_ops(ensemble: AtomEnsemble, levels):
    n = 4
    k = [_ket(n, i) for i in range(n)]
    G, g = ensemble.gamma_e, ensemble.gamma_d
    ops = [np.sqrt(2 * G) * k[L1] @ k[L2].T]
    if levels == 4:
        ops += [np.sqrt(2 * G) * k[L1] @ k[L3].T,
                np.sqrt(g) * k[L2] @ k[L4].T,
                np.sqrt(g) * k[L3] @ k[L4].T]
    else:
        to_ground, to_p = _decay_split(ensemble)
        ops += [np.sqrt(to_p) * k[L2] @ k[L4].T]
        if to_ground:
            ops += [np.sqrt(to_ground) * k[L1] @ k[L4].T]
    return ops


def liouvillian_null_space(v, ensemble: AtomEnsemble, drive: DriveConfig, levels=3,
                           omega_s=0.0, omega_i=0.0, delta_s=0.0, rtol=1e-9) -> DensityMatrix:
    """Steady state as the trace-one kernel vector of the full Lindblad generator.

    For ``levels=3`` level |3> is removed and the |4> decay is routed as in
    the fast path. Raises :class:`DegeneracyError` unless the kernel is
    exactly one-dimensional.
    """
    if levels not in (3, 4):
        raise ValueError("levels must be 3 or 4")
    H = ladder_hamiltonian(v, ensemble, drive, levels, omega_s, omega_i, delta_s)
    ops = _collapse_ops(ensemble, levels)
    keep = [L1, L2, L4] if levels == 3 else [L1, L2, L3, L4]
    sub = np.ix_(keep, keep)
    H = H[sub]
    ops = [C[sub] for C in ops]
    L = _liouvillian(H, ops)
    # rescale so the singular-value threshold is dimensionless
    scale = np.abs(L).max()
    _, s, vh = np.linalg.svd(L / scale)
    null = np.sum(s < rtol * s[0])
    if null != 1:
        raise DegeneracyError(f"kernel dimension {null} at v={v} (smallest s={s[-3:]})")
    m = len(keep)
    r = vh[-1].conj().reshape(m, m, order="F")
    r = r / np.trace(r)
    r = 0.5 * (r + r.conj().T)
    rho = np.zeros((4, 4), dtype=complex)
    rho[sub] = r
    return DensityMatrix(rho, float(v))


def coherence_ratio(v, ensemble: AtomEnsemble, drive: DriveConfig, omega_s, omega_i,
                    delta_s=0.0) -> tuple[float, float]:
    """|Omega_p rho_32| and |Omega_i^* rho_41| from the four-level oracle.

    Diagnostic for dropping the rho_32 term in the signal coherence.
    """
    dm = liouvillian_null_space(v, ensemble, drive, 4, omega_s, omega_i, delta_s)
    return abs(drive.omega_p * dm[3, 2]), abs(np.conj(omega_i) * dm[4, 1])


# ----------------------------------------------------------------------------
# Velocity averaging
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class VelocityResolvedState:
    velocities: np.ndarray
    weights: np.ndarray
    rho: np.ndarray  # (n, 4, 4)

    @property
    def slices(self):
        for v, w, r in zip(self.velocities, self.weights, self.rho):
            yield float(v), float(w), DensityMatrix(r, float(v))

    def _avg(self, i, j):
        return np.dot(self.weights, self.rho[:, i - 1, j - 1])

    @property
    def p11(self) -> float:
        return float(self._avg(1, 1).real)

    @property
    def p22(self) -> float:
        return float(self._avg(2, 2).real)

    @property
    def p44(self) -> float:
        return float(self._avg(4, 4).real)

    @property
    def rho41_bar(self) -> complex:
        return complex(self._avg(4, 1))


def velocity_average(grid: VelocityGrid, ensemble: AtomEnsemble, drive: DriveConfig,
                     chunk=8192) -> VelocityResolvedState:
    parts = []
    for start in range(0, len(grid.nodes), chunk):
        v = grid.nodes[start:start + chunk]
        try:
            parts.append(solve_three_level_batch(v, ensemble, drive))
        except SteadyStateError as exc:
            raise SteadyStateError(f"velocity node block starting at index {start}: {exc}") from exc
    return VelocityResolvedState(grid.nodes, grid.weights, np.concatenate(parts))
