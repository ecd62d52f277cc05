"""Fast invariant suite behind ``fwmsource check``."""
from __future__ import annotations

import numpy as np

from .atoms import MHZ, AtomEnsemble, DriveConfig, thermal_velocity, uniform_velocity_grid
from .biphoton import convolve_jitter
from .config import RunConfig
from .steady_state import liouvillian_null_space, solve_three_level
from .susceptibility import chi3, chi3_weak_pump


def random_drive(rng: np.random.Generator) -> tuple[DriveConfig, float]:
    """A random drive and velocity spanning the regimes the solvers meet."""
    drive = DriveConfig(
        omega_p=rng.uniform(0.0, 40.0) * MHZ,
        omega_c=rng.uniform(0.0, 60.0) * MHZ,
        delta_p=rng.uniform(-2000.0, 2000.0) * MHZ,
        delta_c=rng.uniform(-2000.0, 2000.0) * MHZ,
    )
    return drive, rng.normal(0.0, 250.0)


def steady_state_oracle(ens: AtomEnsemble, draws: int, seed: int = 0):
    """(max |fast - oracle|, number of matrices violating invariants)."""
    rng = np.random.default_rng(seed)
    worst, bad = 0.0, 0
    for _ in range(draws):
        drive, v = random_drive(rng)
        a = solve_three_level(v, ens, drive)
        b = liouvillian_null_space(v, ens, drive, levels=3)
        worst = max(worst, float(np.max(np.abs(a.rho - b.rho))))
        bad += bool(a.violations()) + bool(b.violations())
    return worst, bad


def run_checks(cfg: RunConfig, seed: int = 0):
    from .sweep import evaluate, load_table_s1

    results = []
    ens = cfg.ensemble()

    worst, bad = steady_state_oracle(ens, 20, seed)
    results.append(("steady-state oracle", worst < 1e-10 and bad == 0,
                    f"max diff {worst:.2e}, {bad} invariant violations"))

    weak = DriveConfig.from_mhz(1e-3, cfg.point["omega_c_mhz"])
    step = 0.5
    grid = uniform_velocity_grid(ens, step)
    ds = np.linspace(-50, 50, 11) * MHZ
    a, b = chi3(ds, ens, weak, grid), chi3_weak_pump(ds, ens, weak, grid)
    rel = float(np.max(np.abs(a - b) / np.abs(b)))
    results.append(("weak-pump chi3", rel < 1e-6, f"max relative difference {rel:.2e}"))

    figs, wf = evaluate(cfg, cfg.point)
    p = abs(wf.rate / wf.spectral_rate() - 1)
    results.append(("Parseval", p < 1e-9, f"relative mismatch {p:.2e}"))

    conv = convolve_jitter(wf, cfg.jitter_fwhm)
    m = abs(conv.sum() / wf.intensity.sum() - 1)
    results.append(("jitter preserves area", m < 1e-9, f"relative change {m:.2e}"))

    ext = (wf.tau[-1] - wf.tau[0]) / figs.duration_fwhm
    results.append(("time extent", ext >= 10, f"{ext:.3g} x FWHM"))

    vt = thermal_velocity(ens)
    results.append(("thermal velocity", vt > 0, f"{vt:.4g} m/s"))

    n = len(load_table_s1())
    results.append(("bundled comparison table", n == 22, f"{n} rows"))
    return results
