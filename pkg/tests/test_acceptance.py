"""The nine acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line that is printed as it runs and again in
the terminal summary. Run directly with ``python tests/test_acceptance.py``.
"""
import filecmp
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from fwmsource import photon_stats as ps
from fwmsource.atoms import DriveConfig
from fwmsource.biphoton import signal_doppler_step
from fwmsource.atoms import uniform_velocity_grid
from fwmsource.checks import steady_state_oracle
from fwmsource.config import load_config, parse_config
from fwmsource.sweep import (bundled_reference_points, calibrate, evaluate, loglog_slope,
                             read_reference_csv, run_sweep)
from fwmsource.susceptibility import chi3, chi3_weak_pump

import conftest

CONFIGS = Path(__file__).parents[1] / "configs"
MHZ = 2 * math.pi * 1e6


def record(n: int, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {n}: {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print("\n" + line)
    assert ok, line


@pytest.fixture(scope="module")
def calibration(cfg):
    cal, _ = calibrate(cfg, read_reference_csv(bundled_reference_points()))
    return cal


def test_1_weak_pump_oracle(cfg, ens):
    t0 = time.perf_counter()
    drive = DriveConfig.from_mhz(1e-3, 11.5)
    grid = cfg.grid(ens, drive)
    vgrid = uniform_velocity_grid(ens, signal_doppler_step(ens, drive, grid.step))
    ds = np.linspace(-50, 50, 201) * MHZ
    a, b = chi3(ds, ens, drive, vgrid), chi3_weak_pump(ds, ens, drive, vgrid)
    rel = float(np.max(np.abs(a - b) / np.abs(b)))
    dt = time.perf_counter() - t0
    record(1, rel < 1e-6 and dt < 10, f"max relative difference {rel:.2e} (< 1e-6), {dt:.2f} s (< 10 s)")


def test_2_steady_state_oracle(ens):
    t0 = time.perf_counter()
    worst, bad = steady_state_oracle(ens, 100, seed=2)
    dt = time.perf_counter() - t0
    record(2, worst < 1e-10 and bad == 0 and dt < 5,
           f"max elementwise difference {worst:.2e} (< 1e-10), {bad} invariant violations, {dt:.2f} s (< 5 s)")


def test_3_wavefunction_numerics(cfg, operating_point):
    figs, wf = operating_point
    parseval = abs(wf.rate / wf.spectral_rate() - 1)
    n, span = cfg.numerics["samples"], cfg.numerics["span_ghz"]
    changes = {}
    for label, num in (("span x2", {"span_ghz": 2 * span, "samples": 2 * n}),
                       ("resolution x2", {"samples": 2 * n})):
        f2, _ = evaluate(parse_config({"numerics": num}), cfg.point)
        for name, a, b in (("R", figs.pair_rate, f2.pair_rate), ("g2max", figs.g2si_max, f2.g2si_max),
                           ("FWHM", figs.duration_fwhm, f2.duration_fwhm),
                           ("FWHM+jitter", figs.duration_fwhm_jitter, f2.duration_fwhm_jitter)):
            changes[name] = max(changes.get(name, 0.0), abs(b / a - 1))
    ok = parseval < 1e-9 and all(v < 1e-6 for v in changes.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in changes.items())
    record(3, ok, f"Parseval {parseval:.1e} (< 1e-9); grid-doubling changes {detail} (each < 1e-6)")


def test_4_tradeoff_law():
    t0 = time.perf_counter()
    cfg = load_config(CONFIGS / "drive_grid.toml")
    _, rows, _ = run_sweep(cfg)
    good = [r for r in rows if not r["error"]]
    slope = loglog_slope([float(r["pair_rate_cps"]) for r in good], [float(r["g2si_max"]) for r in good])
    dt = time.perf_counter() - t0
    ok = len(good) == 16 and abs(slope + 1) <= 0.15 and dt < 120
    record(4, ok, f"log-log slope {slope:.3f} (-1 +/- 0.15) over {len(good)}/16 points, {dt:.1f} s (< 120 s)")


def _column(rows, name):
    return np.array([float(r[name]) if r[name] else np.nan for r in rows])


def _interior_argmax(x, y):
    ok = np.isfinite(y)
    i = int(np.nanargmax(y))
    interior = ok[:i].any() and ok[i + 1:].any() and i != np.flatnonzero(ok)[-1]
    return x[i], interior


def test_5_od_trends(calibration):
    cfg = load_config(CONFIGS / "od_sweep.toml")
    _, rows, _ = run_sweep(cfg)
    R, fw = _column(rows, "pair_rate_cps"), _column(rows, "fwhm_ns")
    rising, falling = bool(np.all(np.diff(R) > 0)), bool(np.all(np.diff(fw) < 0))
    ratio = fw[0] / fw[-1]

    cr = load_config(CONFIGS / "constant_rate.toml")
    _, crows, _ = run_sweep(cr, calibration)
    od = _column(crows, "optical_depth")
    eta_at, eta_in = _interior_argmax(od, _column(crows, "heralding_eta"))
    g2_at, g2_in = _interior_argmax(od, _column(crows, "g2si_max"))
    unreachable = [int(o) for o, r in zip(od, crows) if r["error"]]
    ok = (rising and falling and ratio >= 4 and eta_in and 3 <= eta_at <= 7 and g2_in and 6 <= g2_at <= 12)
    record(5, ok, f"R increasing {rising}, FWHM decreasing {falling}, FWHM(1)/FWHM(15) {ratio:.2f} (>= 4); "
                  f"constant R: eta argmax OD {eta_at:g} ([3, 7]), g2max argmax OD {g2_at:g} ([6, 12]); "
                  f"100 kcps unreachable at OD {unreachable}")


def test_6_calibrated_point(cfg, calibration):
    figs, _ = evaluate(cfg, cfg.point, calibration)
    dev = figs.g2si_max / 709 - 1
    record(6, abs(dev) <= 0.25, f"calibrated g2max {figs.g2si_max:.1f} vs 709 ({dev:+.1%}, within +/-25%); "
                                f"c_g {calibration.c_g:.4e}, c_R {calibration.c_R:.4e}, c_eta {calibration.c_eta:.4e}")


def test_7_monte_carlo_closure(cfg, calibration):
    t0 = time.perf_counter()
    figs, wf = evaluate(cfg, cfg.point, calibration)
    tags = ps.generate_tags(figs, wf, 100.0, seed=2024)
    h = ps.estimate_g2(tags, bin_width=100e-12, max_lag=20e-9)
    _, g2, g2_sig = h.peak()
    g2_model = float(ps.model_histogram(figs, wf, h.bin_edges, cfg.jitter_fwhm).max())
    eta, eta_sig = ps.heralding_efficiency_estimate(tags)
    (E,), (E_sig,) = ps.heralded_fraction(tags, [2.5e-9])
    E_model, _ = ps.model_heralded_fraction(wf, 2.5e-9, cfg.jitter_fwhm)
    dt = time.perf_counter() - t0
    z = {"g2max": (g2 - g2_model) / g2_sig, "eta": (eta - figs.heralding_eta) / eta_sig,
         "E_c": (E - E_model) / E_sig}
    closure = all(abs(v) <= 3 for v in z.values())
    bracket = 0.92 <= E_model <= 0.99
    # context only: the drive of the heralded-fraction measurement
    _, wf4 = evaluate(cfg, dict(cfg.point, omega_p_mhz=6.5, omega_c_mhz=30.0), calibration)
    E4, _ = ps.model_heralded_fraction(wf4, 2.5e-9, cfg.jitter_fwhm)
    record(7, closure and bracket and dt < 60,
           f"g2max {g2:.1f} vs {g2_model:.1f} ({z['g2max']:+.2f} sigma), eta {eta:.5f} vs {figs.heralding_eta:.5f} "
           f"({z['eta']:+.2f} sigma), E_c(2.5 ns) {E:.4f} vs {E_model:.4f} ({z['E_c']:+.2f} sigma); "
           f"model E_c(2.5 ns) {E_model:.3f} in [0.92, 0.99]: {bracket} "
           f"(at Omega_p 6.5, Omega_c 30 MHz: {E4:.3f}); {dt:.1f} s (< 60 s)")


def test_8_hom_and_criteria(calibrated_point):
    _, wf = calibrated_point
    psi = np.abs(wf.psi)
    V1 = ps.hom_visibility(ps.hom_coincidence(psi, psi, wf.dt, 0.0)[0])
    V08 = ps.hom_visibility(ps.hom_coincidence(psi, psi, wf.dt, 0.0, purity=0.8)[0])
    like = ps.temporal_likeness(wf.intensity, wf.intensity)
    q1, q2 = ps.qng_check(0.09, 2.5e-5), ps.qng_check(0.09, 1.6e-4)
    cs = ps.cauchy_schwarz_ratio(709, 2, 2)
    ok = V1 == 1 and abs(V08 - 0.8) <= 1e-12 and like == pytest.approx(1, abs=1e-12) and q1 and q2 and cs > 1e5
    record(8, ok, f"V(1) = {float(V1)!r}, V(0.8) - 0.8 = {V08 - 0.8:.1e}, likeness {like:.15f}, "
                  f"QNG {bool(q1)}/{bool(q2)}, Cauchy-Schwarz {cs:.3g}")


def test_9_determinism(tmp_path, calibrated_point):
    figs, wf = calibrated_point
    cfg = parse_config({"sweep": {"outputs": ["R", "g2max", "eta", "fwhm"],
                                  "axis": [{"name": "optical_depth", "min": 5, "max": 9.3, "points": 2}]}})
    for run in ("a", "b"):
        d = tmp_path / run
        ps.generate_tags(figs, wf, 1.0, seed=99, config=cfg.snapshot()).write(d.mkdir() or d / "tags.txt")
        run_sweep(cfg, out_dir=d, threads=2 if run == "b" else 1)
    same_tags = filecmp.cmp(tmp_path / "a/tags.txt", tmp_path / "b/tags.txt", shallow=False)
    same_csv = filecmp.cmp(tmp_path / "a/sweep.csv", tmp_path / "b/sweep.csv", shallow=False)
    record(9, same_tags and same_csv, f"tag files identical {same_tags}, sweep CSVs identical {same_csv} "
                                      "(second sweep run with 2 threads)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s", "-p", "no:cacheprovider"]))
