"""Parameter sweeps, the constant-rate controller, calibration and source comparison."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources
from itertools import product
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .atoms import DomainError
from .biphoton import (AmbiguityError, BiphotonWaveform, Calibration, ResolutionError,
                       SourceFigures, biphoton_wavefunction, source_figures, write_waveform_csv)
from .config import POINT_DEFAULTS, ConfigError, RunConfig
from .steady_state import SteadyStateError

NUMERIC_ERRORS = (SteadyStateError, ResolutionError, AmbiguityError, DomainError,
                  FloatingPointError, ArithmeticError)

# output name -> CSV columns it contributes
OUTPUT_COLUMNS = {
    "R": ["pair_rate_cps"],
    "g2max": ["g2si_max"],
    "eta": ["heralding_eta"],
    "fwhm": ["fwhm_ns", "fwhm_jitter_ns"],
    "singles": ["singles_s_cps", "singles_i_cps"],
    "waveform": ["waveform_file"],
    "tags": ["tags_file"],
}


class UnreachableRateError(ArithmeticError):
    pass


@dataclass
class PointResult:
    point: dict
    figures: SourceFigures | None = None
    waveform: BiphotonWaveform | None = None
    error: str = ""


def evaluate(cfg: RunConfig, point: dict, calibration: Calibration = Calibration()):
    """Figures and waveform at one parameter point."""
    ens, drv = cfg.ensemble(point), cfg.drive(point)
    wf = biphoton_wavefunction(cfg.grid(ens, drv), ens, drv,
                               chi1_denominator=cfg.numerics["chi1_denominator"],
                               velocity_extent=cfg.numerics["velocity_extent"])
    figs = source_figures(wf, wf.state, ens, calibration, cfg.jitter_fwhm)
    wf.metadata.update({k: point[k] for k in sorted(point)})
    return figs, wf


def solve_constant_rate(cfg: RunConfig, point: dict, target_cps: float,
                        calibration: Calibration = Calibration()):
    """Bisect log(omega_p) so that the calibrated pair rate equals ``target_cps``.

    The rate grows monotonically with the pump Rabi frequency at fixed control,
    so a sign change of log(R/target) on the bracket identifies the root.
    Returns (omega_p_mhz, figures, waveform).
    """
    lo, hi = cfg.sweep["omega_p_bracket_mhz"]

    def resid(log_op):
        p = dict(point, omega_p_mhz=math.exp(log_op))
        return math.log(evaluate(cfg, p, calibration)[0].pair_rate / target_cps)

    a, b = math.log(lo), math.log(hi)
    fa, fb = resid(a), resid(b)
    if fa * fb > 0:
        raise UnreachableRateError(
            f"target {target_cps:.4g} cps outside the rate range over omega_p in [{lo}, {hi}] MHz")
    x = brentq(resid, a, b, xtol=1e-9, rtol=1e-12)
    op = math.exp(x)
    figs, wf = evaluate(cfg, dict(point, omega_p_mhz=op), calibration)
    if abs(figs.pair_rate / target_cps - 1) > cfg.sweep["rate_tolerance"]:
        raise UnreachableRateError(f"controller reached {figs.pair_rate:.4g} cps, target {target_cps:.4g}")
    return op, figs, wf


def grid_points(cfg: RunConfig) -> list[dict]:
    """Cartesian product of the axes in declaration order (last axis fastest)."""
    if not cfg.axes:
        return [dict(cfg.point)]
    out = []
    for combo in product(*[a.values() for a in cfg.axes]):
        p = dict(cfg.point)
        p.update({a.name: float(v) for a, v in zip(cfg.axes, combo)})
        out.append(p)
    return out


def sweep_columns(cfg: RunConfig) -> list[str]:
    cols = [a.name for a in cfg.axes]
    if cfg.sweep["constant_rate_kcps"] is not None:
        cols.append("omega_p_mhz")
    for name in cfg.sweep["outputs"]:
        cols += OUTPUT_COLUMNS[name]
    return cols + ["error"]


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{float(x):.10g}"


def _row(cfg: RunConfig, res: PointResult, index: int, out_dir: Path | None, seed: int) -> dict:
    row = {a.name: _fmt(res.point[a.name]) for a in cfg.axes}
    if cfg.sweep["constant_rate_kcps"] is not None:
        row["omega_p_mhz"] = _fmt(res.point.get("omega_p_mhz")) if not res.error else ""
    f = res.figures
    vals = {}
    if f is not None:
        vals = {
            "pair_rate_cps": f.pair_rate, "g2si_max": f.g2si_max, "heralding_eta": f.heralding_eta,
            "fwhm_ns": f.duration_fwhm * 1e9, "fwhm_jitter_ns": f.duration_fwhm_jitter * 1e9,
            "singles_s_cps": f.singles_s, "singles_i_cps": f.singles_i,
        }
        if out_dir is not None and "waveform" in cfg.sweep["outputs"]:
            name = f"waveform_{index:04d}.csv"
            write_waveform_csv(out_dir / name, res.waveform)
            vals["waveform_file"] = name
        if out_dir is not None and "tags" in cfg.sweep["outputs"]:
            from .photon_stats import generate_tags
            name = f"tags_{index:04d}.txt"
            generate_tags(f, res.waveform, cfg.tags["duration_s"], seed + index,
                          cfg.tags["background_cps"], cfg.jitter_fwhm,
                          {"point": res.point}).write(out_dir / name)
            vals["tags_file"] = name
    for name in cfg.sweep["outputs"]:
        for col in OUTPUT_COLUMNS[name]:
            row[col] = _fmt(vals.get(col))
    row["error"] = res.error
    return row


def _run_point(cfg, point, calibration):
    target = cfg.sweep["constant_rate_kcps"]
    try:
        if target is not None:
            op, figs, wf = solve_constant_rate(cfg, point, target * 1e3, calibration)
            point = dict(point, omega_p_mhz=op)
        else:
            figs, wf = evaluate(cfg, point, calibration)
        keep = {"waveform", "tags"} & set(cfg.sweep["outputs"])
        return PointResult(point, figs, wf if keep else None)
    except NUMERIC_ERRORS as exc:
        return PointResult(point, error=f"{type(exc).__name__}: {exc}".replace("\n", " "))


def run_sweep(cfg: RunConfig, calibration: Calibration = Calibration(), out_dir=None,
              threads: int = 1, seed: int = 0):
    """Evaluate every grid point; returns (columns, rows, results) in grid order.

    Failures at a point are caught and reported in the ``error`` column.
    Rows are written in grid order whatever the completion order.
    """
    pts = grid_points(cfg)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda p: _run_point(cfg, p, calibration), pts))
    else:
        results = [_run_point(cfg, p, calibration) for p in pts]
    cols = sweep_columns(cfg)
    rows = [_row(cfg, r, i, out, seed) for i, r in enumerate(results)]
    if out is not None:
        write_csv(out / "sweep.csv", cols, rows)
    return cols, rows, results


def write_csv(path, columns, rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    Path(path).write_text(buf.getvalue())
    return path


def loglog_slope(x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


# ----------------------------------------------------------------------------
# Calibration
# ----------------------------------------------------------------------------

FIGURE_SCALAR = {"g2max": "c_g", "R": "c_R", "eta": "c_eta"}
REFERENCE_COLUMNS = ("figure", "value")


@dataclass
class ReferencePoint:
    figure: str
    value: float
    point: dict
    target_rate_kcps: float | None = None
    label: str = ""


def read_reference_csv(path) -> list[ReferencePoint]:
    """Rows of (figure, value, parameter columns...). R values are in counts/s.

    A row may leave omega_p_mhz empty and give target_rate_kcps instead; the
    pump is then solved for that calibrated rate once c_R is known.
    """
    refs = []
    with Path(path).open(newline="") as fh:
        rd = csv.DictReader(row for row in fh if not row.startswith("#"))
        missing = set(REFERENCE_COLUMNS) - set(rd.fieldnames or ())
        if missing:
            raise ConfigError(f"reference file lacks column(s) {sorted(missing)}")
        for i, row in enumerate(rd):
            fig = row["figure"].strip()
            if fig not in FIGURE_SCALAR:
                raise ConfigError(f"row {i}: figure must be one of {sorted(FIGURE_SCALAR)}")
            point = {}
            for k in POINT_DEFAULTS:
                v = (row.get(k) or "").strip()
                if v:
                    point[k] = float(v)
            tgt = (row.get("target_rate_kcps") or "").strip()
            if "omega_p_mhz" not in point and not tgt:
                raise ConfigError(f"row {i}: give omega_p_mhz or target_rate_kcps")
            refs.append(ReferencePoint(fig, float(row["value"]), point,
                                       float(tgt) if tgt else None, (row.get("label") or "").strip()))
    return refs


def calibrate(cfg: RunConfig, references: list[ReferencePoint], free=("c_g", "c_R", "c_eta"),
              fixed: Calibration = Calibration()):
    """Least-squares fit of the log rescaling factors.

    Each calibrated figure is its scalar times the model value, so the
    log-space problem separates: log c = mean(log measured - log model) over
    that figure's rows. c_R is fitted first because constant-rate rows need it.
    Returns (Calibration, residual rows).
    """
    if not references:
        raise ConfigError("empty reference set")
    free = tuple(free)
    for name in free:
        if name not in FIGURE_SCALAR.values():
            raise ConfigError(f"unknown scalar {name!r}")
        fig = next(k for k, v in FIGURE_SCALAR.items() if v == name)
        if not any(r.figure == fig for r in references):
            raise ConfigError(f"underdetermined: no reference rows constrain {name}")
    cal = fixed
    resolved = {}

    def model_value(ref, c):
        pt = dict(cfg.point, **ref.point)
        if ref.target_rate_kcps is not None:
            op, f, _ = solve_constant_rate(cfg, pt, ref.target_rate_kcps * 1e3, c)
            pt["omega_p_mhz"] = op
        else:
            f, _ = evaluate(cfg, pt, c)
        resolved[id(ref)] = pt
        # uncalibrated model value of the reference figure
        return {"g2max": f.g2si_max / c.c_g, "R": f.pair_rate / c.c_R,
                "eta": f.heralding_eta / c.c_eta}[ref.figure]

    for fig in ("R", "g2max", "eta"):
        name = FIGURE_SCALAR[fig]
        rows = [r for r in references if r.figure == fig]
        if name not in free or not rows:
            continue
        logs = [math.log(r.value) - math.log(model_value(r, cal)) for r in rows]
        cal = replace(cal, **{name: math.exp(float(np.mean(logs)))})

    report = []
    for r in references:
        m = model_value(r, cal) * getattr(cal, FIGURE_SCALAR[r.figure])
        report.append({"figure": r.figure, "label": r.label, "measured": r.value, "model": m,
                       "log_residual": math.log(r.value / m), "point": resolved[id(r)]})
    return cal, report


def write_calibration(path, cal: Calibration, report, reference_name=""):
    data = {"c_g": cal.c_g, "c_R": cal.c_R, "c_eta": cal.c_eta, "reference": reference_name,
            "residuals": report}
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def bundled_reference_points() -> Path:
    return Path(str(resources.files("fwmsource.data").joinpath("reference_points.csv")))


# ----------------------------------------------------------------------------
# Source comparison
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SourceComparisonRecord:
    reference: str
    source_type: str
    generation_rate_kcps: float
    max_cross_correlation: float
    estimated_flag: bool = False
    representative_flag: bool = False

    def __post_init__(self):
        if not self.generation_rate_kcps > 0:
            raise ValueError("generation rate must be positive")
        if self.max_cross_correlation < 1:
            raise ValueError("cross-correlation must be >= 1")


PARETO_COLUMNS = ["reference", "source_type", "generation_rate_kcps", "max_cross_correlation",
                  "estimated_flag", "representative_flag"]


def load_table_s1(path=None) -> list[SourceComparisonRecord]:
    path = Path(path) if path else Path(str(resources.files("fwmsource.data").joinpath("table_s1.csv")))
    out = []
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(SourceComparisonRecord(
                row["reference"], row["source_type"], float(row["generation_rate_kcps"]),
                float(row["max_cross_correlation"]), row["estimated_flag"] == "1",
                row["representative_flag"] == "1"))
    return out


def pareto_rows(records, this_work: SourceComparisonRecord | None = None) -> list[dict]:
    recs = list(records) + ([this_work] if this_work is not None else [])
    return [{
        "reference": r.reference, "source_type": r.source_type,
        "generation_rate_kcps": _fmt(r.generation_rate_kcps),
        "max_cross_correlation": _fmt(r.max_cross_correlation),
        "estimated_flag": str(int(r.estimated_flag)),
        "representative_flag": str(int(r.representative_flag)),
    } for r in recs]
