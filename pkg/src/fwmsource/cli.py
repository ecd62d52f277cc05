"""Command-line interface: ``fwmsource {sweep,calibrate,waveform,tags,pareto,check}``.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import photon_stats as ps
from .biphoton import convolve_jitter, write_waveform_csv
from .config import ConfigError, load_calibration, load_config
from .sweep import (NUMERIC_ERRORS, PARETO_COLUMNS, SourceComparisonRecord, bundled_reference_points,
                    calibrate, evaluate, load_table_s1, loglog_slope, pareto_rows, read_reference_csv,
                    run_sweep, write_calibration, write_csv)

log = logging.getLogger("fwmsource")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, default=float) + "\n")


def cmd_sweep(args) -> int:
    from .plotting import sweep_plots, tradeoff_plot
    cfg = load_config(args.config)
    cal = load_calibration(args.calibration)
    out = _out_dir(args)
    cols, rows, _ = run_sweep(cfg, cal, out, threads=args.threads, seed=args.seed)
    failed = sum(1 for r in rows if r["error"])
    log.info("wrote %d rows to %s (%d with errors)", len(rows), out / "sweep.csv", failed)
    if cfg.sweep["plot"]:
        names = [a.name for a in cfg.axes]
        if cfg.sweep["constant_rate_kcps"] is not None:
            cols = [c for c in cols if c != "omega_p_mhz"] + ["omega_p_mhz"]
        sweep_plots(out, cols, rows, names)
        # the trade-off slope is meaningless when R is pinned
        if {"pair_rate_cps", "g2si_max"} <= set(cols) and cfg.sweep["constant_rate_kcps"] is None:
            good = [r for r in rows if not r["error"]]
            if len(good) >= 2:
                R = [float(r["pair_rate_cps"]) for r in good]
                g = [float(r["g2si_max"]) for r in good]
                slope = loglog_slope(R, g)
                tradeoff_plot(out / "g2max_vs_rate.svg", R, g, slope)
                print(f"log-log slope of g2max vs R: {slope:.4f}")
    print(out / "sweep.csv")
    return EXIT_OK if failed == 0 else EXIT_NUMERIC


def cmd_calibrate(args) -> int:
    cfg = load_config(args.config)
    ref_path = args.reference or bundled_reference_points()
    refs = read_reference_csv(ref_path)
    free = tuple(s.strip() for s in args.free.split(",") if s.strip())
    cal, report = calibrate(cfg, refs, free)
    out = _out_dir(args)
    path = write_calibration(out / "calibration.json", cal, report, Path(ref_path).name)
    for r in report:
        print(f"{r['figure']:>6}  measured {r['measured']:.6g}  model {r['model']:.6g}  "
              f"log residual {r['log_residual']:+.3e}")
    print(path)
    return EXIT_OK


def cmd_waveform(args) -> int:
    from .plotting import waveform_plot
    cfg = load_config(args.config)
    cal = load_calibration(args.calibration)
    out = _out_dir(args)
    figs, wf = evaluate(cfg, cfg.point, cal)
    write_waveform_csv(out / "waveform.csv", wf)
    _dump_json(out / "figures.json", figs.as_dict())
    jit = convolve_jitter(wf, cfg.jitter_fwhm) if cfg.jitter_fwhm > 0 else None
    waveform_plot(out / "waveform.svg", wf.tau, wf.intensity, jit)
    print(json.dumps(figs.as_dict(), indent=2, sort_keys=True, default=float))
    return EXIT_OK


def tag_summary(tags, figs, wf, cfg) -> dict:
    t = cfg.tags
    h = ps.estimate_g2(tags, bin_width=t["bin_ps"] * 1e-12)
    pos, peak, sig = h.peak()
    model = ps.model_histogram(figs, wf, h.bin_edges, cfg.jitter_fwhm)
    eta, eta_sig = ps.heralding_efficiency_estimate(tags)
    windows = np.asarray(t["windows_ns"], float) * 1e-9
    E, E_sig = ps.heralded_fraction(tags, windows, t["placement"])
    out = {
        "seed": tags.seed, "duration_s": tags.duration,
        "counts": {"idler": tags.count(ps.IDLER), "signal_1": tags.count(ps.SIGNAL_1),
                   "signal_2": tags.count(ps.SIGNAL_2)},
        "g2_peak": peak, "g2_peak_sigma": sig, "g2_peak_tau_ns": pos * 1e9,
        "model_g2_peak": float(model.max()),
        "eta": eta, "eta_sigma": eta_sig, "model_eta": figs.heralding_eta,
        "E_c_curve": [{"window_ns": w * 1e9, "E_c": e, "sigma": s} for w, e, s in zip(windows, E, E_sig)],
    }
    try:
        hs = ps.conditional_autocorrelation(tags, t["window_ns"] * 1e-9, t["placement"])
        out.update({"g_c": hs.g_c, "window_ns": hs.window * 1e9, "window_start_ns": hs.window_start * 1e9,
                    "E_c": hs.E_c, "P_s": hs.P_s, "P_c": hs.P_c,
                    "qng": bool(ps.qng_check(hs.P_s, hs.P_c)) if hs.P_c <= hs.P_s else None})
    except ps.InsufficientDataError as exc:
        out["g_c"] = None
        out["g_c_error"] = str(exc)
    return out


def cmd_tags(args) -> int:
    from .plotting import histogram_plot
    cfg = load_config(args.config)
    cal = load_calibration(args.calibration)
    out = _out_dir(args)
    figs, wf = evaluate(cfg, cfg.point, cal)
    tags = ps.generate_tags(figs, wf, cfg.tags["duration_s"], args.seed, cfg.tags["background_cps"],
                            cfg.jitter_fwhm, cfg.snapshot())
    tags.write(out / "tags.txt")
    summary = tag_summary(tags, figs, wf, cfg)
    _dump_json(out / "summary.json", summary)
    h = ps.estimate_g2(tags, bin_width=cfg.tags["bin_ps"] * 1e-12, max_lag=5e-9)
    histogram_plot(out / "g2_histogram.svg", h.centers, h.g2,
                   ps.model_histogram(figs, wf, h.bin_edges, cfg.jitter_fwhm))
    print(out / "tags.txt")
    return EXIT_OK


def cmd_pareto(args) -> int:
    from .plotting import pareto_plot
    records = load_table_s1(args.dataset)
    this = None
    if args.rate_kcps is not None and args.g2 is not None:
        this = SourceComparisonRecord("model", "Hot vapor (model)", args.rate_kcps, args.g2)
    elif args.calibration is not None:
        cfg = load_config(args.config)
        figs, _ = evaluate(cfg, cfg.point, load_calibration(args.calibration))
        this = SourceComparisonRecord("model", "Hot vapor (model)", figs.pair_rate / 1e3, figs.g2si_max)
    rows = pareto_rows(records, this)
    out = _out_dir(args)
    write_csv(out / "pareto.csv", PARETO_COLUMNS, rows)
    if rows:
        pareto_plot(out / "pareto.svg", rows)
    print(out / "pareto.csv")
    return EXIT_OK


def cmd_check(args) -> int:
    from .checks import run_checks
    cfg = load_config(args.config)
    results = run_checks(cfg, seed=args.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--calibration", help="calibration JSON written by 'calibrate'")
    common.add_argument("--out", default="out", help="output directory (default: ./out)")
    common.add_argument("--seed", type=int, default=0, help="64-bit RNG seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="fwmsource", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("sweep", parents=[common], help="parameter sweep to CSV and SVG").set_defaults(func=cmd_sweep)
    c = sub.add_parser("calibrate", parents=[common], help="fit the three rescaling factors")
    c.add_argument("--reference", help="reference CSV (default: bundled anchors)")
    c.add_argument("--free", default="c_g,c_R,c_eta", help="comma-separated scalars to fit")
    c.set_defaults(func=cmd_calibrate)
    sub.add_parser("waveform", parents=[common], help="bi-photon waveform at the config point") \
        .set_defaults(func=cmd_waveform)
    sub.add_parser("tags", parents=[common], help="simulate time tags and run the estimators") \
        .set_defaults(func=cmd_tags)
    pa = sub.add_parser("pareto", parents=[common], help="source comparison table and scatter")
    pa.add_argument("--dataset", help="comparison CSV (default: bundled table)")
    pa.add_argument("--rate-kcps", type=float, help="rate of the point to add")
    pa.add_argument("--g2", type=float, help="cross-correlation peak of the point to add")
    pa.set_defaults(func=cmd_pareto)
    sub.add_parser("check", parents=[common], help="run the invariant suite").set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1 or not 0 <= args.seed < 2 ** 64:
        print("error: --threads must be >= 1 and --seed a 64-bit unsigned integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS + (ps.InconsistencyError, ps.InsufficientDataError) as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
