"""Matplotlib SVG renderings of the CSV outputs.

Figures are written with a fixed hash salt and no date stamp so that
identical data give byte-identical files.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "svg.hashsalt": "fwmsource",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "figure.figsize": (4.2, 3.0),
}
LABELS = {
    "optical_depth": "OD",
    "omega_p_mhz": r"$\Omega_p/2\pi$ (MHz)",
    "omega_c_mhz": r"$\Omega_c/2\pi$ (MHz)",
    "pair_rate_cps": "R (counts/s)",
    "g2si_max": r"$[g^{(2)}_{s-i}]_{max}$",
    "heralding_eta": r"$\eta$",
    "fwhm_ns": "FWHM (ns)",
    "fwhm_jitter_ns": "FWHM with jitter (ns)",
}


def _save(fig, path):
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def line_plot(path, x, ys: dict, xlabel="", ylabel="", logx=False, logy=False, markers=True):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, y in ys.items():
            ax.plot(x, y, "o-" if markers else "-", label=name)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        if len(ys) > 1:
            ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def sweep_plots(out_dir, columns, rows, axis_names) -> list[Path]:
    """One SVG per numeric output column against the first axis."""
    out_dir = Path(out_dir)
    if not axis_names or not rows:
        return []
    x_name = axis_names[0]
    other = axis_names[1:]
    paths = []
    for col in columns:
        if col in axis_names or col == "error" or col.endswith("_file"):
            continue
        groups = {}
        for r in rows:
            key = tuple(r[a] for a in other)
            groups.setdefault(key, ([], []))
            x, y = groups[key]
            x.append(float(r[x_name]))
            y.append(float(r[col]) if r[col] else np.nan)
        ys, xs = {}, None
        for key, (x, y) in groups.items():
            label = ", ".join(f"{a}={v}" for a, v in zip(other, key)) or col
            ys[label] = y
            xs = x
        logy = col in ("pair_rate_cps", "g2si_max")
        paths.append(line_plot(out_dir / f"{col}_vs_{x_name}.svg", xs, ys,
                               LABELS.get(x_name, x_name), LABELS.get(col, col), logy=logy))
    return paths


def tradeoff_plot(path, rates, g2, slope=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(rates, g2, "o")
        if slope is not None:
            r = np.geomspace(min(rates), max(rates), 20)
            k = np.exp(np.mean(np.log(g2) - slope * np.log(rates)))
            ax.loglog(r, k * r ** slope, "--", label=f"slope {slope:.2f}")
            ax.legend(frameon=False)
        ax.set_xlabel(LABELS["pair_rate_cps"])
        ax.set_ylabel(LABELS["g2si_max"])
        fig.tight_layout()
        return _save(fig, path)


def waveform_plot(path, tau, intensity, jittered=None, window=(-2e-9, 8e-9)):
    sel = (tau >= window[0]) & (tau <= window[1])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        peak = intensity.max()
        ax.plot(tau[sel] * 1e9, intensity[sel] / peak, label=r"$|\psi|^2$")
        if jittered is not None:
            ax.plot(tau[sel] * 1e9, jittered[sel] / peak, label="with jitter")
            ax.legend(frameon=False)
        ax.set_xlabel(r"$\tau$ (ns)")
        ax.set_ylabel("normalized intensity")
        fig.tight_layout()
        return _save(fig, path)


def histogram_plot(path, centers, g2, model=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.step(centers * 1e9, g2, where="mid", label="simulated")
        if model is not None:
            ax.plot(centers * 1e9, model, label="model")
            ax.legend(frameon=False)
        ax.set_xlabel(r"$\tau$ (ns)")
        ax.set_ylabel(r"$g^{(2)}_{s-i}(\tau)$")
        fig.tight_layout()
        return _save(fig, path)


def pareto_plot(path, rows):
    """Log-log scatter of rate against cross-correlation; CAR-derived points hollow."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        kinds = sorted({r["source_type"] for r in rows})
        for i, kind in enumerate(kinds):
            color = f"C{i}"
            for est in ("0", "1"):
                sel = [r for r in rows if r["source_type"] == kind and r["estimated_flag"] == est]
                if not sel:
                    continue
                x = [float(r["generation_rate_kcps"]) for r in sel]
                y = [float(r["max_cross_correlation"]) for r in sel]
                ax.scatter(x, y, s=18, edgecolors=color,
                           facecolors="none" if est == "1" else color,
                           label=kind if est == "0" or not any(
                               r["estimated_flag"] == "0" for r in rows if r["source_type"] == kind) else None)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("generation rate (kcps)")
        ax.set_ylabel(LABELS["g2si_max"])
        ax.legend(frameon=False, fontsize=7)
        fig.tight_layout()
        return _save(fig, path)
