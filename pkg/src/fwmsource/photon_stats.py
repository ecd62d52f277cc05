"""Seeded time-tag simulation and photon-correlation estimators.

Channel ids follow the detection layout of a heralded source with a 50:50
splitter on the signal arm: 0 = idler (herald), 1 and 2 = signal outputs.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .atoms import DomainError
from .biphoton import (BiphotonWaveform, SourceFigures, convolve_jitter, sech_width,
                       DEFAULT_JITTER_FWHM)

IDLER, SIGNAL_1, SIGNAL_2 = 0, 1, 2
SIGNALS = (SIGNAL_1, SIGNAL_2)
PS = 1e-12


class InconsistencyError(ValueError):
    """Rates that cannot describe one physical source (e.g. R above a singles rate)."""


class InsufficientDataError(ValueError):
    pass


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class TagStream:
    """Time-ordered detector clicks with integer picosecond timestamps."""

    channels: np.ndarray  # uint8
    timestamps_ps: np.ndarray  # uint64
    duration: float
    seed: int
    config: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.uint8)
        self.timestamps_ps = np.asarray(self.timestamps_ps, dtype=np.uint64)
        if self.channels.shape != self.timestamps_ps.shape:
            raise ValueError("channels and timestamps differ in length")
        if self.timestamps_ps.size:
            if np.any(np.diff(self.timestamps_ps.astype(np.int64)) < 0):
                raise ValueError("timestamps must be non-decreasing")
            if self.timestamps_ps[-1] > round(self.duration / PS):
                raise ValueError("timestamp beyond stream duration")

    def __len__(self):
        return self.timestamps_ps.size

    def ticks(self, channel) -> np.ndarray:
        """Click times in integer picoseconds for one channel or a tuple of channels, sorted."""
        chans = (channel,) if np.isscalar(channel) else tuple(sorted(channel))
        key = ("ticks", chans)
        if key not in self._cache:
            sel = np.isin(self.channels, chans)
            self._cache[key] = self.timestamps_ps[sel].astype(np.int64)
        return self._cache[key]

    def times(self, channel) -> np.ndarray:
        """Click times in seconds for one channel or a tuple of channels, sorted."""
        return self.ticks(channel) * PS

    def delay_ticks(self, start, stop, lo: float, hi: float) -> np.ndarray:
        """Sorted t_stop - t_start in integer ps over all click pairs with the difference in [lo, hi).

        Working on ticks keeps every comparison exact, so the results do not
        depend on the absolute time of the clicks.
        """
        key = ("delays", start, stop, to_ticks(lo), to_ticks(hi))
        if key not in self._cache:
            d = pair_delays(self.ticks(start), self.ticks(stop), key[3], key[4])
            d.sort()
            self._cache[key] = d
        return self._cache[key]

    def delays(self, start, stop, lo: float, hi: float) -> np.ndarray:
        """As ``delay_ticks`` in seconds."""
        return self.delay_ticks(start, stop, lo, hi) * PS

    def count(self, channel) -> int:
        return int(self.ticks(channel).size)

    def shifted(self, offset_ps: int) -> "TagStream":
        """Copy with every timestamp moved by a non-negative offset."""
        if offset_ps < 0:
            raise ValueError("offset must be non-negative")
        return TagStream(self.channels.copy(), self.timestamps_ps + np.uint64(offset_ps),
                         self.duration + offset_ps * PS, self.seed, dict(self.config))

    def write(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="\n") as fh:
            fh.write(f"# seed = {self.seed}\n")
            fh.write(f"# duration_ps = {round(self.duration / PS)}\n")
            fh.write(f"# config_hash = {config_hash(self.config)}\n")
            fh.write(f"# config = {json.dumps(self.config, sort_keys=True)}\n")
            lines = np.char.add(np.char.add(self.channels.astype(str), " "),
                                self.timestamps_ps.astype(str))
            if lines.size:
                fh.write("\n".join(lines.tolist()))
                fh.write("\n")
        return path

    @classmethod
    def read(cls, path) -> "TagStream":
        header = {}
        with Path(path).open() as fh:
            body = []
            for line in fh:
                if line.startswith("#"):
                    k, _, v = line[1:].partition("=")
                    header[k.strip()] = v.strip()
                else:
                    body.append(line)
        try:
            seed = int(header["seed"])
            duration = int(header["duration_ps"]) * PS
        except KeyError as exc:
            raise ValueError(f"tag file header lacks {exc}") from None
        config = json.loads(header.get("config", "{}"))
        if "config_hash" in header and header["config_hash"] != config_hash(config):
            raise ValueError("config hash does not match the embedded config")
        if body:
            arr = np.loadtxt(body, dtype=np.uint64, ndmin=2)
            ch, ts = arr[:, 0].astype(np.uint8), arr[:, 1]
        else:
            ch, ts = np.empty(0, np.uint8), np.empty(0, np.uint64)
        return cls(ch, ts, duration, seed, config)


# ----------------------------------------------------------------------------
# Simulation
# ----------------------------------------------------------------------------

def sample_sech(rng: np.random.Generator, n: int, fwhm: float) -> np.ndarray:
    """Draws from the unit-area sech(t/t0)/(pi t0) density by inverse CDF."""
    if fwhm == 0:
        return np.zeros(n)
    u = rng.random(n)
    return sech_width(fwhm) * np.log(np.tan(0.5 * math.pi * u))


def sample_delays(rng: np.random.Generator, n: int, waveform: BiphotonWaveform) -> np.ndarray:
    """Signal-idler delays with density |psi|^2 / R, piecewise constant per sample."""
    p = waveform.intensity
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(n), side="right")
    idx = np.minimum(idx, len(p) - 1)
    return waveform.tau[idx] + (rng.random(n) - 0.5) * waveform.dt


def generate_tags(figures: SourceFigures, waveform: BiphotonWaveform, duration: float, seed: int,
                  background_rates=(0.0, 0.0, 0.0), jitter_fwhm: float = DEFAULT_JITTER_FWHM,
                  config: dict | None = None) -> TagStream:
    """Monte-Carlo clicks consistent with the model rates.

    Pairs arrive as a Poisson process at rate R with delay density |psi|^2/R.
    Unpaired singles fill the idler and signal arms up to N_i and N_s, and
    ``background_rates`` adds Poisson noise per channel (idler, s1, s2).
    Detection jitter is applied to the signal clicks only, with the combined
    (two-detector plus tagger) width, so the delay histogram is |psi|^2
    convolved with one sech kernel. The signal is split 50:50.
    """
    R, Ns, Ni = figures.pair_rate, figures.singles_s, figures.singles_i
    if not all(np.isfinite([R, Ns, Ni])) or min(R, Ns, Ni) < 0:
        raise InconsistencyError("rates must be finite and non-negative")
    if R > min(Ns, Ni) * (1 + 1e-12):
        raise InconsistencyError(f"pair rate {R:.4g} exceeds a singles rate (N_s={Ns:.4g}, N_i={Ni:.4g})")
    if duration <= 0:
        raise ValueError("duration must be positive")
    bg = np.broadcast_to(np.asarray(background_rates, dtype=float), (3,))
    if np.any(bg < 0):
        raise ValueError("background rates must be non-negative")
    rng = np.random.default_rng(seed)

    n_pair = rng.poisson(R * duration) if R > 0 else 0
    t_pair = rng.random(n_pair) * duration
    t_sig = t_pair + sample_delays(rng, n_pair, waveform) + sample_sech(rng, n_pair, jitter_fwhm)
    t_idl = t_pair

    def poisson_times(rate):
        return rng.random(rng.poisson(rate * duration)) * duration

    idl = np.concatenate([t_idl, poisson_times(max(Ni - R, 0.0))])
    sig = np.concatenate([t_sig, poisson_times(max(Ns - R, 0.0))])
    sig_ch = np.where(rng.random(sig.size) < 0.5, SIGNAL_1, SIGNAL_2)
    extra = [poisson_times(bg[c]) for c in range(3)]

    times = np.concatenate([idl, sig] + extra)
    chans = np.concatenate([np.full(idl.size, IDLER), sig_ch]
                           + [np.full(e.size, c) for c, e in enumerate(extra)]).astype(np.uint8)
    ps = np.round(times / PS)
    keep = (ps >= 0) & (ps <= round(duration / PS))
    ps, chans = ps[keep].astype(np.uint64), chans[keep]
    order = np.argsort(ps * np.uint64(4) + chans, kind="stable")
    snapshot = dict(config or {})
    snapshot.update({"pair_rate": R, "singles_s": Ns, "singles_i": Ni,
                     "background_rates": bg.tolist(), "jitter_fwhm": jitter_fwhm})
    return TagStream(chans[order], ps[order], duration, int(seed), snapshot)


# ----------------------------------------------------------------------------
# Estimators
# ----------------------------------------------------------------------------

def to_ticks(t: float) -> int:
    """Seconds to the nearest integer picosecond."""
    return int(round(t / PS))


def pair_delays(t_start: np.ndarray, t_stop: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """All differences t_stop - t_start falling in [lo, hi). Both inputs sorted."""
    a = np.searchsorted(t_stop, t_start + lo, side="left")
    b = np.searchsorted(t_stop, t_start + hi, side="left")
    n = b - a
    total = int(n.sum())
    if total == 0:
        return np.empty(0, dtype=t_stop.dtype)
    start_idx = np.repeat(np.arange(t_start.size), n)
    offs = np.arange(total) - np.repeat(np.cumsum(n) - n, n)
    return t_stop[np.repeat(a, n) + offs] - t_start[start_idx]


@dataclass
class CorrelationHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    baseline: float  # accidental coincidences expected per bin

    @property
    def centers(self):
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def g2(self):
        return self.counts / self.baseline

    @property
    def g2_sigma(self):
        return np.sqrt(np.maximum(self.counts, 1)) / self.baseline

    def peak(self):
        """(position, value, one-sigma) of the highest bin."""
        i = int(np.argmax(self.counts))
        return self.centers[i], self.g2[i], self.g2_sigma[i]


def estimate_g2(tags: TagStream, channels=(IDLER, SIGNALS), bin_width: float = 50e-12,
                max_lag: float = 20e-9) -> CorrelationHistogram:
    """Histogram of t2 - t1 normalised by the accidental baseline N1 N2 dt / T."""
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    t1, t2 = tags.times(channels[0]), tags.times(channels[1])
    if t1.size == 0 or t2.size == 0:
        raise InsufficientDataError("a channel of the pair has no clicks")
    nb = int(round(2 * max_lag / bin_width))
    edges = (np.arange(nb + 1) - nb / 2) * bin_width
    d = tags.delay_ticks(channels[0], channels[1], -max_lag, max_lag)
    counts = np.diff(np.searchsorted(d, np.round(edges / PS), "left"))
    baseline = t1.size * t2.size * bin_width / tags.duration
    return CorrelationHistogram(edges, counts, baseline)


@dataclass
class HeraldedStats:
    N_i: float
    N_is1: float
    N_is2: float
    N_is1s2: float
    g_c: float
    window: float
    window_start: float
    E_c: float
    P_s: float
    P_c: float


def _window_start(tags, window, placement, reference, bin_width=10e-12):
    if placement == "peak":
        h = estimate_g2(tags, (IDLER, SIGNALS), bin_width, max(abs(reference[0]), reference[1]))
        return float(h.peak()[0] - 0.5 * bin_width)
    if placement == "max":
        # start (on a bin_width lattice) of the window holding the most coincidences
        d = tags.delay_ticks(IDLER, SIGNALS, *reference)
        starts = np.arange(reference[0], reference[1] - window, bin_width)
        if starts.size == 0:
            return float(reference[0])
        lo, w = np.round(starts / PS), to_ticks(window)
        inside = np.searchsorted(d, lo + w, "left") - np.searchsorted(d, lo, "left")
        return float(starts[int(np.argmax(inside))])
    return float(placement)


def heralded_counts(tags: TagStream, start: float, window: float):
    """Per-herald click counts in each signal channel for the window [start, start+window)."""
    ti = tags.ticks(IDLER)
    lo, hi = to_ticks(start), to_ticks(start + window)
    out = []
    for ch in SIGNALS:
        ts = tags.ticks(ch)
        out.append(np.searchsorted(ts, ti + hi, "left") - np.searchsorted(ts, ti + lo, "left"))
    return ti.size, out[0], out[1]


def _heralded_fraction_at(tags, window, start, reference, accidental_rate):
    lo, hi = reference
    d = tags.delay_ticks(IDLER, SIGNALS, lo, hi)
    total = d.size
    inside = int(np.searchsorted(d, to_ticks(start + window), "left") - np.searchsorted(d, to_ticks(start), "left"))
    num = inside - accidental_rate * window
    den = total - accidental_rate * (hi - lo)
    if den <= 0:
        raise InsufficientDataError("no heralded coincidences in the reference window")
    return num / den, den


def accidental_rate(tags: TagStream) -> float:
    """Expected accidental idler-signal coincidences per second of window width."""
    return tags.count(IDLER) * tags.count(SIGNALS) / tags.duration


def conditional_autocorrelation(tags: TagStream, window: float = 2.5e-9, placement="max",
                                reference=(-20e-9, 40e-9)) -> HeraldedStats:
    """Heralded g_c(0; window) with a 50:50-split signal, plus E_c, P_s and P_c.

    ``placement`` sets where the window starts relative to the herald:
    "max" puts it where it holds the most coincidences, "peak" starts it at
    the histogram peak, and a number is used as the start time directly.
    """
    start = _window_start(tags, window, placement, reference)
    n_i, c1, c2 = heralded_counts(tags, start, window)
    if n_i == 0:
        raise InsufficientDataError("no heralding clicks")
    N1, N2, N12 = float(c1.sum()), float(c2.sum()), float((c1 * c2).sum())
    if N1 == 0 or N2 == 0:
        raise InsufficientDataError("zero two-fold coincidences; g_c undefined")
    g_c = N12 * n_i / (N1 * N2)
    E_c, _ = _heralded_fraction_at(tags, window, start, reference, accidental_rate(tags))
    T = tags.duration
    P_c = N12 / n_i
    P_s = (N1 + N2 - 2 * N12) / n_i
    return HeraldedStats(n_i / T, N1 / T, N2 / T, N12 / T, g_c, window, start, E_c, P_s, P_c)


def heralded_fraction(tags: TagStream, windows, placement="max", reference=(-20e-9, 40e-9)):
    """E_c over a grid of window widths, accidental-subtracted.

    Returns (E_c, sigma) arrays; sigma is the binomial error of each fraction.
    """
    acc = accidental_rate(tags)
    E, S = [], []
    for w in np.asarray(windows, dtype=float):
        if w == 0:
            E.append(0.0)
            S.append(0.0)
            continue
        start = _window_start(tags, w, placement, reference)
        e, den = _heralded_fraction_at(tags, w, start, reference, acc)
        E.append(e)
        S.append(math.sqrt(max(e * (1 - e), 0.0) / den))
    return np.array(E), np.array(S)


def heralding_efficiency_estimate(tags: TagStream, reference=(-20e-9, 40e-9)):
    """(eta, sigma): accidental-subtracted coincidences per idler click."""
    n_i = tags.count(IDLER)
    if n_i == 0:
        raise InsufficientDataError("no idler clicks")
    lo, hi = reference
    c = tags.delays(IDLER, SIGNALS, lo, hi).size
    acc = accidental_rate(tags) * (hi - lo)
    return (c - acc) / n_i, math.sqrt(c + acc) / n_i


def model_histogram(figures: SourceFigures, waveform: BiphotonWaveform, bin_edges,
                    jitter_fwhm: float = DEFAULT_JITTER_FWHM) -> np.ndarray:
    """Expected normalised g2 per bin for streams drawn by ``generate_tags`` (no background)."""
    conv = convolve_jitter(waveform, jitter_fwhm)
    cdf = np.concatenate([[0.0], np.cumsum(conv) * waveform.dt])
    cdf /= cdf[-1]
    edges_tau = np.concatenate([waveform.tau - 0.5 * waveform.dt, [waveform.tau[-1] + 0.5 * waveform.dt]])
    frac = np.diff(np.interp(bin_edges, edges_tau, cdf))
    width = np.diff(bin_edges)
    Ns, Ni, R = figures.singles_s, figures.singles_i, figures.pair_rate
    return 1.0 + R * frac / (Ns * Ni * width)


def model_heralded_fraction(waveform: BiphotonWaveform, window: float,
                            jitter_fwhm: float = DEFAULT_JITTER_FWHM, reference=(-20e-9, 40e-9)):
    """Expected accidental-subtracted E_c for the window holding the most pairs.

    Returns (E_c, window_start).
    """
    conv = convolve_jitter(waveform, jitter_fwhm)
    edges = np.concatenate([waveform.tau - 0.5 * waveform.dt, [waveform.tau[-1] + 0.5 * waveform.dt]])
    cdf = np.concatenate([[0.0], np.cumsum(conv)])

    def mass(a, b):
        return np.interp(b, edges, cdf) - np.interp(a, edges, cdf)

    starts = np.arange(reference[0], reference[1] - window, waveform.dt)
    inside = mass(starts, starts + window)
    i = int(np.argmax(inside))
    return float(inside[i] / mass(*reference)), float(starts[i])


# ----------------------------------------------------------------------------
# Closed-form checks
# ----------------------------------------------------------------------------

def cauchy_schwarz_ratio(g2si_max: float, g_ss0: float = 2.0, g_ii0: float = 2.0) -> float:
    """[g2_si]^2 / (g_ss g_ii); values above 1 violate the classical bound."""
    if min(g2si_max, g_ss0, g_ii0) < 1:
        raise DomainError("correlation values must be >= 1")
    return g2si_max ** 2 / (g_ss0 * g_ii0)


def temporal_likeness(G1, G2) -> float:
    """|int sqrt(G1 G2)|^2 / (int G1 int G2) on a common grid."""
    G1 = np.asarray(G1, dtype=float)
    G2 = np.asarray(G2, dtype=float)
    if G1.shape != G2.shape:
        raise ValueError("inputs must share one grid")
    if np.any(G1 < 0) or np.any(G2 < 0):
        raise DomainError("intensities must be non-negative")
    a, b = G1.sum(), G2.sum()
    if a == 0 or b == 0:
        raise DomainError("zero-integral input")
    return float(np.sum(np.sqrt(G1 * G2)) ** 2 / (a * b))


def overlap(psi1, psi2, dt: float, delay: float = 0.0) -> complex:
    """Normalised <psi1 | psi2(. - delay)> with a band-limited shift.

    Norms come from the same inner product as the overlap, so identical
    inputs give a modulus of at least 1 after rounding.
    """
    a = np.asarray(psi1, dtype=complex)
    b = np.asarray(psi2, dtype=complex)
    if a.shape != b.shape:
        raise ValueError("inputs must share one grid")
    if delay:
        w = 2 * math.pi * np.fft.fftfreq(b.size, dt)
        b = np.fft.ifft(np.fft.fft(b) * np.exp(-1j * w * delay))
    na, nb = np.vdot(a, a).real, np.vdot(b, b).real
    if na == 0 or nb == 0:
        raise DomainError("zero wavefunction")
    z, s = complex(np.vdot(a, b)), math.sqrt(na * nb)
    return complex(z.real / s, z.imag / s)


def hom_coincidence(psi1, psi2, dt: float, delays, purity: float = 1.0) -> np.ndarray:
    """Coincidence probability P(delta) = (1 - purity |<psi1|psi2(.-delta)>|^2) / 2."""
    if not 0 < purity <= 1:
        raise DomainError("purity must lie in (0, 1]")
    d = np.atleast_1d(np.asarray(delays, dtype=float))
    # clip round-off above the Cauchy-Schwarz bound
    ov = np.array([min(1.0, abs(overlap(psi1, psi2, dt, x)) ** 2) for x in d])
    return 0.5 * (1.0 - purity * ov)


def hom_visibility(p_zero: float, p_far: float = 0.5) -> float:
    """V = 1 - P(0) / P(infinity); the distinguishable limit is 1/2."""
    return 1.0 - p_zero / p_far


@dataclass(frozen=True)
class QNGResult:
    passed: bool
    margin: float

    def __bool__(self):
        return self.passed


def qng_check(P_s: float, P_c: float) -> QNGResult:
    """Quantum non-Gaussianity criterion P_c < P_s^3 / 3."""
    if not 0 <= P_c <= P_s <= 1:
        raise DomainError("need 0 <= P_c <= P_s <= 1")
    margin = P_s ** 3 / 3 - P_c
    return QNGResult(margin > 0, margin)
