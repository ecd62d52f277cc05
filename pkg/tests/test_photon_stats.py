import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from fwmsource import photon_stats as ps
from fwmsource.atoms import DomainError
from fwmsource.biphoton import Calibration, SourceFigures, sech_kernel, sech_width


def figures(R, Ns, Ni):
    return SourceFigures(R, Ns, Ni, float("nan"), R / Ni if Ni else float("nan"), 0, 0, 0,
                         Calibration(), 590e-12)


def stream(pairs_ps, extra=()):
    """Hand-built stream: idler at t, signal 1 at t + d for each (t, d); extra (ch, t) clicks."""
    rec = [(ps.IDLER, t) for t, _ in pairs_ps] + [(ps.SIGNAL_1, t + d) for t, d in pairs_ps] + list(extra)
    rec.sort(key=lambda r: (r[1], r[0]))
    ch = np.array([r[0] for r in rec], np.uint8)
    ts = np.array([r[1] for r in rec], np.uint64)
    return ps.TagStream(ch, ts, (int(ts.max()) + 1) * ps.PS, seed=0)


# --- generation and file format ----------------------------------------------

@pytest.fixture(scope="module")
def point_tags(calibrated_point):
    figs, wf = calibrated_point
    return ps.generate_tags(figs, wf, 5.0, seed=11, config={"case": "base"})


def test_tag_file_round_trip_is_bit_exact(tmp_path, point_tags):
    a = point_tags.write(tmp_path / "a.txt")
    back = ps.TagStream.read(a)
    np.testing.assert_array_equal(back.channels, point_tags.channels)
    np.testing.assert_array_equal(back.timestamps_ps, point_tags.timestamps_ps)
    assert back.seed == 11 and back.duration == point_tags.duration
    assert back.config == point_tags.config
    b = back.write(tmp_path / "b.txt")
    assert a.read_bytes() == b.read_bytes()


def test_tag_file_header_checked(tmp_path, point_tags):
    path = point_tags.write(tmp_path / "a.txt")
    text = path.read_text().replace('"case": "base"', '"case": "other"')
    path.write_text(text)
    with pytest.raises(ValueError, match="hash"):
        ps.TagStream.read(path)


def test_seed_determinism(calibrated_point):
    figs, wf = calibrated_point
    a = ps.generate_tags(figs, wf, 0.5, seed=3)
    b = ps.generate_tags(figs, wf, 0.5, seed=3)
    c = ps.generate_tags(figs, wf, 0.5, seed=4)
    np.testing.assert_array_equal(a.timestamps_ps, b.timestamps_ps)
    np.testing.assert_array_equal(a.channels, b.channels)
    assert not np.array_equal(a.timestamps_ps[:100], c.timestamps_ps[:100])


def test_stream_invariants(point_tags):
    t = point_tags.timestamps_ps.astype(np.int64)
    assert np.all(np.diff(t) >= 0)
    assert t[0] >= 0 and t[-1] <= round(point_tags.duration / ps.PS)


def test_channel_counts_match_rates(calibrated_point, point_tags):
    figs, _ = calibrated_point
    T = point_tags.duration
    for chans, rate in ((ps.IDLER, figs.singles_i), (ps.SIGNALS, figs.singles_s)):
        n = point_tags.count(chans)
        assert abs(n - rate * T) < 5 * math.sqrt(rate * T)
    # the 50:50 splitter
    n1, n2 = point_tags.count(ps.SIGNAL_1), point_tags.count(ps.SIGNAL_2)
    assert abs(n1 - n2) < 5 * math.sqrt(n1 + n2)


def test_pair_rate_above_singles_rejected(calibrated_point):
    _, wf = calibrated_point
    with pytest.raises(ps.InconsistencyError):
        ps.generate_tags(figures(10.0, 5.0, 20.0), wf, 1.0, seed=0)


def test_uncorrelated_streams_are_flat(calibrated_point):
    _, wf = calibrated_point
    tags = ps.generate_tags(figures(0.0, 2e5, 2e5), wf, 2.0, seed=5)
    h = ps.estimate_g2(tags, bin_width=1e-9, max_lag=20e-9)
    assert np.all(np.abs(h.g2 - 1) < 5 * h.g2_sigma)


def test_pairs_only_heralds_every_idler(calibrated_point):
    _, wf = calibrated_point
    tags = ps.generate_tags(figures(5e4, 5e4, 5e4), wf, 2.0, seed=6)
    eta, sig = ps.heralding_efficiency_estimate(tags)
    assert abs(eta - 1) < 3 * sig + 1e-3


def test_fixed_delay_fills_one_bin():
    pairs = [(1_000_000 * k, 2_530) for k in range(1, 400)]
    h = ps.estimate_g2(stream(pairs), bin_width=100e-12, max_lag=10e-9)
    nz = np.flatnonzero(h.counts)
    assert nz.size == 1
    assert h.bin_edges[nz[0]] <= 2.53e-9 < h.bin_edges[nz[0] + 1]


def test_empty_channel_rejected():
    tags = ps.TagStream(np.zeros(3, np.uint8), np.arange(3, dtype=np.uint64), 1e-9, 0)
    with pytest.raises(ps.InsufficientDataError):
        ps.estimate_g2(tags)
    with pytest.raises(ValueError):
        ps.estimate_g2(tags, bin_width=0)


def test_histogram_matches_model_and_tails(calibrated_point):
    figs, wf = calibrated_point
    tags = ps.generate_tags(figs, wf, 20.0, seed=9)
    h = ps.estimate_g2(tags, bin_width=100e-12, max_lag=20e-9)
    model = ps.model_histogram(figs, wf, h.bin_edges)
    pos, peak, sig = h.peak()
    assert abs(peak - model.max()) < 3 * sig
    assert abs(pos - h.centers[np.argmax(model)]) <= 100e-12
    outer = np.r_[h.g2[: len(h.g2) // 10], h.g2[-len(h.g2) // 10:]]
    err = np.sqrt(np.sum(h.counts[: len(h.g2) // 10]) + np.sum(h.counts[-len(h.g2) // 10:])) \
        / h.baseline / outer.size
    assert abs(outer.mean() - 1) < 5 * err


def test_sech_sampler_distribution(rng):
    w = 590e-12
    x = ps.sample_sech(rng, 20000, w)
    t0 = sech_width(w)
    cdf = lambda t: (2 / math.pi) * np.arctan(np.exp(t / t0))
    assert stats.kstest(x, cdf).pvalue > 1e-3
    assert np.all(ps.sample_sech(rng, 5, 0.0) == 0)
    # the density being sampled is the unit-area kernel
    assert sech_kernel(0.0, w) == pytest.approx(1 / (math.pi * t0))


@settings(max_examples=40, deadline=None)
@given(a=st.lists(st.integers(0, 10_000), max_size=40), b=st.lists(st.integers(0, 10_000), max_size=40),
       lo=st.integers(-3000, 0), width=st.integers(1, 4000))
def test_pair_delays_brute_force(a, b, lo, width):
    ta, tb = np.sort(np.array(a, float)), np.sort(np.array(b, float))
    got = np.sort(ps.pair_delays(ta, tb, lo, lo + width))
    want = np.sort([y - x for x in ta for y in tb if lo <= y - x < lo + width])
    np.testing.assert_array_equal(got, want)


# --- heralded statistics -----------------------------------------------------

def test_single_photons_give_zero_gc():
    # one photon per herald, routed to either splitter output
    rec = []
    for k in range(1, 200):
        rec += [(ps.IDLER, 100_000 * k), (ps.SIGNAL_1 if k % 2 else ps.SIGNAL_2, 100_000 * k + 800)]
    ch = np.array([r[0] for r in rec], np.uint8)
    ts = np.array([r[1] for r in rec], np.uint64)
    tags = ps.TagStream(ch, ts, 20_000_000 * ps.PS, seed=0)
    hs = ps.conditional_autocorrelation(tags, window=2.5e-9, placement=0.0)
    assert hs.g_c == 0 and hs.P_c == 0
    assert hs.P_c <= hs.P_s


def test_gc_needs_twofold_coincidences():
    pairs = [(100_000 * k, 800) for k in range(1, 50)]
    with pytest.raises(ps.InsufficientDataError):
        ps.conditional_autocorrelation(stream(pairs), placement=0.0)


def test_heralded_statistics_properties(point_tags):
    hs = ps.conditional_autocorrelation(point_tags, 2.5e-9)
    assert hs.g_c >= 0 and 0 <= hs.E_c <= 1 and hs.P_c <= hs.P_s
    # invariant under a global time shift
    shifted = ps.conditional_autocorrelation(point_tags.shifted(123_456_789), 2.5e-9)
    assert shifted.g_c == hs.g_c and shifted.window_start == hs.window_start
    E, S = ps.heralded_fraction(point_tags, [0.0, 0.5e-9, 1e-9, 2.5e-9, 5e-9, 10e-9, 30e-9])
    assert E[0] == 0
    assert np.all(np.diff(E) >= -1e-12)
    assert E[-1] == pytest.approx(1, abs=3 * S[-1] + 1e-3)


def test_peak_placement(point_tags):
    hs = ps.conditional_autocorrelation(point_tags, 2.5e-9, placement="peak")
    assert -1e-9 < hs.window_start < 1e-9


def test_model_heralded_fraction_limits(calibrated_point):
    _, wf = calibrated_point
    e_wide, _ = ps.model_heralded_fraction(wf, 50e-9, reference=(-20e-9, 40e-9))
    e_narrow, _ = ps.model_heralded_fraction(wf, 0.5e-9)
    assert e_wide == pytest.approx(1, abs=1e-9)
    assert 0 < e_narrow < 1


def test_standard_errors_shrink_with_duration(calibrated_point):
    figs, wf = calibrated_point
    sig = [ps.heralding_efficiency_estimate(ps.generate_tags(figs, wf, T, seed=2))[1] for T in (2.0, 4.0)]
    assert sig[1] / sig[0] == pytest.approx(1 / math.sqrt(2), rel=0.05)


def test_gc_grows_with_pair_rate(cfg, calibrated_point):
    # multi-pair events make g_c roughly proportional to R at fixed singles-to-pairs ratios
    figs, wf = calibrated_point
    gcs, rates = [], []
    for k, scale in enumerate((1.0, 2.0, 4.0)):
        f = figures(figs.pair_rate * scale, figs.singles_s * scale, figs.singles_i * scale)
        tags = ps.generate_tags(f, wf, 40.0 / scale, seed=30 + k)
        gcs.append(ps.conditional_autocorrelation(tags, 2.5e-9).g_c)
        rates.append(f.pair_rate)
    slope = np.polyfit(np.log(rates), np.log(gcs), 1)[0]
    assert slope == pytest.approx(1, abs=0.3)


# --- closed-form criteria ----------------------------------------------------

def test_cauchy_schwarz():
    assert ps.cauchy_schwarz_ratio(709) == pytest.approx(709 ** 2 / 4)
    assert ps.cauchy_schwarz_ratio(709) > 1e5
    assert ps.cauchy_schwarz_ratio(2) == 1
    assert ps.cauchy_schwarz_ratio(1, 1, 1) == 1
    with pytest.raises(DomainError):
        ps.cauchy_schwarz_ratio(0.5)


def test_temporal_likeness_cases(calibrated_point):
    _, wf = calibrated_point
    G = wf.intensity
    assert ps.temporal_likeness(G, G) == pytest.approx(1, abs=1e-12)
    a = np.r_[np.ones(10), np.zeros(10)]
    assert ps.temporal_likeness(a, a[::-1]) == 0
    # a 5% channel asymmetry keeps the photons alike
    ripple = 1 + 0.05 * np.sin(np.linspace(0, 40, G.size))
    assert ps.temporal_likeness(G, G * ripple) > 0.99
    with pytest.raises(DomainError):
        ps.temporal_likeness(np.zeros(5), np.ones(5))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=3, max_size=30).filter(lambda v: sum(v) > 0),
       st.lists(st.floats(0, 10), min_size=3, max_size=30).filter(lambda v: sum(v) > 0))
def test_temporal_likeness_bounds_and_symmetry(g1, g2):
    n = min(len(g1), len(g2))
    a, b = np.array(g1[:n]), np.array(g2[:n])
    if a.sum() == 0 or b.sum() == 0:
        return
    x = ps.temporal_likeness(a, b)
    assert -1e-12 <= x <= 1 + 1e-12
    assert x == pytest.approx(ps.temporal_likeness(b, a), rel=1e-12, abs=1e-15)


def test_hom_dip(calibrated_point):
    _, wf = calibrated_point
    psi = np.abs(wf.psi)[::8]
    dt = wf.dt * 8
    p0 = ps.hom_coincidence(psi, psi, dt, 0.0)[0]
    assert p0 == 0 and ps.hom_visibility(p0) == 1
    p08 = ps.hom_coincidence(psi, psi, dt, 0.0, purity=0.8)[0]
    assert ps.hom_visibility(p08) == pytest.approx(0.8, abs=1e-12)
    far = ps.hom_coincidence(psi, psi, dt, 200e-9)[0]
    assert far == pytest.approx(0.5, abs=1e-6)
    sym = ps.hom_coincidence(psi, psi, dt, [-0.7e-9, 0.7e-9])
    assert sym[0] == pytest.approx(sym[1], rel=1e-9)
    for bad in (0.0, 1.2):
        with pytest.raises(DomainError):
            ps.hom_coincidence(psi, psi, dt, 0.0, purity=bad)


def test_qng_cases():
    assert ps.qng_check(0.09, 2.5e-5)
    r = ps.qng_check(0.09, 1.6e-4)
    assert r and r.margin == pytest.approx(0.09 ** 3 / 3 - 1.6e-4)
    assert r.margin == pytest.approx(8.3e-5, abs=1e-6)
    assert not ps.qng_check(0.09, 0.09 ** 3 / 3)
    with pytest.raises(DomainError):
        ps.qng_check(0.01, 0.02)
