import numpy as np
import pytest

from ofdmshape.bands import FrequencyBand, PsdCurve, analytical_psd
from ofdmshape.config import LEFT, desk_profile
from ofdmshape.mask import EmissionMask, plan_mask, plan_pulses
from ofdmshape.optimize import adaptive_optimize_harmonic, local_optimize_edge
from ofdmshape.pulses import basic_pulse, shaping_window
from ofdmshape.waveform import (SymbolStream, Waveform, WaveformError, compare_psd, evm_db, papr_at, papr_ccdf,
                                read_waveform, receive, symbol_papr, synthesize, welch_expectation, welch_psd,
                                write_waveform)


@pytest.fixture(scope="module")
def cfg():
    return desk_profile(n_co=1, nh_min=3, nh_max=5)


@pytest.fixture(scope="module")
def shaped_plan(cfg):
    bank = local_optimize_edge(cfg, 64, LEFT, "cc+harmonic")
    return plan_mask(cfg, EmissionMask(256, ((20, 200),)), bank)


def test_stream_validation():
    with pytest.raises(WaveformError):
        SymbolStream([1, 2], np.zeros((3, 3)))
    with pytest.raises(WaveformError):
        SymbolStream([1, 1], np.zeros((3, 2)))
    s = SymbolStream.qpsk([3, 4, 5], 100, seed=1)
    assert s.count == 100
    np.testing.assert_allclose(np.abs(s.values), 1.0)
    np.testing.assert_array_equal(s.values, SymbolStream.qpsk([3, 4, 5], 100, seed=1).values)


def test_empty_stream(shaped_plan):
    w = synthesize(shaped_plan, SymbolStream.qpsk(shaped_plan.data_carriers, 0))
    assert w.count == 0 and w.samples.size == 0
    with pytest.raises(WaveformError):
        evm_db(w, SymbolStream.qpsk(shaped_plan.data_carriers, 0))


def test_single_symbol_is_the_pulse(cfg, shaped_plan):
    pulses = plan_pulses(shaped_plan)
    for k in (shaped_plan.shaped_carriers[0], 100):
        s = SymbolStream([k], np.array([[0.5 - 2j]]))
        w = synthesize(shaped_plan, s, pulses)
        h = pulses[k] if pulses[k] is not None else basic_pulse(cfg, k)
        np.testing.assert_allclose(w.samples, (0.5 - 2j) * h, atol=1e-12)


def test_overlap_add_of_two_symbols(cfg, shaped_plan):
    k = shaped_plan.shaped_carriers[1]
    pulses = plan_pulses(shaped_plan)
    s = SymbolStream([k], np.array([[1.0], [1j]]))
    w = synthesize(shaped_plan, s, pulses)
    expected = np.zeros(cfg.n_s + cfg.length, dtype=complex)
    expected[:cfg.length] += pulses[k]
    expected[cfg.n_s:] += 1j * pulses[k]
    np.testing.assert_allclose(w.samples, expected, atol=1e-12)


def test_stray_carrier_rejected(shaped_plan):
    with pytest.raises(WaveformError):
        synthesize(shaped_plan, SymbolStream([5], np.ones((2, 1))))


def test_receiver_is_transparent(shaped_plan):
    s = SymbolStream.qpsk(shaped_plan.data_carriers, 20, seed=3)
    w = synthesize(shaped_plan, s)
    for u in range(1, 19):
        np.testing.assert_allclose(receive(w, u, s.carriers), s.values[u], atol=1e-12)
    assert evm_db(w, s) < -250
    with pytest.raises(WaveformError):
        receive(w, 20)


def test_evm_detects_errors(cfg):
    plan = plan_mask(cfg, EmissionMask(256, ((20, 200),)))
    s = SymbolStream.qpsk(plan.data_carriers, 10, seed=0)
    w = synthesize(plan, s)
    noisy = Waveform(w.samples + 0.01 * np.random.default_rng(0).standard_normal(w.samples.size), w.n, w.n_gi,
                     w.length, w.count)
    # white noise of variance 1e-4 lands in every DFT bin with variance 1e-4 / N
    assert evm_db(noisy, s) == pytest.approx(10 * np.log10(1e-4 / 256), abs=0.5)


def test_welch_of_tone_peaks_at_its_frequency():
    n = np.arange(2 ** 14)
    f0 = 37 / 256
    w = Waveform(np.exp(2j * np.pi * f0 * n), 256, 0, 256, 64)
    est = welch_psd(w, 256, 128)
    assert est.grid[np.argmax(est.values)] == pytest.approx(f0)
    # density scaling: a unit tone integrates to one
    assert est.values.sum() / est.grid.size == pytest.approx(1.0, rel=1e-6)


def test_welch_of_white_noise_is_flat():
    rng = np.random.default_rng(1)
    x = (rng.standard_normal(2 ** 18) + 1j * rng.standard_normal(2 ** 18)) / np.sqrt(2)
    est = welch_psd(Waveform(x, 256, 0, 256, 1024), 256, 128)
    db = 10 * np.log10(est.values)
    assert np.abs(db).max() < 0.5
    assert est.values.mean() == pytest.approx(1.0, rel=0.02)


def test_welch_settings_checked():
    w = Waveform(np.ones(100, dtype=complex), 64, 0, 64, 1)
    with pytest.raises(WaveformError):
        welch_psd(w, 128, 0)
    with pytest.raises(WaveformError):
        welch_psd(w, 64, 64)


def test_welch_expectation_of_flat_spectrum_is_flat():
    grid = np.arange(1024) / 1024
    flat = PsdCurve(grid, np.ones(1024))
    np.testing.assert_allclose(welch_expectation(flat, 256).values, 1.0, atol=1e-12)
    with pytest.raises(WaveformError):
        welch_expectation(flat, 2048)


def test_welch_matches_expectation(cfg, shaped_plan):
    s = SymbolStream.qpsk(shaped_plan.data_carriers, 1500, seed=2)
    w = synthesize(shaped_plan, s)
    pass_band = shaped_plan.mask.passband_band()
    curve = analytical_psd(cfg, plan_pulses(shaped_plan), density=8)
    expected = welch_expectation(curve, 1024, pass_band)
    est = welch_psd(w, 1024, 256, pass_band)
    assert compare_psd(expected, est, shaped_plan.mask.notch_components(), cfg.n) < 1.0


def test_compare_psd_identical_curves():
    grid = np.arange(512) / 512
    c = PsdCurve(grid, 1 + grid)
    assert compare_psd(c, c, [FrequencyBand.interval(0.2, 0.4)], 256) == pytest.approx(0.0, abs=1e-12)


def test_papr_of_constant_envelope_is_zero():
    w = Waveform(np.exp(2j * np.pi * 0.1 * np.arange(800)), 64, 16, 80, 10)
    np.testing.assert_allclose(symbol_papr(w), 0.0, atol=1e-12)
    np.testing.assert_array_equal(papr_ccdf(w, [-1.0, 0.5]), [1.0, 0.0])
    assert papr_at(w, 0.01) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(WaveformError):
        symbol_papr(Waveform(np.zeros(800, dtype=complex), 64, 16, 80, 10))


def test_waveform_file_round_trip(tmp_path, shaped_plan):
    s = SymbolStream.qpsk(shaped_plan.data_carriers, 5, seed=4)
    w = synthesize(shaped_plan, s)
    p = tmp_path / "w.iq"
    write_waveform(p, w)
    got = read_waveform(p)
    np.testing.assert_array_equal(got.samples, w.samples)
    assert (got.n, got.n_gi, got.length, got.count) == (w.n, w.n_gi, w.length, w.count)
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(WaveformError):
        read_waveform(p)
    p.write_bytes(b"short")
    with pytest.raises(WaveformError):
        read_waveform(p)


def test_shaped_waveform_stays_in_notches():
    cfg = desk_profile(n_co=0)
    mask = EmissionMask.from_notches(256, [(0, 64), (188, 190), (220, 255)])
    source = adaptive_optimize_harmonic(cfg)
    plan = plan_mask(cfg, mask, source)
    shaped = analytical_psd(cfg, plan_pulses(plan), reference=mask.passband_band())
    rc = analytical_psd(cfg, plan_pulses(plan_mask(cfg, mask)), reference=mask.passband_band())
    hole = mask.notch_components()[0]
    from ofdmshape.bands import psd_max
    assert psd_max(shaped, hole) < psd_max(rc, hole) - 15
