"""Filter design and application against the analytic Butterworth oracle.

The oracle is the closed-form analog Butterworth magnitude evaluated at the
bilinear-prewarped frequency W(f) = 2*fs*tan(pi*f/fs) — the exact response a
correctly designed bilinear filter must have. It shares nothing with the
implementation's pole/zero machinery.
"""
import math

import numpy as np
import pytest

from neckstrain import dsp
from neckstrain.errors import FilterDesignError, SignalError

FS = 500.0


def warp(f_hz: float, fs: float = FS) -> float:
    return 2.0 * fs * math.tan(math.pi * f_hz / fs)


def analytic_bandpass_mag(f_hz, lo=20.0, hi=200.0, order=4, fs=FS):
    if f_hz == 0.0:
        return 0.0
    w = warp(f_hz, fs)
    w1, w2 = warp(lo, fs), warp(hi, fs)
    x = (w * w - w1 * w2) / ((w2 - w1) * w)
    return 1.0 / math.sqrt(1.0 + x ** (2 * order))


def analytic_lowpass_mag(f_hz, cutoff, order, fs=FS):
    x = warp(f_hz, fs) / warp(cutoff, fs)
    return 1.0 / math.sqrt(1.0 + x ** (2 * order))


def db(x: float) -> float:
    return 20.0 * math.log10(x)


def measured_sine_gain(cascade, f_hz, fs=FS, settle_s=2.0, total_s=6.0):
    """Steady-state amplitude of a unit sine pushed through filter_forward.

    The 4 s measurement window holds an integer number of cycles for every
    probe tone used here, so the RMS*sqrt(2) amplitude estimate is exact up
    to the decayed transient.
    """
    n = int(total_s * fs)
    t = np.arange(n) / fs
    x = np.sin(2.0 * np.pi * f_hz * t)
    y = dsp.filter_forward(cascade, dsp.Series(fs, 0.0, x)).values
    tail = y[t >= settle_s]
    return math.sqrt(2.0 * float(np.mean(tail * tail)))


@pytest.fixture(scope="module")
def default_bandpass():
    return dsp.design_butterworth("bandpass", (20.0, 200.0), 4, FS)


class TestBandpassDesign:
    @pytest.mark.parametrize("f", [10.0, 63.25, 220.0])
    def test_transfer_function_matches_analytic(self, default_bandpass, f):
        h = abs(dsp.frequency_response(default_bandpass, f)[0])
        assert abs(db(h) - db(analytic_bandpass_mag(f))) <= 0.5

    @pytest.mark.parametrize("f", [10.0, 63.25, 220.0])
    def test_measured_sine_gain_matches_analytic(self, default_bandpass, f):
        g = measured_sine_gain(default_bandpass, f)
        assert abs(db(g) - db(analytic_bandpass_mag(f))) <= 0.5

    def test_band_center_steady_state_within_5_percent(self, default_bandpass):
        g = measured_sine_gain(default_bandpass, 63.25)
        assert abs(g - analytic_bandpass_mag(63.25)) <= 0.05 * analytic_bandpass_mag(63.25)

    def test_dc_gain_exactly_zero(self, default_bandpass):
        assert abs(dsp.frequency_response(default_bandpass, 0.0)[0]) == 0.0

    def test_band_edges_at_minus_3db(self, default_bandpass):
        for f in (20.0, 200.0):
            h = abs(dsp.frequency_response(default_bandpass, f)[0])
            assert abs(db(h) - (-3.0103)) <= 0.01

    def test_all_sections_stable(self, default_bandpass):
        for section in default_bandpass.sections:
            assert max(section.pole_radii()) < 1.0

    @pytest.mark.parametrize("order", [2, 4, 6, 8])
    def test_every_order_stable_and_analytic(self, order):
        cascade = dsp.design_butterworth("bandpass", (20.0, 200.0), order, FS)
        assert len(cascade.sections) == order
        for section in cascade.sections:
            assert max(section.pole_radii()) < 1.0
        for f in (15.0, 63.25, 150.0):
            h = abs(dsp.frequency_response(cascade, f)[0])
            assert abs(db(h) - db(analytic_bandpass_mag(f, order=order))) <= 0.1


class TestLowpassDesign:
    def test_minus_3db_at_cutoff(self):
        lp = dsp.design_butterworth("lowpass", 2.0, 2, FS)
        h = abs(dsp.frequency_response(lp, 2.0)[0])
        assert abs(db(h) - (-3.0103)) <= 0.2

    def test_dc_gain_unity(self):
        lp = dsp.design_butterworth("lowpass", 5.0, 4, FS)
        assert abs(dsp.frequency_response(lp, 0.0)[0]) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("f", [0.5, 2.0, 10.0, 100.0])
    def test_matches_analytic(self, f):
        lp = dsp.design_butterworth("lowpass", 2.0, 2, FS)
        h = abs(dsp.frequency_response(lp, f)[0])
        assert h == pytest.approx(analytic_lowpass_mag(f, 2.0, 2), rel=1e-6)


class TestDesignErrors:
    def test_cutoff_beyond_nyquist(self):
        with pytest.raises(FilterDesignError):
            dsp.design_butterworth("lowpass", 300.0, 2, FS)

    def test_zero_cutoff(self):
        with pytest.raises(FilterDesignError):
            dsp.design_butterworth("lowpass", 0.0, 2, FS)

    @pytest.mark.parametrize("order", [0, 3, 5, 10])
    def test_bad_order(self, order):
        with pytest.raises(FilterDesignError):
            dsp.design_butterworth("lowpass", 2.0, order, FS)

    def test_band_low_not_below_high(self):
        with pytest.raises(FilterDesignError):
            dsp.design_butterworth("bandpass", (200.0, 20.0), 4, FS)

    def test_unknown_kind(self):
        with pytest.raises(FilterDesignError):
            dsp.design_butterworth("highpass", 20.0, 4, FS)


class TestFilterForward:
    def test_zero_input_zero_output(self, default_bandpass):
        out = dsp.filter_forward(default_bandpass, dsp.Series(FS, 0.0, np.zeros(257)))
        assert np.array_equal(out.values, np.zeros(257))

    def test_preserves_length_rate_t0(self, default_bandpass):
        x = dsp.Series(FS, 123.0, np.sin(np.arange(1000) * 0.1))
        y = dsp.filter_forward(default_bandpass, x)
        assert len(y) == len(x)
        assert y.sample_rate == x.sample_rate
        assert y.t0_ms == x.t0_ms

    def test_linearity(self, default_bandpass):
        x = np.sin(np.arange(2000) * 0.21) + 0.3 * np.cos(np.arange(2000) * 0.043)
        y1 = dsp.filter_forward(default_bandpass, dsp.Series(FS, 0.0, x)).values
        y2 = dsp.filter_forward(default_bandpass, dsp.Series(FS, 0.0, 2.0 * x)).values
        np.testing.assert_allclose(y2, 2.0 * y1, rtol=1e-9, atol=1e-15)

    def test_time_shift_invariance(self, default_bandpass):
        rng = np.random.default_rng(5)
        x = rng.normal(size=3000)
        k = 40
        shifted = np.concatenate([np.zeros(k), x])
        y = dsp.filter_forward(default_bandpass, dsp.Series(FS, 0.0, x)).values
        ys = dsp.filter_forward(default_bandpass, dsp.Series(FS, 0.0, shifted)).values
        # compare interiors after the zero-state transient has settled
        np.testing.assert_allclose(ys[k + 1500:], y[1500:len(ys) - k], rtol=1e-7, atol=1e-10)

    def test_rate_mismatch_rejected(self, default_bandpass):
        with pytest.raises(SignalError):
            dsp.filter_forward(default_bandpass, dsp.Series(250.0, 0.0, np.zeros(10)))

    def test_deterministic(self, default_bandpass):
        x = dsp.Series(FS, 0.0, np.sin(np.arange(500) * 0.3))
        a = dsp.filter_forward(default_bandpass, x).values
        b = dsp.filter_forward(default_bandpass, x).values
        assert np.array_equal(a, b)
