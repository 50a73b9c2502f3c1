"""Causal EMG signal processing: IIR filtering, envelope extraction, spectra.

Filters are Butterworth designs realized as cascades of second-order sections
(biquads), obtained by bilinear transform with frequency prewarping. The
digital magnitude response therefore equals the analog Butterworth magnitude
evaluated at the warped frequency 2*fs*tan(pi*f/fs), which is what the test
suite checks against. All filtering is causal with zero initial state; there
is no zero-phase (bidirectional) mode because the pipeline targets streaming
use.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import biquad_cascade
from .errors import FilterDesignError, SignalError

DEFAULT_BANDPASS_HZ = (20.0, 200.0)
DEFAULT_BANDPASS_ORDER = 4
DEFAULT_ENVELOPE_LOWPASS_HZ = 2.0
DEFAULT_RMS_WINDOW_MS = 250.0
VALID_ORDERS = (2, 4, 6, 8)


@dataclass
class Series:
    """Uniformly sampled signal: values[i] is at t0_ms + i * 1000/sample_rate."""

    sample_rate: float
    t0_ms: float
    values: np.ndarray

    def __post_init__(self) -> None:
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise SignalError(f"sample_rate must be positive, got {self.sample_rate}")
        if not math.isfinite(self.t0_ms):
            raise SignalError("t0_ms must be finite")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise SignalError("values must be one-dimensional")
        if self.values.size and not np.isfinite(self.values).all():
            raise SignalError("values must all be finite")

    def __len__(self) -> int:
        return self.values.size

    @property
    def dt_ms(self) -> float:
        return 1000.0 / self.sample_rate

    def times_ms(self) -> np.ndarray:
        return self.t0_ms + np.arange(self.values.size, dtype=np.float64) * self.dt_ms

    def slice_time(self, start_ms: float, stop_ms: float) -> np.ndarray:
        """Values with start_ms <= t < stop_ms."""
        t = self.times_ms()
        return self.values[(t >= start_ms) & (t < stop_ms)]


@dataclass(frozen=True)
class BiquadSection:
    b0: float
    b1: float
    b2: float
    a1: float
    a2: float

    def pole_radii(self) -> tuple[float, float]:
        disc = self.a1 * self.a1 - 4.0 * self.a2
        if disc < 0.0:
            r = math.sqrt(self.a2)
            return (r, r)
        s = math.sqrt(disc)
        return (abs((-self.a1 + s) / 2.0), abs((-self.a1 - s) / 2.0))


@dataclass(frozen=True)
class BiquadCascade:
    """Cascade of stable biquad sections plus its design metadata."""

    sections: tuple[BiquadSection, ...]
    kind: str
    cutoffs_hz: tuple[float, ...]
    order: int
    sample_rate: float

    def __post_init__(self) -> None:
        for i, sec in enumerate(self.sections):
            radii = sec.pole_radii()
            if max(radii) >= 1.0:
                raise FilterDesignError(
                    f"section {i} is unstable (pole radius {max(radii):.6f})"
                )

    def coefficient_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        b = np.array([[s.b0, s.b1, s.b2] for s in self.sections], dtype=np.float64)
        a = np.array([[s.a1, s.a2] for s in self.sections], dtype=np.float64)
        return b, a


def _prewarp(f_hz: float, fs: float) -> float:
    """Analog frequency (rad/s) that the bilinear transform maps to f_hz."""
    return 2.0 * fs * math.tan(math.pi * f_hz / fs)


def _prototype_upper_poles(order: int) -> list[complex]:
    """Upper-half-plane Butterworth prototype poles (unit analog cutoff)."""
    poles = []
    for k in range(order // 2):
        ang = math.pi * (2 * k + 1) / (2 * order)
        poles.append(complex(-math.sin(ang), math.cos(ang)))
    return poles


def _bilinear(s: complex, fs: float) -> complex:
    return (2.0 * fs + s) / (2.0 * fs - s)


def _section_from_pole(z: complex) -> tuple[float, float]:
    """Denominator (a1, a2) for the conjugate pole pair (z, conj(z))."""
    return (-2.0 * z.real, (z * z.conjugate()).real)


def _section_gain(b: tuple[float, float, float], a: tuple[float, float],
                  theta: float) -> float:
    z1 = complex(math.cos(-theta), math.sin(-theta))
    z2 = z1 * z1
    num = b[0] + b[1] * z1 + b[2] * z2
    den = 1.0 + a[0] * z1 + a[1] * z2
    return abs(num / den)


def design_butterworth(kind: str, cutoffs_hz, order: int,
                       sample_rate: float) -> BiquadCascade:
    """Design a Butterworth low-pass or band-pass biquad cascade.

    `order` is the analog prototype order (so a band-pass of order 4 has
    8 poles, i.e. 4 sections). Must be one of 2, 4, 6, 8. Cutoffs are in Hz
    and must lie strictly inside (0, sample_rate/2); band-pass takes
    (low, high) with low < high. Cutoff prewarping makes the -3 dB points
    land exactly on the requested frequencies.
    """
    if kind not in ("lowpass", "bandpass"):
        raise FilterDesignError(f"unknown filter kind {kind!r}")
    if order not in VALID_ORDERS:
        raise FilterDesignError(f"order must be one of {VALID_ORDERS}, got {order}")
    if not (sample_rate > 0):
        raise FilterDesignError("sample_rate must be positive")
    nyquist = sample_rate / 2.0

    if kind == "lowpass":
        if np.ndim(cutoffs_hz) != 0:
            (cutoff,) = cutoffs_hz
        else:
            cutoff = float(cutoffs_hz)
        if not (0.0 < cutoff < nyquist):
            raise FilterDesignError(
                f"cutoff {cutoff} Hz outside (0, {nyquist}) for fs {sample_rate}"
            )
        wc = _prewarp(cutoff, sample_rate)
        sections = []
        for p in _prototype_upper_poles(order):
            z = _bilinear(wc * p, sample_rate)
            a1, a2 = _section_from_pole(z)
            g = (1.0 + a1 + a2) / 4.0  # unity gain at DC
            sections.append(BiquadSection(g, 2.0 * g, g, a1, a2))
        return BiquadCascade(tuple(sections), "lowpass", (cutoff,), order, sample_rate)

    low, high = float(cutoffs_hz[0]), float(cutoffs_hz[1])
    if not (0.0 < low < nyquist) or not (0.0 < high < nyquist):
        raise FilterDesignError(
            f"cutoffs ({low}, {high}) Hz outside (0, {nyquist}) for fs {sample_rate}"
        )
    if not low < high:
        raise FilterDesignError(f"band-pass needs low < high, got ({low}, {high})")
    w1 = _prewarp(low, sample_rate)
    w2 = _prewarp(high, sample_rate)
    w0_sq = w1 * w2
    bw = w2 - w1
    # analog magnitude is exactly 1 at the (warped) geometric band center
    theta0 = 2.0 * math.atan(math.sqrt(w0_sq) / (2.0 * sample_rate))

    sections = []
    for p in _prototype_upper_poles(order):
        bp = bw * p
        root = (bp * bp - 4.0 * w0_sq) ** 0.5
        for s_pole in ((bp + root) / 2.0, (bp - root) / 2.0):
            z = _bilinear(s_pole, sample_rate)
            a1, a2 = _section_from_pole(z)
            # one zero at z=+1 and one at z=-1: numerator (1, 0, -1);
            # b2 = -b0 keeps the DC null exact
            g = 1.0 / _section_gain((1.0, 0.0, -1.0), (a1, a2), theta0)
            sections.append(BiquadSection(g, 0.0, -g, a1, a2))
    return BiquadCascade(tuple(sections), "bandpass", (low, high), order, sample_rate)


def frequency_response(cascade: BiquadCascade, freqs_hz) -> np.ndarray:
    """Complex response of the cascade at the given frequencies (Hz)."""
    freqs = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
    theta = 2.0 * np.pi * freqs / cascade.sample_rate
    z1 = np.exp(-1j * theta)
    z2 = z1 * z1
    h = np.ones_like(z1, dtype=np.complex128)
    for s in cascade.sections:
        h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2)
    return h


def filter_forward(cascade: BiquadCascade, series: Series) -> Series:
    """Causal filtering with zero initial state; preserves rate and t0."""
    if not math.isclose(cascade.sample_rate, series.sample_rate,
                        rel_tol=1e-9, abs_tol=0.0):
        raise SignalError(
            f"filter designed for {cascade.sample_rate} Hz, "
            f"series sampled at {series.sample_rate} Hz"
        )
    if series.values.size == 0:
        return Series(series.sample_rate, series.t0_ms, series.values.copy())
    b, a = cascade.coefficient_arrays()
    out = biquad_cascade(b, a, np.ascontiguousarray(series.values))
    return Series(series.sample_rate, series.t0_ms, out)


def extract_envelope(raw: Series, method: str = "rectify_lowpass", *,
                     lowpass_hz: float = DEFAULT_ENVELOPE_LOWPASS_HZ,
                     window_ms: float = DEFAULT_RMS_WINDOW_MS) -> Series:
    """Extract the nonnegative amplitude envelope of a (band-passed) signal.

    rectify_lowpass: full-wave rectification followed by a 2nd-order
    Butterworth low-pass at `lowpass_hz` (output clamped at zero, since the
    low-pass step response can undershoot slightly).
    rms_window: sliding root-mean-square over a centered window of
    `window_ms`, truncated at the edges.
    """
    if method == "rectify_lowpass":
        if not (0.0 < lowpass_hz < raw.sample_rate / 2.0):
            raise SignalError(
                f"envelope cutoff {lowpass_hz} Hz outside (0, {raw.sample_rate / 2})"
            )
        lp = design_butterworth("lowpass", lowpass_hz, 2, raw.sample_rate)
        rectified = Series(raw.sample_rate, raw.t0_ms, np.abs(raw.values))
        smoothed = filter_forward(lp, rectified)
        return Series(raw.sample_rate, raw.t0_ms, np.maximum(smoothed.values, 0.0))

    if method == "rms_window":
        if not (window_ms > 0):
            raise SignalError(f"rms window must be positive, got {window_ms} ms")
        n = raw.values.size
        if n == 0:
            return Series(raw.sample_rate, raw.t0_ms, raw.values.copy())
        w = max(1, int(round(window_ms * raw.sample_rate / 1000.0)))
        half_l = (w - 1) // 2
        half_r = w // 2
        sq = raw.values * raw.values
        cs = np.concatenate([[0.0], np.cumsum(sq)])
        idx = np.arange(n)
        lo = np.maximum(idx - half_l, 0)
        hi = np.minimum(idx + half_r, n - 1)
        sums = cs[hi + 1] - cs[lo]
        counts = (hi - lo + 1).astype(np.float64)
        return Series(raw.sample_rate, raw.t0_ms, np.sqrt(sums / counts))

    raise SignalError(f"unknown envelope method {method!r}")


@dataclass
class Spectrum:
    """One-sided power spectral density: density values over Hz bins."""

    freqs: np.ndarray
    power: np.ndarray

    def __post_init__(self) -> None:
        self.freqs = np.asarray(self.freqs, dtype=np.float64)
        self.power = np.asarray(self.power, dtype=np.float64)
        if self.freqs.shape != self.power.shape or self.freqs.ndim != 1:
            raise SignalError("freqs and power must be 1-D arrays of equal length")
        if self.freqs.size and not (np.diff(self.freqs) > 0).all():
            raise SignalError("freqs must be strictly increasing")
        if not np.isfinite(self.power).all() or (self.power < 0).any():
            raise SignalError("power must be finite and nonnegative")

    @property
    def total_power(self) -> float:
        return float(np.sum(self.power))


def welch_psd(series: Series, segment_len: int = 256,
              overlap_fraction: float = 0.5) -> Spectrum:
    """Welch PSD: averaged periodograms of Hann-windowed overlapping segments.

    Scaled as a one-sided density so that sum(power) * (fs / segment_len)
    approximates the time-domain mean square (Parseval-consistent).
    """
    if segment_len < 8:
        raise SignalError(f"segment_len must be >= 8, got {segment_len}")
    if not (0.0 <= overlap_fraction < 1.0):
        raise SignalError(f"overlap_fraction must be in [0, 1), got {overlap_fraction}")
    x = series.values
    if x.size < segment_len:
        raise SignalError(
            f"input length {x.size} shorter than segment_len {segment_len}"
        )
    fs = series.sample_rate
    step = max(1, int(round(segment_len * (1.0 - overlap_fraction))))
    window = 0.5 - 0.5 * np.cos(
        2.0 * np.pi * np.arange(segment_len, dtype=np.float64) / segment_len
    )
    norm = np.sum(window * window)
    acc = np.zeros(segment_len // 2 + 1, dtype=np.float64)
    n_segments = 0
    for start in range(0, x.size - segment_len + 1, step):
        seg = x[start:start + segment_len] * window
        spec = np.fft.rfft(seg)
        acc += (spec * spec.conjugate()).real
        n_segments += 1
    acc /= n_segments
    scale = np.full(acc.shape, 2.0 / (fs * norm))
    scale[0] = 1.0 / (fs * norm)
    if segment_len % 2 == 0:
        scale[-1] = 1.0 / (fs * norm)
    freqs = np.fft.rfftfreq(segment_len, d=1.0 / fs)
    return Spectrum(freqs, acc * scale)


def _checked_total(spec: Spectrum) -> float:
    total = spec.total_power
    if not total > 0.0:
        raise SignalError("spectrum has no power; frequency statistics undefined")
    return total


def median_frequency(spec: Spectrum) -> float:
    """Frequency where cumulative power first reaches half the total.

    Linearly interpolated within the crossing bin.
    """
    _checked_total(spec)
    cum = np.cumsum(spec.power)
    target = float(cum[-1]) / 2.0
    k = int(np.searchsorted(cum, target))
    if k == 0:
        return float(spec.freqs[0])
    f_lo, f_hi = spec.freqs[k - 1], spec.freqs[k]
    c_lo, c_hi = cum[k - 1], cum[k]
    if c_hi == c_lo:
        return float(f_hi)
    return float(f_lo + (target - c_lo) / (c_hi - c_lo) * (f_hi - f_lo))


def mean_frequency(spec: Spectrum) -> float:
    """Power-weighted average frequency."""
    total = _checked_total(spec)
    return float(np.sum(spec.freqs * spec.power) / total)
