"""Ground-truth synthetic sessions: head kinematics, muscle activation, raw EMG.

The generator encodes the qualitative relationships the pipeline is supposed
to recover, so it doubles as the verification oracle:

* activation rises monotonically with neck flexion and saturates for large
  pitch (a logistic link on an effective pitch that also weighs absolute
  roll and yaw),
* forward-head segments hold a moderately elevated activation for their
  whole duration,
* raw EMG is amplitude-modulated band-limited Gaussian noise plus white
  sensor noise, clipped to the ADC range [-1, 1],
* optional fatigue progressively compresses the carrier spectrum toward low
  frequencies by a configurable end-of-session factor (median-frequency
  downshift), implemented as a variable-rate resample of the carrier.

Reproducibility contract
------------------------
All randomness comes from the Philox (4x64) counter-based generator keyed by
(seed, stream_id), with stream ids 1 = kinematics jitter, 2 = EMG carrier,
3 = sensor noise. Uniform doubles use the standard (x >> 11) * 2**-53
conversion; normal deviates are Box-Muller pairs

    z0 = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)
    z1 = sqrt(-2 ln(1 - u1)) * sin(2 pi u2)

interleaved (z0, z1, z0, z1, ...). Identical (script, params, seed) inputs
produce bit-identical sessions, and the scheme is documented so a
reimplementation can reproduce them.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from . import dsp
from .errors import GeneratorError
from .ingest import HeadFrame, write_head_csv, EMG_HEADER, LABELS_HEADER
from .rng import box_muller_normals, philox_stream

HEAD_RATE_HZ = 50.0
EMG_RATE_HZ = 500.0

POSTURES = ("neutral", "bend1", "bend2", "bend3", "bend4", "fhp", "hunch")

JITTER_STREAM = 1
CARRIER_STREAM = 2
SENSOR_STREAM = 3


def posture_label(posture: str) -> str:
    """Map a script posture to the closed posture-label vocabulary.

    Forward-head and hunched postures both map to sustained_flexion: with
    orientation only (no torso reference) they are not separable, and the
    episode detector reports them identically.
    """
    if posture == "neutral":
        return "neutral"
    if posture.startswith("bend"):
        return "neck_bend_" + posture[4:]
    if posture in ("fhp", "hunch"):
        return "sustained_flexion"
    raise GeneratorError(f"unknown posture {posture!r}")


@dataclass(frozen=True)
class Segment:
    posture: str
    duration_s: float


@dataclass(frozen=True)
class PostureScript:
    segments: tuple[Segment, ...]
    transition_s: float = 1.0

    def __post_init__(self) -> None:
        if not self.segments:
            raise GeneratorError("script has no segments")
        for seg in self.segments:
            if seg.posture not in POSTURES:
                raise GeneratorError(
                    f"unknown posture {seg.posture!r}; expected one of {POSTURES}"
                )
            if not (seg.duration_s > 0 and math.isfinite(seg.duration_s)):
                raise GeneratorError(
                    f"segment duration must be positive, got {seg.duration_s}"
                )
        if self.transition_s < 0:
            raise GeneratorError("transition_s must be >= 0")

    @property
    def total_s(self) -> float:
        return sum(seg.duration_s for seg in self.segments)

    def boundaries_s(self) -> list[float]:
        """Cumulative segment edges, starting at 0 and ending at total_s."""
        edges = [0.0]
        for seg in self.segments:
            edges.append(edges[-1] + seg.duration_s)
        return edges

    def to_text(self) -> str:
        return " ".join(f"{s.posture}:{s.duration_s:g}" for s in self.segments)

    @classmethod
    def parse(cls, text: str, transition_s: float = 1.0,
              repeat: int = 1) -> "PostureScript":
        """Parse 'posture:seconds' tokens, e.g. 'neutral:6 bend2:16 fhp:24'."""
        segments: list[Segment] = []
        for token in text.split():
            if ":" not in token:
                raise GeneratorError(f"bad script token {token!r}; want posture:seconds")
            name, _, dur = token.partition(":")
            try:
                seconds = float(dur)
            except ValueError:
                raise GeneratorError(f"bad duration in script token {token!r}") from None
            segments.append(Segment(name, seconds))
        if repeat < 1:
            raise GeneratorError(f"script repeat must be >= 1, got {repeat}")
        return cls(tuple(segments) * repeat, transition_s)


# One desk-scale cycle; the default session repeats it five times (12 min).
# Bend holds stay under the 10 s sustained-flexion threshold so their ground
# truth stays neck_bend_*; the fhp/hunch holds exceed it on purpose.
DEFAULT_CYCLE = (
    "neutral:6 bend1:8 neutral:2 bend2:8 neutral:2 bend3:8 neutral:2 bend4:8 "
    "neutral:2 fhp:24 neutral:2 bend1:8 neutral:2 bend2:8 neutral:2 bend3:8 "
    "neutral:2 bend4:8 neutral:2 hunch:24 neutral:8"
)
DEFAULT_REPEAT = 5


def default_script() -> PostureScript:
    return PostureScript.parse(DEFAULT_CYCLE, transition_s=1.0, repeat=DEFAULT_REPEAT)


@dataclass(frozen=True)
class GeneratorParams:
    """Session-generator knobs; the defaults satisfy the documented invariants.

    The activation link is a = baseline + (max - baseline) * logistic(
    (p_eff - midpoint) / slope) with p_eff = pitch + roll_weight * |roll| +
    yaw_weight * |yaw|. Midpoint 20 deg / slope 6 deg place bend level 3
    (40 deg) and level 4 (55 deg) within 5% of each other (saturation) while
    keeping the forward-head target (18 deg) at almost half activation.
    """

    bend_pitch_deg: tuple[float, float, float, float] = (10.0, 25.0, 40.0, 55.0)
    fhp_pitch_deg: float = 18.0
    hunch_pitch_deg: float = 30.0
    hunch_roll_deg: float = 5.0
    jitter_deg: float = 0.5
    activation_baseline: float = 0.05
    activation_max: float = 1.0
    activation_midpoint_deg: float = 20.0
    activation_slope_deg: float = 6.0
    roll_weight: float = 0.25
    yaw_weight: float = 0.10
    noise_band_hz: tuple[float, float] = (20.0, 200.0)
    sensor_noise: float = 0.01
    fatigue_enabled: bool = False
    fatigue_factor: float = 0.8

    def __post_init__(self) -> None:
        if not 0.0 < self.activation_baseline < self.activation_max:
            raise GeneratorError("need 0 < activation_baseline < activation_max")
        if self.activation_max > 1.0:
            raise GeneratorError("activation_max must be <= 1 (ADC-normalized)")
        if not self.activation_slope_deg > 0:
            raise GeneratorError("activation_slope_deg must be positive")
        if self.jitter_deg < 0 or self.sensor_noise < 0:
            raise GeneratorError("noise sigmas must be >= 0")
        if list(self.bend_pitch_deg) != sorted(self.bend_pitch_deg):
            raise GeneratorError("bend_pitch_deg must be nondecreasing in level")
        if not 0.0 < self.fatigue_factor <= 1.0:
            raise GeneratorError("fatigue_factor must be in (0, 1]")
        if not 0.0 < self.noise_band_hz[0] < self.noise_band_hz[1] < EMG_RATE_HZ / 2:
            raise GeneratorError("noise band must satisfy 0 < low < high < Nyquist")


@dataclass(frozen=True)
class SegmentSpan:
    """A script segment placed on the session timeline."""

    posture: str
    label: str
    start_s: float
    end_s: float


@dataclass
class SyntheticSession:
    frames: list[HeadFrame]
    labels: list[str]
    raw_emg: dsp.Series
    activation: dsp.Series
    spans: list[SegmentSpan]
    script: PostureScript
    params: GeneratorParams
    seed: int


def _logistic(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _posture_target(posture: str, params: GeneratorParams) -> tuple[float, float, float]:
    """(roll, pitch, yaw) hold target for a posture."""
    if posture == "neutral":
        return (0.0, 0.0, 0.0)
    if posture.startswith("bend"):
        level = int(posture[4:])
        return (0.0, params.bend_pitch_deg[level - 1], 0.0)
    if posture == "fhp":
        return (0.0, params.fhp_pitch_deg, 0.0)
    if posture == "hunch":
        return (params.hunch_roll_deg, params.hunch_pitch_deg, 0.0)
    raise GeneratorError(f"unknown posture {posture!r}")


def activation_from_arrays(roll: np.ndarray, pitch: np.ndarray, yaw: np.ndarray,
                           params: GeneratorParams) -> np.ndarray:
    p_eff = (pitch + params.roll_weight * np.abs(roll)
             + params.yaw_weight * np.abs(yaw))
    z = (p_eff - params.activation_midpoint_deg) / params.activation_slope_deg
    span = params.activation_max - params.activation_baseline
    return params.activation_baseline + span * _logistic(np.asarray(z, dtype=np.float64))


def activation_from_pose(frame: HeadFrame, params: GeneratorParams) -> float:
    """Latent muscle activation for one calibrated head pose, in [baseline, max].

    Monotone nondecreasing in pitch and saturating for large flexion.
    """
    a = activation_from_arrays(
        np.array([frame.roll_deg]), np.array([frame.pitch_deg]),
        np.array([frame.yaw_deg]), params,
    )
    return float(a[0])


def generate_kinematics(script: PostureScript, params: GeneratorParams,
                        seed: int) -> tuple[list[HeadFrame], list[str]]:
    """50 Hz head frames plus per-frame ground-truth labels.

    Segments hold their posture target plus Gaussian jitter; at each segment
    boundary the targets blend along a raised-cosine ramp whose half-width is
    min(transition_s, adjacent segment durations)/2, centered on the
    boundary. Labels switch exactly at the boundary (the ramp midpoint).
    """
    n = round(script.total_s * HEAD_RATE_HZ)
    if n == 0:
        raise GeneratorError("script too short to emit any frame")
    t_s = np.arange(n, dtype=np.float64) / HEAD_RATE_HZ
    edges = script.boundaries_s()

    seg_of_frame = np.searchsorted(edges, t_s, side="right") - 1
    seg_of_frame = np.minimum(seg_of_frame, len(script.segments) - 1)

    targets = np.array(
        [_posture_target(seg.posture, params) for seg in script.segments]
    )
    angles = targets[seg_of_frame].copy()  # (n, 3) roll/pitch/yaw

    for j in range(1, len(script.segments)):
        half = 0.5 * min(
            script.transition_s,
            script.segments[j - 1].duration_s,
            script.segments[j].duration_s,
        )
        if half <= 0:
            continue
        boundary = edges[j]
        in_ramp = (t_s > boundary - half) & (t_s < boundary + half)
        if not in_ramp.any():
            continue
        phi = (t_s[in_ramp] - (boundary - half)) / (2.0 * half)
        blend = 0.5 * (1.0 - np.cos(np.pi * phi))
        prev_t = targets[j - 1]
        next_t = targets[j]
        angles[in_ramp] = prev_t + (next_t - prev_t) * blend[:, None]

    if params.jitter_deg > 0:
        z = box_muller_normals(philox_stream(seed, JITTER_STREAM), 3 * n)
        angles[:, 0] += params.jitter_deg * z[0:n]
        angles[:, 1] += params.jitter_deg * z[n:2 * n]
        angles[:, 2] += params.jitter_deg * z[2 * n:3 * n]
    angles = np.clip(angles, -180.0, 180.0)

    frames = [
        HeadFrame(20.0 * i, float(angles[i, 0]), float(angles[i, 1]), float(angles[i, 2]))
        for i in range(n)
    ]
    labels = [posture_label(script.segments[k].posture) for k in seg_of_frame]
    return frames, labels


def generate_emg(activation: dsp.Series, params: GeneratorParams,
                 seed: int) -> dsp.Series:
    """Raw EMG at the activation's rate: activation-modulated band-limited
    noise plus white sensor noise, clipped to [-1, 1].

    With fatigue enabled the carrier is read back at a phase rate that falls
    linearly from 1 to fatigue_factor, compressing its spectrum toward low
    frequencies by that factor at the session end.
    """
    act = activation.values
    n = act.size
    if n == 0:
        return dsp.Series(activation.sample_rate, activation.t0_ms, np.empty(0))
    if float(act.min()) < 0.0 or float(act.max()) > 1.0:
        raise GeneratorError("activation values must lie in [0, 1]")

    white = box_muller_normals(philox_stream(seed, CARRIER_STREAM), n + 1)
    band = dsp.design_butterworth(
        "bandpass", params.noise_band_hz, 4, activation.sample_rate
    )
    carrier = dsp.filter_forward(
        band, dsp.Series(activation.sample_rate, 0.0, white)
    ).values
    rms = math.sqrt(float(np.mean(carrier * carrier)))
    carrier = carrier / rms

    if params.fatigue_enabled and params.fatigue_factor < 1.0 and n > 1:
        rate = 1.0 + (params.fatigue_factor - 1.0) * (
            np.arange(n, dtype=np.float64) / (n - 1)
        )
        phase = np.concatenate([[0.0], np.cumsum(rate[:-1])])
        base = np.floor(phase).astype(np.int64)
        frac = phase - base
        carrier = carrier[base] * (1.0 - frac) + carrier[base + 1] * frac
    else:
        carrier = carrier[:n]

    raw = act * carrier
    if params.sensor_noise > 0:
        raw = raw + params.sensor_noise * box_muller_normals(
            philox_stream(seed, SENSOR_STREAM), n
        )
    return dsp.Series(
        activation.sample_rate, activation.t0_ms, np.clip(raw, -1.0, 1.0)
    )


def _session_spans(script: PostureScript) -> list[SegmentSpan]:
    spans = []
    edges = script.boundaries_s()
    for k, seg in enumerate(script.segments):
        spans.append(
            SegmentSpan(seg.posture, posture_label(seg.posture), edges[k], edges[k + 1])
        )
    return spans


def synth_session(script: PostureScript, params: GeneratorParams, seed: int,
                  out_dir: str | None = None) -> SyntheticSession:
    """Generate a full session; optionally write the four CSV artifacts.

    Files written to out_dir: head.csv, emg.csv, labels.csv, activation.csv
    (the ground-truth activation stream, kept for verification).
    """
    frames, labels = generate_kinematics(script, params, seed)
    roll = np.array([f.roll_deg for f in frames])
    pitch = np.array([f.pitch_deg for f in frames])
    yaw = np.array([f.yaw_deg for f in frames])
    act_frames = activation_from_arrays(roll, pitch, yaw, params)

    n_emg = round(script.total_s * EMG_RATE_HZ)
    t_emg_ms = 2.0 * np.arange(n_emg, dtype=np.float64)
    t_head_ms = 20.0 * np.arange(len(frames), dtype=np.float64)
    act = np.interp(t_emg_ms, t_head_ms, act_frames)
    activation = dsp.Series(EMG_RATE_HZ, 0.0, act)

    raw = generate_emg(activation, params, seed)
    session = SyntheticSession(
        frames, labels, raw, activation, _session_spans(script), script, params, seed
    )
    if out_dir is not None:
        write_session(session, out_dir)
    return session


def write_session(session: SyntheticSession, out_dir: str) -> dict[str, str]:
    """Write head/emg/labels/activation CSVs; returns the path map."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "head": os.path.join(out_dir, "head.csv"),
        "emg": os.path.join(out_dir, "emg.csv"),
        "labels": os.path.join(out_dir, "labels.csv"),
        "activation": os.path.join(out_dir, "activation.csv"),
    }
    write_head_csv(paths["head"], session.frames)

    emg_t = session.raw_emg.times_ms()
    with open(paths["emg"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(EMG_HEADER + "\n")
        fh.writelines(
            "%d,%.6f\n" % (int(t), v)
            for t, v in zip(emg_t, session.raw_emg.values)
        )
    with open(paths["labels"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(LABELS_HEADER + "\n")
        fh.writelines(
            "%d,%s\n" % (int(f.t_ms), label)
            for f, label in zip(session.frames, session.labels)
        )
    act_t = session.activation.times_ms()
    with open(paths["activation"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t_ms,activation\n")
        fh.writelines(
            "%d,%.6f\n" % (int(t), v)
            for t, v in zip(act_t, session.activation.values)
        )
    return paths


def posture_seconds(script: PostureScript) -> dict[str, float]:
    """Total scripted seconds per posture (session summary)."""
    totals: dict[str, float] = {}
    for seg in script.segments:
        totals[seg.posture] = totals.get(seg.posture, 0.0) + seg.duration_s
    return totals
