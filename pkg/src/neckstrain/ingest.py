"""Sensor stream parsing, calibration, and multi-rate synchronization.

Streams arrive as line-based CSV (see the header constants below): a 50 Hz
head-orientation stream and a 500 Hz EMG stream, timestamped in integer
milliseconds on a shared host clock. Alignment happens at head-frame
timestamps — the slower stream — with the envelope linearly interpolated
between its bracketing samples, so no head data is ever fabricated.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .dsp import Series
from .errors import StreamFormatError

HEAD_HEADER = "t_ms,roll_deg,pitch_deg,yaw_deg"
EMG_HEADER = "t_ms,value"
ALIGNED_HEADER = "t_ms,roll_deg,pitch_deg,yaw_deg,envelope"
LABELS_HEADER = "t_ms,posture_label"

DEFAULT_TOLERANCE_MS = 50.0
DEFAULT_CALIBRATION_WINDOW_S = 5.0


@dataclass(frozen=True)
class HeadFrame:
    t_ms: float
    roll_deg: float
    pitch_deg: float
    yaw_deg: float


@dataclass(frozen=True)
class EmgSample:
    t_ms: float
    value: float


@dataclass(frozen=True)
class CalibrationOffsets:
    roll0_deg: float
    pitch0_deg: float
    yaw0_deg: float

    def negated(self) -> "CalibrationOffsets":
        return CalibrationOffsets(-self.roll0_deg, -self.pitch0_deg, -self.yaw0_deg)


@dataclass(frozen=True)
class AlignedRecord:
    t_ms: float
    roll_deg: float
    pitch_deg: float
    yaw_deg: float
    envelope: float


@dataclass
class EmgStream:
    """Columnar EMG samples (the 500 Hz stream is too large for per-row objects)."""

    t_ms: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return self.t_ms.size

    def __getitem__(self, i: int) -> EmgSample:
        return EmgSample(float(self.t_ms[i]), float(self.values[i]))


@dataclass
class Session:
    head: list[HeadFrame]
    emg: EmgStream
    head_rate_hz: float
    emg_rate_hz: float


@dataclass
class AlignmentResult:
    records: list[AlignedRecord]
    dropped: int


def _parse_float(text: str, what: str, line_no: int | None) -> float:
    try:
        value = float(text)
    except ValueError:
        raise StreamFormatError(f"non-numeric {what}: {text!r}", line_no) from None
    if not math.isfinite(value):
        raise StreamFormatError(f"non-finite {what}: {text!r}", line_no)
    return value


def parse_head_frame(line: str, line_no: int | None = None) -> HeadFrame:
    """Parse one head CSV line; raises StreamFormatError with the reason."""
    parts = line.strip().split(",")
    if len(parts) != 4:
        raise StreamFormatError(
            f"expected 4 fields (t_ms,roll_deg,pitch_deg,yaw_deg), got {len(parts)}",
            line_no,
        )
    t = _parse_float(parts[0], "t_ms", line_no)
    angles = []
    for text, name in zip(parts[1:], ("roll_deg", "pitch_deg", "yaw_deg")):
        v = _parse_float(text, name, line_no)
        if not -180.0 <= v <= 180.0:
            raise StreamFormatError(f"{name} {v} outside [-180, 180]", line_no)
        angles.append(v)
    return HeadFrame(t, angles[0], angles[1], angles[2])


def parse_emg_sample(line: str, line_no: int | None = None) -> EmgSample:
    """Parse one EMG CSV line; raises StreamFormatError with the reason."""
    parts = line.strip().split(",")
    if len(parts) != 2:
        raise StreamFormatError(
            f"expected 2 fields (t_ms,value), got {len(parts)}", line_no
        )
    t = _parse_float(parts[0], "t_ms", line_no)
    v = _parse_float(parts[1], "value", line_no)
    if not -1.0 <= v <= 1.0:
        raise StreamFormatError(f"value {v} outside [-1, 1]", line_no)
    return EmgSample(t, v)


def _format_ms(t: float) -> str:
    return str(int(t)) if float(t).is_integer() else format(t, ".6f")


def serialize_head_frame(frame: HeadFrame) -> str:
    return "%s,%.6f,%.6f,%.6f" % (
        _format_ms(frame.t_ms), frame.roll_deg, frame.pitch_deg, frame.yaw_deg
    )


def serialize_emg_sample(sample: EmgSample) -> str:
    return "%s,%.6f" % (_format_ms(sample.t_ms), sample.value)


def _read_table(path: str, header: str, n_cols: int) -> np.ndarray:
    """Read a CSV file to an (n, n_cols) float array with strict validation."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        if first.strip() != header:
            raise StreamFormatError(
                f"header mismatch: expected {header!r}, got {first.strip()!r}",
                line_no=1, path=path,
            )
        body = fh.read()
        if not body.strip():
            return np.empty((0, n_cols), dtype=np.float64)
        try:
            data = np.loadtxt(io.StringIO(body), delimiter=",", dtype=np.float64,
                              ndmin=2)
        except ValueError:
            # slow path only to locate the offending line for the error message
            for i, line in enumerate(body.splitlines(), start=2):
                if not line.strip():
                    continue
                parts = line.strip().split(",")
                if len(parts) != n_cols:
                    raise StreamFormatError(
                        f"expected {n_cols} fields, got {len(parts)}",
                        line_no=i, path=path,
                    ) from None
                for p in parts:
                    try:
                        float(p)
                    except ValueError:
                        raise StreamFormatError(
                            f"non-numeric field {p!r}", line_no=i, path=path
                        ) from None
            raise StreamFormatError("unparseable data section", path=path) from None
    if data.size and data.shape[1] != n_cols:
        raise StreamFormatError(
            f"expected {n_cols} columns, got {data.shape[1]}", path=path
        )
    return data if data.size else data.reshape(0, n_cols)


def _check_finite(data: np.ndarray, path: str, col_names: tuple[str, ...]) -> None:
    bad = ~np.isfinite(data)
    if bad.any():
        row, col = (int(v) for v in np.argwhere(bad)[0])
        raise StreamFormatError(
            f"non-finite {col_names[col]}", line_no=row + 2, path=path
        )


def _check_monotone(t: np.ndarray, path: str) -> None:
    if t.size < 2:
        return
    diffs = np.diff(t)
    if (diffs <= 0).any():
        row = int(np.argmax(diffs <= 0))
        raise StreamFormatError(
            f"non-monotone timestamp {t[row + 1]:g} after {t[row]:g}",
            line_no=row + 3, path=path,
        )


def load_head_csv(path: str) -> list[HeadFrame]:
    data = _read_table(path, HEAD_HEADER, 4)
    _check_finite(data, path, ("t_ms", "roll_deg", "pitch_deg", "yaw_deg"))
    angles = data[:, 1:]
    bad = (angles < -180.0) | (angles > 180.0)
    if bad.any():
        row = int(np.argwhere(bad)[0][0])
        raise StreamFormatError("angle outside [-180, 180]", line_no=row + 2, path=path)
    _check_monotone(data[:, 0], path)
    return [HeadFrame(*row) for row in data.tolist()]


def load_emg_csv(path: str) -> EmgStream:
    data = _read_table(path, EMG_HEADER, 2)
    _check_finite(data, path, ("t_ms", "value"))
    values = data[:, 1]
    bad = (values < -1.0) | (values > 1.0)
    if bad.any():
        row = int(np.argmax(bad))
        raise StreamFormatError("value outside [-1, 1]", line_no=row + 2, path=path)
    _check_monotone(data[:, 0], path)
    return EmgStream(data[:, 0].copy(), values.copy())


def estimate_rate_hz(t_ms: np.ndarray) -> float:
    """Nominal stream rate from the median inter-sample gap; 0 if length < 2."""
    if t_ms.size < 2:
        return 0.0
    return 1000.0 / float(np.median(np.diff(t_ms)))


def load_session(head_path: str, emg_path: str) -> Session:
    """Load and validate both streams; estimates per-stream nominal rates."""
    head = load_head_csv(head_path)
    emg = load_emg_csv(emg_path)
    head_t = np.array([f.t_ms for f in head], dtype=np.float64)
    return Session(head, emg, estimate_rate_hz(head_t), estimate_rate_hz(emg.t_ms))


def emg_to_series(emg: EmgStream, sample_rate: float | None = None) -> Series:
    """View the EMG stream as a uniform Series (rate from median gap by default)."""
    if len(emg) == 0:
        return Series(sample_rate or 1.0, 0.0, np.empty(0))
    rate = sample_rate if sample_rate is not None else estimate_rate_hz(emg.t_ms)
    if not rate > 0:
        raise StreamFormatError("cannot infer sample rate from a single sample")
    return Series(rate, float(emg.t_ms[0]), emg.values)


def calibrate_offsets(frames: list[HeadFrame],
                      window_s: float = DEFAULT_CALIBRATION_WINDOW_S) -> CalibrationOffsets:
    """Per-axis mean over the first window_s seconds of a neutral-posture hold."""
    if not frames:
        raise StreamFormatError("no head frames to calibrate from")
    if not window_s > 0:
        raise StreamFormatError(f"calibration window must be positive, got {window_s}")
    t0 = frames[0].t_ms
    # each frame covers one sample period, so n frames at 50 Hz span n * 20 ms
    t_all = np.array([f.t_ms for f in frames], dtype=np.float64)
    period = float(np.median(np.diff(t_all))) if len(frames) > 1 else 0.0
    span_ms = frames[-1].t_ms - t0 + period
    if span_ms < window_s * 1000.0 - 1e-9:
        raise StreamFormatError(
            f"insufficient data for calibration: stream covers {span_ms / 1000.0:.3f} s, "
            f"window needs {window_s} s"
        )
    cutoff = t0 + window_s * 1000.0
    window = [f for f in frames if f.t_ms < cutoff]
    roll = float(np.mean([f.roll_deg for f in window]))
    pitch = float(np.mean([f.pitch_deg for f in window]))
    yaw = float(np.mean([f.yaw_deg for f in window]))
    return CalibrationOffsets(roll, pitch, yaw)


def wrap_degrees(angle: float) -> float:
    """Wrap into [-180, 180) (half-open at +180)."""
    return (angle + 180.0) % 360.0 - 180.0


def apply_calibration(frame: HeadFrame, offsets: CalibrationOffsets) -> HeadFrame:
    return HeadFrame(
        frame.t_ms,
        wrap_degrees(frame.roll_deg - offsets.roll0_deg),
        wrap_degrees(frame.pitch_deg - offsets.pitch0_deg),
        wrap_degrees(frame.yaw_deg - offsets.yaw0_deg),
    )


def align_streams(frames: list[HeadFrame], envelope: Series,
                  tolerance_ms: float = DEFAULT_TOLERANCE_MS) -> AlignmentResult:
    """One AlignedRecord per head frame bracketed by envelope samples.

    The envelope value is linearly interpolated between the bracketing
    samples; frames whose brackets are missing or farther than tolerance_ms
    are dropped and counted, never fatal.
    """
    records: list[AlignedRecord] = []
    dropped = 0
    n = len(envelope)
    if n == 0:
        return AlignmentResult([], len(frames))
    t0 = envelope.t0_ms
    dt = envelope.dt_ms
    t_last = t0 + (n - 1) * dt
    vals = envelope.values
    for f in frames:
        t = f.t_ms
        if t < t0 or t > t_last:
            dropped += 1
            continue
        pos = (t - t0) / dt
        i = int(pos)
        if i >= n - 1:
            i = n - 1
            frac = 0.0
        else:
            frac = pos - i
        left_gap = frac * dt
        right_gap = (1.0 - frac) * dt if frac > 0.0 else 0.0
        if left_gap > tolerance_ms or right_gap > tolerance_ms:
            dropped += 1
            continue
        if frac == 0.0:
            env = float(vals[i])
        else:
            env = float(vals[i] * (1.0 - frac) + vals[i + 1] * frac)
        records.append(AlignedRecord(t, f.roll_deg, f.pitch_deg, f.yaw_deg, env))
    return AlignmentResult(records, dropped)


def write_head_csv(path: str, frames: list[HeadFrame]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(HEAD_HEADER + "\n")
        for f in frames:
            fh.write(serialize_head_frame(f) + "\n")


def write_aligned_csv(path: str, records: list[AlignedRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(ALIGNED_HEADER + "\n")
        for r in records:
            fh.write("%s,%.6f,%.6f,%.6f,%.6f\n" % (
                _format_ms(r.t_ms), r.roll_deg, r.pitch_deg, r.yaw_deg, r.envelope
            ))


def load_labels_csv(path: str) -> tuple[np.ndarray, list[str]]:
    """Read a labels CSV; returns (t_ms array, label list)."""
    t: list[float] = []
    labels: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        if first.strip() != LABELS_HEADER:
            raise StreamFormatError(
                f"header mismatch: expected {LABELS_HEADER!r}, got {first.strip()!r}",
                line_no=1, path=path,
            )
        for i, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.strip().split(",")
            if len(parts) != 2:
                raise StreamFormatError(
                    f"expected 2 fields, got {len(parts)}", line_no=i, path=path
                )
            t.append(_parse_float(parts[0], "t_ms", i))
            labels.append(parts[1])
    return np.asarray(t, dtype=np.float64), labels
