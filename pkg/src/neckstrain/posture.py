"""Rule-based posture labeling, episode segmentation, and strain accumulation.

Frame classification buckets calibrated pitch into neutral / four bend levels
with a hysteresis dead-band so jitter at a boundary cannot chatter the label.
Episode segmentation merges sub-threshold blips and re-labels prolonged
flexion (the forward-head signature) as sustained_flexion. With orientation
data alone a hunched posture is indistinguishable from forward head posture
(both are sustained flexion of the head frame), so the detector reports
sustained_flexion for both rather than guessing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PipelineError
from .ingest import AlignedRecord, HeadFrame

LABELS = (
    "neutral",
    "neck_bend_1",
    "neck_bend_2",
    "neck_bend_3",
    "neck_bend_4",
    "sustained_flexion",
)

EPISODES_HEADER = "label,start_ms,end_ms,duration_s,mean_pitch_deg"

DEFAULT_STRAIN_THRESHOLD = 0.1


@dataclass(frozen=True)
class PostureThresholds:
    """Bend-level boundaries sit midway between the generator's hold targets."""

    bend_boundaries_deg: tuple[float, float, float, float] = (5.0, 17.5, 32.5, 47.5)
    hysteresis_deg: float = 2.0
    sustain_s: float = 10.0
    sustain_pitch_deg: float = 15.0

    def __post_init__(self) -> None:
        b = self.bend_boundaries_deg
        if len(b) != 4 or list(b) != sorted(b) or len(set(b)) != 4:
            raise PipelineError("bend boundaries must be four strictly increasing values")
        if self.hysteresis_deg < 0:
            raise PipelineError("hysteresis_deg must be >= 0")
        if not self.sustain_s > 0:
            raise PipelineError("sustain_s must be positive")


@dataclass(frozen=True)
class PostureEpisode:
    label: str
    start_ms: float
    end_ms: float
    duration_s: float
    mean_pitch_deg: float


def _level_of_label(label: str | None) -> int | None:
    if label is None or label == "sustained_flexion":
        return None
    if label == "neutral":
        return 0
    if label.startswith("neck_bend_"):
        return int(label[-1])
    raise PipelineError(f"unknown posture label {label!r}")


def _label_of_level(level: int) -> str:
    return "neutral" if level == 0 else f"neck_bend_{level}"


def classify_frame(frame: HeadFrame, thresholds: PostureThresholds,
                   previous_label: str | None = None) -> str:
    """Bucket pitch into neutral/bend levels with hysteresis.

    Level changes need the pitch to clear the boundary by hysteresis_deg:
    with boundaries b and previous level L, the promoted level counts
    boundaries satisfying pitch >= b + h, the demoted level counts
    pitch >= b - h, and the label moves only when one of those disagrees
    with L in its direction. An oscillation smaller than the dead-band
    around any boundary therefore never changes the label.
    """
    pitch = frame.pitch_deg
    b = thresholds.bend_boundaries_deg
    h = thresholds.hysteresis_deg
    prev = _level_of_label(previous_label)
    up = sum(1 for bound in b if pitch >= bound + h)
    if prev is None:
        return _label_of_level(sum(1 for bound in b if pitch >= bound))
    down = sum(1 for bound in b if pitch >= bound - h)
    if up > prev:
        return _label_of_level(up)
    if down < prev:
        return _label_of_level(down)
    return _label_of_level(prev)


def classify_stream(frames: list[HeadFrame],
                    thresholds: PostureThresholds) -> list[str]:
    """Per-frame labels with the hysteresis state carried along the stream."""
    labels: list[str] = []
    previous: str | None = None
    for frame in frames:
        previous = classify_frame(frame, thresholds, previous)
        labels.append(previous)
    return labels


def _frame_period_ms(t: np.ndarray) -> float:
    if t.size < 2:
        return 20.0
    return float(np.median(np.diff(t)))


def segment_episodes(frames: list[HeadFrame], labels: list[str],
                     thresholds: PostureThresholds,
                     min_duration_s: float = 0.5) -> list[PostureEpisode]:
    """Maximal equal-label runs -> episodes, with two cleanup rules.

    Runs shorter than min_duration_s merge into the previous episode (a
    leading short run merges into the following one). Then any maximal chain
    of consecutive flexion episodes lasting >= sustain_s whose frames average
    >= sustain_pitch_deg becomes a single sustained_flexion episode. Episodes
    partition [first frame, last frame + period).
    """
    if len(frames) != len(labels):
        raise PipelineError("frames and labels lengths disagree")
    if not frames:
        return []
    t = np.array([f.t_ms for f in frames], dtype=np.float64)
    pitch = np.array([f.pitch_deg for f in frames], dtype=np.float64)
    period = _frame_period_ms(t)
    end_of_stream = float(t[-1]) + period

    # maximal runs of equal labels as [start_index, end_index) pairs
    runs: list[tuple[int, int, str]] = []
    start = 0
    for i in range(1, len(labels)):
        if labels[i] != labels[i - 1]:
            runs.append((start, i, labels[start]))
            start = i
    runs.append((start, len(labels), labels[start]))

    def run_end_ms(end_idx: int) -> float:
        return float(t[end_idx]) if end_idx < len(labels) else end_of_stream

    # absorb runs shorter than min_duration_s, re-coalescing equal neighbors
    merged: list[list] = []  # [start_idx, end_idx, label]
    pending_start: int | None = None
    for s, e, label in runs:
        duration_s = (run_end_ms(e) - float(t[s])) / 1000.0
        if duration_s < min_duration_s:
            if merged:
                merged[-1][1] = e
            elif pending_start is None:
                pending_start = s
            continue
        if pending_start is not None:
            s = pending_start
            pending_start = None
        if merged and merged[-1][2] == label:
            merged[-1][1] = e
        else:
            merged.append([s, e, label])
    if not merged:
        # everything was short: collapse to a single run of the first label
        merged = [[0, len(labels), labels[0]]]

    # promote sustained flexion chains
    def is_flexion(label: str) -> bool:
        level = _level_of_label(label)
        return label == "sustained_flexion" or (level is not None and level >= 1)

    episodes: list[list] = []
    i = 0
    while i < len(merged):
        if not is_flexion(merged[i][2]):
            episodes.append(merged[i])
            i += 1
            continue
        j = i
        while j < len(merged) and is_flexion(merged[j][2]):
            j += 1
        chain_start, chain_end = merged[i][0], merged[j - 1][1]
        duration_s = (run_end_ms(chain_end) - float(t[chain_start])) / 1000.0
        mean_pitch = float(np.mean(pitch[chain_start:chain_end]))
        if duration_s >= thresholds.sustain_s and mean_pitch >= thresholds.sustain_pitch_deg:
            episodes.append([chain_start, chain_end, "sustained_flexion"])
        else:
            episodes.extend(merged[i:j])
        i = j

    out = []
    for s, e, label in episodes:
        start_ms = float(t[s])
        end_ms = run_end_ms(e)
        out.append(PostureEpisode(
            label, start_ms, end_ms, (end_ms - start_ms) / 1000.0,
            float(np.mean(pitch[s:e])),
        ))
    return out


def episodes_to_frame_labels(episodes: list[PostureEpisode],
                             t_ms: np.ndarray) -> list[str]:
    """Paint episode labels back onto frame timestamps (for accuracy checks)."""
    starts = np.array([e.start_ms for e in episodes])
    idx = np.searchsorted(starts, np.asarray(t_ms, dtype=np.float64), side="right") - 1
    idx = np.clip(idx, 0, len(episodes) - 1)
    return [episodes[i].label for i in idx]


def strain_index(records: list[AlignedRecord],
                 threshold: float = DEFAULT_STRAIN_THRESHOLD) -> float:
    """Trapezoidal time-integral of max(envelope - threshold, 0), in
    envelope-units * seconds. Additive over time partitions and nondecreasing
    in every envelope value."""
    if len(records) < 2:
        return 0.0
    total = 0.0
    prev_t = records[0].t_ms
    prev_f = max(records[0].envelope - threshold, 0.0)
    for r in records[1:]:
        f = max(r.envelope - threshold, 0.0)
        total += 0.5 * (prev_f + f) * (r.t_ms - prev_t) / 1000.0
        prev_t = r.t_ms
        prev_f = f
    return total


def write_episodes_csv(path: str, episodes: list[PostureEpisode]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(EPISODES_HEADER + "\n")
        for e in episodes:
            fh.write("%s,%s,%s,%.3f,%.3f\n" % (
                e.label,
                ("%d" % e.start_ms) if float(e.start_ms).is_integer() else "%.3f" % e.start_ms,
                ("%d" % e.end_ms) if float(e.end_ms).is_integer() else "%.3f" % e.end_ms,
                e.duration_s,
                e.mean_pitch_deg,
            ))


def seconds_per_label(episodes: list[PostureEpisode]) -> dict[str, float]:
    totals: dict[str, float] = {}
    for e in episodes:
        totals[e.label] = totals.get(e.label, 0.0) + e.duration_s
    return totals


def label_accuracy(predicted: list[str], truth: list[str]) -> float:
    """Fraction of frames whose labels agree (helper for validation)."""
    if len(predicted) != len(truth) or not predicted:
        raise PipelineError("label streams must be nonempty and equally long")
    hits = sum(1 for p, g in zip(predicted, truth) if p == g)
    return hits / len(predicted)
