"""Command-line entry point wiring the pipeline.

Verbs: synth (generate a session), train (fit and save one model), report
(compare all five families), stream (stdin head frames -> stdout predictions),
detect (posture episodes and strain). Exit codes: 0 success, 1 validation or
config error, 2 I/O error.
"""
from __future__ import annotations

import argparse
import io
import os
import sys

import numpy as np

from . import config as cfgmod
from . import dsp, ingest, models, posture, synth
from .errors import PipelineError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neckstrain",
        description="Predict neck muscle strain from head-tracker orientation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="configuration file path")
        p.add_argument("--seed", type=int, help="override generator and model seeds")

    p = sub.add_parser("synth", help="generate a synthetic session")
    common(p)
    p.add_argument("--out", default="session", help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one model on a recorded session")
    common(p)
    p.add_argument("head_csv")
    p.add_argument("emg_csv")
    p.add_argument("--out", default="model.json", help="model output path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("report", help="compare all model families")
    common(p)
    p.add_argument("head_csv")
    p.add_argument("emg_csv")
    p.add_argument("--out", default="report.csv", help="report CSV path")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("stream", help="stdin head frames -> stdout predictions")
    common(p)
    p.add_argument("model_file")
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("detect", help="posture episodes and strain index")
    common(p)
    p.add_argument("head_csv")
    p.add_argument("--out", default="episodes.csv", help="episodes CSV path")
    p.add_argument("--model", help="model file for predicted-envelope strain")
    p.set_defaults(func=cmd_detect)
    return parser


def _extract_envelope(cfg: cfgmod.Config, raw: dsp.Series) -> dsp.Series:
    band = dsp.design_butterworth(
        "bandpass",
        (cfg.dsp.bandpass_low_hz, cfg.dsp.bandpass_high_hz),
        cfg.dsp.bandpass_order,
        raw.sample_rate,
    )
    filtered = dsp.filter_forward(band, raw)
    return dsp.extract_envelope(
        filtered,
        cfg.dsp.envelope_method,
        lowpass_hz=cfg.dsp.envelope_lowpass_hz,
        window_ms=cfg.dsp.envelope_rms_window_ms,
    )


def _aligned_dataset(cfg: cfgmod.Config, head_csv: str,
                     emg_csv: str) -> tuple[models.Dataset, ingest.AlignmentResult]:
    session = ingest.load_session(head_csv, emg_csv)
    envelope = _extract_envelope(cfg, ingest.emg_to_series(session.emg))
    offsets = ingest.calibrate_offsets(session.head, cfg.sync.calibration_window_s)
    calibrated = [ingest.apply_calibration(f, offsets) for f in session.head]
    result = ingest.align_streams(calibrated, envelope, cfg.sync.tolerance_ms)
    if result.dropped:
        print(f"note: dropped {result.dropped} head frames without envelope coverage",
              file=sys.stderr)
    if not result.records:
        raise PipelineError(
            f"no aligned records ({result.dropped} head frames dropped); "
            "check stream time spans and sync.tolerance_ms"
        )
    return models.build_dataset(result.records), result


def _fmt(value: float | None) -> str:
    return "undefined" if value is None else "%.6f" % value


def cmd_synth(cfg: cfgmod.Config, args: argparse.Namespace) -> int:
    script, params, seed = cfgmod.synth_objects(cfg)
    session = synth.synth_session(script, params, seed, args.out)
    print(f"session written to {args.out}")
    print("duration_s=%.1f frames=%d emg_samples=%d seed=%d" % (
        script.total_s, len(session.frames), len(session.raw_emg), seed
    ))
    for name, seconds in sorted(synth.posture_seconds(script).items()):
        print("posture_seconds %s=%.1f" % (name, seconds))
    return 0


def cmd_train(cfg: cfgmod.Config, args: argparse.Namespace) -> int:
    ds, _ = _aligned_dataset(cfg, args.head_csv, args.emg_csv)
    train, test = models.split_dataset(
        ds, cfg.models.split, cfg.models.test_fraction, cfg.models.seed
    )
    spec = cfgmod.model_spec(cfg, cfg.models.family)
    model = models.fit(spec, train)
    models.save_model(model, args.out)
    train_metrics = models.evaluate(model, train)
    test_metrics = models.evaluate(model, test)
    print(f"family={model.family} rows={len(ds)} train={len(train)} test={len(test)}")
    print(f"train_r2={_fmt(train_metrics.r2)} train_mse={_fmt(train_metrics.mse)}")
    print(f"test_r2={_fmt(test_metrics.r2)} test_mse={_fmt(test_metrics.mse)}")
    print(f"model written to {args.out}")
    return 0


def cmd_report(cfg: cfgmod.Config, args: argparse.Namespace) -> int:
    ds, _ = _aligned_dataset(cfg, args.head_csv, args.emg_csv)
    rows = models.compare_models(
        ds, cfgmod.all_model_specs(cfg), cfg.models.split,
        cfg.models.test_fraction, cfg.models.seed,
    )
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("family,r2,mse,importance_roll,importance_pitch,importance_yaw\n")
        for row in rows:
            if row.family == "random_forest":
                imp = models.feature_importance(row.model)
                imp_cells = "%.6f,%.6f,%.6f" % (imp[0], imp[1], imp[2])
            else:
                imp_cells = ",,"
            fh.write("%s,%s,%s,%s\n" % (
                row.family, _fmt(row.r2), _fmt(row.mse), imp_cells
            ))
    for row in rows:
        print(f"{row.family}: r2={_fmt(row.r2)} mse={_fmt(row.mse)}")
    print(f"report written to {args.out}")
    return 0


def cmd_stream(cfg: cfgmod.Config, args: argparse.Namespace) -> int:
    model = models.load_model(args.model_file)
    thresholds = cfgmod.posture_thresholds(cfg)
    offsets = ingest.CalibrationOffsets(
        cfg.sync.roll0_deg, cfg.sync.pitch0_deg, cfg.sync.yaw0_deg
    )
    previous: str | None = None
    for line_no, line in enumerate(sys.stdin, start=1):
        if not line.strip():
            continue
        if line.strip() == ingest.HEAD_HEADER:
            continue
        try:
            frame = ingest.parse_head_frame(line, line_no)
        except PipelineError as exc:
            print(f"line {line_no} skipped: {exc}", file=sys.stderr)
            continue
        frame = ingest.apply_calibration(frame, offsets)
        previous = posture.classify_frame(frame, thresholds, previous)
        estimate = models.predict(
            model, [frame.roll_deg, frame.pitch_deg, frame.yaw_deg]
        )
        try:
            print("%s,%.6f,%s" % (ingest._format_ms(frame.t_ms), estimate, previous),
                  flush=True)
        except BrokenPipeError:
            # downstream reader closed; exit quietly like a Unix filter
            try:
                os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
            except (OSError, ValueError, AttributeError, io.UnsupportedOperation):
                pass
            return 0
    return 0


def cmd_detect(cfg: cfgmod.Config, args: argparse.Namespace) -> int:
    frames = ingest.load_head_csv(args.head_csv)
    offsets = ingest.calibrate_offsets(frames, cfg.sync.calibration_window_s)
    calibrated = [ingest.apply_calibration(f, offsets) for f in frames]
    thresholds = cfgmod.posture_thresholds(cfg)
    labels = posture.classify_stream(calibrated, thresholds)
    episodes = posture.segment_episodes(
        calibrated, labels, thresholds, cfg.posture.min_duration_s
    )
    posture.write_episodes_csv(args.out, episodes)
    for label, seconds in sorted(posture.seconds_per_label(episodes).items()):
        print("label_seconds %s=%.1f" % (label, seconds))
    if args.model:
        model = models.load_model(args.model)
        features = np.array(
            [[f.roll_deg, f.pitch_deg, f.yaw_deg] for f in calibrated]
        )
        predicted = models.predict(model, features)
        records = [
            ingest.AlignedRecord(f.t_ms, f.roll_deg, f.pitch_deg, f.yaw_deg,
                                 float(e))
            for f, e in zip(calibrated, predicted)
        ]
        strain = posture.strain_index(records, cfg.posture.strain_threshold)
        print("strain_index=%.6f" % strain)
    print(f"episodes written to {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = cfgmod.load_config(args.config) if args.config else cfgmod.default_config()
        if args.seed is not None:
            cfg = cfgmod.with_seed(cfg, args.seed)
        return args.func(cfg, args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
