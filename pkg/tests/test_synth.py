"""Generator behavior: determinism, the activation link, and spectral fatigue.

Activation expectations are recomputed here from math.exp (independent of the
generator's vectorized logistic); the rectified-Gaussian scale sqrt(2/pi) is
the closed-form mean of |N(0,1)|.
"""
import dataclasses
import filecmp
import math

import numpy as np
import pytest

from neckstrain import dsp, ingest, synth
from neckstrain.errors import GeneratorError

PARAMS = synth.GeneratorParams()


def logistic(x):
    return 1.0 / (1.0 + math.exp(-x))


def expected_activation(pitch, roll=0.0, yaw=0.0, p=PARAMS):
    p_eff = pitch + p.roll_weight * abs(roll) + p.yaw_weight * abs(yaw)
    z = (p_eff - p.activation_midpoint_deg) / p.activation_slope_deg
    return p.activation_baseline + (p.activation_max - p.activation_baseline) * logistic(z)


class TestKinematics:
    def test_neutral_script_zero_jitter(self):
        script = synth.PostureScript.parse("neutral:10")
        params = dataclasses.replace(PARAMS, jitter_deg=0.0)
        frames, labels = synth.generate_kinematics(script, params, 1)
        assert len(frames) == 500
        assert all(f.roll_deg == 0.0 and f.pitch_deg == 0.0 and f.yaw_deg == 0.0
                   for f in frames)
        assert set(labels) == {"neutral"}

    def test_single_bend_segment_exact_pitch(self):
        script = synth.PostureScript.parse("bend2:10")
        params = dataclasses.replace(PARAMS, jitter_deg=0.0)
        frames, labels = synth.generate_kinematics(script, params, 1)
        assert all(f.pitch_deg == params.bend_pitch_deg[1] for f in frames)
        assert set(labels) == {"neck_bend_2"}

    def test_labels_switch_at_boundary(self):
        script = synth.PostureScript.parse("neutral:4 bend3:4")
        params = dataclasses.replace(PARAMS, jitter_deg=0.0)
        frames, labels = synth.generate_kinematics(script, params, 1)
        assert labels[199] == "neutral"
        assert labels[200] == "neck_bend_3"  # t = 4000 ms is the boundary

    def test_ramp_is_smooth_and_monotone(self):
        script = synth.PostureScript.parse("neutral:4 bend4:4")
        params = dataclasses.replace(PARAMS, jitter_deg=0.0)
        frames, _ = synth.generate_kinematics(script, params, 1)
        pitch = np.array([f.pitch_deg for f in frames])
        ramp = pitch[170:230]  # 1 s ramp centered on t=4 s
        assert (np.diff(ramp) >= -1e-12).all()
        assert pitch[174] == 0.0 and pitch[226] == params.bend_pitch_deg[3]

    def test_deterministic_per_seed(self):
        script = synth.default_script()
        f1, l1 = synth.generate_kinematics(script, PARAMS, 123)
        f2, l2 = synth.generate_kinematics(script, PARAMS, 123)
        assert f1 == f2 and l1 == l2
        f3, _ = synth.generate_kinematics(script, PARAMS, 124)
        assert f1 != f3

    def test_hunch_has_roll_bias(self):
        script = synth.PostureScript.parse("hunch:4")
        params = dataclasses.replace(PARAMS, jitter_deg=0.0)
        frames, labels = synth.generate_kinematics(script, params, 1)
        assert all(f.roll_deg == params.hunch_roll_deg for f in frames)
        assert set(labels) == {"sustained_flexion"}

    def test_empty_script_rejected(self):
        with pytest.raises(GeneratorError):
            synth.PostureScript(())

    def test_unknown_posture_rejected(self):
        with pytest.raises(GeneratorError):
            synth.PostureScript.parse("slouch:5")


class TestActivationLink:
    def test_midpoint_gives_half_span(self):
        frame = ingest.HeadFrame(0.0, 0.0, PARAMS.activation_midpoint_deg, 0.0)
        expected = PARAMS.activation_baseline + 0.5 * (
            PARAMS.activation_max - PARAMS.activation_baseline
        )
        assert synth.activation_from_pose(frame, PARAMS) == pytest.approx(expected)

    def test_neutral_pose_matches_logistic_tail(self):
        frame = ingest.HeadFrame(0.0, 0.0, 0.0, 0.0)
        assert synth.activation_from_pose(frame, PARAMS) == pytest.approx(
            expected_activation(0.0), rel=1e-12
        )

    def test_saturation_55_vs_70(self):
        a55 = synth.activation_from_pose(ingest.HeadFrame(0, 0, 55.0, 0), PARAMS)
        a70 = synth.activation_from_pose(ingest.HeadFrame(0, 0, 70.0, 0), PARAMS)
        assert abs(a70 - a55) / a70 <= 0.05

    def test_monotone_in_pitch(self):
        acts = [
            synth.activation_from_pose(ingest.HeadFrame(0, 0, p, 0), PARAMS)
            for p in np.linspace(-60, 90, 151)
        ]
        assert all(b >= a for a, b in zip(acts, acts[1:]))

    def test_roll_and_yaw_enter_through_magnitude(self):
        a = synth.activation_from_pose(ingest.HeadFrame(0, -8.0, 20.0, -4.0), PARAMS)
        assert a == pytest.approx(expected_activation(20.0, -8.0, -4.0), rel=1e-12)

    def test_range_respected(self):
        for pitch in (-180.0, 0.0, 180.0):
            a = synth.activation_from_pose(ingest.HeadFrame(0, 0, pitch, 0), PARAMS)
            assert PARAMS.activation_baseline <= a <= PARAMS.activation_max


class TestGenerateEmg:
    def test_zero_activation_zero_sensor_noise(self):
        params = dataclasses.replace(PARAMS, sensor_noise=0.0)
        act = dsp.Series(500.0, 0.0, np.zeros(2000))
        raw = synth.generate_emg(act, params, 3)
        assert np.array_equal(raw.values, np.zeros(2000))

    def test_constant_activation_envelope_scale(self):
        """Pipeline envelope of constant-activation EMG ~ 0.5 * sqrt(2/pi)."""
        params = dataclasses.replace(PARAMS, sensor_noise=0.0)
        act = dsp.Series(500.0, 0.0, np.full(30000, 0.5))  # 60 s
        raw = synth.generate_emg(act, params, 11)
        band = dsp.design_butterworth("bandpass", (20.0, 200.0), 4, 500.0)
        env = dsp.extract_envelope(dsp.filter_forward(band, raw))
        interior = env.values[2500:]  # skip 5 s of settling
        expected = 0.5 * math.sqrt(2.0 / math.pi)
        assert abs(float(np.mean(interior)) - expected) <= 0.15 * expected

    def test_output_clipped_to_adc_range(self):
        act = dsp.Series(500.0, 0.0, np.full(5000, 1.0))
        raw = synth.generate_emg(act, PARAMS, 4)
        assert float(raw.values.max()) <= 1.0
        assert float(raw.values.min()) >= -1.0

    def test_activation_out_of_range_rejected(self):
        act = dsp.Series(500.0, 0.0, np.array([0.5, 1.2]))
        with pytest.raises(GeneratorError):
            synth.generate_emg(act, PARAMS, 1)

    def test_fatigue_compresses_median_frequency(self):
        params = dataclasses.replace(PARAMS, fatigue_enabled=True, fatigue_factor=0.8,
                                     sensor_noise=0.0)
        act = dsp.Series(500.0, 0.0, np.full(60000, 0.5))  # 120 s
        raw = synth.generate_emg(act, params, 6)
        first = dsp.Series(500.0, 0.0, raw.values[:15000])
        last = dsp.Series(500.0, 0.0, raw.values[-15000:])
        mf_first = dsp.median_frequency(dsp.welch_psd(first))
        mf_last = dsp.median_frequency(dsp.welch_psd(last))
        assert mf_last <= 0.9 * mf_first

    def test_deterministic(self):
        act = dsp.Series(500.0, 0.0, np.full(3000, 0.4))
        a = synth.generate_emg(act, PARAMS, 17)
        b = synth.generate_emg(act, PARAMS, 17)
        assert np.array_equal(a.values, b.values)


class TestSessionInvariants:
    def test_files_byte_identical_across_runs(self, tmp_path):
        script = synth.PostureScript.parse("neutral:6 bend2:4 fhp:4")
        for sub in ("a", "b"):
            synth.synth_session(script, PARAMS, 7, str(tmp_path / sub))
        for name in ("head.csv", "emg.csv", "labels.csv", "activation.csv"):
            assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name,
                               shallow=False), name

    def test_written_files_load_cleanly(self, tmp_path):
        script = synth.PostureScript.parse("neutral:6 bend1:2")
        synth.synth_session(script, PARAMS, 2, str(tmp_path))
        session = ingest.load_session(str(tmp_path / "head.csv"),
                                      str(tmp_path / "emg.csv"))
        t, labels = ingest.load_labels_csv(str(tmp_path / "labels.csv"))
        assert len(labels) == len(session.head)

    def test_one_label_per_frame_and_durations_match_script(self, default_bundle):
        session = default_bundle.session
        assert len(session.labels) == len(session.frames)
        frame_s = 1.0 / synth.HEAD_RATE_HZ
        t = np.array([f.t_ms for f in session.frames]) / 1000.0
        for span in session.spans:
            in_span = (t >= span.start_s) & (t < span.end_s)
            got = {session.labels[i] for i in np.nonzero(in_span)[0]}
            assert got == {span.label}
            measured = float(in_span.sum()) * frame_s
            assert abs(measured - (span.end_s - span.start_s)) <= frame_s + 1e-9

    def test_streams_cover_same_span(self, default_bundle):
        session = default_bundle.session
        head_span = session.frames[-1].t_ms + 20.0
        emg_span = session.raw_emg.times_ms()[-1] + 2.0
        assert head_span == emg_span == session.script.total_s * 1000.0

    def test_bend_level_activation_monotone_and_saturating(self, default_bundle):
        """Ground-truth activation: increasing by level; levels 3 vs 4 close."""
        session = default_bundle.session
        act = session.activation
        means = {}
        for span in session.spans:
            if not span.posture.startswith("bend"):
                continue
            vals = act.slice_time((span.start_s + 1.5) * 1000.0,
                                  (span.end_s - 0.75) * 1000.0)
            means.setdefault(span.posture, []).append(vals)
        level_means = [float(np.mean(np.concatenate(means[f"bend{k}"])))
                       for k in (1, 2, 3, 4)]
        assert level_means[0] < level_means[1] < level_means[2]
        assert abs(level_means[3] - level_means[2]) / level_means[3] <= 0.05

    def test_fhp_activation_sustained(self, default_bundle):
        session = default_bundle.session
        p = session.params
        floor = p.activation_baseline + 0.3 * (p.activation_max - p.activation_baseline)
        for span in session.spans:
            if span.posture != "fhp":
                continue
            vals = session.activation.slice_time(span.start_s * 1000.0,
                                                 span.end_s * 1000.0)
            frac = float(np.mean(vals > floor))
            assert frac >= 0.95
