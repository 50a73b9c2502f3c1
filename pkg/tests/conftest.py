"""Shared fixtures: the default synthetic session is expensive enough that the
whole suite shares one copy of it (and of its pipeline products)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

from neckstrain import config as cfgmod
from neckstrain import dsp, ingest, models, synth


@dataclass
class PipelineBundle:
    config: cfgmod.Config
    session: synth.SyntheticSession
    envelope: dsp.Series
    calibrated: list[ingest.HeadFrame]
    records: list[ingest.AlignedRecord]
    dropped: int
    dataset: models.Dataset


def run_pipeline(cfg: cfgmod.Config, session: synth.SyntheticSession) -> PipelineBundle:
    """filter -> envelope -> calibrate -> align -> dataset, as the CLI does."""
    band = dsp.design_butterworth(
        "bandpass",
        (cfg.dsp.bandpass_low_hz, cfg.dsp.bandpass_high_hz),
        cfg.dsp.bandpass_order,
        session.raw_emg.sample_rate,
    )
    envelope = dsp.extract_envelope(
        dsp.filter_forward(band, session.raw_emg),
        cfg.dsp.envelope_method,
        lowpass_hz=cfg.dsp.envelope_lowpass_hz,
        window_ms=cfg.dsp.envelope_rms_window_ms,
    )
    offsets = ingest.calibrate_offsets(session.frames, cfg.sync.calibration_window_s)
    calibrated = [ingest.apply_calibration(f, offsets) for f in session.frames]
    result = ingest.align_streams(calibrated, envelope, cfg.sync.tolerance_ms)
    dataset = models.build_dataset(result.records)
    return PipelineBundle(
        cfg, session, envelope, calibrated, result.records, result.dropped, dataset
    )


@pytest.fixture(scope="session")
def base_config() -> cfgmod.Config:
    return cfgmod.default_config()


@pytest.fixture(scope="session")
def default_bundle(base_config) -> PipelineBundle:
    """The full default session (12 minutes, seed 7) plus pipeline products."""
    script, params, seed = cfgmod.synth_objects(base_config)
    session = synth.synth_session(script, params, seed)
    return run_pipeline(base_config, session)


@pytest.fixture(scope="session")
def default_comparison(default_bundle) -> list[models.ComparisonRow]:
    """All five families fit on the default session's block split."""
    cfg = default_bundle.config
    return models.compare_models(
        default_bundle.dataset,
        cfgmod.all_model_specs(cfg),
        cfg.models.split,
        cfg.models.test_fraction,
        cfg.models.seed,
    )


COMPACT_CONFIG = """\
[synth]
script = neutral:6 bend2:8 neutral:2 bend4:8 neutral:2 fhp:10 neutral:4
script_repeat = 2
seed = 7

[models]
rf_trees = 50
seed = 7
"""


@pytest.fixture(scope="session")
def compact_config_path(tmp_path_factory) -> str:
    """A fast 80 s session config for CLI end-to-end tests."""
    path = tmp_path_factory.mktemp("cfg") / "compact.cfg"
    path.write_text(COMPACT_CONFIG, encoding="utf-8")
    return str(path)


@pytest.fixture(scope="session")
def compact_session_dir(tmp_path_factory, compact_config_path) -> str:
    """The compact session's CSV artifacts, generated via the CLI."""
    from neckstrain.cli import main

    out = tmp_path_factory.mktemp("compact_session")
    code = main(["synth", "--config", compact_config_path, "--out", str(out)])
    assert code == 0
    return str(out)


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
