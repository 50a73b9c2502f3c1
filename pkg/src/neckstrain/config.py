"""Plain-text configuration: named sections with key = value entries.

Unknown sections or keys are errors (fail fast beats silent typos). Every key
has a documented default; dump_config writes the fully merged effective
configuration, and parsing that dump reproduces identical behavior.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError
from .models import ModelSpec
from .posture import PostureThresholds
from .synth import DEFAULT_CYCLE, DEFAULT_REPEAT, GeneratorParams, PostureScript


@dataclass(frozen=True)
class DspConfig:
    bandpass_low_hz: float = 20.0
    bandpass_high_hz: float = 200.0
    bandpass_order: int = 4
    envelope_method: str = "rectify_lowpass"
    envelope_lowpass_hz: float = 2.0
    envelope_rms_window_ms: float = 250.0
    welch_segment: int = 256
    welch_overlap: float = 0.5


@dataclass(frozen=True)
class SyncConfig:
    tolerance_ms: float = 50.0
    calibration_window_s: float = 5.0
    # fixed offsets for streaming mode, where look-ahead calibration is impossible
    roll0_deg: float = 0.0
    pitch0_deg: float = 0.0
    yaw0_deg: float = 0.0


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 7
    script: str = DEFAULT_CYCLE
    script_repeat: int = DEFAULT_REPEAT
    transition_s: float = 1.0
    bend_pitch_deg: tuple[float, ...] = (10.0, 25.0, 40.0, 55.0)
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
    noise_band_hz: tuple[float, ...] = (20.0, 200.0)
    sensor_noise: float = 0.01
    fatigue_enabled: bool = False
    fatigue_factor: float = 0.8


@dataclass(frozen=True)
class ModelsConfig:
    family: str = "random_forest"
    split: str = "block"
    test_fraction: float = 0.2
    seed: int = 7
    rf_trees: int = 100
    rf_max_depth: int = 12
    rf_min_samples_leaf: int = 5
    dt_max_depth: int = 12
    dt_min_samples_leaf: int = 5
    gb_rounds: int = 100
    gb_learning_rate: float = 0.1
    gb_max_depth: int = 3
    svr_epsilon: float = 0.01
    svr_epochs: int = 200
    linear_ridge: float = 1e-8


@dataclass(frozen=True)
class PostureConfig:
    bend_boundaries_deg: tuple[float, ...] = (5.0, 17.5, 32.5, 47.5)
    hysteresis_deg: float = 2.0
    min_duration_s: float = 0.5
    sustain_s: float = 10.0
    sustain_pitch_deg: float = 15.0
    strain_threshold: float = 0.1


@dataclass(frozen=True)
class Config:
    dsp: DspConfig = field(default_factory=DspConfig)
    sync: SyncConfig = field(default_factory=SyncConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    models: ModelsConfig = field(default_factory=ModelsConfig)
    posture: PostureConfig = field(default_factory=PostureConfig)


_SECTIONS = {
    "dsp": DspConfig,
    "sync": SyncConfig,
    "synth": SynthConfig,
    "models": ModelsConfig,
    "posture": PostureConfig,
}


def default_config() -> Config:
    return Config()


def _convert(section: str, key: str, text: str, default) -> object:
    try:
        if isinstance(default, bool):
            low = text.strip().lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(float(p) for p in text.split(",") if p.strip())
        return text.strip()
    except ValueError:
        raise ConfigError(
            f"bad value for {section}.{key}: {text.strip()!r} "
            f"(expected {type(default).__name__})"
        ) from None


def parse_config(text: str) -> Config:
    """Parse configuration text over the defaults; rejects unknown keys."""
    values: dict[str, dict[str, object]] = {name: {} for name in _SECTIONS}
    section: str | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise ConfigError(
                    f"unknown section [{section}] at line {line_no}; "
                    f"expected one of {sorted(_SECTIONS)}"
                )
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value at line {line_no}: {line!r}")
        if section is None:
            raise ConfigError(f"key outside any section at line {line_no}: {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        cls = _SECTIONS[section]
        defaults = {f.name: getattr(cls(), f.name) for f in fields(cls)}
        if key not in defaults:
            raise ConfigError(
                f"unknown key {key!r} in section [{section}] at line {line_no}"
            )
        values[section][key] = _convert(section, key, value, defaults[key])
    return Config(**{
        name: cls(**values[name]) for name, cls in _SECTIONS.items()
    })


def load_config(path: str) -> Config:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(config: Config) -> str:
    """Render the fully merged effective configuration (round-trips exactly)."""
    lines: list[str] = []
    for name, cls in _SECTIONS.items():
        lines.append(f"[{name}]")
        sub = getattr(config, name)
        for f in fields(cls):
            lines.append(f"{f.name} = {_render(getattr(sub, f.name))}")
        lines.append("")
    return "\n".join(lines)


def with_seed(config: Config, seed: int) -> Config:
    """Override both generator and model seeds (the CLI --seed flag)."""
    return replace(
        config,
        synth=replace(config.synth, seed=seed),
        models=replace(config.models, seed=seed),
    )


def synth_objects(config: Config) -> tuple[PostureScript, GeneratorParams, int]:
    s = config.synth
    script = PostureScript.parse(s.script, s.transition_s, s.script_repeat)
    if len(s.bend_pitch_deg) != 4:
        raise ConfigError("synth.bend_pitch_deg needs exactly 4 values")
    if len(s.noise_band_hz) != 2:
        raise ConfigError("synth.noise_band_hz needs exactly 2 values")
    params = GeneratorParams(
        bend_pitch_deg=tuple(s.bend_pitch_deg),
        fhp_pitch_deg=s.fhp_pitch_deg,
        hunch_pitch_deg=s.hunch_pitch_deg,
        hunch_roll_deg=s.hunch_roll_deg,
        jitter_deg=s.jitter_deg,
        activation_baseline=s.activation_baseline,
        activation_max=s.activation_max,
        activation_midpoint_deg=s.activation_midpoint_deg,
        activation_slope_deg=s.activation_slope_deg,
        roll_weight=s.roll_weight,
        yaw_weight=s.yaw_weight,
        noise_band_hz=(s.noise_band_hz[0], s.noise_band_hz[1]),
        sensor_noise=s.sensor_noise,
        fatigue_enabled=s.fatigue_enabled,
        fatigue_factor=s.fatigue_factor,
    )
    return script, params, s.seed


def posture_thresholds(config: Config) -> PostureThresholds:
    p = config.posture
    if len(p.bend_boundaries_deg) != 4:
        raise ConfigError("posture.bend_boundaries_deg needs exactly 4 values")
    return PostureThresholds(
        bend_boundaries_deg=tuple(p.bend_boundaries_deg),
        hysteresis_deg=p.hysteresis_deg,
        sustain_s=p.sustain_s,
        sustain_pitch_deg=p.sustain_pitch_deg,
    )


def model_spec(config: Config, family: str) -> ModelSpec:
    m = config.models
    hyper_by_family: dict[str, dict] = {
        "linear": {"ridge": m.linear_ridge},
        "svr_linear": {"epsilon": m.svr_epsilon, "epochs": m.svr_epochs},
        "decision_tree": {
            "max_depth": m.dt_max_depth, "min_samples_leaf": m.dt_min_samples_leaf
        },
        "random_forest": {
            "n_trees": m.rf_trees, "max_depth": m.rf_max_depth,
            "min_samples_leaf": m.rf_min_samples_leaf,
        },
        "gradient_boosting": {
            "rounds": m.gb_rounds, "learning_rate": m.gb_learning_rate,
            "max_depth": m.gb_max_depth,
        },
    }
    if family not in hyper_by_family:
        raise ConfigError(f"unknown model family {family!r}")
    return ModelSpec(family, m.seed, hyper_by_family[family])


def all_model_specs(config: Config) -> list[ModelSpec]:
    return [model_spec(config, family) for family in (
        "linear", "svr_linear", "decision_tree", "random_forest", "gradient_boosting"
    )]
