"""Experiment configuration: one JSON-serializable tree of dataclasses.

The config is the single source of truth for a run; every random draw is
derived from its seed. `load_config` reads JSON, `apply_overrides` handles
dotted key=value escapes from the CLI, and `ExperimentConfig.validate`
enforces cross-field consistency before anything runs.
"""

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .selection import SelectionConfig

DATA_DIR_ENV = "NOMA_FL_DATA_DIR"

SUPPORTED_ORDERS = (4, 8, 16, 32, 64)

ERROR_MODELS = ("analytic_injection", "full_detection")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class GeometryConfig:
    bs_position: tuple = (-50.0, 0.0, 10.0)
    region_x: tuple = (100.0, 150.0)
    region_y: tuple = (-25.0, 25.0)
    num_devices: int = 10


@dataclass
class ChannelConfig:
    # fewer antennas than devices leaves the first SIC stages
    # interference-limited, so the per-device SER spectrum spans the regime
    # where selection policies actually differ
    antennas: int = 6
    rician_k_factor: float = 0.0
    sigma2: float = 1.0
    # common transmit power P (amplitude sqrt(P)): either explicit, or derived
    # so the best-path-loss device's mean per-antenna SNR hits target_snr_db
    power: float | None = None
    target_snr_db: float = 15.5
    gain_bs_dbi: float = 5.0
    gain_device_dbi: float = 0.0
    carrier_hz: float = 915e6
    pathloss_exponent: float = 3.76


@dataclass
class ModemConfig:
    bits_per_codeword: int = 4
    bits_per_symbol: int = 4
    scale_mode: str = "per-device-per-round"
    clip_max: float = 1.0  # used by "static" scale mode


@dataclass
class DatasetConfig:
    source: str = "synthetic"  # "synthetic" | "idx"
    num_classes: int = 10
    input_dim: int = 12
    samples_per_class: int = 50
    test_samples_per_class: int = 100
    spread: float = 1.0
    center_scale: float = 1.5
    # idx mode: paths, resolved against $NOMA_FL_DATA_DIR when relative
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    subset_size: int | None = None


@dataclass
class TrainingConfig:
    learning_rate: float = 1.0
    rounds: int = 40
    hidden_dim: int = 16
    local_steps: int = 1
    dataset: DatasetConfig = field(default_factory=DatasetConfig)


@dataclass
class ConvergenceConfig:
    mu: float = 0.1
    lipschitz: float = 1.0
    zeta1: float = 1.0
    zeta2: float = 0.2
    f_star: float = 0.0  # reference optimum for the reported gap bound


@dataclass
class ExperimentConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    modem: ModemConfig = field(default_factory=ModemConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    convergence: ConvergenceConfig = field(default_factory=ConvergenceConfig)
    error_model: str = "analytic_injection"
    ser_override: float | None = None  # analytic_injection only; forces every SER
    seed: int = 12345

    def validate(self):
        problems = []
        g, ch, m, t = self.geometry, self.channel, self.modem, self.training
        if g.num_devices < 1:
            problems.append("geometry.num_devices must be >= 1")
        if not (len(g.region_x) == len(g.region_y) == 2):
            problems.append("region bounds must be (low, high) pairs")
        elif g.region_x[0] > g.region_x[1] or g.region_y[0] > g.region_y[1]:
            problems.append("region bounds must satisfy low <= high")
        if ch.antennas < 1:
            problems.append("channel.antennas must be >= 1")
        if ch.sigma2 <= 0:
            problems.append("channel.sigma2 must be positive")
        if ch.rician_k_factor < 0:
            problems.append("channel.rician_k_factor must be >= 0")
        if ch.power is not None and ch.power < 0:
            problems.append("channel.power must be >= 0")
        if (1 << m.bits_per_symbol) not in SUPPORTED_ORDERS:
            problems.append(
                f"modem.bits_per_symbol={m.bits_per_symbol} gives unsupported order "
                f"(supported: {SUPPORTED_ORDERS})"
            )
        if m.bits_per_codeword < 1 or m.bits_per_codeword % m.bits_per_symbol != 0:
            problems.append(
                "modem.bits_per_codeword must be a positive multiple of bits_per_symbol"
            )
        elif m.bits_per_codeword > 52:
            problems.append("modem.bits_per_codeword must be <= 52")
        if m.scale_mode not in ("static", "per-device-per-round"):
            problems.append(f"unknown modem.scale_mode {m.scale_mode!r}")
        if m.clip_max <= 0:
            problems.append("modem.clip_max must be positive")
        if self.error_model not in ERROR_MODELS:
            problems.append(f"error_model must be one of {ERROR_MODELS}")
        if self.ser_override is not None:
            if self.error_model != "analytic_injection":
                problems.append("ser_override requires error_model=analytic_injection")
            elif not 0.0 <= self.ser_override <= 1.0:
                problems.append("ser_override must be in [0, 1]")
        if t.learning_rate <= 0:
            problems.append("training.learning_rate must be positive")
        if t.rounds < 1:
            problems.append("training.rounds must be >= 1")
        if t.local_steps < 1:
            problems.append("training.local_steps must be >= 1")
        ds = t.dataset
        if ds.source not in ("synthetic", "idx"):
            problems.append(f"unknown dataset.source {ds.source!r}")
        if ds.source == "idx":
            for name in ("train_images", "train_labels", "test_images", "test_labels"):
                value = getattr(ds, name)
                if value is None:
                    problems.append(f"dataset.{name} is required for idx source")
                elif not resolve_data_path(value).exists():
                    problems.append(f"dataset.{name}: no such file {resolve_data_path(value)}")
        if self.selection.schedule is not None and len(self.selection.schedule) != g.num_devices:
            problems.append("selection.schedule length must equal geometry.num_devices")
        if not 0 < self.convergence.mu < self.convergence.lipschitz:
            problems.append("convergence must satisfy 0 < mu < lipschitz")
        if problems:
            raise ConfigError("; ".join(problems))
        return self


def resolve_data_path(path_str: str) -> Path:
    path = Path(path_str)
    if not path.is_absolute():
        base = os.environ.get(DATA_DIR_ENV)
        if base:
            path = Path(base) / path
    return path


def _build(cls, payload, context):
    if not isinstance(payload, dict):
        raise ConfigError(f"{context}: expected an object, got {type(payload).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(payload) - set(fields)
    if unknown:
        raise ConfigError(f"{context}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in payload.items():
        nested = _NESTED.get((cls, name))
        if nested is not None:
            kwargs[name] = _build(nested, value, f"{context}.{name}")
        elif isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{context}: {exc}") from exc


_NESTED = {
    (ExperimentConfig, "geometry"): GeometryConfig,
    (ExperimentConfig, "channel"): ChannelConfig,
    (ExperimentConfig, "modem"): ModemConfig,
    (ExperimentConfig, "selection"): SelectionConfig,
    (ExperimentConfig, "training"): TrainingConfig,
    (ExperimentConfig, "convergence"): ConvergenceConfig,
    (TrainingConfig, "dataset"): DatasetConfig,
}


def config_from_dict(payload: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, payload, "config").validate()


def config_to_dict(cfg: ExperimentConfig) -> dict:
    def encode(obj):
        if dataclasses.is_dataclass(obj):
            return {f.name: encode(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        if isinstance(obj, tuple):
            return [encode(v) for v in obj]
        return obj

    return encode(cfg)


def load_config(path) -> ExperimentConfig:
    with open(path) as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(payload)


def save_config(cfg: ExperimentConfig, path):
    with open(path, "w") as f:
        json.dump(config_to_dict(cfg), f, indent=2, sort_keys=True)
        f.write("\n")


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    """Apply `dotted.key=json_value` strings on top of an existing config."""
    payload = config_to_dict(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw  # bare strings are convenient: policy=no_selection
        node = payload
        parts = key.split(".")
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigError(f"override {key!r}: no such section {part!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"override {key!r}: no such field {parts[-1]!r}")
        node[parts[-1]] = value
    return config_from_dict(payload)
