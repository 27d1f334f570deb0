"""Experiment orchestration: the federated round loop over the NOMA uplink.

One run is a pure function of its config. Geometry, channels, the data
partition, model init, noise and error injection each draw from an
independently named random stream, so sweeps that vary one axis leave
everything else bit-identical.
"""

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import convergence as conv
from . import fl, modem, selection
from .channel import (
    ChannelRealization,
    FadingParams,
    PathLossParams,
    draw_channels,
    path_loss,
    place_devices,
    transmit,
)
from .config import (
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    resolve_data_path,
)
from .data import load_idx_pair, partition_uniform, synthetic_blobs
from .modem import ModulationConfig, QuantizerConfig
from .receiver import LinkQuality, detect_frames, link_quality, mqam_ser
from .rng import substream

CLIP_FLOOR = 1e-12  # per-round ranges degenerate when a gradient is exactly zero


@dataclass
class RoundRecord:
    round_index: int
    train_loss: float
    test_accuracy: float
    test_loss: float
    ser: np.ndarray
    sinr: np.ndarray
    scheduled: np.ndarray
    accepted: np.ndarray
    codeword_errors: np.ndarray
    symbol_errors: np.ndarray
    effective_data_size: float
    num_accepted: int
    contraction: float
    gap_bound: float
    event: str = ""


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list
    link: LinkQuality
    params: np.ndarray
    summary: dict
    params_history: list | None = None


def build_channels(cfg: ExperimentConfig):
    """Placement, path loss, fading and transmit powers for one run."""
    g, ch = cfg.geometry, cfg.channel
    positions = place_devices(
        substream(cfg.seed, "placement"), g.num_devices, g.region_x, g.region_y
    )
    pl_params = PathLossParams(
        gain_bs_dbi=ch.gain_bs_dbi,
        gain_device_dbi=ch.gain_device_dbi,
        carrier_hz=ch.carrier_hz,
        exponent=ch.pathloss_exponent,
    )
    pl_gains = np.array([path_loss(pos, g.bs_position, pl_params) for pos in positions])
    fading = FadingParams(rician_k_factor=ch.rician_k_factor, antennas=ch.antennas)
    channels = draw_channels(substream(cfg.seed, "fading"), fading, pl_gains)
    if ch.power is not None:
        amplitude = math.sqrt(ch.power)
    else:
        # mean per-antenna receive SNR of the best-path-loss device
        target = 10.0 ** (ch.target_snr_db / 10.0)
        amplitude = math.sqrt(target * ch.sigma2 / pl_gains.max())
    powers = np.full(g.num_devices, amplitude)
    return positions, pl_gains, channels, powers


def _synthetic_split(cfg: ExperimentConfig):
    ds = cfg.training.dataset
    rng = substream(cfg.seed, "dataset")
    centers = rng.standard_normal((ds.num_classes, ds.input_dim)) * ds.center_scale
    train = synthetic_blobs(
        rng, ds.num_classes, ds.samples_per_class, ds.input_dim, ds.spread, centers=centers
    )
    test = synthetic_blobs(
        rng, ds.num_classes, ds.test_samples_per_class, ds.input_dim, ds.spread, centers=centers
    )
    return train, test


def _idx_split(cfg: ExperimentConfig):
    ds = cfg.training.dataset
    train = load_idx_pair(
        resolve_data_path(ds.train_images), resolve_data_path(ds.train_labels)
    )
    test = load_idx_pair(resolve_data_path(ds.test_images), resolve_data_path(ds.test_labels))
    if ds.subset_size is not None and ds.subset_size < train[0].shape[0]:
        keep = substream(cfg.seed, "dataset")  # subset choice is part of the data stream
        idx = np.sort(keep.choice(train[0].shape[0], size=ds.subset_size, replace=False))
        train = (train[0][idx], train[1][idx])
    return train, test


def prepare_data(cfg: ExperimentConfig):
    ds = cfg.training.dataset
    if ds.source == "synthetic":
        (x_train, y_train), (x_test, y_test) = _synthetic_split(cfg)
    else:
        (x_train, y_train), (x_test, y_test) = _idx_split(cfg)
    shards = partition_uniform(
        x_train.shape[0], cfg.geometry.num_devices, substream(cfg.seed, "partition")
    )
    per_device = [(x_train[idx], y_train[idx]) for idx in shards]
    return per_device, (x_train, y_train), (x_test, y_test)


def _transmit_round(
    cfg: ExperimentConfig,
    codewords: np.ndarray,
    ser_used: np.ndarray,
    channels: ChannelRealization,
    powers: np.ndarray,
    mod_cfg: ModulationConfig,
    error_rng: np.random.Generator,
    noise_rng: np.random.Generator,
):
    """Push one round of codewords through the configured error model.

    Returns (received codewords, per-device symbol error counts).
    """
    labels = modem.codewords_to_symbols(codewords, mod_cfg)
    if cfg.error_model == "analytic_injection":
        received = np.empty_like(labels)
        symbol_errors = np.zeros(labels.shape[0], dtype=np.int64)
        for k in range(labels.shape[0]):
            received[k], hit = modem.inject_symbol_errors(
                labels[k], float(ser_used[k]), mod_cfg.order, error_rng
            )
            symbol_errors[k] = int(hit.sum())
    else:
        points = modem.constellation(mod_cfg.bits_per_symbol)[labels]
        observed = transmit(points, channels, powers, cfg.channel.sigma2, noise_rng)
        detection = detect_frames(
            observed, channels, powers, cfg.channel.sigma2, mod_cfg, transmitted_labels=labels
        )
        received = detection.labels
        symbol_errors = detection.symbol_errors
    return modem.symbols_to_codewords(received, mod_cfg), symbol_errors


def run_experiment(
    cfg: ExperimentConfig, out_dir=None, keep_params_history: bool = False
) -> ExperimentResult:
    """Execute the full round loop and (optionally) persist metrics."""
    cfg.validate()
    _, _, channels, powers = build_channels(cfg)
    per_device, pooled_train, test_set = prepare_data(cfg)
    data_sizes = np.array([float(x.shape[0]) for x, _ in per_device])

    mod_cfg = ModulationConfig(
        bits_per_symbol=cfg.modem.bits_per_symbol,
        bits_per_codeword=cfg.modem.bits_per_codeword,
    )
    link = link_quality(channels, powers, cfg.channel.sigma2, mod_cfg.order)
    ser_used = (
        np.full(channels.num_devices, float(cfg.ser_override))
        if cfg.ser_override is not None
        else link.ser
    )

    layout = fl.MlpLayout(
        input_dim=cfg.training.dataset.input_dim
        if cfg.training.dataset.source == "synthetic"
        else pooled_train[0].shape[1],
        hidden_dim=cfg.training.hidden_dim,
        num_classes=cfg.training.dataset.num_classes
        if cfg.training.dataset.source == "synthetic"
        else int(pooled_train[1].max()) + 1,
    )
    params = fl.init_params(layout, substream(cfg.seed, "model_init"))
    num_codewords = layout.num_params

    schedule = (
        np.array(cfg.selection.schedule, dtype=int)
        if cfg.selection.schedule is not None
        else np.ones(channels.num_devices, dtype=int)
    )

    # bound quantities are fixed across rounds: block fading keeps SER constant
    tr_for_bound = 0.0 if cfg.selection.policy == "packet_error_baseline" else cfg.selection.tr_ser
    xi = np.array(
        [conv.acceptance_probability(s, num_codewords, tr_for_bound) for s in ser_used]
    )
    conv_params = conv.ConvergenceParams(
        mu=cfg.convergence.mu,
        lipschitz=cfg.convergence.lipschitz,
        zeta1=cfg.convergence.zeta1,
        zeta2=cfg.convergence.zeta2,
    )
    contraction = conv.contraction_factor(conv_params, data_sizes, schedule, xi)
    initial_loss = fl.evaluate(params, pooled_train[0], pooled_train[1], layout)[1]
    initial_gap = initial_loss - cfg.convergence.f_star

    error_rng = substream(cfg.seed, "error_injection")
    noise_rng = substream(cfg.seed, "noise")
    lr = cfg.training.learning_rate

    records = []
    history = [] if keep_params_history else None
    total_symbol_errors = 0
    for n in range(cfg.training.rounds):
        gradients = np.vstack(
            [
                fl.local_update(params, x, y, layout, lr, cfg.training.local_steps)
                for x, y in per_device
            ]
        )
        if cfg.modem.scale_mode == "per-device-per-round":
            clips = np.maximum(np.abs(gradients).max(axis=1), CLIP_FLOOR)
        else:
            clips = np.full(channels.num_devices, cfg.modem.clip_max)
        quant_cfgs = [
            QuantizerConfig(cfg.modem.bits_per_codeword, float(c), cfg.modem.scale_mode)
            for c in clips
        ]
        codewords = np.vstack(
            [modem.quantize(gradients[k], quant_cfgs[k]) for k in range(len(quant_cfgs))]
        )
        received, symbol_errors = _transmit_round(
            cfg, codewords, ser_used, channels, powers, mod_cfg, error_rng, noise_rng
        )
        codeword_errors = np.sum(received != codewords, axis=1)
        total_symbol_errors += int(np.sum(symbol_errors))

        recovered = np.vstack(
            [modem.dequantize(received[k], quant_cfgs[k]) for k in range(len(quant_cfgs))]
        )
        local_models = params[None, :] - lr * recovered

        accepted = selection.decide(cfg.selection, ser_used, codeword_errors, num_codewords)
        event = ""
        try:
            params = selection.aggregate(local_models, data_sizes, schedule, accepted)
        except selection.NoParticipantsError:
            event = "all_rejected"  # keep the previous global model this round

        _, train_loss = fl.evaluate(params, pooled_train[0], pooled_train[1], layout)
        test_acc, test_loss = fl.evaluate(params, test_set[0], test_set[1], layout)
        records.append(
            RoundRecord(
                round_index=n,
                train_loss=train_loss,
                test_accuracy=test_acc,
                test_loss=test_loss,
                ser=ser_used.copy(),
                sinr=link.sinr.copy(),
                scheduled=schedule.copy(),
                accepted=np.asarray(accepted, dtype=int),
                codeword_errors=codeword_errors.astype(int),
                symbol_errors=np.asarray(symbol_errors, dtype=int),
                effective_data_size=float(np.sum(data_sizes * schedule * accepted)),
                num_accepted=int(np.sum(np.asarray(accepted) * schedule)),
                contraction=contraction,
                gap_bound=conv.optimality_gap_bound(
                    n + 1, conv_params, data_sizes, schedule, xi, initial_gap, factor=contraction
                ),
                event=event,
            )
        )
        if keep_params_history:
            history.append(params.copy())

    condition = conv.convergence_condition(conv_params, data_sizes, schedule, xi)
    summary = {
        "seed": cfg.seed,
        "rounds": cfg.training.rounds,
        "final_test_accuracy": records[-1].test_accuracy,
        "final_train_loss": records[-1].train_loss,
        "mean_ser": float(np.mean(ser_used)),
        "per_device_ser": [float(s) for s in ser_used],
        "per_device_sinr": [float(s) for s in link.sinr],
        "total_symbol_errors": total_symbol_errors,
        "all_rejected_rounds": sum(1 for r in records if r.event == "all_rejected"),
        "contraction_factor": contraction,
        "convergence_condition": {
            "satisfied": condition.satisfied,
            "error_term": condition.error_term,
            "margin": condition.margin,
        },
        "final_gap_bound": records[-1].gap_bound,
        "config": config_to_dict(cfg),
    }
    result = ExperimentResult(
        config=cfg,
        records=records,
        link=link,
        params=params,
        summary=summary,
        params_history=history,
    )
    if out_dir is not None:
        write_metrics(result, Path(out_dir))
    return result


CSV_SCALAR_COLUMNS = [
    "round",
    "train_loss",
    "test_accuracy",
    "test_loss",
    "effective_data_size",
    "num_accepted",
    "contraction_factor",
    "gap_bound",
    "event",
]


def csv_header(num_devices: int):
    header = list(CSV_SCALAR_COLUMNS)
    for name in ("ser", "sinr", "accepted", "codeword_errors"):
        header.extend(f"{name}_{k}" for k in range(num_devices))
    return header


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(float(value))  # plain float repr even for numpy scalars
    return str(value)


def write_metrics(result: ExperimentResult, out_dir: Path, stem: str = "metrics"):
    """One CSV of per-round records plus a JSON summary."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    k = result.link.ser.shape[0]
    csv_path = out_dir / f"{stem}.csv"
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(csv_header(k))
        for r in result.records:
            row = [
                r.round_index,
                _fmt(r.train_loss),
                _fmt(r.test_accuracy),
                _fmt(r.test_loss),
                _fmt(r.effective_data_size),
                r.num_accepted,
                _fmt(r.contraction),
                _fmt(r.gap_bound),
                r.event,
            ]
            row.extend(_fmt(float(v)) for v in r.ser)
            row.extend(_fmt(float(v)) for v in r.sinr)
            row.extend(int(v) for v in r.accepted)
            row.extend(int(v) for v in r.codeword_errors)
            writer.writerow(row)
    with open(out_dir / f"{stem}_summary.json", "w") as f:
        json.dump(result.summary, f, indent=2, sort_keys=True)
        f.write("\n")
    return csv_path


SWEEP_AXES = ("modulation_order", "tr_ser", "policy")


def _apply_axis(cfg: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    payload = config_to_dict(cfg)
    if axis == "modulation_order":
        order = int(value)
        bits = int(round(math.log2(order)))
        if 1 << bits != order:
            raise ValueError(f"modulation order {value} is not a power of two")
        payload["modem"]["bits_per_symbol"] = bits
        payload["modem"]["bits_per_codeword"] = bits  # sweeps keep one symbol per codeword
    elif axis == "tr_ser":
        payload["selection"]["tr_ser"] = float(value)
        payload["selection"]["policy"] = "ser_dsm"
    elif axis == "policy":
        payload["selection"]["policy"] = str(value)
    else:
        raise ValueError(f"unknown sweep axis {axis!r} (choose from {SWEEP_AXES})")
    return config_from_dict(payload)


def _value_slug(value) -> str:
    return str(value).replace(".", "p").replace("-", "m")


def sweep(cfg: ExperimentConfig, axis: str, values, out_dir=None):
    """Run one experiment per axis value under a shared master seed.

    Placement, channels and the data partition are identical across members
    because they draw from their own named streams.
    """
    if not values:
        raise ValueError("sweep needs at least one value")
    results = []
    comparison = []
    for value in values:
        member = _apply_axis(cfg, axis, value)
        member_dir = None
        if out_dir is not None:
            member_dir = Path(out_dir) / f"{axis}_{_value_slug(value)}"
        result = run_experiment(member, out_dir=member_dir)
        results.append(result)
        comparison.append(
            {
                "value": value,
                "final_test_accuracy": result.summary["final_test_accuracy"],
                "final_train_loss": result.summary["final_train_loss"],
                "mean_ser": result.summary["mean_ser"],
                "total_symbol_errors": result.summary["total_symbol_errors"],
            }
        )
    if out_dir is not None:
        with open(Path(out_dir) / "sweep_summary.json", "w") as f:
            json.dump({"axis": axis, "members": comparison}, f, indent=2, sort_keys=True)
            f.write("\n")
    return results, comparison


def validate_ser(
    modulation_order: int,
    snr_db_values,
    num_symbols: int = 1_000_000,
    seed: int = 0,
):
    """Single-user AWGN check of the analytic SER against symbol simulation.

    Returns one row per SNR point with the analytic value, the empirical
    rate over `num_symbols` detected symbols, and the binomial z-score.
    """
    bits = int(round(math.log2(modulation_order)))
    mod_cfg = ModulationConfig(bits_per_symbol=bits, bits_per_codeword=bits)
    rows = []
    for i, snr_db in enumerate(snr_db_values):
        sinr = 10.0 ** (snr_db / 10.0)
        rng = substream(seed, "ser_validation", f"{modulation_order}:{snr_db}:{i}")
        channels = ChannelRealization(np.array([[1.0 + 0.0j]]))
        powers = np.array([math.sqrt(sinr)])
        labels = rng.integers(0, mod_cfg.order, size=(1, num_symbols))
        points = modem.constellation(bits)[labels]
        observed = transmit(points, channels, powers, 1.0, rng)
        detection = detect_frames(observed, channels, powers, 1.0, mod_cfg, labels)
        analytic = mqam_ser(sinr, modulation_order)
        empirical = float(detection.symbol_errors[0]) / num_symbols
        stderr = math.sqrt(max(analytic * (1.0 - analytic), 1e-300) / num_symbols)
        rows.append(
            {
                "order": modulation_order,
                "snr_db": float(snr_db),
                "sinr": sinr,
                "analytic_ser": float(analytic),
                "empirical_ser": empirical,
                "num_symbols": num_symbols,
                "z_score": (empirical - float(analytic)) / stderr if stderr > 0 else 0.0,
            }
        )
    return rows
