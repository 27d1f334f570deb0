"""Multiuser reception: MMSE filtering with successive interference cancellation.

Devices are decoded strongest-first (by channel gain). At each stage the
receiver applies a linear MMSE filter whose covariance includes only the
devices not yet decoded, hard-decides the stage's symbols, reconstructs the
contribution and subtracts it before moving on. The analytic path assumes
the subtraction is exact and scores each device with the closed-form QAM
symbol error rate at its stage SINR; the empirical path (`detect_frames`)
runs the actual decision loop and reports realized error counts.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .channel import ChannelRealization
from .modem import ModulationConfig, constellation, demodulate

__all__ = [
    "sic_order",
    "mmse_filter",
    "stage_sinr",
    "mqam_ser",
    "LinkQuality",
    "link_quality",
    "DetectionResult",
    "detect_frames",
]


def qfunc(x):
    """Gaussian tail probability Q(x) = P(N(0,1) > x)."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def sic_order(channels: ChannelRealization) -> np.ndarray:
    """Decoding order: device indices sorted by ||h_k||^2 descending.

    Ties break toward the smaller device index.
    """
    if channels.num_devices < 1:
        raise ValueError("need at least one device")
    return np.argsort(-channels.gains(), kind="stable")


def _stage_covariance(h: np.ndarray, powers: np.ndarray, sigma2: float, remaining) -> np.ndarray:
    n = h.shape[1]
    cov = sigma2 * np.eye(n, dtype=complex)
    for idx in remaining:
        hk = h[idx]
        cov += powers[idx] ** 2 * np.outer(hk, hk.conj())
    return cov


def mmse_filter(
    stage: int,
    channels: ChannelRealization,
    powers: np.ndarray,
    sigma2: float,
    order: np.ndarray,
) -> np.ndarray:
    """Linear MMSE receive row vector for the device decoded at `stage`.

    r = p_k h_k^H (sum over not-yet-decoded devices of p^2 h h^H + sigma2 I)^-1;
    earlier stages are treated as perfectly cancelled.
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    if not 0 <= stage < len(order):
        raise ValueError(f"stage {stage} outside decoding order of length {len(order)}")
    h = channels.coefficients
    powers = np.asarray(powers, dtype=float)
    k = order[stage]
    cov = _stage_covariance(h, powers, sigma2, order[stage:])
    # r = p_k h_k^H cov^-1, stored as a 1-D row; cov is Hermitian
    return powers[k] * np.linalg.solve(cov, h[k]).conj()


def stage_sinr(
    stage: int,
    channels: ChannelRealization,
    powers: np.ndarray,
    sigma2: float,
    order: np.ndarray,
    filt: np.ndarray | None = None,
) -> float:
    """Post-filter SINR at a decoding stage.

    Interference counts only devices decoded after this stage; earlier ones
    are assumed cancelled.
    """
    h = channels.coefficients
    powers = np.asarray(powers, dtype=float)
    k = order[stage]
    r = mmse_filter(stage, channels, powers, sigma2, order) if filt is None else filt
    signal = powers[k] ** 2 * np.abs(r @ h[k]) ** 2
    interference = sum(
        powers[i] ** 2 * np.abs(r @ h[i]) ** 2 for i in order[stage + 1 :]
    )
    noise = np.sum(np.abs(r) ** 2) * sigma2
    return float(signal / (interference + noise))


def mqam_ser(sinr, order: int):
    """Symbol error probability of M-QAM at a given linear SINR.

    SER = 1 - (1 - P)^2 with P = 2 (1 - 1/sqrt(M)) Q(sqrt(3 sinr / (M-1))),
    evaluated as written for every supported M (exact for square
    constellations). Clamped to [0, 1].
    """
    if order < 4:
        raise ValueError("order must be >= 4")
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0):
        raise ValueError("sinr must be non-negative")
    p = 2.0 * (1.0 - 1.0 / np.sqrt(order)) * qfunc(np.sqrt(3.0 * sinr / (order - 1)))
    ser = 1.0 - (1.0 - p) ** 2
    ser = np.clip(ser, 0.0, 1.0)
    return ser if ser.shape else float(ser)


@dataclass(frozen=True)
class LinkQuality:
    """Per-device SINR and analytic SER under the gain-ranked SIC order."""

    sinr: np.ndarray  # linear, indexed by device
    ser: np.ndarray  # probability, indexed by device
    order: np.ndarray  # decoding order (device indices)


def link_quality(
    channels: ChannelRealization, powers: np.ndarray, sigma2: float, modulation_order: int
) -> LinkQuality:
    """Evaluate every device's stage SINR and analytic SER."""
    order = sic_order(channels)
    sinr = np.zeros(channels.num_devices)
    for stage, dev in enumerate(order):
        sinr[dev] = stage_sinr(stage, channels, powers, sigma2, order)
    return LinkQuality(sinr=sinr, ser=mqam_ser(sinr, modulation_order), order=order)


@dataclass(frozen=True)
class DetectionResult:
    labels: np.ndarray  # (devices, slots) hard symbol decisions
    symbol_errors: np.ndarray | None  # per-device counts vs ground truth


def detect_frames(
    received: np.ndarray,
    channels: ChannelRealization,
    powers: np.ndarray,
    sigma2: float,
    cfg: ModulationConfig,
    transmitted_labels: np.ndarray | None = None,
) -> DetectionResult:
    """SIC detection of a whole frame of received slots.

    `received` has shape (slots, N). Stages run strongest-first; each stage
    filters, normalizes by the filter's effective symbol gain, hard-decides,
    then subtracts the reconstructed contribution from every slot. Error
    counts are reported when the transmitted labels are given.
    """
    received = np.asarray(received, dtype=complex)
    h = channels.coefficients
    powers = np.asarray(powers, dtype=float)
    if received.ndim != 2 or received.shape[1] != channels.num_antennas:
        raise ValueError("received must be (slots, antennas)")
    if powers.shape != (channels.num_devices,):
        raise ValueError("one power per device required")
    order = sic_order(channels)
    const = constellation(cfg.bits_per_symbol)

    residual = received.copy()
    labels = np.zeros((channels.num_devices, received.shape[0]), dtype=np.int64)
    for stage, dev in enumerate(order):
        r = mmse_filter(stage, channels, powers, sigma2, order)
        # effective gain of the desired symbol at the filter output
        gain = powers[dev] * (r @ h[dev])
        z = (residual @ r) / gain
        decided = demodulate(z, cfg)
        labels[dev] = decided
        residual -= np.outer(const[decided] * powers[dev], h[dev])

    errors = None
    if transmitted_labels is not None:
        transmitted_labels = np.asarray(transmitted_labels, dtype=np.int64)
        if transmitted_labels.shape != labels.shape:
            raise ValueError("transmitted labels shape mismatch")
        errors = np.sum(labels != transmitted_labels, axis=1)
    return DetectionResult(labels=labels, symbol_errors=errors)
