"""Device selection policies and error-aware aggregation.

A device's update enters the global model only if it is scheduled (a_k = 1)
and its transmission passes the active acceptance rule. Acceptance can gate
on the analytic symbol error rate (threshold rule), on realized error
counts, or on the strict zero-error packet rule used as a baseline.
"""

from dataclasses import dataclass

import numpy as np

POLICIES = ("ser_dsm", "packet_error_baseline", "no_selection")


class NoParticipantsError(RuntimeError):
    """No device passed scheduling and acceptance this round."""


@dataclass(frozen=True)
class SelectionConfig:
    policy: str = "ser_dsm"
    tr_ser: float = 1e-2
    acceptance_mode: str = "analytic"  # or "empirical"
    schedule: tuple | None = None  # per-device 0/1; None means all scheduled

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if not 0.0 <= self.tr_ser <= 1.0:
            raise ValueError("tr_ser must be in [0, 1]")
        if self.acceptance_mode not in ("analytic", "empirical"):
            raise ValueError(f"unknown acceptance_mode {self.acceptance_mode!r}")
        if self.schedule is not None:
            if any(a not in (0, 1) for a in self.schedule):
                raise ValueError("schedule entries must be 0 or 1")


def accept(ser, tr_ser: float):
    """Threshold rule: 1 iff ser <= tr_ser (accepted at equality)."""
    ser = np.asarray(ser, dtype=float)
    out = (ser <= tr_ser).astype(int)
    return out if out.shape else int(out)


def accept_empirical(error_count, num_codewords: int, tr_ser: float):
    """Realized-count rule: 1 iff errors <= floor(num_codewords * tr_ser)."""
    budget = int(np.floor(num_codewords * tr_ser))
    count = np.asarray(error_count)
    out = (count <= budget).astype(int)
    return out if out.shape else int(out)


def accept_packet(error_count):
    """Packet-error baseline: 1 iff the frame arrived with zero errors."""
    count = np.asarray(error_count)
    out = (count == 0).astype(int)
    return out if out.shape else int(out)


def decide(
    cfg: SelectionConfig,
    analytic_ser: np.ndarray,
    error_counts: np.ndarray | None,
    num_codewords: int,
) -> np.ndarray:
    """Per-device acceptance flags c_k under the configured policy."""
    k = len(analytic_ser)
    if cfg.policy == "no_selection":
        return np.ones(k, dtype=int)
    if cfg.policy == "packet_error_baseline":
        if error_counts is None:
            raise ValueError("packet_error_baseline needs realized error counts")
        return accept_packet(error_counts)
    if cfg.acceptance_mode == "empirical":
        if error_counts is None:
            raise ValueError("empirical acceptance needs realized error counts")
        return accept_empirical(error_counts, num_codewords, cfg.tr_ser)
    return accept(analytic_ser, cfg.tr_ser)


def aggregate(local_params: np.ndarray, data_sizes, schedule, acceptance) -> np.ndarray:
    """Data-size-weighted average over scheduled, accepted devices.

    local_params has one row per device. Raises NoParticipantsError when the
    effective weight is zero; round-loop policy for that case lives in the
    harness.
    """
    local_params = np.asarray(local_params, dtype=float)
    weights = (
        np.asarray(data_sizes, dtype=float)
        * np.asarray(schedule, dtype=float)
        * np.asarray(acceptance, dtype=float)
    )
    if local_params.ndim != 2 or weights.shape != (local_params.shape[0],):
        raise ValueError("need one parameter row and one weight per device")
    total = weights.sum()
    if total <= 0:
        raise NoParticipantsError("no scheduled device was accepted")
    return weights @ local_params / total
