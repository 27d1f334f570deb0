"""Uplink channel model: geometry, path loss, block fading, superposed receive.

Device-to-base-station links are complex vectors of length N (one entry per
receive antenna), composed multiplicatively of a free-space path loss term
and small-scale fading. Channels are drawn once per run and held fixed
(block fading); the only per-slot randomness is receiver noise.
"""

from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 3.0e8  # m/s


class DegenerateGeometryError(ValueError):
    """Raised when a device and the base station coincide."""


@dataclass(frozen=True)
class PathLossParams:
    """Free-space path loss with antenna gains in dBi and exponent PL."""

    gain_bs_dbi: float = 5.0
    gain_device_dbi: float = 0.0
    carrier_hz: float = 915e6
    exponent: float = 3.76

    def __post_init__(self):
        if self.carrier_hz <= 0:
            raise ValueError(f"carrier_hz must be positive, got {self.carrier_hz}")
        if self.exponent <= 0:
            raise ValueError(f"exponent must be positive, got {self.exponent}")


@dataclass(frozen=True)
class FadingParams:
    """Small-scale fading: Rician with K-factor (K=0 reduces to Rayleigh)."""

    rician_k_factor: float = 0.0
    antennas: int = 1

    def __post_init__(self):
        if self.rician_k_factor < 0:
            raise ValueError("rician_k_factor must be >= 0")
        if self.antennas < 1:
            raise ValueError("antennas must be >= 1")


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def path_loss(device_pos, bs_pos, params: PathLossParams) -> float:
    """Linear power gain of the device -> base-station link.

    gain = G_bs * G_dev * (c / (4 pi f_c d))^PL with d the Euclidean
    distance and antenna gains converted from dBi.
    """
    device_pos = np.asarray(device_pos, dtype=float)
    bs_pos = np.asarray(bs_pos, dtype=float)
    if not (np.all(np.isfinite(device_pos)) and np.all(np.isfinite(bs_pos))):
        raise ValueError("positions must be finite")
    d = float(np.linalg.norm(device_pos - bs_pos))
    if d == 0.0:
        raise DegenerateGeometryError("device and base station coincide")
    gains = db_to_linear(params.gain_bs_dbi) * db_to_linear(params.gain_device_dbi)
    return gains * (SPEED_OF_LIGHT / (4.0 * np.pi * params.carrier_hz * d)) ** params.exponent


def draw_fading(rng: np.random.Generator, fading: FadingParams, pl_gain: float) -> np.ndarray:
    """One device's channel vector h = sqrt(pl_gain) * f, f i.i.d. Rician.

    Each entry of f is sqrt(K/(K+1)) + sqrt(1/(K+1)) * CN(0, 1): the
    line-of-sight part is a deterministic unit-magnitude term, so E|f_i|^2
    is 1 for every K and the K -> infinity limit is the pure LOS channel.
    """
    if pl_gain <= 0:
        raise ValueError(f"pl_gain must be positive, got {pl_gain}")
    n = fading.antennas
    k = fading.rician_k_factor
    scatter = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
    f = np.sqrt(k / (k + 1.0)) + np.sqrt(1.0 / (k + 1.0)) * scatter
    return np.sqrt(pl_gain) * f


@dataclass(frozen=True)
class ChannelRealization:
    """Fixed per-run channel matrix, one row per device (shape K x N)."""

    coefficients: np.ndarray

    def __post_init__(self):
        h = np.array(self.coefficients, dtype=complex, copy=True)
        if h.ndim != 2:
            raise ValueError("coefficients must be a (devices, antennas) matrix")
        if not (np.all(np.isfinite(h.real)) and np.all(np.isfinite(h.imag))):
            raise ValueError("channel coefficients must be finite")
        h.setflags(write=False)
        object.__setattr__(self, "coefficients", h)

    @property
    def num_devices(self) -> int:
        return self.coefficients.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.coefficients.shape[1]

    def gains(self) -> np.ndarray:
        """Per-device channel gain ||h_k||^2."""
        return np.sum(np.abs(self.coefficients) ** 2, axis=1)


def draw_channels(
    rng: np.random.Generator, fading: FadingParams, pl_gains
) -> ChannelRealization:
    """Draw the full (devices x antennas) channel matrix for a run."""
    rows = [draw_fading(rng, fading, g) for g in np.asarray(pl_gains, dtype=float)]
    return ChannelRealization(np.vstack(rows) if rows else np.zeros((0, fading.antennas)))


def transmit(
    symbols: np.ndarray,
    channels: ChannelRealization,
    powers: np.ndarray,
    sigma2: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Superpose all devices at the array and add receiver noise.

    symbols has shape (devices, slots); the result y has shape (slots, N)
    with y[d] = sum_k h_k p_k s_k[d] + n0[d], n0 entries CN(0, sigma2).
    """
    symbols = np.asarray(symbols, dtype=complex)
    powers = np.asarray(powers, dtype=float)
    if symbols.ndim != 2:
        raise ValueError("symbols must be a (devices, slots) matrix")
    if symbols.shape[0] != channels.num_devices or powers.shape != (channels.num_devices,):
        raise ValueError(
            f"dimension mismatch: {symbols.shape[0]} symbol streams, "
            f"{channels.num_devices} channels, {powers.shape[0]} powers"
        )
    if np.any(powers < 0):
        raise ValueError("powers must be non-negative")
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    n_slots = symbols.shape[1]
    n_ant = channels.num_antennas
    # (slots, N) = (slots, K) @ (K, N)
    clean = (symbols.T * powers) @ channels.coefficients
    noise = (
        rng.standard_normal((n_slots, n_ant)) + 1j * rng.standard_normal((n_slots, n_ant))
    ) * np.sqrt(sigma2 / 2.0)
    return clean + noise


def place_devices(rng: np.random.Generator, num_devices: int, region_x, region_y) -> np.ndarray:
    """Uniform i.i.d. device positions over a ground-level rectangle."""
    x = rng.uniform(region_x[0], region_x[1], size=num_devices)
    y = rng.uniform(region_y[0], region_y[1], size=num_devices)
    return np.column_stack([x, y, np.zeros(num_devices)])
