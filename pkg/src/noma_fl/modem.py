"""Gradient quantization and M-QAM mapping.

Gradient entries are clipped to a symmetric range, quantized on a uniform
mid-rise grid, and Gray-coded so adjacent quantization levels differ in a
single bit. Codewords are then split into groups of b_mod bits, each group
Gray-mapped onto a unit-average-energy QAM constellation (square for even
b_mod, rectangular for odd). A symbol error therefore usually lands on a
neighbouring point whose Gray label differs in one bit, so the dequantized
value stays close to the original.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class QuantizerConfig:
    """Uniform mid-rise quantizer over [-clip_max, clip_max]."""

    bits_per_entry: int
    clip_max: float
    scale_mode: str = "per-device-per-round"  # or "static"

    def __post_init__(self):
        if self.bits_per_entry < 1:
            raise ValueError("bits_per_entry must be >= 1")
        if self.bits_per_entry > 52:
            # level indices must stay exactly representable in float64
            raise ValueError("bits_per_entry must be <= 52")
        if not (np.isfinite(self.clip_max) and self.clip_max > 0):
            raise ValueError("clip_max must be finite and positive")
        if self.scale_mode not in ("static", "per-device-per-round"):
            raise ValueError(f"unknown scale_mode {self.scale_mode!r}")

    @property
    def num_levels(self) -> int:
        return 1 << self.bits_per_entry

    @property
    def step(self) -> float:
        return 2.0 * self.clip_max / self.num_levels


@dataclass(frozen=True)
class ModulationConfig:
    """Codeword-to-symbol mapping: b_signal bits split into alpha groups of b_mod."""

    bits_per_symbol: int
    bits_per_codeword: int

    def __post_init__(self):
        if self.bits_per_symbol < 2:
            raise ValueError("bits_per_symbol must be >= 2 (order M >= 4)")
        if self.bits_per_codeword < 1:
            raise ValueError("bits_per_codeword must be >= 1")
        if self.bits_per_codeword % self.bits_per_symbol != 0:
            raise ValueError(
                f"bits_per_codeword ({self.bits_per_codeword}) must be an integer "
                f"multiple of bits_per_symbol ({self.bits_per_symbol})"
            )

    @property
    def order(self) -> int:
        return 1 << self.bits_per_symbol

    @property
    def symbols_per_codeword(self) -> int:
        return self.bits_per_codeword // self.bits_per_symbol


def gray_encode(n):
    """Binary-reflected Gray code of non-negative integers (vectorized)."""
    n = np.asarray(n)
    return n ^ (n >> 1)


def gray_decode(g):
    """Inverse of gray_encode (vectorized)."""
    g = np.asarray(g).copy()
    shift = 1
    # int64 payloads need up to 32 xor-shift folds
    while shift < 64:
        g ^= g >> shift
        shift <<= 1
    return g


def quantize(values, cfg: QuantizerConfig):
    """Clip, map to the nearest mid-rise level, and Gray-encode.

    Accepts scalars or arrays; returns int64 codewords of the same shape.
    """
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot quantize non-finite values")
    level = np.clip(
        np.floor((v + cfg.clip_max) / cfg.step).astype(np.int64), 0, cfg.num_levels - 1
    )
    code = gray_encode(level)
    return code if code.shape else int(code)


def dequantize(codewords, cfg: QuantizerConfig):
    """Gray-decode and return the level center (exact inverse on centers)."""
    code = np.asarray(codewords, dtype=np.int64)
    if np.any(code < 0) or np.any(code >= cfg.num_levels):
        raise ValueError(f"codeword out of range for {cfg.bits_per_entry}-bit quantizer")
    level = gray_decode(code)
    out = -cfg.clip_max + (level + 0.5) * cfg.step
    return out if out.shape else float(out)


def _axis_levels(bits: int) -> np.ndarray:
    n = 1 << bits
    return np.arange(-n + 1, n, 2, dtype=float)


@lru_cache(maxsize=None)
def constellation(bits_per_symbol: int) -> np.ndarray:
    """Unit-average-energy QAM constellation indexed by Gray label.

    Even bit counts give the square constellation, odd ones the rectangular
    grid with one extra bit on the in-phase axis. The in-phase label bits
    are the high bits, quadrature the low bits; each axis is independently
    Gray-mapped, so minimum-distance neighbours differ in exactly one bit.
    """
    if bits_per_symbol < 2:
        raise ValueError("bits_per_symbol must be >= 2")
    bits_i = (bits_per_symbol + 1) // 2
    bits_q = bits_per_symbol // 2
    levels_i = _axis_levels(bits_i)
    levels_q = _axis_levels(bits_q)
    labels = np.arange(1 << bits_per_symbol)
    idx_i = gray_decode(labels >> bits_q)
    idx_q = gray_decode(labels & ((1 << bits_q) - 1))
    points = levels_i[idx_i] + 1j * levels_q[idx_q]
    points /= np.sqrt(np.mean(np.abs(points) ** 2))
    points.setflags(write=False)
    return points


def codewords_to_symbols(codewords, cfg: ModulationConfig) -> np.ndarray:
    """Split codewords into symbol labels, most-significant group first.

    Input shape (..., q) becomes (..., q * alpha) label ints in [0, M).
    """
    code = np.asarray(codewords, dtype=np.int64)
    alpha = cfg.symbols_per_codeword
    b = cfg.bits_per_symbol
    shifts = np.arange(alpha - 1, -1, -1) * b
    labels = (code[..., None] >> shifts) & (cfg.order - 1)
    return labels.reshape(*code.shape[:-1], code.shape[-1] * alpha)


def symbols_to_codewords(labels, cfg: ModulationConfig) -> np.ndarray:
    """Inverse of codewords_to_symbols."""
    labels = np.asarray(labels, dtype=np.int64)
    alpha = cfg.symbols_per_codeword
    b = cfg.bits_per_symbol
    if labels.shape[-1] % alpha != 0:
        raise ValueError("label count is not a multiple of symbols per codeword")
    groups = labels.reshape(*labels.shape[:-1], labels.shape[-1] // alpha, alpha)
    shifts = np.arange(alpha - 1, -1, -1) * b
    return np.sum(groups << shifts, axis=-1)


def modulate(codewords, cfg: ModulationConfig) -> np.ndarray:
    """Map codewords to complex constellation points (shape (..., q * alpha))."""
    return constellation(cfg.bits_per_symbol)[codewords_to_symbols(codewords, cfg)]


def demodulate(points, cfg: ModulationConfig) -> np.ndarray:
    """Nearest-point hard decision, returning symbol labels.

    Distance ties resolve to the smaller label (argmin order), so decisions
    are deterministic.
    """
    pts = np.asarray(points, dtype=complex)
    if not (np.all(np.isfinite(pts.real)) and np.all(np.isfinite(pts.imag))):
        raise ValueError("cannot demodulate non-finite points")
    const = constellation(cfg.bits_per_symbol)
    flat = pts.reshape(-1)
    labels = np.empty(flat.shape, dtype=np.int64)
    block = max(1, (1 << 22) // cfg.order)  # bound the distance-matrix footprint
    for start in range(0, flat.shape[0], block):
        chunk = flat[start : start + block]
        labels[start : start + block] = np.argmin(np.abs(chunk[:, None] - const), axis=-1)
    labels = labels.reshape(pts.shape)
    return labels if labels.shape else int(labels)


def demodulate_to_codewords(points, cfg: ModulationConfig) -> np.ndarray:
    """Hard-decide a point sequence back into codewords."""
    return symbols_to_codewords(demodulate(points, cfg), cfg)


def inject_symbol_errors(labels, ser: float, order: int, rng: np.random.Generator):
    """Replace each symbol, with probability ser, by a different uniform label.

    Works on integer label arrays; returns (corrupted labels, error mask).
    """
    if not 0.0 <= ser <= 1.0:
        raise ValueError(f"ser must be in [0, 1], got {ser}")
    labels = np.asarray(labels, dtype=np.int64)
    if ser == 0.0:
        return labels.copy(), np.zeros(labels.shape, dtype=bool)
    hit = rng.random(labels.shape) < ser
    # uniform over the other M-1 points: offset in [1, M-1] added mod M
    offset = rng.integers(1, order, size=labels.shape)
    out = labels.copy()
    out[hit] = (labels[hit] + offset[hit]) % order
    return out, hit
