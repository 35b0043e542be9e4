"""BPSK modem, alpha-mu multipath channel and AWGN."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import alpha_mu
from .alpha_mu import AlphaMuParams


@dataclass(frozen=True)
class SymbolStream:
    symbols: np.ndarray
    bits: np.ndarray

    def __len__(self):
        return len(self.symbols)


@dataclass(frozen=True)
class ChannelRealization:
    """K complex taps; ``taps[0]`` is the direct path."""

    taps: np.ndarray
    params: AlphaMuParams | None = None
    seed: int | None = None

    @property
    def num_taps(self) -> int:
        return len(self.taps)

    @classmethod
    def unit(cls) -> "ChannelRealization":
        """Flat channel with a fixed unit tap, i.e. AWGN only."""
        return cls(np.ones(1, dtype=complex))


@dataclass(frozen=True)
class NoisySignal:
    samples: np.ndarray
    noise_variance: float
    snr_db: float


def bpsk_modulate(bits) -> SymbolStream:
    """Map bit 0 to +1 and bit 1 to -1 on the real axis."""
    bits = np.asarray(bits, dtype=np.int8)
    if bits.ndim != 1 or bits.size == 0:
        raise ValueError("bits must be a non-empty 1-D sequence")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    symbols = (1.0 - 2.0 * bits).astype(complex)
    return SymbolStream(symbols, bits)


def bpsk_demodulate(samples) -> np.ndarray:
    """Hard decision on the real part; exactly zero decides bit 0."""
    samples = np.asarray(samples)
    return (np.real(samples) < 0).astype(np.int8)


def random_bits(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, 2, size=n, dtype=np.int8)


def draw_channel(
    params: AlphaMuParams,
    k: int,
    rng: np.random.Generator,
    unit_energy: bool = False,
    seed: int | None = None,
) -> ChannelRealization:
    """Draw ``k`` taps with alpha-mu magnitudes and uniform phases.

    With ``unit_energy`` the realization is rescaled so ``sum |h|**2 == 1``.
    """
    if k < 1:
        raise ValueError("channel must have at least one tap")
    magnitude = alpha_mu.sample(params, rng, k)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=k)
    taps = magnitude * np.exp(1j * phase)
    if unit_energy:
        taps = taps / np.linalg.norm(taps)
    return ChannelRealization(taps, params, seed)


def apply_channel(stream, channel: ChannelRealization) -> np.ndarray:
    """Causal convolution with zero prehistory, truncated to the input length.

    ``stream`` may be a :class:`SymbolStream` or a plain complex array.
    """
    u = stream.symbols if isinstance(stream, SymbolStream) else np.asarray(stream, dtype=complex)
    if u.size == 0:
        raise ValueError("empty input stream")
    return np.convolve(u, channel.taps)[: len(u)]


def noise_variance(snr_db: float) -> float:
    """Total complex noise variance for unit symbol energy; 0 for ``snr_db = inf``."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return 10.0 ** (-snr_db / 10.0)


def add_awgn(samples, snr_db: float, rng: np.random.Generator) -> NoisySignal:
    """Add circularly-symmetric complex Gaussian noise at ``Es/N0 = snr_db``.

    ``snr_db = math.inf`` disables the noise and leaves ``rng`` untouched.
    """
    samples = np.asarray(samples, dtype=complex)
    if samples.size == 0:
        raise ValueError("empty input")
    var = noise_variance(snr_db)
    if var == 0.0:
        return NoisySignal(samples.copy(), 0.0, snr_db)
    w = rng.standard_normal((2,) + samples.shape)
    noise = math.sqrt(var / 2.0) * (w[0] + 1j * w[1])
    return NoisySignal(samples + noise, var, snr_db)
