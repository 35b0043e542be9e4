"""Zero-forcing equalization with a finite-length least-squares channel inverse."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .signal import ChannelRealization

RANK_TOL = 1e-10


class SingularChannelError(ValueError):
    """The channel has (numerically) a spectral null and cannot be inverted."""


@dataclass(frozen=True)
class ZfEqualizer:
    taps: np.ndarray
    delay: int

    def __post_init__(self):
        if len(self.taps) < 1 or not np.all(np.isfinite(self.taps)):
            raise ValueError("ZF equalizer needs at least one finite tap")


def default_delay(num_taps: int, channel_taps: int = 1) -> int:
    """Centred decision delay ``(num_taps + K - 1) // 2``."""
    return (num_taps + channel_taps - 1) // 2


def convolution_matrix(h, num_taps: int) -> np.ndarray:
    """Matrix ``H`` with ``H @ g == np.convolve(h, g)`` for ``len(g) == num_taps``."""
    h = np.asarray(h, dtype=complex)
    col = np.concatenate([h, np.zeros(num_taps - 1, dtype=complex)])
    row = np.zeros(num_taps, dtype=complex)
    row[0] = h[0]
    return toeplitz(col, row)


def design_zf(channel, num_taps: int, delay: int | None = None) -> ZfEqualizer:
    """FIR ``g`` of length ``num_taps`` minimizing ``||h * g - e_delay||``.

    Parameters
    ----------
    channel : ChannelRealization or array_like
        Known channel impulse response.
    num_taps : int
        Equalizer length.
    delay : int, optional
        Target delay of the combined response. Defaults to the centred
        delay ``(num_taps + K - 1) // 2``.

    Raises
    ------
    SingularChannelError
        If ``H^H H`` is rank deficient relative to ``RANK_TOL``.
    """
    h = channel.taps if isinstance(channel, ChannelRealization) else np.asarray(channel, dtype=complex)
    if num_taps < 1:
        raise ValueError("num_taps must be >= 1")
    if not np.any(h != 0):
        raise SingularChannelError("channel has no non-zero tap")
    k = len(h)
    if delay is None:
        delay = default_delay(num_taps, k)
    if not 0 <= delay < num_taps + k - 1:
        raise ValueError(f"delay must lie in [0, {num_taps + k - 1}), got {delay}")

    H = convolution_matrix(h, num_taps)
    gram = H.conj().T @ H
    eig = np.linalg.eigvalsh(gram)
    if eig[0] <= RANK_TOL * eig[-1]:
        raise SingularChannelError(
            f"convolution matrix is rank deficient (eigenvalue ratio {eig[0] / eig[-1]:.3g})"
        )
    target = np.zeros(num_taps + k - 1, dtype=complex)
    target[delay] = 1.0
    g = np.linalg.solve(gram, H.conj().T @ target)
    return ZfEqualizer(g, delay)


def residual_isi(channel, eq: ZfEqualizer) -> float:
    """``||h * g - e_delay||_2`` for a designed equalizer."""
    h = channel.taps if isinstance(channel, ChannelRealization) else np.asarray(channel, dtype=complex)
    combined = np.convolve(h, eq.taps)
    combined[eq.delay] -= 1.0
    return float(np.linalg.norm(combined))


def fir_filter(taps, x, delay: int = 0) -> np.ndarray:
    """Apply FIR ``taps`` to ``x`` along the last axis, advanced by ``delay``.

    Output sample ``n`` is ``sum_i taps[i] * x[n + delay - i]`` with zeros
    outside ``x``.  Both arguments may carry a leading batch axis.
    """
    taps = np.asarray(taps)
    x = np.asarray(x)
    n = x.shape[-1]
    padded = np.concatenate([x, np.zeros(x.shape[:-1] + (delay,), dtype=x.dtype)], axis=-1)
    out = np.zeros(np.broadcast_shapes(taps.shape[:-1], x.shape[:-1]) + (n + delay,),
                   dtype=np.result_type(taps, x, complex))
    for i in range(taps.shape[-1]):
        if i >= n + delay:
            break
        out[..., i:] += taps[..., i, None] * padded[..., : n + delay - i]
    return out[..., delay:]


def equalize_zf(eq: ZfEqualizer, received) -> np.ndarray:
    """Filter ``received`` so that output ``n`` estimates transmitted symbol ``n``."""
    received = np.asarray(received, dtype=complex)
    if received.size == 0:
        raise ValueError("empty input")
    return fir_filter(eq.taps, received, eq.delay)
