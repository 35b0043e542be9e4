"""
Pilot-trained LMS and RLS equalizers.

Both filters keep an input window ``x(n) = [r(n), r(n-1), ..., r(n-L)]``
(newest first) and are trained sample by sample on a known pilot, then
frozen and applied to the payload.

Conventions
-----------
LMS forms ``y(n) = b^T x(n)`` and updates ``b += eta * e(n) * conj(x(n))``,
the complex stochastic-gradient step for that output.  RLS forms
``y(n) = b^H x(n)`` and updates ``b += k(n) * conj(e(n))``.  :func:`train`
hides the difference and returns plain FIR taps ``w`` such that
``y(n) = sum_i w[i] * r(n - i)``.

Every state array may carry leading batch axes; a batch of independent
filters is then advanced in lock-step by the same call.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .signal import SymbolStream
from .zf import default_delay, fir_filter

BREAKDOWN_TOL = 1e-14


class NumericalBreakdownError(ArithmeticError):
    """The RLS gain denominator collapsed.

    ``rows`` holds the flat batch indices that broke down (``[0]`` for an
    unbatched filter).
    """

    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = np.asarray(rows, dtype=int)


@dataclass
class AdaptiveFilterState:
    weights: np.ndarray
    window: np.ndarray

    @property
    def order(self) -> int:
        return self.weights.shape[-1] - 1

    @classmethod
    def zeros(cls, order: int, batch: tuple[int, ...] = ()) -> "AdaptiveFilterState":
        if order < 0:
            raise ValueError("filter order must be >= 0")
        shape = tuple(batch) + (order + 1,)
        return cls(np.zeros(shape, dtype=complex), np.zeros(shape, dtype=complex))

    def push(self, x_new) -> None:
        x_new = np.asarray(x_new, dtype=complex)
        self.window = np.concatenate(
            [np.broadcast_to(x_new, self.window.shape[:-1])[..., None], self.window[..., :-1]],
            axis=-1,
        )


@dataclass(frozen=True)
class LmsConfig:
    step_size: float = 0.04
    order: int = 15

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.order < 0:
            raise ValueError("order must be >= 0")


@dataclass(frozen=True)
class RlsConfig:
    forgetting: float = 0.999
    order: int = 15
    initial_p_scale: float = 1.0

    def __post_init__(self):
        if not 0 < self.forgetting <= 1:
            raise ValueError("forgetting factor must lie in (0, 1]")
        if self.order < 0:
            raise ValueError("order must be >= 0")
        if not self.initial_p_scale > 0:
            raise ValueError("initial_p_scale must be positive")


@dataclass
class RlsState:
    base: AdaptiveFilterState
    p_matrix: np.ndarray
    gain: np.ndarray

    @classmethod
    def initial(cls, cfg: RlsConfig, batch: tuple[int, ...] = ()) -> "RlsState":
        base = AdaptiveFilterState.zeros(cfg.order, batch)
        n = cfg.order + 1
        p = np.broadcast_to(cfg.initial_p_scale * np.eye(n, dtype=complex), tuple(batch) + (n, n)).copy()
        return cls(base, p, np.zeros_like(base.weights))

    @property
    def weights(self) -> np.ndarray:
        return self.base.weights


@dataclass
class TrainingRecord:
    """Per-iteration ``|e(n)|**2`` and the final raw filter weights."""

    squared_error: np.ndarray
    weights: np.ndarray = field(repr=False)


def lms_step(state: AdaptiveFilterState, cfg: LmsConfig, x_new, desired):
    """Advance one LMS iteration in place and return the error ``e(n)``."""
    state.push(x_new)
    x = state.window
    e = desired - np.sum(state.weights * x, axis=-1)
    state.weights = state.weights + cfg.step_size * e[..., None] * np.conj(x)
    return e


def rls_step(state: RlsState, cfg: RlsConfig, x_new, desired):
    """Advance one RLS iteration in place and return the a-priori error.

    Raises
    ------
    NumericalBreakdownError
        If ``|1 + x^H P x / gamma|`` drops below ``BREAKDOWN_TOL``.
    """
    base = state.base
    base.push(x_new)
    x = base.window
    inv_gamma = 1.0 / cfg.forgetting
    p = state.p_matrix

    px = inv_gamma * (p @ x[..., None])[..., 0]
    denom = 1.0 + np.sum(np.conj(x) * px, axis=-1)
    bad = ~(np.abs(denom) >= BREAKDOWN_TOL)
    if np.any(bad):
        raise NumericalBreakdownError(
            "RLS gain denominator collapsed", np.flatnonzero(np.atleast_1d(bad))
        )
    k = px / denom[..., None]

    e = desired - np.sum(np.conj(base.weights) * x, axis=-1)
    base.weights = base.weights + k * np.conj(e)[..., None]

    xh_p = (np.conj(x)[..., None, :] @ p)[..., 0, :]
    p_new = k[..., :, None] * xh_p[..., None, :]
    np.subtract(p, p_new, out=p_new)
    p_new *= inv_gamma
    # re-Hermitianize to stop rounding drift
    p_new += np.conj(np.swapaxes(p_new, -1, -2))
    p_new *= 0.5
    state.p_matrix = p_new
    state.gain = k
    return e


def _desired(pilot: np.ndarray, delay: int) -> np.ndarray:
    d = np.zeros_like(pilot)
    d[..., delay:] = pilot[..., : pilot.shape[-1] - delay]
    return d


def train(cfg, pilot, received_pilot, delay: int | None = None):
    """Adapt a fresh equalizer over a whole pilot sequence.

    Parameters
    ----------
    cfg : LmsConfig or RlsConfig
        Selects the algorithm.
    pilot : SymbolStream or array_like
        Known transmitted symbols, shape ``(T,)`` or ``(B, T)``.
    received_pilot : array_like
        Channel output for the pilot, same shape.
    delay : int, optional
        Decision delay; at step ``n`` the desired sample is
        ``pilot[n - delay]`` (zero before the pilot starts).  Defaults to
        ``(L + 1) // 2``.

    Returns
    -------
    taps : ndarray
        Frozen FIR taps, shape ``(L+1,)`` or ``(B, L+1)``.
    record : TrainingRecord
    """
    if not isinstance(cfg, (LmsConfig, RlsConfig)):
        raise TypeError(f"unsupported equalizer config {type(cfg).__name__}")
    pilot = pilot.symbols if isinstance(pilot, SymbolStream) else np.asarray(pilot, dtype=complex)
    received = np.asarray(received_pilot, dtype=complex)
    if pilot.shape != received.shape:
        raise ValueError("pilot and received pilot must have the same shape")
    n_taps = cfg.order + 1
    length = pilot.shape[-1]
    if length < n_taps:
        raise ValueError(f"pilot length {length} is shorter than the {n_taps} equalizer taps")
    if delay is None:
        delay = default_delay(n_taps)
    if not 0 <= delay < length:
        raise ValueError("delay must be non-negative and shorter than the pilot")

    batch = pilot.shape[:-1]
    d = _desired(pilot.astype(complex), delay)
    sq_err = np.empty(batch + (length,))

    if isinstance(cfg, LmsConfig):
        power = float(np.mean(np.abs(received) ** 2))
        if power > 0 and cfg.step_size >= 2.0 / (power * n_taps):
            warnings.warn(
                f"LMS step size {cfg.step_size} exceeds the stability bound "
                f"{2.0 / (power * n_taps):.3g} for this input power",
                RuntimeWarning,
                stacklevel=2,
            )
        state = AdaptiveFilterState.zeros(cfg.order, batch)
        for n in range(length):
            e = lms_step(state, cfg, received[..., n], d[..., n])
            sq_err[..., n] = np.abs(e) ** 2
        weights = state.weights
        taps = weights
    else:
        state = RlsState.initial(cfg, batch)
        for n in range(length):
            e = rls_step(state, cfg, received[..., n], d[..., n])
            sq_err[..., n] = np.abs(e) ** 2
        weights = state.weights
        taps = np.conj(weights)
    return taps, TrainingRecord(sq_err, weights.copy())


def equalize(taps, received, delay: int = 0) -> np.ndarray:
    """Apply frozen taps to the payload; output ``n`` estimates symbol ``n``."""
    return fir_filter(taps, np.asarray(received, dtype=complex), delay)
