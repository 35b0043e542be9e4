"""
Monte Carlo BER and convergence experiments.

Every trial draws its randomness from its own generators, derived from the
master seed as

    SeedSequence(master_seed, spawn_key=(kind, point_index, trial_index)).spawn(3)

giving independent channel, pilot and payload generators (``kind`` is 0 for
BER trials and 1 for convergence runs).  Trials are grouped into fixed-size
blocks that are reduced strictly in block order, so results do not depend on
how many worker processes evaluate them.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special, stats

from . import adaptive, signal, zf
from .alpha_mu import AlphaMuParams, get_preset

WORKERS_ENV = "ALPHAMU_EQ_WORKERS"
EQUALIZERS = ("zf", "lms", "rls", "none")
NORMALIZATIONS = ("mean", "realization")
SWEEPABLE = ("training_length", "equalizer_taps", "preset", "channel_taps")
_Z95 = float(stats.norm.ppf(0.975))


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo campaign.

    The channel law is either a named preset or explicit ``alpha``/``mu``
    (and optionally ``beta``).  Unless ``beta`` is given it is chosen so that
    the ``channel_taps`` taps carry unit total mean power.  With
    ``fading=False`` the channel is a fixed unit tap (pure AWGN).
    """

    preset: str = "rxtx1"
    alpha: float | None = None
    mu: float | None = None
    beta: float | None = None
    fading: bool = True
    channel_taps: int = 1
    channel_normalization: str = "mean"
    snr_grid_db: tuple[float, ...] = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0)
    stream_length: int = 1000
    num_streams: int = 10000
    training_length: int = 1000
    equalizer: str = "lms"
    step_size: float = 0.04
    forgetting: float = 0.999
    initial_p_scale: float = 1.0
    equalizer_taps: int = 16
    decision_delay: int | None = None
    num_runs_for_mse: int = 100
    convergence_snr_db: float = 20.0
    min_errors: int = 100
    batch_size: int = 100
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        object.__setattr__(self, "equalizer", self.equalizer.lower())
        if self.equalizer not in EQUALIZERS:
            raise ValueError(f"equalizer must be one of {EQUALIZERS}, got {self.equalizer!r}")
        if self.channel_normalization not in NORMALIZATIONS:
            raise ValueError(f"channel_normalization must be one of {NORMALIZATIONS}")
        for name in ("channel_taps", "stream_length", "num_streams", "training_length",
                     "equalizer_taps", "num_runs_for_mse", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.min_errors < 0:
            raise ValueError("min_errors must be >= 0")
        if not self.snr_grid_db:
            raise ValueError("snr_grid_db must not be empty")
        if (self.alpha is None) != (self.mu is None):
            raise ValueError("alpha and mu must be given together")
        if self.beta is not None and self.alpha is None:
            raise ValueError("beta requires explicit alpha and mu")
        if not self.fading and self.channel_taps != 1:
            raise ValueError("a non-fading channel is a single unit tap")
        if self.decision_delay is not None and not (
            0 <= self.decision_delay < self.equalizer_taps + self.channel_taps - 1
        ):
            raise ValueError("decision_delay out of range")
        if self.alpha is None:
            get_preset(self.preset)
        self.channel_params()
        self.equalizer_config()

    def channel_params(self) -> AlphaMuParams:
        if self.alpha is None:
            return get_preset(self.preset).params_for(self.channel_taps)
        if self.beta is not None:
            return AlphaMuParams(self.alpha, self.mu, self.beta)
        return AlphaMuParams.with_mean_power(self.alpha, self.mu, 1.0 / self.channel_taps)

    def equalizer_config(self):
        order = self.equalizer_taps - 1
        if self.equalizer == "lms":
            return adaptive.LmsConfig(self.step_size, order)
        if self.equalizer == "rls":
            return adaptive.RlsConfig(self.forgetting, order, self.initial_p_scale)
        return None

    @property
    def delay(self) -> int:
        if self.equalizer == "none":
            return 0
        if self.decision_delay is not None:
            return self.decision_delay
        return zf.default_delay(self.equalizer_taps, self.channel_taps)


@dataclass(frozen=True)
class CurvePoint:
    """One point of a BER curve (``x`` = SNR in dB) or MSE curve (``x`` = iteration)."""

    x: float
    y: float
    ci_low: float
    ci_high: float
    n_errors: int = 0
    n_bits: int = 0
    excluded: int = field(default=0, compare=False)


def wilson_interval(errors: int, n: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    p = errors / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == n else min(1.0, centre + half)
    return lo, hi


def bpsk_awgn_ber(snr_db) -> np.ndarray:
    """Closed-form BPSK BER ``Q(sqrt(2 Es/N0))``."""
    snr = 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)
    return 0.5 * special.erfc(np.sqrt(snr))


def trial_generators(master_seed: int, kind: int, point: int, trial: int):
    """Channel, pilot and payload generators of one trial."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(kind, point, trial))
    return tuple(np.random.default_rng(s) for s in ss.spawn(3))


def _draw_link(cfg: ExperimentConfig, ch_rng) -> signal.ChannelRealization:
    if not cfg.fading:
        return signal.ChannelRealization.unit()
    return signal.draw_channel(
        cfg.channel_params(), cfg.channel_taps, ch_rng,
        unit_energy=cfg.channel_normalization == "realization",
    )


def _transmit(channel, bits, snr_db, rng):
    stream = signal.bpsk_modulate(bits)
    rx = signal.add_awgn(signal.apply_channel(stream, channel), snr_db, rng)
    return stream.symbols, rx.samples


def _ber_block(cfg: ExperimentConfig, point: int, snr_db: float, trials: range):
    """Simulate ``trials`` at one SNR; return (errors, bits, excluded)."""
    channels, pilots, rx_pilots, payload_bits, rx_payloads = [], [], [], [], []
    for t in trials:
        ch_rng, pilot_rng, payload_rng = trial_generators(cfg.master_seed, 0, point, t)
        channel = _draw_link(cfg, ch_rng)
        channels.append(channel)
        if cfg.equalizer in ("lms", "rls"):
            sym, rx = _transmit(channel, signal.random_bits(pilot_rng, cfg.training_length), snr_db, pilot_rng)
            pilots.append(sym)
            rx_pilots.append(rx)
        bits = signal.random_bits(payload_rng, cfg.stream_length)
        _, rx = _transmit(channel, bits, snr_db, payload_rng)
        payload_bits.append(bits)
        rx_payloads.append(rx)

    keep = np.ones(len(trials), dtype=bool)
    rx_payloads = np.array(rx_payloads)
    if cfg.equalizer == "none":
        estimates = rx_payloads
    elif cfg.equalizer == "zf":
        estimates = np.zeros_like(rx_payloads)
        for i, channel in enumerate(channels):
            try:
                eq = zf.design_zf(channel, cfg.equalizer_taps, cfg.delay)
            except zf.SingularChannelError:
                keep[i] = False
                continue
            estimates[i] = zf.equalize_zf(eq, rx_payloads[i])
    else:
        pilots, rx_pilots = np.array(pilots), np.array(rx_pilots)
        eq_cfg = cfg.equalizer_config()
        while True:
            idx = np.flatnonzero(keep)
            if idx.size == 0:
                break
            try:
                taps, _ = adaptive.train(eq_cfg, pilots[idx], rx_pilots[idx], cfg.delay)
            except adaptive.NumericalBreakdownError as exc:
                keep[idx[exc.rows]] = False
                continue
            break
        estimates = np.zeros_like(rx_payloads)
        if idx.size:
            estimates[idx] = adaptive.equalize(taps, rx_payloads[idx], cfg.delay)

    decided = signal.bpsk_demodulate(estimates)
    errors = np.count_nonzero(decided[keep] != np.array(payload_bits)[keep])
    bits = int(keep.sum()) * cfg.stream_length
    return int(errors), bits, int((~keep).sum())


def _blocks(n_trials: int, size: int):
    return [range(s, min(s + size, n_trials)) for s in range(0, n_trials, size)]


def _workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, workers)


def _map_ordered(fn, arg_list, workers: int, stop=None):
    """Evaluate ``fn(*args)`` in order, optionally in waves of parallel workers.

    ``stop(results_so_far)`` is consulted after each result in order; once it
    returns true the remaining work is dropped.
    """
    results = []
    if workers == 1:
        for args in arg_list:
            results.append(fn(*args))
            if stop is not None and stop(results):
                break
        return results
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for start in range(0, len(arg_list), workers):
            wave = [pool.submit(fn, *args) for args in arg_list[start:start + workers]]
            for fut in wave:
                results.append(fut.result())
                if stop is not None and stop(results):
                    for f in wave:
                        f.cancel()
                    return results
    return results


def run_ber_experiment(config: ExperimentConfig, workers: int | None = None) -> list[CurvePoint]:
    """BER versus SNR.

    Each SNR point accumulates blocks of ``batch_size`` streams until at
    least ``min_errors`` bit errors are seen or ``num_streams`` is reached.
    Trials broken by RLS breakdown or singular ZF designs are excluded and
    counted in ``CurvePoint.excluded``.
    """
    workers = _workers(workers)
    points = []
    for point, snr_db in enumerate(config.snr_grid_db):
        args = [(config, point, snr_db, block) for block in _blocks(config.num_streams, config.batch_size)]
        stop = None
        if config.min_errors > 0:
            stop = lambda res: sum(r[0] for r in res) >= config.min_errors  # noqa: E731
        results = _map_ordered(_ber_block, args, workers, stop)
        errors = sum(r[0] for r in results)
        bits = sum(r[1] for r in results)
        excluded = sum(r[2] for r in results)
        ber = errors / bits if bits else float("nan")
        lo, hi = wilson_interval(errors, bits)
        points.append(CurvePoint(snr_db, ber, lo, hi, errors, bits, excluded))
    return points


def _convergence_block(cfg: ExperimentConfig, runs: range):
    """Return (sum |e|^2, sum |e|^4, kept) over ``runs``."""
    pilots, rx_pilots = [], []
    for r in runs:
        ch_rng, pilot_rng, _ = trial_generators(cfg.master_seed, 1, 0, r)
        channel = _draw_link(cfg, ch_rng)
        bits = signal.random_bits(pilot_rng, cfg.training_length)
        sym, rx = _transmit(channel, bits, cfg.convergence_snr_db, pilot_rng)
        pilots.append(sym)
        rx_pilots.append(rx)
    pilots, rx_pilots = np.array(pilots), np.array(rx_pilots)
    keep = np.ones(len(runs), dtype=bool)
    eq_cfg = cfg.equalizer_config()
    while keep.any():
        idx = np.flatnonzero(keep)
        try:
            _, record = adaptive.train(eq_cfg, pilots[idx], rx_pilots[idx], cfg.delay)
        except adaptive.NumericalBreakdownError as exc:
            keep[idx[exc.rows]] = False
            continue
        sq = record.squared_error
        return sq.sum(axis=0), (sq**2).sum(axis=0), int(keep.sum())
    zeros = np.zeros(cfg.training_length)
    return zeros, zeros, 0


def run_convergence_experiment(config: ExperimentConfig, workers: int | None = None) -> list[CurvePoint]:
    """Ensemble MSE ``E|e(n)|^2`` per training iteration, with 95% intervals.

    Runs at ``convergence_snr_db`` with a fresh channel and noise per run.
    """
    if config.equalizer not in ("lms", "rls"):
        raise ValueError("convergence experiments need an adaptive equalizer (lms or rls)")
    workers = _workers(workers)
    args = [(config, block) for block in _blocks(config.num_runs_for_mse, config.batch_size)]
    results = _map_ordered(_convergence_block, args, workers)
    s1 = sum(r[0] for r in results)
    s2 = sum(r[1] for r in results)
    kept = sum(r[2] for r in results)
    excluded = config.num_runs_for_mse - kept
    if kept == 0:
        raise adaptive.NumericalBreakdownError("every convergence run broke down")
    mean = s1 / kept
    var = np.maximum(s2 / kept - mean**2, 0.0) * (kept / max(kept - 1, 1))
    half = _Z95 * np.sqrt(var / kept)
    return [
        CurvePoint(float(n), float(m), float(max(m - h, 0.0)), float(m + h), 0, 0, excluded)
        for n, (m, h) in enumerate(zip(mean, half))
    ]


def moving_average(values, width: int) -> np.ndarray:
    """Centred moving average; the window shrinks at the edges."""
    values = np.asarray(values, dtype=float)
    kernel = np.ones(width)
    sums = np.convolve(values, kernel, mode="same")
    counts = np.convolve(np.ones_like(values), kernel, mode="same")
    return sums / counts


def convergence_iteration(mse, width: int = 9, tol_db: float = 3.0, floor_fraction: float = 0.2) -> int:
    """Iteration after which the smoothed MSE stays within ``tol_db`` of its floor.

    The floor is the mean of the last ``floor_fraction`` of the raw trace.
    """
    mse = np.asarray(mse, dtype=float)
    tail = max(1, int(round(floor_fraction * len(mse))))
    floor = mse[-tail:].mean()
    smooth = moving_average(mse, width)
    above = np.flatnonzero(smooth > floor * 10.0 ** (tol_db / 10.0))
    return int(above[-1] + 1) if above.size else 0


def run_sweep(base: ExperimentConfig, param: str, values, workers: int | None = None) -> dict:
    """Run :func:`run_ber_experiment` once per value of ``param``.

    All runs share ``base.master_seed`` so only the swept parameter changes.
    """
    if param not in SWEEPABLE:
        raise ValueError(f"cannot sweep {param!r}; choose from {SWEEPABLE}")
    out = {}
    for value in values:
        cfg = replace(base, **{param: value})
        out[value] = run_ber_experiment(cfg, workers)
    return out
