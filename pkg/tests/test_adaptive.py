import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alphamu_eq import adaptive, signal
from alphamu_eq.adaptive import AdaptiveFilterState, LmsConfig, RlsConfig, RlsState
from alphamu_eq.signal import ChannelRealization


def complex_arrays(n):
    return st.lists(
        st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), min_size=n, max_size=n
    ).map(lambda v: np.array(v, dtype=complex))


class TestLmsStep:
    def test_first_step(self):
        state = AdaptiveFilterState.zeros(0)
        e = adaptive.lms_step(state, LmsConfig(0.04, 0), 1 + 0j, 1.0)
        assert e == 1.0
        np.testing.assert_array_equal(state.weights, [0.04])

    def test_hand_iteration(self):
        state = AdaptiveFilterState.zeros(0)
        cfg = LmsConfig(0.1, 0)
        trace = []
        for _ in range(3):
            adaptive.lms_step(state, cfg, 1.0, 1.0)
            trace.append(state.weights[0].real)
        np.testing.assert_allclose(trace, [0.1, 0.19, 0.271], rtol=0, atol=1e-15)

    def test_window_newest_first(self):
        state = AdaptiveFilterState.zeros(2)
        for x in (1, 2, 3):
            adaptive.lms_step(state, LmsConfig(0.04, 2), x, 0)
        np.testing.assert_array_equal(state.window, [3, 2, 1])

    @settings(max_examples=200, deadline=None)
    @given(w=complex_arrays(4), x=complex_arrays(4), d=st.complex_numbers(max_magnitude=10),
           eta=st.floats(1e-4, 0.5))
    def test_update_identity(self, w, x, d, eta):
        state = AdaptiveFilterState(w.copy(), np.concatenate([x[1:], [0]]))
        before = state.weights.copy()
        e = adaptive.lms_step(state, LmsConfig(eta, 3), x[0], d)
        np.testing.assert_allclose(state.weights - before, eta * e * np.conj(state.window), rtol=1e-12, atol=1e-12)

    def test_stationary_when_error_is_zero(self):
        rng = np.random.default_rng(0)
        cfg = LmsConfig(0.04, 3)
        for _ in range(1000):
            w = rng.normal(size=4) + 1j * rng.normal(size=4)
            window = rng.normal(size=4) + 1j * rng.normal(size=4)
            state = AdaptiveFilterState(w.copy(), np.concatenate([window[1:], [0]]))
            d = np.sum(w * window)
            e = adaptive.lms_step(state, cfg, window[0], d)
            assert abs(e) < 1e-12
            np.testing.assert_allclose(state.weights, w, atol=1e-12)

    def test_exact_zero_error_leaves_weights(self):
        state = AdaptiveFilterState(np.array([0.5 + 0j]), np.zeros(1, complex))
        adaptive.lms_step(state, LmsConfig(0.04, 0), 2.0, 1.0)
        np.testing.assert_array_equal(state.weights, [0.5])


class TestRlsStep:
    def test_hand_trace(self):
        cfg = RlsConfig(1.0, 0, 1.0)
        state = RlsState.initial(cfg)
        e1 = adaptive.rls_step(state, cfg, 1.0, 1.0)
        assert abs(state.gain[0] - 0.5) < 1e-15
        assert abs(e1 - 1.0) < 1e-15
        assert abs(state.weights[0] - 0.5) < 1e-15
        assert abs(state.p_matrix[0, 0] - 0.5) < 1e-15
        e2 = adaptive.rls_step(state, cfg, 1.0, 1.0)
        assert abs(state.gain[0] - 1 / 3) < 1e-15
        assert abs(e2 - 0.5) < 1e-15
        assert abs(state.weights[0] - 2 / 3) < 1e-15
        assert abs(state.p_matrix[0, 0] - 1 / 3) < 1e-15

    def test_zero_error_leaves_weights(self):
        cfg = RlsConfig(0.99, 2)
        state = RlsState.initial(cfg)
        state.base.weights = np.array([0.3, -0.2j, 0.1])
        state.base.window = np.array([0.5, 1j, 0])
        x_new = 1 - 1j
        window = np.array([x_new, 0.5, 1j])
        d = np.vdot(state.weights, window)
        before = state.weights.copy()
        e = adaptive.rls_step(state, cfg, x_new, d)
        assert abs(e) < 1e-15
        np.testing.assert_allclose(state.weights, before, atol=1e-15)

    def test_p_stays_hermitian(self):
        cfg = RlsConfig(0.95, 5)
        state = RlsState.initial(cfg)
        rng = np.random.default_rng(1)
        for _ in range(300):
            adaptive.rls_step(state, cfg, rng.normal() + 1j * rng.normal(), rng.normal())
            p = state.p_matrix
            assert np.max(np.abs(p - p.conj().T)) < 1e-9

    def test_breakdown(self):
        cfg = RlsConfig(1.0, 0, 1.0)
        state = RlsState.initial(cfg)
        state.p_matrix = np.array([[-1.0 + 0j]])
        with pytest.raises(adaptive.NumericalBreakdownError) as info:
            adaptive.rls_step(state, cfg, 1.0, 1.0)
        assert list(info.value.rows) == [0]

    def test_batched_breakdown_reports_rows(self):
        cfg = RlsConfig(1.0, 0, 1.0)
        state = RlsState.initial(cfg, (3,))
        state.p_matrix[1] = -1.0
        with pytest.raises(adaptive.NumericalBreakdownError) as info:
            adaptive.rls_step(state, cfg, np.ones(3), np.ones(3))
        assert list(info.value.rows) == [1]


@pytest.mark.parametrize("order", [1, 3, 7])
def test_rls_matches_batch_least_squares(order):
    rng = np.random.default_rng(order)
    n_taps = order + 1
    sigma = 1e6
    n_samples = 3 * n_taps
    x = rng.normal(size=n_samples) + 1j * rng.normal(size=n_samples)
    d = rng.normal(size=n_samples) + 1j * rng.normal(size=n_samples)
    cfg = RlsConfig(1.0, order, sigma)
    state = RlsState.initial(cfg)
    rows = []
    for n in range(n_samples):
        adaptive.rls_step(state, cfg, x[n], d[n])
        rows.append(state.base.window.copy())
    X = np.array(rows)
    # y = b^H x, so conj(b) is the least-squares solution of X w = d
    R = X.T @ X.conj() + np.eye(n_taps) / sigma
    w_ls = np.linalg.solve(X.conj().T @ X + np.eye(n_taps) / sigma, X.conj().T @ d)
    b_ls = np.conj(w_ls)
    assert np.linalg.norm(state.weights - b_ls) / np.linalg.norm(b_ls) < 1e-6
    # P tracks the regularized inverse correlation matrix
    p_true = np.linalg.inv(R)
    assert np.linalg.norm(state.p_matrix - p_true) / np.linalg.norm(p_true) < 1e-6


def test_batched_step_matches_single():
    rng = np.random.default_rng(2)
    B, T = 4, 40
    x = rng.normal(size=(B, T)) + 1j * rng.normal(size=(B, T))
    d = np.sign(rng.normal(size=(B, T))) + 0j
    for cfg in (LmsConfig(0.05, 3), RlsConfig(0.99, 3)):
        taps_batch, rec_batch = adaptive.train(cfg, d, x, delay=1)
        for b in range(B):
            taps, rec = adaptive.train(cfg, d[b], x[b], delay=1)
            np.testing.assert_allclose(taps_batch[b], taps, rtol=1e-12, atol=1e-12)
            np.testing.assert_allclose(rec_batch.squared_error[b], rec.squared_error, rtol=1e-12, atol=1e-12)


class TestTrain:
    def _flat_link(self, n, seed, snr_db=np.inf, tap=1.0 + 0j):
        bits = signal.random_bits(np.random.default_rng(seed), n)
        stream = signal.bpsk_modulate(bits)
        rx = signal.add_awgn(signal.apply_channel(stream, ChannelRealization(np.array([tap]))),
                             snr_db, np.random.default_rng(seed + 1))
        return stream, rx.samples

    def test_lms_converges_on_unit_channel(self):
        pilot, rx = self._flat_link(1000, 0)
        taps, rec = adaptive.train(LmsConfig(0.04, 15), pilot, rx)
        assert len(rec.squared_error) == 1000
        assert np.sqrt(rec.squared_error[-1]) < 1e-3

    def test_rls_converges_quickly(self):
        pilot, rx = self._flat_link(200, 1, tap=0.8 - 0.5j)
        cfg = RlsConfig(0.999, 15, 1e6)
        _, rec = adaptive.train(cfg, pilot, rx)
        delay = (cfg.order + 1) // 2
        err = np.sqrt(rec.squared_error)
        assert np.all(err[delay + 10 * (cfg.order + 1):] < 1e-6)

    def test_short_pilot_rejected(self):
        pilot, rx = self._flat_link(10, 2)
        with pytest.raises(ValueError):
            adaptive.train(LmsConfig(0.04, 15), pilot, rx)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            adaptive.train(LmsConfig(0.04, 1), np.ones(10), np.ones(9))

    def test_unsupported_config(self):
        with pytest.raises(TypeError):
            adaptive.train(object(), np.ones(10), np.ones(10))

    def test_lms_stability_warning(self):
        pilot, rx = self._flat_link(100, 3)
        with pytest.warns(RuntimeWarning, match="stability"):
            adaptive.train(LmsConfig(0.2, 15), pilot, rx)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            adaptive.train(LmsConfig(0.04, 15), pilot, rx)

    @pytest.mark.parametrize("cfg", [LmsConfig(0.04, 15), RlsConfig(0.999, 15)])
    def test_payload_error_free_after_noise_free_training(self, cfg):
        tap = 0.9 * np.exp(1j * 2.1)
        pilot, rx = self._flat_link(1000, 4, tap=tap)
        taps, _ = adaptive.train(cfg, pilot, rx)
        payload, rx_payload = self._flat_link(10_000, 40, tap=tap)
        out = adaptive.equalize(taps, rx_payload, (cfg.order + 1) // 2)
        assert np.count_nonzero(signal.bpsk_demodulate(out) != payload.bits) == 0

    def test_rls_returns_fir_taps(self):
        # after training on a pure delay, the FIR taps (not their conjugate) invert the channel
        tap = 0.5 + 0.5j
        pilot, rx = self._flat_link(400, 5, tap=tap)
        taps, rec = adaptive.train(RlsConfig(1.0, 3, 1e6), pilot, rx, delay=0)
        np.testing.assert_allclose(taps, [1 / tap, 0, 0, 0], atol=1e-6)
        np.testing.assert_allclose(np.conj(rec.weights), taps)


class TestEqualize:
    def test_identity_weights(self):
        x = np.array([1 + 2j, -0.5, 3j, 0.1])
        np.testing.assert_array_equal(adaptive.equalize(np.array([1, 0, 0], complex), x, 0), x)

    def test_zero_weights(self):
        out = adaptive.equalize(np.zeros(4, complex), np.ones(20, complex), 2)
        assert np.all(out == 0)
        assert np.all(signal.bpsk_demodulate(out) == 0)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_linear(self, seed):
        rng = np.random.default_rng(seed)
        w = rng.normal(size=6) + 1j * rng.normal(size=6)
        u, v = (rng.normal(size=64) + 1j * rng.normal(size=64) for _ in range(2))
        a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
        lhs = adaptive.equalize(w, a * u + b * v, 3)
        rhs = a * adaptive.equalize(w, u, 3) + b * adaptive.equalize(w, v, 3)
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)
