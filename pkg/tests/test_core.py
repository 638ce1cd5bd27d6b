"""Spike-time solver tests: frozen closed-form cases plus oracle equivalence.

The expected numbers below are hand-derived from the membrane equation
(sum of shifted exponential kernels crossing threshold), not read back from
the implementation.
"""

import math

import numpy as np
import pytest

from pulsenet.core import (
    NEVER,
    InvalidStep,
    KernelConfig,
    Model,
    ShapeMismatch,
    causal_spike_time,
    integrate_membrane,
    kernel_response,
    layer_forward,
    network_forward,
)


class TestKernel:
    def test_zero_before_onset(self):
        assert kernel_response(-1.0) == 0.0
        assert kernel_response(-1e-12) == 0.0

    def test_unit_at_onset(self):
        assert kernel_response(0.0) == 1.0

    def test_decay_value(self):
        np.testing.assert_allclose(kernel_response(1.0), math.exp(-1.0), rtol=1e-15)

    def test_tau_scaling(self):
        cfg = KernelConfig(tau_syn=2.0)
        np.testing.assert_allclose(kernel_response(2.0, cfg), math.exp(-1.0), rtol=1e-15)

    def test_vectorized_and_causal(self):
        x = np.linspace(-3.0, 3.0, 301)
        y = kernel_response(x)
        assert (y[x < 0] == 0.0).all()
        assert (y[x >= 0] > 0.0).all()
        # strictly decreasing after onset
        pos = y[x >= 0]
        assert (np.diff(pos) < 0.0).all()

    def test_config_validation(self):
        with pytest.raises(ValueError):
            KernelConfig(tau_syn=0.0)
        with pytest.raises(ValueError):
            KernelConfig(threshold=-1.0)


class TestIntegrateMembrane:
    """The numerical oracle on cases solvable by hand."""

    def test_single_spike_log2(self):
        # 2 * (1 - e^-t) = 1  =>  t = ln 2
        t = integrate_membrane([0.0], [2.0])
        np.testing.assert_allclose(t, math.log(2.0), atol=1e-6)

    def test_single_weak_spike_never(self):
        # asymptote 0.5 < threshold
        assert integrate_membrane([0.0], [0.5]) == NEVER

    def test_two_spike_case(self):
        # 0.6(1-e^-t) + 0.6(1-e^-(t-0.1)) = 1 crosses at ln(3(1+e^0.1)))
        expect = math.log(3.0 * (1.0 + math.exp(0.1)))
        t = integrate_membrane([0.0, 0.1], [0.6, 0.6])
        np.testing.assert_allclose(t, expect, atol=1e-6)

    def test_inhibition_can_silence(self):
        assert integrate_membrane([0.0, 0.05], [1.5, -3.0]) == NEVER

    def test_never_spikes_ignored(self):
        t = integrate_membrane([0.0, NEVER], [2.0, 99.0])
        np.testing.assert_allclose(t, math.log(2.0), atol=1e-6)

    def test_invalid_step(self):
        with pytest.raises(InvalidStep):
            integrate_membrane([0.0], [2.0], dt=0.0)
        with pytest.raises(InvalidStep):
            integrate_membrane([0.0], [2.0], dt=-1e-4)
        with pytest.raises(InvalidStep):
            integrate_membrane([0.0], [2.0], dt=0.5)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            integrate_membrane([0.0, 1.0], [2.0])


class TestCausalSpikeTime:
    def test_single_spike(self):
        t, c = causal_spike_time([0.0], [2.0])
        np.testing.assert_allclose(t, math.log(2.0), rtol=1e-15)
        assert c.tolist() == [0]

    def test_late_spike_not_causal(self):
        # fires at ln 2 long before the second arrival
        t, c = causal_spike_time([0.0, 10.0], [2.0, 5.0])
        np.testing.assert_allclose(t, math.log(2.0), rtol=1e-15)
        assert c.tolist() == [0]

    def test_two_spike_causal_set(self):
        t, c = causal_spike_time([0.0, 0.1], [0.6, 0.6])
        np.testing.assert_allclose(t, math.log(3.0 * (1.0 + math.exp(0.1))), rtol=1e-14)
        assert sorted(c.tolist()) == [0, 1]

    def test_subthreshold_never(self):
        t, c = causal_spike_time([0.0], [0.5])
        assert t == NEVER
        assert c.size == 0

    def test_all_never_input(self):
        t, c = causal_spike_time([NEVER, NEVER], [2.0, 2.0])
        assert t == NEVER
        assert c.size == 0

    def test_unsorted_input_indices(self):
        # same case as above with the arrival order scrambled
        t, c = causal_spike_time([10.0, 0.0], [5.0, 2.0])
        np.testing.assert_allclose(t, math.log(2.0), rtol=1e-15)
        assert c.tolist() == [1]

    def test_simultaneous_spikes(self):
        # both at t=0: V = 3(1 - e^-t), crossing at ln(3/2)
        t, c = causal_spike_time([0.0, 0.0], [1.5, 1.5])
        np.testing.assert_allclose(t, math.log(3.0 / 2.0), rtol=1e-14)
        assert sorted(c.tolist()) == [0, 1]

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            causal_spike_time([float("nan")], [1.0])

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            causal_spike_time([-0.1], [2.0])


def _random_case(rng):
    n = int(rng.integers(1, 9))
    times = rng.uniform(0.0, 2.0, n)
    weights = rng.uniform(-1.0, 2.0, n)
    return times, weights


class TestOracleEquivalence:
    """Closed-form solver against the numerical integrator (quick version;
    the acceptance suite runs the full 1000-case battery)."""

    def test_random_agreement(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            times, weights = _random_case(rng)
            t_exact, _ = causal_spike_time(times, weights)
            t_num = integrate_membrane(times, weights)
            if t_exact == NEVER:
                assert t_num == NEVER, (times, weights)
            else:
                assert t_num != NEVER, (times, weights)
                assert abs(t_exact - t_num) < 1e-3, (times, weights, t_exact, t_num)

    def test_causality_invariant(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            times, weights = _random_case(rng)
            t_out, c = causal_spike_time(times, weights)
            if t_out == NEVER:
                continue
            inside = set(c.tolist())
            for i, ti in enumerate(times):
                if i in inside:
                    assert ti < t_out
                elif math.isfinite(ti):
                    assert ti >= t_out

    def test_threshold_monotonicity(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            times, weights = _random_case(rng)
            t_lo, _ = causal_spike_time(times, weights, KernelConfig(threshold=1.0))
            t_hi, _ = causal_spike_time(times, weights, KernelConfig(threshold=1.3))
            assert t_hi >= t_lo


class TestLayerForward:
    def test_identity_shift(self):
        # single weight 2: t_out = t_in + ln 2
        for c in (0.0, 0.3, 1.7):
            out = layer_forward([c], [[2.0]])
            np.testing.assert_allclose(out, [c + math.log(2.0)], rtol=1e-14)

    def test_matches_per_neuron_solver(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            n_src = int(rng.integers(1, 7))
            n_dst = int(rng.integers(1, 5))
            times = rng.uniform(0.0, 1.5, n_src)
            wm = rng.uniform(-1.0, 2.0, (n_dst, n_src))
            out = layer_forward(times, wm)
            for j in range(n_dst):
                t_j, _ = causal_spike_time(times, wm[j])
                assert out[j] == t_j or abs(out[j] - t_j) < 1e-15

    def test_all_never_inputs(self):
        out = layer_forward([NEVER, NEVER], np.ones((3, 2)))
        assert (out == NEVER).all()

    def test_time_shift_equivariance(self):
        rng = np.random.default_rng(3)
        times = rng.uniform(0.0, 1.0, 6)
        wm = rng.uniform(-0.5, 1.5, (4, 6))
        base = layer_forward(times, wm)
        shifted = layer_forward(times + 0.37, wm)
        fired = np.isfinite(base)
        assert (np.isfinite(shifted) == fired).all()
        np.testing.assert_allclose(shifted[fired], base[fired] + 0.37, rtol=0, atol=1e-9)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            layer_forward([0.0, 1.0], np.ones((2, 3)))


class TestNetworkForward:
    def _chain(self):
        return Model(layer_dims=(1, 1, 2),
                     weights=(np.array([[2.0]]), np.array([[2.0], [4.0]])))

    def test_two_layer_chain(self):
        # hidden fires at ln 2 (z=2); outputs at ln 4 and ln(8/3)
        out, pred = network_forward([0.0], self._chain())
        np.testing.assert_allclose(out, [2.0 * math.log(2.0),
                                         math.log(2.0) + math.log(4.0 / 3.0)], rtol=1e-14)
        assert pred == 1

    def test_no_prediction(self):
        m = Model(layer_dims=(2, 2), weights=(np.full((2, 2), 0.1),))
        out, pred = network_forward([0.0, 0.0], m)
        assert pred is None
        assert (out == NEVER).all()

    def test_prediction_shift_invariance(self):
        rng = np.random.default_rng(17)
        wm1 = rng.normal(0.4, 0.3, (5, 8))
        wm2 = rng.normal(0.4, 0.3, (3, 5))
        m = Model(layer_dims=(8, 5, 3), weights=(wm1, wm2))
        times = rng.uniform(0.0, 1.0, 8)
        out_a, pred_a = network_forward(times, m)
        out_b, pred_b = network_forward(times + 0.5, m)
        assert pred_a == pred_b
        fired = np.isfinite(out_a)
        np.testing.assert_allclose(out_b[fired], out_a[fired] + 0.5, atol=1e-9)

    def test_tie_breaks_to_lowest_index(self):
        m = Model(layer_dims=(1, 2), weights=(np.array([[2.0], [2.0]]),))
        _, pred = network_forward([0.0], m)
        assert pred == 0

    def test_wrong_input_width(self):
        with pytest.raises(ShapeMismatch):
            network_forward([0.0, 0.0], self._chain())

    def test_model_validation(self):
        from pulsenet.core import InvalidDims
        with pytest.raises(InvalidDims):
            Model(layer_dims=(4,), weights=())
        with pytest.raises(ShapeMismatch):
            Model(layer_dims=(2, 3), weights=(np.ones((2, 2)),))
