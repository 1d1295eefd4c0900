"""
Unit tests for the SPARTA baseline and the SPARTA-support hybrid.
"""

import numpy as np
import pytest

from sparsepr import config
from sparsepr.errors import AllRestartsFailedError, DegenerateInitError, ParameterError
from sparsepr.hwf import HwfConfig, StopReason
from sparsepr.model import MeasurementSet, SignalModel, dist, generate_measurements, generate_signal, relative_error
from sparsepr.risk import estimate_theta
from sparsepr.sparta import (
    SpartaConfig,
    hard_threshold,
    power_iteration,
    run_sparta,
    run_sparta_support,
    sparta_init,
    sparta_iterate,
)
from sparsepr.support import SupportEstimate, recover_support_one_step


def _oracle(signal):
    return SupportEstimate(signal.support.copy(), "oracle", np.abs(signal.values))


class TestSpartaConfig:
    def test_defaults(self):
        cfg = SpartaConfig(k=3)
        assert (cfg.mu, cfg.gamma, cfg.power_iters) == (1.0, 0.7, 100)
        assert cfg.init_fraction == pytest.approx(1.0 / 6.0)

    def test_from_config(self):
        config.SPARTA_GAMMA = 0.5
        assert SpartaConfig.from_config(k=2).gamma == 0.5

    @pytest.mark.parametrize("field,value", [("k", 0), ("mu", 0.0), ("gamma", -1.0), ("init_fraction", 1.5)])
    def test_invalid_values(self, field, value):
        values = {"k": 3, field: value}
        with pytest.raises(ParameterError):
            SpartaConfig(**values)


class TestHardThreshold:
    def test_keeps_largest_magnitudes(self):
        np.testing.assert_array_equal(hard_threshold([3.0, -1.0, 2.0], 2), [3.0, 0.0, 2.0])

    def test_full_sparsity_is_identity(self):
        x = np.array([0.5, -2.0, 1.0])
        np.testing.assert_array_equal(hard_threshold(x, 3), x)

    def test_tie_rule(self):
        np.testing.assert_array_equal(hard_threshold([1.0, 1.0, 1.0], 1), [1.0, 0.0, 0.0])


class TestPowerIteration:
    def test_leading_eigenvector(self):
        vec = power_iteration(np.diag([3.0, 1.0]), 100)
        np.testing.assert_allclose(np.abs(vec), [1.0, 0.0], atol=1e-12)

    def test_degenerate_matrix(self):
        with pytest.raises(DegenerateInitError):
            power_iteration(np.zeros((2, 2)), 5)


class TestSpartaInit:
    def test_support_and_norm(self, small_instance):
        """x0 lives on S-hat and has norm theta-hat."""
        signal, meas = small_instance
        est = _oracle(signal)
        theta = estimate_theta(meas)
        x0 = sparta_init(meas, est, theta, 100)
        assert set(np.flatnonzero(x0)) <= set(signal.support)
        assert abs(np.linalg.norm(x0) - theta) <= 1e-12

    def test_close_with_oracle_support(self, small_instance):
        signal, meas = small_instance
        x0 = sparta_init(meas, _oracle(signal), estimate_theta(meas), 100)
        assert dist(x0, signal) <= 0.4

    def test_zero_observations(self):
        meas = MeasurementSet(np.ones((6, 3)), np.zeros(6))
        est = SupportEstimate(np.array([0, 1]), "test", np.zeros(3))
        with pytest.raises(DegenerateInitError):
            sparta_init(meas, est, estimate_theta(meas), 10)


class TestSpartaIterate:
    def test_truth_is_fixed(self, small_instance):
        signal, meas = small_instance
        x = sparta_iterate(signal.values, meas, SpartaConfig(k=signal.k))
        np.testing.assert_allclose(x, signal.values, atol=1e-12)

    def test_distance_halves_from_oracle_start(self):
        """n=64, k=3, m=200: ten steps at least halve dist from the oracle start."""
        gen = np.random.default_rng(64)
        halved = 0
        for _ in range(10):
            signal = generate_signal(SignalModel.gaussian(), 64, 3, gen)
            meas = generate_measurements(signal, 200, gen)
            cfg = SpartaConfig(k=3)
            x = sparta_init(meas, _oracle(signal), estimate_theta(meas), cfg.power_iters)
            start = dist(x, signal)
            for _ in range(10):
                x = sparta_iterate(x, meas, cfg)
            halved += int(dist(x, signal) <= 0.5 * start)
        assert halved >= 9

    def test_truncated_sample_contributes_nothing(self):
        """a . x = 0 with y > 0 drops the only sample."""
        meas = MeasurementSet(np.array([[1.0, -1.0]]), np.array([4.0]))
        x = np.array([1.0, 1.0])
        np.testing.assert_array_equal(sparta_iterate(x, meas, SpartaConfig(k=2)), x)


class TestRunSparta:
    def test_oracle_support_recovers(self, small_instance):
        signal, meas = small_instance
        result = run_sparta(meas, SpartaConfig(k=signal.k), support=_oracle(signal), signal=signal)
        assert relative_error(result.x_hat, signal) < 0.01
        assert result.stop_reason == StopReason.RISK_THRESHOLD

    def test_trace_and_budget(self, small_instance):
        signal, meas = small_instance
        cfg = SpartaConfig(k=signal.k, max_iters=4, risk_stop=0.0, trace=True)
        result = run_sparta(meas, cfg, signal=signal)
        assert result.gradient_evaluations == 4
        assert [p.iteration for p in result.trace] == [0, 1, 2, 3, 4]

    def test_k_exceeds_dimension(self, worked_meas):
        with pytest.raises(ParameterError):
            run_sparta(worked_meas, SpartaConfig(k=3))


class TestRunSpartaSupport:
    def _hcfg(self, **overrides):
        values = dict(restarts=3, max_iters=50)
        values.update(overrides)
        return HwfConfig.from_config(**values)

    def test_single_restart_is_sparta_on_one_step_support(self, small_instance):
        signal, meas = small_instance
        hcfg = self._hcfg(restarts=1)
        scfg = SpartaConfig(k=signal.k, max_iters=200)
        hybrid = run_sparta_support(meas, signal.k, hcfg, scfg)
        support = recover_support_one_step(meas, signal.k, hcfg.eta, hcfg.alpha)
        plain = run_sparta(meas, scfg, support=support)
        np.testing.assert_array_equal(hybrid.x_hat, plain.x_hat)
        assert hybrid.iterations == [1 + plain.iterations[0]]

    def test_gradient_budget(self, small_instance):
        """At most restarts * (1 + max_iters) gradient evaluations."""
        signal, meas = small_instance
        scfg = SpartaConfig(k=signal.k, max_iters=25, risk_stop=0.0)
        result = run_sparta_support(meas, signal.k, self._hcfg(), scfg)
        assert result.gradient_evaluations <= 3 * (1 + 25)
        assert len(result.iterations) == 3

    def test_recovers_signal(self, small_instance):
        signal, meas = small_instance
        result = run_sparta_support(meas, signal.k, self._hcfg(), SpartaConfig(k=signal.k))
        assert relative_error(result.x_hat, signal) < 0.01

    def test_all_restarts_failed(self, small_instance, mocker):
        signal, meas = small_instance
        mocker.patch("sparsepr.sparta.sparta_init", side_effect=DegenerateInitError("empty"))
        with pytest.raises(AllRestartsFailedError):
            run_sparta_support(meas, signal.k, self._hcfg(), SpartaConfig(k=signal.k))

    def test_sparsity_is_taken_from_argument(self, small_instance):
        signal, meas = small_instance
        result = run_sparta_support(meas, 2, self._hcfg(restarts=1), SpartaConfig(k=5, max_iters=3))
        assert np.count_nonzero(result.x_hat) <= 2
