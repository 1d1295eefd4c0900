"""
Desk-scale Monte Carlo checks of the expected recovery trends.

These take minutes, so they are marked slow and deselected by default:

    pytest -m slow sparsepr/tests/integration/test_acceptance.py
"""

import os
from dataclasses import replace

import numpy as np
import pytest

from sparsepr import presets
from sparsepr.harness import (
    ONE_STEP_SUPPORT_ONLY,
    SPARTA,
    SPARTA_SUPPORT,
    TOPK_SUPPORT_ONLY,
    ExperimentGrid,
    make_rng,
    run_grid,
)
from sparsepr.hwf import HwfConfig, run_multi_restart, run_random_init, spike_index
from sparsepr.model import SignalModel, dist, generate_measurements, generate_signal
from sparsepr.risk import estimate_theta, marginal_statistics
from sparsepr.sparta import SpartaConfig, sparta_init, sparta_iterate
from sparsepr.support import SupportEstimate, recover_support_one_step

pytestmark = pytest.mark.slow

WORKERS = os.cpu_count() or 1


def _support_grid(model, solver, m, k, trials, n=1000):
    return ExperimentGrid(
        experiment_id="support", n=n, m_values=(m,), k_values=(k,), model=model,
        solver=solver, trials=trials, seed=2024)


def _first_below(trace, level):
    return next(p.iteration for p in trace if p.rel_error is not None and p.rel_error <= level)


class TestSupportRecovery:
    def test_single_spike(self):
        cfg = HwfConfig.from_config()
        hits = 0
        for trial in range(50):
            rng = make_rng(trial)
            signal = generate_signal(SignalModel.flat(), 1000, 1, rng)
            meas = generate_measurements(signal, 200, rng)
            est = recover_support_one_step(meas, 1, cfg.eta, cfg.alpha)
            hits += int(set(est.indices) == set(signal.support))
        assert hits >= 49

    def test_largest_statistic_lands_on_a_large_coordinate(self):
        """|x*_i| >= x*_max / 2 at the largest R_i in 99% of 200 trials."""
        hits = 0
        for trial in range(200):
            rng = make_rng(5000 + trial)
            signal = generate_signal(SignalModel.fixed_max(0.7), 1000, 10, rng)
            meas = generate_measurements(signal, 600, rng)
            chosen = spike_index(marginal_statistics(meas), 1)
            hits += int(abs(signal.values[chosen]) >= 0.35)
        assert hits >= 198

    def test_exact_support_at_large_max(self):
        grid = _support_grid(SignalModel.fixed_max(0.7), ONE_STEP_SUPPORT_ONLY, m=600, k=10, trials=50)
        (result,) = run_grid(grid, workers=WORKERS, timing=False)
        assert result.success_rate >= 0.9

    def test_recovery_improves_with_max_coordinate(self):
        models = [SignalModel.flat(), SignalModel.fixed_max_power(0.25), SignalModel.fixed_max(0.7)]
        fractions = []
        for model in models:
            (result,) = run_grid(_support_grid(model, ONE_STEP_SUPPORT_ONLY, m=500, k=30, trials=100),
                                 workers=WORKERS, timing=False)
            fractions.append(result.mean_recovered_fraction)
        assert fractions[1] - fractions[0] >= 0.05
        assert fractions[2] - fractions[1] >= 0.05

        (topk,) = run_grid(_support_grid(models[2], TOPK_SUPPORT_ONLY, m=500, k=30, trials=100),
                           workers=WORKERS, timing=False)
        assert fractions[2] - topk.mean_recovered_fraction >= 0.1


class TestHwfSuccess:
    def test_gaussian_signals_at_500_measurements(self):
        (grid,) = presets.get_preset("fig2-small")
        grid = replace(grid, m_values=(500,))
        (result,) = run_grid(grid, workers=WORKERS, timing=False)
        assert result.success_rate >= 0.8

    def test_tail_is_sublinear(self):
        """Past 1e-2 the log error falls fast, then per-window progress stalls."""
        rng = make_rng(256)
        signal = generate_signal(SignalModel.flat(), 256, 5, rng)
        meas = generate_measurements(signal, 1000, rng)
        cfg = HwfConfig.from_config(trace=True, trace_every=1, restarts=5, max_iters=2000, risk_stop=0.0)
        trace = run_multi_restart(meas, cfg, signal).trace
        start = _first_below(trace, 1e-2)
        logs = np.log10([p.rel_error for p in trace if p.iteration >= start])
        windows = [logs[i] - logs[i + 100] for i in range(0, len(logs) - 100, 100)]
        assert len(windows) >= 3
        assert logs[-1] < logs[0]
        assert windows[-1] <= 0.1 * windows[0]

    def test_random_init_plateaus(self):
        rng = make_rng(99)
        signal = generate_signal(SignalModel.gaussian(), 1000, 10, rng)
        meas = generate_measurements(signal, 700, rng)
        cfg = HwfConfig.from_config(trace=True, restarts=5)
        spiked = run_multi_restart(meas, cfg, signal)
        random = run_random_init(meas, cfg, make_rng(100), signal=signal)
        assert spiked.trace[-1].rel_error < 0.01
        assert random.trace[-1].rel_error < 0.01
        assert _first_below(random.trace, 0.5) >= 2 * max(1, _first_below(spiked.trace, 0.5))


class TestSparta:
    def test_geometric_decay_with_oracle_support(self):
        n, k, m = 256, 5, 600
        cfg = SpartaConfig(k=k)
        decaying = 0
        for trial in range(50):
            rng = make_rng(1000 + trial)
            signal = generate_signal(SignalModel.gaussian(), n, k, rng)
            meas = generate_measurements(signal, m, rng)
            oracle = SupportEstimate(signal.support.copy(), "oracle", np.abs(signal.values))
            x = sparta_init(meas, oracle, estimate_theta(meas), cfg.power_iters)
            dists = [dist(x, signal)]
            for _ in range(30):
                x = sparta_iterate(x, meas, cfg)
                dists.append(dist(x, signal))
            ratios = [dists[t + 5] / dists[t] for t in range(0, 26, 5) if dists[t] > 1e-10]
            decaying += int(all(r <= 0.9 for r in ratios))
        assert decaying >= 45

    def test_hybrid_beats_marginal_support(self):
        """SPARTA seeded by one HWF step beats SPARTA on top-k marginals."""
        rates = {}
        for solver in (SPARTA, SPARTA_SUPPORT):
            grid = ExperimentGrid(
                experiment_id="hybrid", n=1000, m_values=(500,), k_values=(10,),
                model=SignalModel.fixed_max(0.7), solver=solver, trials=50, seed=7,
                hwf=HwfConfig.from_config(restarts=10))
            (result,) = run_grid(grid, workers=WORKERS, timing=False)
            rates[solver] = result.success_rate
        assert rates[SPARTA_SUPPORT] - rates[SPARTA] >= 0.05

    def test_sparta_support_success(self):
        grid = ExperimentGrid(
            experiment_id="hybrid", n=1000, m_values=(500,), k_values=(10,),
            model=SignalModel.fixed_max(0.7), solver=SPARTA_SUPPORT, trials=50, seed=7,
            hwf=HwfConfig.from_config(restarts=10))
        (result,) = run_grid(grid, workers=WORKERS, timing=False)
        assert result.success_rate >= 0.7
