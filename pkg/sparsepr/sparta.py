"""
SPARTA (sparse truncated amplitude flow) and the SPARTA-support hybrid.

SPARTA works on the amplitude loss: from an orthogonality-promoting start
restricted to an estimated support it takes truncated gradient steps

    g = 1/m sum_{j in T} (a_j . x - sqrt(y_j) sign(a_j . x)) a_j,
    T = {j : |a_j . x| >= sqrt(y_j) / (1 + gamma)}

and projects back onto k-sparse vectors by hard thresholding.

SPARTA-support replaces SPARTA's own support estimate with one HWF step per
spiked restart and keeps the restart whose final iterate has the smallest
||grad F||, F being the squared-magnitude risk.
"""

import math
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from sparsepr import config
from sparsepr.errors import (
    AllRestartsFailedError,
    DegenerateInitError,
    ParameterError,
    RestartFailure,
)
from sparsepr.hwf import HwfConfig, RunResult, StopReason, TracePoint, hwf_step, init_spiked
from sparsepr.logging_util import debug_log
from sparsepr.model import MeasurementSet, SparseSignal, relative_error
from sparsepr.risk import GradientWorkspace, estimate_theta, gradient_norm, marginal_statistics
from sparsepr.support import (
    ONE_STEP_HWF,
    SupportEstimate,
    recover_support_topk_marginal,
    top_k_indices,
)


@dataclass(frozen=True)
class SpartaConfig:
    """SPARTA hyperparameters; ``k`` (the sparsity) is always required."""

    k: int
    mu: float = 1.0
    gamma: float = 0.7
    power_iters: int = 100
    max_iters: int = 1000
    init_fraction: float = 1.0 / 6.0
    risk_stop: float = 1e-7
    trace: bool = False
    trace_every: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ParameterError(f"sparsity must be >= 1, got k={self.k}")
        if not self.mu > 0:
            raise ParameterError(f"step size must be positive, got mu={self.mu}")
        if not self.gamma > 0:
            raise ParameterError(f"truncation threshold must be positive, got gamma={self.gamma}")
        if self.power_iters < 1 or self.max_iters < 0:
            raise ParameterError("power_iters must be >= 1 and max_iters >= 0")
        if not 0 < self.init_fraction <= 1:
            raise ParameterError(f"init_fraction must lie in (0, 1], got {self.init_fraction}")
        if self.trace_every < 1:
            raise ParameterError("trace_every must be >= 1")

    @classmethod
    def from_config(cls, k: int, **overrides) -> "SpartaConfig":
        values = dict(
            mu=config.SPARTA_MU,
            gamma=config.SPARTA_GAMMA,
            power_iters=config.SPARTA_POWER_ITERS,
            max_iters=config.SPARTA_MAX_ITERS,
            init_fraction=config.SPARTA_INIT_FRACTION,
            risk_stop=config.SPARTA_RISK_STOP,
        )
        values.update({key: v for key, v in overrides.items() if v is not None})
        return cls(k=k, **values)


def hard_threshold(x, k: int) -> np.ndarray:
    """Keep the k largest-magnitude entries (lowest index wins ties)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    keep = top_k_indices(np.abs(x), k)
    out[keep] = x[keep]
    return out


def power_iteration(matrix: np.ndarray, iters: int) -> np.ndarray:
    """Leading unit eigenvector of a PSD matrix from the fixed start 1/sqrt(d)."""
    d = matrix.shape[0]
    vec = np.full(d, 1.0 / math.sqrt(d))
    for _ in range(iters):
        nxt = matrix @ vec
        norm = np.linalg.norm(nxt)
        if norm == 0.0:
            raise DegenerateInitError("initialization matrix annihilates the start vector")
        vec = nxt / norm
    return vec


def sparta_init(
    meas: MeasurementSet,
    support_est: SupportEstimate,
    theta: float,
    power_iters: int,
    init_fraction: Optional[float] = None,
) -> np.ndarray:
    """Orthogonality-promoting start restricted to the estimated support.

    Takes the ceil(m * init_fraction) samples with the largest y, normalizes
    their measurement vectors restricted to S-hat, and embeds the leading
    eigenvector of their average outer product, scaled to norm theta.
    """
    if init_fraction is None:
        init_fraction = config.SPARTA_INIT_FRACTION
    idx = np.asarray(support_est.indices)
    if idx.size == 0:
        raise ParameterError("support estimate is empty")
    if not theta > 0:
        raise DegenerateInitError("observations carry no energy (theta-hat = 0)")

    count = max(1, math.ceil(meas.m * init_fraction))
    chosen = np.argsort(-meas.y, kind="stable")[:count]
    rows = meas.a[np.ix_(chosen, idx)]
    norms = np.linalg.norm(rows, axis=1)
    nonzero = norms > 0
    if not np.any(nonzero):
        raise DegenerateInitError("measurements restricted to the support estimate are all zero")
    rows = rows[nonzero] / norms[nonzero, None]
    matrix = rows.T @ rows / rows.shape[0]

    x0 = np.zeros(meas.n)
    x0[idx] = theta * power_iteration(matrix, power_iters)
    return x0


def _amplitude_gradient(z: np.ndarray, meas: MeasurementSet, amp: np.ndarray, gamma: float) -> np.ndarray:
    keep = np.abs(z) >= amp / (1.0 + gamma)
    resid = np.where(keep, z - amp * np.sign(z), 0.0)
    return (resid @ meas.a) / meas.m


def sparta_iterate(x, meas: MeasurementSet, cfg: SpartaConfig) -> np.ndarray:
    """One truncated amplitude-flow step followed by hard thresholding."""
    x = np.asarray(x, dtype=np.float64)
    z = meas.a @ x
    grad = _amplitude_gradient(z, meas, np.sqrt(meas.y), cfg.gamma)
    return hard_threshold(x - cfg.mu * grad, cfg.k)


def _run_from(
    x0: np.ndarray,
    meas: MeasurementSet,
    cfg: SpartaConfig,
    signal: Optional[SparseSignal],
) -> RunResult:
    """Iterate SPARTA from x0 until F <= risk_stop or max_iters steps."""
    amp = np.sqrt(meas.y)
    x = x0
    steps = 0
    trace: List[TracePoint] = []
    while True:
        z = meas.a @ x
        risk = float(np.mean((z * z - meas.y) ** 2)) / 4.0
        if cfg.trace and steps % cfg.trace_every == 0:
            rel = relative_error(x, signal) if signal is not None else None
            trace.append(TracePoint(steps, risk, rel))
        if risk <= cfg.risk_stop:
            reason = StopReason.RISK_THRESHOLD
            break
        if steps >= cfg.max_iters:
            reason = StopReason.MAX_ITERS
            break
        x = hard_threshold(x - cfg.mu * _amplitude_gradient(z, meas, amp, cfg.gamma), cfg.k)
        steps += 1
    return RunResult(
        x_hat=x,
        restart_index=0,
        iterations=[steps],
        stop_reason=reason,
        final_risk=risk,
        trace=trace,
        gradient_evaluations=steps,
    )


def run_sparta(
    meas: MeasurementSet,
    cfg: SpartaConfig,
    support: Optional[SupportEstimate] = None,
    signal: Optional[SparseSignal] = None,
) -> RunResult:
    """Plain SPARTA; the support defaults to the top-k marginal statistics."""
    if cfg.k > meas.n:
        raise ParameterError(f"k={cfg.k} exceeds the dimension n={meas.n}")
    if support is None:
        support = recover_support_topk_marginal(meas, cfg.k)
    x0 = sparta_init(meas, support, estimate_theta(meas), cfg.power_iters, cfg.init_fraction)
    return _run_from(x0, meas, cfg, signal)


def run_sparta_support(
    meas: MeasurementSet,
    k: int,
    hcfg: HwfConfig,
    scfg: SpartaConfig,
    signal: Optional[SparseSignal] = None,
) -> RunResult:
    """SPARTA-support with one HWF-estimated support per spiked restart.

    ``gradient_evaluations`` counts the HWF step and the SPARTA steps; the
    ||grad F|| used to pick the winner is a selection pass on top of that.
    """
    if k > meas.n:
        raise ParameterError(f"k={k} exceeds the dimension n={meas.n}")
    if hcfg.restarts > meas.n:
        raise ParameterError(f"restarts ({hcfg.restarts}) cannot exceed the dimension ({meas.n})")
    if scfg.k != k:
        scfg = replace(scfg, k=k)

    theta = estimate_theta(meas)
    stats = marginal_statistics(meas)
    ws = GradientWorkspace.for_measurements(meas)

    iterations: List[int] = []
    failures: List[RestartFailure] = []
    failed: List[int] = []
    ranked = []
    for b in range(hcfg.restarts):
        try:
            state = hwf_step(init_spiked(meas, hcfg.alpha, b + 1, stats, theta), meas, hcfg.eta, ws)
            scores = np.abs(state.x)
            estimate = SupportEstimate(top_k_indices(scores, k), ONE_STEP_HWF, scores)
            x0 = sparta_init(meas, estimate, theta, scfg.power_iters, scfg.init_fraction)
            outcome = _run_from(x0, meas, scfg, signal)
        except RestartFailure as e:
            debug_log(f"SPARTA-support restart {b}: {e}")
            iterations.append(0)
            failures.append(e)
            failed.append(b)
            continue
        iterations.append(1 + outcome.iterations[0])
        ranked.append((gradient_norm(outcome.x_hat, meas), b, outcome))

    if not ranked:
        raise AllRestartsFailedError(failures)

    grad_norm, best, winner = min(ranked, key=lambda item: item[:2])
    debug_log(f"SPARTA-support: restart {best} wins with ||grad F||={grad_norm:.3e}")
    return RunResult(
        x_hat=winner.x_hat,
        restart_index=best,
        iterations=iterations,
        stop_reason=winner.stop_reason,
        final_risk=winner.final_risk,
        trace=winner.trace,
        failed_restarts=failed,
        gradient_evaluations=sum(iterations),
    )
