"""
Hadamard Wirtinger flow (HWF).

The iterate is parametrized as x = u*u - v*v and plain gradient descent on
the empirical risk in (u, v) becomes the multiplicative update

    u <- u * (1 - 2 eta grad F(x))
    v <- v * (1 + 2 eta grad F(x))

Started from a small, almost-zero point this implicitly favours sparse
iterates: coordinates on the support grow faster than the rest.

``run_multi_restart`` runs one spiked start per rank of the marginal
statistics R_i and keeps the sparsest candidate.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Union

import numpy as np

from sparsepr import config
from sparsepr.errors import (
    AllRestartsFailedError,
    DimensionMismatchError,
    DivergenceError,
    ParameterError,
    RestartFailure,
)
from sparsepr.logging_util import debug_log
from sparsepr.model import MeasurementSet, SparseSignal, relative_error
from sparsepr.risk import (
    GradientWorkspace,
    backproject,
    empirical_gradient,
    estimate_theta,
    evaluate_risk,
    marginal_statistics,
)


class StopReason(str, Enum):
    RISK_THRESHOLD = "risk-threshold"
    MAX_ITERS = "max-iters"


@dataclass(eq=False)
class HwfState:
    """Factor vectors and the derived iterate x = u*u - v*v."""

    u: np.ndarray
    v: np.ndarray
    x: np.ndarray
    t: int = 0

    @classmethod
    def from_factors(cls, u, v, t: int = 0) -> "HwfState":
        u = np.array(u, dtype=np.float64)
        v = np.array(v, dtype=np.float64)
        if u.shape != v.shape or u.ndim != 1:
            raise DimensionMismatchError(f"factor shapes {u.shape} and {v.shape} differ")
        return cls(u, v, u * u - v * v, t)

    @property
    def n(self) -> int:
        return int(self.u.size)


@dataclass(frozen=True)
class HwfConfig:
    """HWF hyperparameters. Defaults are the full-size experiment settings."""

    eta: float = 0.1
    alpha: float = 0.001
    max_iters: int = 100000
    restarts: int = 50
    kappa: float = 0.05
    risk_stop: float = 1e-7
    trace: bool = False
    trace_every: int = 1
    restart_workers: int = 1

    def __post_init__(self):
        if not self.eta > 0:
            raise ParameterError(f"step size must be positive, got eta={self.eta}")
        if not self.alpha > 0:
            raise ParameterError(f"initialization size must be positive, got alpha={self.alpha}")
        if not 0 < self.kappa < 1:
            raise ParameterError(f"kappa must lie in (0, 1), got {self.kappa}")
        if self.restarts < 1:
            raise ParameterError(f"at least one restart is required, got {self.restarts}")
        if self.max_iters < 0:
            raise ParameterError(f"max_iters must be >= 0, got {self.max_iters}")
        if self.risk_stop < 0:
            raise ParameterError(f"risk_stop must be >= 0, got {self.risk_stop}")
        if self.trace_every < 1 or self.restart_workers < 1:
            raise ParameterError("trace_every and restart_workers must be >= 1")

    @classmethod
    def from_config(cls, **overrides) -> "HwfConfig":
        """Defaults from the config module (config_local / CLI aware)."""
        values = dict(
            eta=config.HWF_ETA,
            alpha=config.HWF_ALPHA,
            max_iters=config.HWF_MAX_ITERS,
            restarts=config.HWF_RESTARTS,
            kappa=config.HWF_KAPPA,
            risk_stop=config.HWF_RISK_STOP,
            trace_every=config.HWF_TRACE_EVERY,
            restart_workers=config.HWF_RESTART_WORKERS,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def with_overrides(self, **overrides) -> "HwfConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


@dataclass(frozen=True)
class TracePoint:
    iteration: int
    risk: float
    rel_error: Optional[float] = None


@dataclass(eq=False)
class RunResult:
    """Outcome of a solve.

    Attributes:
        x_hat: The returned estimate.
        restart_index: Zero-based index of the winning restart.
        iterations: Iterations performed by each restart (failed ones
            included, up to the point of failure).
        stop_reason: Why the winning run stopped.
        final_risk: F(x_hat).
        trace: Per-iteration records of the winning run, if requested.
        failed_restarts: Indices of restarts that failed.
        gradient_evaluations: Total gradient passes over all restarts.
        score: Sparsity score of the winner (multi-restart HWF only).
    """

    x_hat: np.ndarray
    restart_index: int
    iterations: List[int]
    stop_reason: StopReason
    final_risk: float
    trace: List[TracePoint] = field(default_factory=list)
    failed_restarts: List[int] = field(default_factory=list)
    gradient_evaluations: int = 0
    score: Optional[int] = None

    @property
    def winner_iterations(self) -> int:
        return self.iterations[self.restart_index]


def spike_order(stats: np.ndarray) -> np.ndarray:
    """Coordinates by decreasing R_i; ties go to the lowest index."""
    return np.argsort(-np.asarray(stats), kind="stable")


def spike_index(stats: np.ndarray, rank: int) -> int:
    """Index of the rank-th largest statistic (rank 1 = I_max)."""
    if not 1 <= rank <= len(stats):
        raise ParameterError(f"rank must lie in [1, {len(stats)}], got {rank}")
    return int(spike_order(stats)[rank - 1])


def _spiked_state(n: int, index: int, theta: float, alpha: float) -> HwfState:
    u = np.full(n, alpha)
    v = np.full(n, alpha)
    u[index] = math.sqrt(theta / math.sqrt(3.0) + alpha ** 2)
    return HwfState.from_factors(u, v)


def init_spiked(
    meas: MeasurementSet,
    alpha: float,
    rank_b: int,
    stats: Optional[np.ndarray] = None,
    theta: Optional[float] = None,
) -> HwfState:
    """Spiked start: x0 = theta-hat/sqrt(3) at the rank_b-th largest R_i, 0 elsewhere.

    ``stats`` and ``theta`` may be passed in when they were already computed
    for this measurement set.
    """
    if not alpha > 0:
        raise ParameterError(f"initialization size must be positive, got alpha={alpha}")
    if stats is None:
        stats = marginal_statistics(meas)
    if theta is None:
        theta = estimate_theta(meas)
    return _spiked_state(meas.n, spike_index(stats, rank_b), theta, alpha)


def init_random(n: int, sigma: float, rng: np.random.Generator) -> HwfState:
    """u, v i.i.d. N(0, sigma^2)."""
    if not sigma > 0:
        raise ParameterError(f"noise scale must be positive, got sigma={sigma}")
    u = sigma * rng.standard_normal(n)
    v = sigma * rng.standard_normal(n)
    return HwfState.from_factors(u, v)


def _multiplicative_update(state: HwfState, grad: np.ndarray, eta: float) -> HwfState:
    step = 2.0 * eta * grad
    u = state.u * (1.0 - step)
    v = state.v * (1.0 + step)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise DivergenceError(state.t + 1)
    return HwfState(u, v, u * u - v * v, state.t + 1)


def hwf_step(
    state: HwfState,
    meas: MeasurementSet,
    eta: float,
    ws: Optional[GradientWorkspace] = None,
) -> HwfState:
    """One HWF iteration: a single gradient evaluation at ``state.x``."""
    if state.n != meas.n:
        raise DimensionMismatchError(f"state dimension {state.n} != measurement dimension {meas.n}")
    grad = empirical_gradient(state.x, meas, ws)
    if not np.all(np.isfinite(grad)):
        raise DivergenceError(state.t)
    return _multiplicative_update(state, grad, eta)


def _trace_point(state: HwfState, risk: float, signal: Optional[SparseSignal]) -> TracePoint:
    rel = relative_error(state.x, signal) if signal is not None else None
    return TracePoint(state.t, risk, rel)


def run_single(
    meas: MeasurementSet,
    cfg: HwfConfig,
    init: HwfState,
    signal: Optional[SparseSignal] = None,
    ws: Optional[GradientWorkspace] = None,
    restart: Optional[int] = None,
) -> RunResult:
    """Iterate from ``init`` until F(x) <= risk_stop or max_iters steps.

    F at each iterate comes from the first pass of the gradient at that same
    iterate, so the stopping rule adds no pass over A. The number of gradient
    evaluations is exactly the number of steps taken.
    """
    if init.n != meas.n:
        raise DimensionMismatchError(f"state dimension {init.n} != measurement dimension {meas.n}")
    if ws is None:
        ws = GradientWorkspace.for_measurements(meas)

    state = init
    steps = 0
    trace: List[TracePoint] = []
    risk = evaluate_risk(state.x, meas, ws)
    while True:
        if not math.isfinite(risk):
            raise DivergenceError(state.t, restart)
        if cfg.trace and steps % cfg.trace_every == 0:
            trace.append(_trace_point(state, risk, signal))
        if risk <= cfg.risk_stop:
            reason = StopReason.RISK_THRESHOLD
            break
        if steps >= cfg.max_iters:
            reason = StopReason.MAX_ITERS
            break
        grad = backproject(meas, ws)
        if not np.all(np.isfinite(grad)):
            raise DivergenceError(state.t, restart)
        try:
            state = _multiplicative_update(state, grad, cfg.eta)
        except DivergenceError as e:
            raise DivergenceError(e.iteration, restart) from None
        steps += 1
        risk = evaluate_risk(state.x, meas, ws)

    if cfg.trace and (not trace or trace[-1].iteration != state.t):
        trace.append(_trace_point(state, risk, signal))

    return RunResult(
        x_hat=state.x,
        restart_index=0,
        iterations=[steps],
        stop_reason=reason,
        final_risk=risk,
        trace=trace,
        gradient_evaluations=steps,
    )


def run_random_init(
    meas: MeasurementSet,
    cfg: HwfConfig,
    rng: np.random.Generator,
    sigma: Optional[float] = None,
    signal: Optional[SparseSignal] = None,
) -> RunResult:
    """HWF from a random start: u, v ~ N(0, sigma^2), no restarts."""
    if sigma is None:
        sigma = config.RANDOM_INIT_SIGMA
    return run_single(meas, cfg, init_random(meas.n, sigma, rng), signal)


def sparsity_score(x, kappa: float) -> int:
    """Smallest number of coordinates holding a (1 - kappa) share of ||x||^2."""
    if not 0 < kappa < 1:
        raise ParameterError(f"kappa must lie in (0, 1), got {kappa}")
    squares = np.sort(np.asarray(x, dtype=np.float64) ** 2)[::-1]
    total = float(np.sum(squares))
    if total == 0.0:
        raise ParameterError("sparsity score is undefined for the zero vector")
    covered = np.cumsum(squares)
    # Relative slack keeps exact ties (all-equal entries) from rounding up.
    threshold = (1.0 - kappa) * total * (1.0 - 1e-12)
    return int(np.argmax(covered >= threshold)) + 1


def run_multi_restart(
    meas: MeasurementSet,
    cfg: HwfConfig,
    signal: Optional[SparseSignal] = None,
) -> RunResult:
    """Run one spiked start per rank b = 1..restarts and keep the sparsest.

    The winner minimizes ``sparsity_score``; ties go to the smaller final risk,
    then the lower restart index. A restart that diverges is recorded as failed
    without affecting the others.
    """
    if cfg.restarts > meas.n:
        raise ParameterError(f"restarts ({cfg.restarts}) cannot exceed the dimension ({meas.n})")

    theta = estimate_theta(meas)
    order = spike_order(marginal_statistics(meas))

    def solve(b: int) -> Union[RunResult, RestartFailure]:
        init = _spiked_state(meas.n, int(order[b]), theta, cfg.alpha)
        try:
            return run_single(meas, cfg, init, signal, restart=b)
        except RestartFailure as e:
            return e

    if cfg.restart_workers > 1 and cfg.restarts > 1:
        with ThreadPoolExecutor(max_workers=cfg.restart_workers) as pool:
            outcomes = list(pool.map(solve, range(cfg.restarts)))
    else:
        outcomes = [solve(b) for b in range(cfg.restarts)]

    iterations: List[int] = []
    failures: List[RestartFailure] = []
    failed: List[int] = []
    ranked = []
    for b, outcome in enumerate(outcomes):
        if isinstance(outcome, RestartFailure):
            debug_log(f"HWF restart {b}: {outcome}")
            iterations.append(getattr(outcome, "iteration", 0))
            failures.append(outcome)
            failed.append(b)
            continue
        iterations.append(outcome.iterations[0])
        if np.any(outcome.x_hat):
            score = sparsity_score(outcome.x_hat, cfg.kappa)
        else:
            score = meas.n + 1
        ranked.append((score, outcome.final_risk, b, outcome))

    if not ranked:
        raise AllRestartsFailedError(failures)

    score, _, best, winner = min(ranked, key=lambda item: item[:3])
    debug_log(
        f"HWF: restart {best} wins with score {score}, F={winner.final_risk:.3e} "
        f"({len(failed)} of {cfg.restarts} restarts failed)")
    return RunResult(
        x_hat=winner.x_hat,
        restart_index=best,
        iterations=iterations,
        stop_reason=winner.stop_reason,
        final_risk=winner.final_risk,
        trace=winner.trace,
        failed_restarts=failed,
        gradient_evaluations=sum(iterations),
        score=score,
    )
