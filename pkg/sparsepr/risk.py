"""
Empirical risk of phase retrieval and the quantities derived from it.

    F(x) = 1/(4m) sum_j ((A_j . x)^2 - y_j)^2
    grad F(x) = 1/m sum_j ((A_j . x)^2 - y_j) (A_j . x) A_j

The gradient is computed in two streaming passes over A (z = A x, then
A^T applied to the residual weights), never forming per-sample outer
products. A ``GradientWorkspace`` keeps the length-m scratch vectors so the
solver loops don't allocate per iteration; the first pass also yields F(x),
which is how the stopping rule costs nothing extra.
"""

import math
from typing import Optional, Union

import numpy as np

from sparsepr.errors import DimensionMismatchError, ParameterError
from sparsepr.model import MeasurementSet, SparseSignal


class GradientWorkspace:
    """Scratch buffers for one (m, n) problem, owned by a single caller.

    Attributes:
        z: Inner products A_j . x from the last ``evaluate_risk``.
        resid: (A_j . x)^2 - y_j.
        weights: resid * z, the per-sample gradient weights.
        grad: The last gradient written by ``backproject``.
        risk: F at the point last passed to ``evaluate_risk``.
    """

    def __init__(self, m: int, n: int):
        self.m = int(m)
        self.n = int(n)
        self.z = np.empty(self.m)
        self.resid = np.empty(self.m)
        self.weights = np.empty(self.m)
        self.grad = np.empty(self.n)
        self.risk = math.nan

    @classmethod
    def for_measurements(cls, meas: MeasurementSet) -> "GradientWorkspace":
        return cls(meas.m, meas.n)

    def check(self, meas: MeasurementSet) -> None:
        if (self.m, self.n) != (meas.m, meas.n):
            raise DimensionMismatchError(
                f"workspace sized for ({self.m}, {self.n}) used with "
                f"measurements of shape ({meas.m}, {meas.n})")


def _as_point(x, meas: MeasurementSet) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (meas.n,):
        raise DimensionMismatchError(f"point of shape {x.shape} for dimension {meas.n}")
    return x


def evaluate_risk(x, meas: MeasurementSet, ws: GradientWorkspace) -> float:
    """F(x), leaving z and the residuals in ``ws`` for ``backproject``."""
    ws.check(meas)
    x = _as_point(x, meas)
    np.dot(meas.a, x, out=ws.z)
    np.multiply(ws.z, ws.z, out=ws.resid)
    ws.resid -= meas.y
    ws.risk = float(np.dot(ws.resid, ws.resid)) / (4.0 * meas.m)
    return ws.risk


def backproject(meas: MeasurementSet, ws: GradientWorkspace) -> np.ndarray:
    """Second gradient pass; requires a preceding ``evaluate_risk``.

    Returns ``ws.grad`` itself, which is overwritten by the next call.
    """
    np.multiply(ws.resid, ws.z, out=ws.weights)
    np.dot(ws.weights, meas.a, out=ws.grad)
    ws.grad /= meas.m
    return ws.grad


def empirical_risk(x, meas: MeasurementSet) -> float:
    """Exact evaluation of F(x)."""
    return evaluate_risk(x, meas, GradientWorkspace.for_measurements(meas))


def empirical_gradient(x, meas: MeasurementSet, ws: Optional[GradientWorkspace] = None) -> np.ndarray:
    """grad F(x) in O(nm).

    With a workspace the result is the workspace's buffer (valid until the
    next call on that workspace); without one a fresh array is returned.
    """
    if ws is None:
        ws = GradientWorkspace.for_measurements(meas)
    evaluate_risk(x, meas, ws)
    return backproject(meas, ws)


def gradient_norm(x, meas: MeasurementSet) -> float:
    """||grad F(x)||_2."""
    return float(np.linalg.norm(empirical_gradient(x, meas)))


def _signal_values(xstar: Union[SparseSignal, np.ndarray]) -> np.ndarray:
    if isinstance(xstar, SparseSignal):
        return xstar.values
    return np.asarray(xstar, dtype=np.float64)


def population_gradient(x, xstar: Union[SparseSignal, np.ndarray]) -> np.ndarray:
    """The m = infinity gradient (3||x||^2 - ||x*||^2) x - 2 (x . x*) x*."""
    ref = _signal_values(xstar)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != ref.shape:
        raise DimensionMismatchError(f"point shape {x.shape} != signal shape {ref.shape}")
    return (3.0 * np.dot(x, x) - np.dot(ref, ref)) * x - 2.0 * np.dot(x, ref) * ref


def population_hwf_step(x, xstar: Union[SparseSignal, np.ndarray], eta: float) -> np.ndarray:
    """One step of the non-negative m = infinity HWF recursion.

    x_i <- x_i (1 - 2 eta grad f(x)_i)^2, valid when x and x* are both
    coordinate-wise non-negative (then U = sqrt(x), V = 0 stays exact).
    """
    ref = _signal_values(xstar)
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0) or np.any(ref < 0):
        raise ParameterError("the population recursion needs non-negative x and x*")
    return x * (1.0 - 2.0 * eta * population_gradient(x, ref)) ** 2


def scalar_population_step(x: float, eta: float) -> float:
    """n = 1 population update x <- x (1 - 6 eta (x^3 - x)), unit signal."""
    return x * (1.0 - 6.0 * eta * (x ** 3 - x))


def estimate_theta(meas: MeasurementSet) -> float:
    """theta-hat = sqrt(mean(y)), an estimate of ||x*||."""
    return math.sqrt(float(np.mean(meas.y)))


def marginal_statistics(meas: MeasurementSet) -> np.ndarray:
    """R_i = 1/m sum_j y_j A_ji^2 for every coordinate, in one pass.

    E[R_i] = ||x*||^2 + 2 (x*_i)^2, so support coordinates stand out.
    """
    return np.einsum("j,ji,ji->i", meas.y, meas.a, meas.a) / meas.m
