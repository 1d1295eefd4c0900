"""
Problem instances for real-valued sparse phase retrieval.

A ``SparseSignal`` is the ground truth x*, a ``MeasurementSet`` holds the
Gaussian sensing matrix A (one measurement vector per row) and the noiseless
observations y_j = (A_j . x*)^2. Signals are drawn from one of the
experimental families described by ``SignalModel``.

Everything here is immutable after construction: arrays are stored as
read-only float64 copies so instances can be shared between threads.
"""

import math
import re
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from sparsepr.errors import DimensionMismatchError, ParameterError

# Relative tolerance on stored norms / recomputed observations.
NORM_RTOL = 1e-12


def _frozen(values, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, order="C", copy=True)
    if arr.ndim != ndim:
        raise DimensionMismatchError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SparseSignal:
    """Ground-truth k-sparse vector with its support.

    Attributes:
        values: The signal x* (length n).
        support: Sorted indices of the nonzero entries.
    """

    values: np.ndarray
    support: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values, 1, "signal")
        support = np.array(self.support, dtype=np.int64)
        if support.ndim != 1:
            raise DimensionMismatchError("support must be a 1-d index array")
        support = np.sort(support)
        support.setflags(write=False)
        nonzero = np.flatnonzero(values)
        if not np.array_equal(nonzero, support):
            raise ParameterError("support must be exactly the set of nonzero entries")
        if support.size == 0:
            raise ParameterError("signal must have at least one nonzero entry (k >= 1)")
        if not np.all(np.isfinite(values)):
            raise ParameterError("signal entries must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "_norm", float(np.linalg.norm(values)))

    @classmethod
    def from_values(cls, values) -> "SparseSignal":
        """Build a signal, deriving the support from the nonzero entries."""
        arr = np.asarray(values, dtype=np.float64)
        return cls(arr, np.flatnonzero(arr))

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def k(self) -> int:
        return int(self.support.size)

    @property
    def norm(self) -> float:
        return self._norm

    @property
    def x_max(self) -> float:
        """Largest absolute entry."""
        return float(np.max(np.abs(self.values)))

    @property
    def x_min(self) -> float:
        """Smallest absolute entry on the support."""
        return float(np.min(np.abs(self.values[self.support])))

    def negated(self) -> "SparseSignal":
        """The signal -x*, which produces identical observations."""
        return SparseSignal(-self.values, self.support)


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Sensing matrix ``a`` (m x n, row j = A_j) and observations ``y``."""

    a: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        a = _frozen(self.a, 2, "measurement matrix")
        y = _frozen(self.y, 1, "observations")
        if a.shape[0] != y.size:
            raise DimensionMismatchError(
                f"{a.shape[0]} measurement vectors but {y.size} observations")
        if a.shape[0] < 1:
            raise ParameterError("at least one measurement is required (m >= 1)")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(y))):
            raise ParameterError("measurements must be finite")
        if np.any(y < 0):
            raise ParameterError("observations are squared magnitudes and must be >= 0")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_signal(cls, signal: SparseSignal, a) -> "MeasurementSet":
        """Noiseless observations y_j = (A_j . x*)^2 for a given matrix."""
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[1] != signal.n:
            raise DimensionMismatchError(
                f"matrix of shape {a.shape} does not match signal dimension {signal.n}")
        return cls(a, (a @ signal.values) ** 2)

    @property
    def m(self) -> int:
        return int(self.a.shape[0])

    @property
    def n(self) -> int:
        return int(self.a.shape[1])


FLAT = "flat"
FIXED_MAX = "fixed-max"
GAUSSIAN = "gaussian"

_MAX_VALUE_RE = re.compile(r"^max=([0-9.eE+-]+)$")
_MAX_POWER_RE = re.compile(r"^max=k\^-([0-9.eE+-]+)$")


@dataclass(frozen=True)
class SignalModel:
    """One of the experimental signal families.

    ``flat``: support entries are +-1/sqrt(k) with random signs.
    ``fixed-max``: one support entry is pinned to x*_max (either a constant
    ``x_max`` or ``k ** -x_max_power``), the rest are Gaussian rescaled so the
    whole vector has unit norm.
    ``gaussian``: support entries are standard normal, normalized when
    ``normalize`` is set.
    """

    kind: str
    x_max: Optional[float] = None
    x_max_power: Optional[float] = None
    normalize: bool = True

    def __post_init__(self):
        if self.kind not in (FLAT, FIXED_MAX, GAUSSIAN):
            raise ParameterError(f"unknown signal model '{self.kind}'")
        if self.kind == FIXED_MAX:
            if (self.x_max is None) == (self.x_max_power is None):
                raise ParameterError("fixed-max needs exactly one of x_max or x_max_power")
            if self.x_max_power is not None and self.x_max_power <= 0:
                raise ParameterError("x_max_power must be positive")
            if not self.normalize:
                raise ParameterError("fixed-max signals are always normalized")

    @classmethod
    def flat(cls) -> "SignalModel":
        return cls(FLAT)

    @classmethod
    def fixed_max(cls, x_max: float) -> "SignalModel":
        return cls(FIXED_MAX, x_max=float(x_max))

    @classmethod
    def fixed_max_power(cls, power: float) -> "SignalModel":
        return cls(FIXED_MAX, x_max_power=float(power))

    @classmethod
    def gaussian(cls, normalize: bool = True) -> "SignalModel":
        return cls(GAUSSIAN, normalize=normalize)

    def resolve_x_max(self, k: int) -> Optional[float]:
        """The pinned maximum for sparsity k, or None for non-fixed families."""
        if self.kind != FIXED_MAX:
            return None
        if self.x_max is not None:
            return self.x_max
        return float(k) ** (-self.x_max_power)

    @property
    def label(self) -> str:
        """Stable text form used in CSVs and on the command line."""
        if self.kind == FLAT:
            return FLAT
        if self.kind == GAUSSIAN:
            return GAUSSIAN if self.normalize else "gaussian-raw"
        if self.x_max is not None:
            return f"max={self.x_max!r}"
        return f"max=k^-{self.x_max_power!r}"

    @classmethod
    def parse(cls, label: str) -> "SignalModel":
        """Inverse of ``label``."""
        text = label.strip().lower()
        if text == FLAT:
            return cls.flat()
        if text == GAUSSIAN:
            return cls.gaussian()
        if text == "gaussian-raw":
            return cls.gaussian(normalize=False)
        match = _MAX_POWER_RE.match(text)
        if match:
            return cls.fixed_max_power(float(match.group(1)))
        match = _MAX_VALUE_RE.match(text)
        if match:
            return cls.fixed_max(float(match.group(1)))
        raise ParameterError(
            f"unknown signal model '{label}' "
            "(expected flat, gaussian, max=<value> or max=k^-<power>)")


def _check_sparsity(n: int, k: int) -> None:
    if int(n) != n or int(k) != k:
        raise ParameterError("n and k must be integers")
    if not 1 <= k <= n:
        raise ParameterError(f"sparsity must satisfy 1 <= k <= n, got k={k}, n={n}")


def check_fixed_max(model: SignalModel, k: int) -> Optional[float]:
    """Resolve x*_max for sparsity k and check 1/sqrt(k) <= x*_max < 1.

    x*_max = 1 is allowed only for k = 1. Returns None for non-fixed families.
    """
    x_max = model.resolve_x_max(k)
    if x_max is None:
        return None
    lower = 1.0 / math.sqrt(k)
    admissible = lower - NORM_RTOL <= x_max <= 1.0 and (x_max < 1.0 or k == 1)
    if not admissible:
        raise ParameterError(
            f"x*_max={x_max} is not admissible for k={k} (need 1/sqrt(k) <= x*_max < 1)")
    return x_max


def generate_signal(model: SignalModel, n: int, k: int, rng: np.random.Generator) -> SparseSignal:
    """Draw a k-sparse signal in R^n from ``model``.

    The support is drawn uniformly without replacement; its first drawn index
    is the one pinned to x*_max for the fixed-max family.
    """
    _check_sparsity(n, k)
    x_max = check_fixed_max(model, k)

    support = rng.choice(n, size=k, replace=False)
    values = np.zeros(n)

    if model.kind == FLAT:
        signs = rng.choice(np.array([-1.0, 1.0]), size=k)
        values[support] = signs / math.sqrt(k)
    elif model.kind == GAUSSIAN:
        entries = rng.standard_normal(k)
        if model.normalize:
            entries /= np.linalg.norm(entries)
        values[support] = entries
    else:
        values[support[0]] = x_max
        if k > 1:
            values[support[1:]] = _fixed_max_remainder(k - 1, x_max, rng)

    return SparseSignal(values, support)


def _fixed_max_remainder(count: int, x_max: float, rng: np.random.Generator) -> np.ndarray:
    """Gaussian entries with squared norm 1 - x_max^2, none exceeding x_max.

    The Gaussian draw is rescaled to the target norm; entries that overshoot
    are capped at x_max and the rest are rescaled to the remaining mass, until
    nothing overshoots. Feasible whenever count * x_max^2 >= 1 - x_max^2.
    """
    entries = rng.standard_normal(count)
    while np.any(entries == 0.0):
        entries = rng.standard_normal(count)
    signs = np.sign(entries)
    mags = np.abs(entries)
    capped = np.zeros(count, dtype=bool)
    remaining_sq = max(1.0 - x_max ** 2, 0.0)
    while True:
        free = ~capped
        n_free = int(np.count_nonzero(free))
        if n_free == 0:
            break
        if remaining_sq >= n_free * x_max ** 2 * (1.0 - NORM_RTOL):
            mags[free] = x_max
            break
        mags[free] *= math.sqrt(remaining_sq / float(np.sum(mags[free] ** 2)))
        over = free & (mags > x_max)
        if not np.any(over):
            break
        mags[over] = x_max
        capped |= over
        remaining_sq -= int(np.count_nonzero(over)) * x_max ** 2
    return signs * mags


def generate_measurements(signal: SparseSignal, m: int, rng: np.random.Generator) -> MeasurementSet:
    """Draw m i.i.d. standard Gaussian measurement vectors for ``signal``."""
    if int(m) != m or m < 1:
        raise ParameterError(f"sample count must be a positive integer, got m={m}")
    a = rng.standard_normal((int(m), signal.n))
    return MeasurementSet.from_signal(signal, a)


def _signal_values(xstar: Union[SparseSignal, np.ndarray]) -> np.ndarray:
    if isinstance(xstar, SparseSignal):
        return xstar.values
    return np.asarray(xstar, dtype=np.float64)


def dist(x, xstar: Union[SparseSignal, np.ndarray]) -> float:
    """min(||x - x*||, ||x + x*||): distance up to the global sign."""
    x = np.asarray(x, dtype=np.float64)
    ref = _signal_values(xstar)
    if x.shape != ref.shape:
        raise DimensionMismatchError(f"estimate shape {x.shape} != signal shape {ref.shape}")
    return float(min(np.linalg.norm(x - ref), np.linalg.norm(x + ref)))


def relative_error(x, xstar: Union[SparseSignal, np.ndarray]) -> float:
    """dist(x, x*) / ||x*||."""
    ref = _signal_values(xstar)
    norm = float(np.linalg.norm(ref))
    if norm == 0.0:
        raise ParameterError("relative error is undefined for a zero signal")
    return dist(x, ref) / norm


def estimate_mean_max_coordinate(
    k: int,
    samples: int,
    rng: np.random.Generator,
    chunk: int = 10000,
) -> float:
    """Average max |x_i| over Gaussian k-sparse unit-norm signals.

    Only the k support entries matter, so the draw is done on k-vectors.
    """
    if k < 1 or samples < 1:
        raise ParameterError("k and samples must be positive")
    total = 0.0
    remaining = samples
    while remaining > 0:
        batch = min(chunk, remaining)
        draws = rng.standard_normal((batch, k))
        draws /= np.linalg.norm(draws, axis=1, keepdims=True)
        total += float(np.sum(np.max(np.abs(draws), axis=1)))
        remaining -= batch
    return total / samples
