"""
Support recovery.

One step of HWF from the rank-1 spiked start already separates the support:
after a single multiplicative update the support coordinates of |X^1| have
grown while the rest stay near alpha^2 - alpha^2 = 0. The baseline ranks
coordinates by the marginal statistics R_i directly.
"""

from dataclasses import dataclass

import numpy as np

from sparsepr.errors import ParameterError
from sparsepr.hwf import hwf_step, init_spiked
from sparsepr.logging_util import debug_log
from sparsepr.model import MeasurementSet, SparseSignal
from sparsepr.risk import marginal_statistics

ONE_STEP_HWF = "one-step-hwf"
TOPK_MARGINAL = "topk-marginal"


@dataclass(frozen=True, eq=False)
class SupportEstimate:
    """Estimated support with the per-coordinate scores it was ranked by."""

    indices: np.ndarray
    method: str
    scores: np.ndarray

    @property
    def k(self) -> int:
        return int(self.indices.size)


def top_k_indices(scores, k: int) -> np.ndarray:
    """Sorted indices of the k largest scores; ties go to the lowest index."""
    scores = np.asarray(scores, dtype=np.float64)
    if not 0 <= k <= scores.size:
        raise ParameterError(f"cannot pick k={k} coordinates out of {scores.size}")
    order = np.argsort(-scores, kind="stable")
    return np.sort(order[:k])


def recover_support_one_step(
    meas: MeasurementSet,
    k: int,
    eta: float,
    alpha: float,
) -> SupportEstimate:
    """k largest coordinates of |X^1| after one HWF step from the rank-1 spike."""
    if k > meas.n:
        raise ParameterError(f"k={k} exceeds the dimension n={meas.n}")
    if not eta > 0:
        raise ParameterError(f"step size must be positive, got eta={eta}")
    if eta > 0.1 or alpha > 0.1:
        debug_log(f"Warning: one-step recovery is only guaranteed for eta, alpha <= 0.1 (got {eta}, {alpha})")
    state = hwf_step(init_spiked(meas, alpha, 1), meas, eta)
    scores = np.abs(state.x)
    return SupportEstimate(top_k_indices(scores, k), ONE_STEP_HWF, scores)


def recover_support_topk_marginal(meas: MeasurementSet, k: int) -> SupportEstimate:
    """k largest marginal statistics R_i."""
    if k > meas.n:
        raise ParameterError(f"k={k} exceeds the dimension n={meas.n}")
    stats = marginal_statistics(meas)
    return SupportEstimate(top_k_indices(stats, k), TOPK_MARGINAL, stats)


def recovered_fraction(est: SupportEstimate, truth: SparseSignal) -> float:
    """|S-hat intersect S| / |S|."""
    hits = np.intersect1d(est.indices, truth.support, assume_unique=True).size
    return hits / truth.k
