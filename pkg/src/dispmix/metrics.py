"""Supervision loss and disparity evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, InvalidParameterError, UndefinedMetricError
from .types import DiscreteDistribution, DisparityMap, LaplaceMode, ProbabilityVolume, evaluate_laplacian

__all__ = [
    "LOG_CLAMP",
    "MetricThreshold",
    "cross_entropy",
    "cross_entropy_map",
    "mean_cross_entropy",
    "unimodal_gt",
    "outlier_rate",
    "end_point_error",
]

# Predicted probabilities are clamped here before the log; softmax outputs are
# strictly positive but serialized single-precision values may underflow.
LOG_CLAMP = 1e-12


@dataclass(frozen=True)
class MetricThreshold:
    """Outlier threshold in disparity units (3 for driving-style benchmarks,
    1 or 2 elsewhere)."""

    k: float

    def __post_init__(self):
        if not (np.isfinite(self.k) and self.k > 0):
            raise InvalidParameterError(f"threshold must be positive, got {self.k}")


def cross_entropy(pred: DiscreteDistribution, target: DiscreteDistribution) -> float:
    """-sum_d target_d * log(pred_d), with pred clamped at LOG_CLAMP."""
    if pred.d_range != target.d_range:
        raise DataError(
            f"distribution sizes differ: {pred.d_range} vs {target.d_range}"
        )
    logs = np.log(np.maximum(pred.probs, LOG_CLAMP))
    return float(-np.dot(target.probs, logs))


def cross_entropy_map(pred: ProbabilityVolume, target: ProbabilityVolume) -> np.ndarray:
    """Per-pixel cross-entropy over a volume pair, float64 H x W."""
    if pred.data.shape != target.data.shape:
        raise DataError(
            f"volume shapes differ: {pred.data.shape} vs {target.data.shape}"
        )
    p = pred.data.astype(np.float64)
    logs = np.log(np.maximum(p, LOG_CLAMP))
    t = target.data.astype(np.float64)
    return -(t * logs).sum(axis=2)


def mean_cross_entropy(
    pred: ProbabilityVolume,
    target: ProbabilityVolume,
    mask: np.ndarray | None = None,
) -> float:
    """Mean per-pixel loss over the masked (supervised) pixels."""
    losses = cross_entropy_map(pred, target)
    if mask is None:
        sel = losses
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != losses.shape:
            raise DataError(f"mask shape {mask.shape} does not match {losses.shape}")
        sel = losses[mask]
    if sel.size == 0:
        raise UndefinedMetricError("no supervised pixels to average the loss over")
    return float(sel.mean())


def unimodal_gt(d_range: int, d_hat: float, b: float = 0.8) -> DiscreteDistribution:
    """Single Laplacian centered on the disparity label, normalized."""
    if not (0.0 <= d_hat <= d_range - 1):
        raise DataError(f"label {d_hat} outside candidate range [0, {d_range - 1}]")
    profile = evaluate_laplacian(d_range, LaplaceMode(w=1.0, mu=d_hat, b=b))
    return DiscreteDistribution(profile / profile.sum())


def _joint_valid(pred: DisparityMap, gt: DisparityMap) -> np.ndarray:
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise DataError(
            f"map sizes differ: {pred.height}x{pred.width} vs {gt.height}x{gt.width}"
        )
    valid = gt.validity & pred.validity
    if not valid.any():
        raise UndefinedMetricError("no jointly valid pixels")
    return valid

def outlier_rate(pred: DisparityMap, gt: DisparityMap, thr: MetricThreshold) -> float:
    """Percentage of valid pixels whose absolute error exceeds the threshold."""
    valid = _joint_valid(pred, gt)
    err = np.abs(
        pred.values[valid].astype(np.float64) - gt.values[valid].astype(np.float64)
    )
    return float(100.0 * (err > thr.k).sum() / err.size)


def end_point_error(pred: DisparityMap, gt: DisparityMap) -> float:
    """Mean absolute disparity error over valid pixels."""
    valid = _joint_valid(pred, gt)
    err = np.abs(
        pred.values[valid].astype(np.float64) - gt.values[valid].astype(np.float64)
    )
    return float(err.mean())
