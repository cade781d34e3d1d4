"""Disparity estimation from predicted distributions.

soft_argmin is the classical probability-weighted average over all
candidates.  On multi-modal distributions it lands between the modes, which
is exactly where no plausible match exists.  The dominant-mode estimator
avoids that artifact: it separates the modes and returns the fitted center of
the heaviest one, i.e. the weighted average restricted to that mode's span.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError, InvalidParameterError
from .separation import DEFAULT_SEPARATION, SeparationConfig, separate_modes
from .types import DiscreteDistribution, DisparityMap, ProbabilityVolume

__all__ = ["soft_argmin", "dme_estimate", "infer_volume", "ESTIMATORS"]


def soft_argmin(dist: DiscreteDistribution) -> float:
    """Probability-weighted average disparity of a normalized distribution."""
    p = dist.probs
    return float(np.dot(p, np.arange(p.size, dtype=np.float64)))


def dme_estimate(dist: DiscreteDistribution, cfg: SeparationConfig = DEFAULT_SEPARATION) -> float:
    """Center of the heaviest separated mode.

    Weight ties go to the mode with the smaller center.  When no bin exceeds
    the detection threshold, falls back to the global soft_argmin.
    """
    modes = separate_modes(dist, cfg)
    if not modes:
        return soft_argmin(dist)
    best = max(modes, key=lambda m: (m.w, -m.mu))
    return best.mu


ESTIMATORS = ("dme", "softargmin")


def infer_volume(
    volume: ProbabilityVolume,
    estimator: str = "dme",
    cfg: SeparationConfig = DEFAULT_SEPARATION,
) -> DisparityMap:
    """Apply an estimator to every pixel of a predicted volume.

    All-zero pixel slices carry no prediction and come back invalid.
    """
    if estimator not in ESTIMATORS:
        raise InvalidParameterError(
            f"unknown estimator {estimator!r}, expected one of {ESTIMATORS}"
        )
    h, w = volume.height, volume.width
    values = np.zeros((h, w), dtype=np.float32)
    validity = np.ones((h, w), dtype=bool)
    use_dme = estimator == "dme"
    for y in range(h):
        row = volume.data[y].astype(np.float64)
        for x in range(w):
            p = row[x]
            total = p.sum()
            if total <= 0.0:
                validity[y, x] = False
                continue
            if abs(total - 1.0) > 1e-3:
                raise DataError(
                    f"pixel ({y}, {x}) sums to {total}; inference needs normalized slices"
                )
            dist = DiscreteDistribution(p if abs(total - 1.0) <= 1e-6 else p / total)
            values[y, x] = dme_estimate(dist, cfg) if use_dme else soft_argmin(dist)
    return DisparityMap(values=values, validity=validity)
