"""Batch array bindings over the dispmix core library.

Training loops exchange whole volumes as numpy arrays; per-pixel calls never
cross this boundary.  Input arrays are never mutated: they are used in place
when they already match the documented row-major float32 layout and copied
otherwise.  Heavy batch work happens inside numpy kernels and the core
library's worker processes, so callers' other threads keep running during a
call.

Outputs are numerically identical to the command-line pipeline run on the
same data: ``model_ground_truth`` reproduces the bytes of ``model-gt``
output volumes and ``dme`` reproduces ``infer --estimator dme`` maps,
including the convention that pixels without a value are encoded as -1.
"""

from typing import Mapping

import numpy as np

from dispmix import __version__ as _core_version
from dispmix import (
    ClusterConfig,
    DataError,
    DisparityMap,
    EnsembleVolumes,
    ProbabilityVolume,
    SeparationConfig,
    infer_volume,
    mean_cross_entropy,
    model_ground_truth_volume,
)

__version__ = _core_version

__all__ = ["model_ground_truth", "cross_entropy", "dme", "__version__"]

_CONFIG_DEFAULTS = {
    "eps": 3.0,
    "min_pts": 2,
    "epsilon": 1e-3,
    "sigma": 1e-3,
    "label_w": 1.0,
    "label_b": 0.8,
    "keep_noise": False,
    "include_unlabeled": False,
    "workers": None,
}


def _as_volume_array(array, name: str, ndim: int) -> np.ndarray:
    arr = np.asarray(array)
    if arr.ndim != ndim:
        raise DataError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    # in-place hand-off when the layout already matches; copy fallback else
    return np.ascontiguousarray(arr, dtype=np.float32)


def _resolve_config(config: Mapping | None) -> dict:
    resolved = dict(_CONFIG_DEFAULTS)
    if config:
        unknown = set(config) - set(_CONFIG_DEFAULTS)
        if unknown:
            raise DataError(f"unknown config keys: {', '.join(sorted(unknown))}")
        resolved.update(config)
    return resolved


def model_ground_truth(ensemble, labels, config: Mapping | None = None):
    """Model ground-truth distributions for a whole image grid.

    ensemble: (M, H, W, D) member probability volumes.
    labels:   (H, W) disparities; negative or non-finite entries mark pixels
              without a label.
    config:   optional mapping overriding eps, min_pts, epsilon, sigma,
              label_w, label_b, keep_noise, include_unlabeled, workers.

    Returns (gt, mask): the modeled (H, W, D) float32 volume with all-zero
    slices on unsupervised pixels, and the (H, W) supervision mask.
    """
    stack = _as_volume_array(ensemble, "ensemble", 4)
    label_map = DisparityMap.from_encoded(np.asarray(labels, dtype=np.float32))
    cfg = _resolve_config(config)
    volume = EnsembleVolumes(
        members=tuple(ProbabilityVolume(stack[m]) for m in range(stack.shape[0]))
    )
    gt, mask, _ = model_ground_truth_volume(
        volume,
        label_map,
        SeparationConfig(epsilon=cfg["epsilon"], sigma=cfg["sigma"]),
        ClusterConfig(eps=cfg["eps"], min_pts=cfg["min_pts"]),
        anchor_w=cfg["label_w"],
        anchor_b=cfg["label_b"],
        keep_noise=cfg["keep_noise"],
        include_unlabeled=cfg["include_unlabeled"],
        workers=cfg["workers"],
    )
    return gt.data, mask


def cross_entropy(pred, target, mask=None) -> float:
    """Mean per-pixel cross-entropy between (H, W, D) volumes, restricted to
    the masked pixels when a mask is given."""
    p = ProbabilityVolume(_as_volume_array(pred, "pred", 3))
    t = ProbabilityVolume(_as_volume_array(target, "target", 3))
    return mean_cross_entropy(p, t, mask)


def dme(volume) -> np.ndarray:
    """Dominant-mode disparity estimates for an (H, W, D) volume.

    Returns an (H, W) float32 array; pixels whose slice carries no
    probability mass come back as -1 (the disparity-map file convention).
    """
    vol = ProbabilityVolume(_as_volume_array(volume, "volume", 3))
    dmap = infer_volume(vol, estimator="dme")
    return np.where(dmap.validity, dmap.values, np.float32(-1.0))
