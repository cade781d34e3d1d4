"""Density-based clustering of parameter points along the mode-center axis.

Modes extracted from the ensemble members, plus the label anchor when the
pixel has a usable label, become points in Laplace parameter space.  Points
whose centers agree across members form dense clusters (knowledge corroborated
by several predictors); isolated points are noise (uncorroborated, likely
biased predictions).  Clustering looks only at the center coordinate mu.

The scan is a standard density-based sweep with two determinism rules: points
are visited in ascending index order, and a border point reachable from
several clusters joins the cluster discovered first.  A label anchor that
ends up as noise is promoted to its own singleton cluster afterwards, so the
labeled disparity always survives.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DataError, InvalidParameterError
from .types import LaplaceMode

__all__ = ["ClusterConfig", "DEFAULT_CLUSTERING", "ParameterPoint", "ClusterOutcome", "cluster_mu"]


@dataclass(frozen=True)
class ClusterConfig:
    """Neighborhood radius along mu and the density threshold."""

    eps: float = 3.0
    min_pts: int = 2

    def __post_init__(self):
        if not (np.isfinite(self.eps) and self.eps > 0.0):
            raise InvalidParameterError(f"eps must be positive and finite, got {self.eps}")
        if self.min_pts < 1:
            raise InvalidParameterError(f"min_pts must be >= 1, got {self.min_pts}")


DEFAULT_CLUSTERING = ClusterConfig()


@dataclass(frozen=True)
class ParameterPoint:
    """A mode tagged with its origin: ensemble member index, or the label
    anchor when member is None."""

    mode: LaplaceMode
    member: int | None

    @property
    def is_anchor(self) -> bool:
        return self.member is None


@dataclass(frozen=True)
class ClusterOutcome:
    """Partition of point indices into clusters and noise.

    label_cluster is the index (into clusters) of the cluster holding the
    anchor point, or None when no anchor was present.
    """

    clusters: tuple[tuple[int, ...], ...]
    noise: tuple[int, ...]
    label_cluster: int | None


def _anchor_index(points: list[ParameterPoint]) -> int | None:
    anchors = [i for i, p in enumerate(points) if p.is_anchor]
    if len(anchors) > 1:
        raise DataError(f"at most one anchor point allowed per pixel, got {len(anchors)}")
    return anchors[0] if anchors else None


def cluster_mu(points: list[ParameterPoint], cfg: ClusterConfig = DEFAULT_CLUSTERING) -> ClusterOutcome:
    """Cluster parameter points by their centers.

    Neighborhoods are |mu_i - mu_j| <= eps and include the point itself; a
    point is core when its neighborhood holds at least min_pts points.  The
    anchor point is rescued into a singleton cluster if density would label
    it noise.
    """
    anchor = _anchor_index(points)
    n = len(points)
    if n == 0:
        return ClusterOutcome(clusters=(), noise=(), label_cluster=None)

    mus = np.fromiter((p.mode.mu for p in points), dtype=np.float64, count=n)
    # pairwise |mu_i - mu_j| <= eps, including the diagonal (self-neighborhood)
    within = np.abs(mus[:, None] - mus[None, :]) <= cfg.eps
    counts = within.sum(axis=1)
    is_core = counts >= cfg.min_pts
    # one batched nonzero; per-point neighbor lists are slices of cols
    cols = np.nonzero(within)[1]
    bounds = np.concatenate([[0], np.cumsum(counts)])

    def neighbors(i: int) -> np.ndarray:
        return cols[bounds[i]:bounds[i + 1]]  # ascending index order

    UNSEEN, NOISE = -2, -1
    labels = [UNSEEN] * n
    n_clusters = 0
    for i in range(n):
        if labels[i] != UNSEEN:
            continue
        if not is_core[i]:
            labels[i] = NOISE
            continue
        cid = n_clusters
        n_clusters += 1
        labels[i] = cid
        queue = deque(neighbors(i))
        while queue:
            j = queue.popleft()
            if labels[j] == NOISE:
                labels[j] = cid  # border point claimed by the first cluster reaching it
                continue
            if labels[j] != UNSEEN:
                continue
            labels[j] = cid
            if is_core[j]:
                queue.extend(neighbors(j))

    clusters = [[] for _ in range(n_clusters)]
    noise = []
    for i, lab in enumerate(labels):
        if lab == NOISE:
            noise.append(i)
        else:
            clusters[lab].append(i)

    label_cluster = None
    if anchor is not None:
        if labels[anchor] == NOISE:
            noise.remove(anchor)
            clusters.append([anchor])
            label_cluster = len(clusters) - 1
        else:
            label_cluster = labels[anchor]

    return ClusterOutcome(
        clusters=tuple(tuple(c) for c in clusters),
        noise=tuple(noise),
        label_cluster=label_cluster,
    )
