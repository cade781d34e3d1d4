"""Ground-truth distribution modeling.

Per pixel: separate modes from every ensemble member's predicted distribution,
project them into Laplace parameter space together with the label anchor,
cluster along the center axis, drop noise points, average each cluster into a
single fused mode and render the fused modes as a normalized
mixture-of-Laplacians distribution.  The label cluster's center is pinned to
the label disparity, so the labeled match always dominates its own mode.

The batch driver applies the per-pixel routine over a whole image grid,
optionally across worker processes.  Pixel results depend only on that
pixel's inputs, so outputs are bit-identical for any worker count.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .clustering import (
    DEFAULT_CLUSTERING,
    ClusterConfig,
    ClusterOutcome,
    ParameterPoint,
    cluster_mu,
)
from .errors import DataError, EmptyMixtureError
from .separation import DEFAULT_SEPARATION, SeparationConfig, _separate_modes_batch
from .types import (
    DiscreteDistribution,
    DisparityMap,
    EnsembleVolumes,
    GroundTruthMixture,
    LabelAnchor,
    LaplaceMode,
    ProbabilityVolume,
)

__all__ = [
    "collect_parameter_points",
    "fuse_clusters",
    "render_mixture",
    "model_ground_truth",
    "model_ground_truth_volume",
    "superimpose_average",
    "PixelMixture",
]


def _points_from_triples(
    member_triples: list[list[tuple[float, float, float]]],
    anchor: LabelAnchor,
) -> list[ParameterPoint]:
    """Parameter points in canonical order: members ascending, extraction
    order within a member, anchor last."""
    points = []
    for m, triples in enumerate(member_triples):
        for w, mu, b in triples:
            points.append(ParameterPoint(LaplaceMode(w=w, mu=mu, b=b), member=m))
    if anchor.valid:
        points.append(ParameterPoint(anchor.as_mode(), member=None))
    return points


def collect_parameter_points(
    dists: list[DiscreteDistribution],
    anchor: LabelAnchor,
    cfg: SeparationConfig = DEFAULT_SEPARATION,
) -> list[ParameterPoint]:
    """Project ensemble predictions into parameter space.

    Returns the union of the separated modes of all members, tagged by member
    index in input order, followed by the anchor point when the label is
    valid.
    """
    d_ranges = {d.d_range for d in dists}
    if len(d_ranges) > 1:
        raise DataError(f"ensemble members disagree on disparity range: {sorted(d_ranges)}")
    if not dists:
        return _points_from_triples([], anchor)
    block = np.stack([d.probs for d in dists])  # owned copy; inputs untouched
    triples = _separate_modes_batch(block, cfg.epsilon, cfg.sigma)
    return _points_from_triples(triples, anchor)


def fuse_clusters(
    points: list[ParameterPoint],
    outcome: ClusterOutcome,
    anchor: LabelAnchor,
    *,
    keep_noise: bool = False,
) -> GroundTruthMixture:
    """Average each cluster into one fused mode.

    Fused (w, mu, b) are the arithmetic means over the cluster's points; the
    anchor participates in all three means, after which the label cluster's
    center is overwritten with the label disparity exactly.  Noise points are
    discarded unless keep_noise admits each of them as a singleton mode.
    """
    groups: list[tuple[int, ...]] = list(outcome.clusters)
    if keep_noise:
        groups.extend((i,) for i in outcome.noise)
    entries = []
    for k, idx in enumerate(groups):
        count = len(idx)
        w_sum = mu_sum = b_sum = 0.0
        for i in idx:
            mode = points[i].mode
            w_sum += mode.w
            mu_sum += mode.mu
            b_sum += mode.b
        w = w_sum / count
        mu = mu_sum / count
        b = b_sum / count
        is_label = outcome.label_cluster is not None and k == outcome.label_cluster
        if is_label:
            mu = anchor.d_hat
        entries.append((mu, k, w, b, is_label))
    if not entries:
        raise EmptyMixtureError("no clusters to fuse and no valid label; mask this pixel")
    entries.sort(key=lambda e: (e[0], e[1]))
    modes = tuple(LaplaceMode(w=w, mu=mu, b=b) for mu, _, w, b, _ in entries)
    label_index = next((i for i, e in enumerate(entries) if e[4]), None)
    return GroundTruthMixture(
        modes=modes,
        label_cluster_index=label_index,
        noise_count=len(outcome.noise),
    )


def _render_modes(d_range: int, modes: tuple[LaplaceMode, ...]) -> np.ndarray:
    """Sum of the modes' rendered profiles, computed in one broadcast.

    Element-for-element this reproduces summing evaluate_laplacian over the
    modes; batching just trims per-mode call overhead on the pixel hot path.
    """
    from .types import B_MIN, candidate_grid

    grid = candidate_grid(d_range)
    mus = np.array([m.mu for m in modes])[:, None]
    if np.any(mus > d_range - 1):
        raise DataError(f"mode center beyond candidate range [0, {d_range - 1}]")
    bs = np.array([m.b if m.b > B_MIN else B_MIN for m in modes])[:, None]
    ws = np.array([m.w for m in modes])[:, None]
    raw = np.exp(-np.abs(grid[None, :] - mus) / bs)
    z = raw.sum(axis=1, keepdims=True)
    prof = ws * raw
    prof /= z
    return prof.sum(axis=0)


def render_mixture(d_range: int, mix: GroundTruthMixture) -> DiscreteDistribution:
    """Render the fused modes and normalize the sum to unit mass."""
    acc = _render_modes(d_range, mix.modes)
    return DiscreteDistribution(acc / acc.sum())


def model_ground_truth(
    dists: list[DiscreteDistribution],
    anchor: LabelAnchor,
    sep_cfg: SeparationConfig = DEFAULT_SEPARATION,
    clu_cfg: ClusterConfig = DEFAULT_CLUSTERING,
    *,
    d_range: int | None = None,
    keep_noise: bool = False,
) -> tuple[DiscreteDistribution, GroundTruthMixture]:
    """Full per-pixel pipeline: collect, cluster, fuse, render.

    d_range is taken from the ensemble when present; it must be passed
    explicitly for the anchor-only case of an empty ensemble.
    """
    if dists:
        d = dists[0].d_range
        if d_range is not None and d_range != d:
            raise DataError(f"d_range {d_range} conflicts with ensemble D={d}")
        d_range = d
    elif d_range is None:
        raise DataError("d_range is required when the ensemble is empty")
    if anchor.valid and anchor.d_hat > d_range - 1:
        raise DataError(f"label disparity {anchor.d_hat} outside candidate range [0, {d_range - 1}]")
    points = collect_parameter_points(dists, anchor, sep_cfg)
    outcome = cluster_mu(points, clu_cfg)
    mix = fuse_clusters(points, outcome, anchor, keep_noise=keep_noise)
    return render_mixture(d_range, mix), mix


def superimpose_average(dists: list[DiscreteDistribution]) -> DiscreteDistribution:
    """Entrywise arithmetic mean of the members.

    The naive fusion baseline: mode centers that disagree across members are
    all kept, which splits what should be one mode into several local maxima.
    """
    if not dists:
        raise DataError("need at least one distribution to average")
    d_ranges = {d.d_range for d in dists}
    if len(d_ranges) > 1:
        raise DataError(f"distributions disagree on disparity range: {sorted(d_ranges)}")
    stacked = np.stack([d.probs for d in dists])
    return DiscreteDistribution(stacked.mean(axis=0))


@dataclass(frozen=True)
class PixelMixture:
    """Mixture summary of one modeled pixel, for diagnostics output."""

    y: int
    x: int
    mixture: GroundTruthMixture


# Context shared with forked worker processes.
_CTX: dict = {}


def _fuse_and_render(
    points: list[ParameterPoint],
    anchor: LabelAnchor,
    clu_cfg: ClusterConfig,
    d_range: int,
    keep_noise: bool,
):
    """Cluster, fuse and render one pixel's points.  Returns (probs, mixture)
    or None when nothing survives (unlabeled pixel with an empty ensemble)."""
    outcome = cluster_mu(points, clu_cfg)
    try:
        mix = fuse_clusters(points, outcome, anchor, keep_noise=keep_noise)
    except EmptyMixtureError:
        return None
    acc = _render_modes(d_range, mix.modes)
    return acc / acc.sum(), mix


def _model_rows(rows: tuple[int, int]):
    y0, y1 = rows
    stack = _CTX["stack"]
    label_values = _CTX["label_values"]
    label_valid = _CTX["label_valid"]
    sep_cfg = _CTX["sep_cfg"]
    clu_cfg = _CTX["clu_cfg"]
    anchor_w = _CTX["anchor_w"]
    anchor_b = _CTX["anchor_b"]
    keep_noise = _CTX["keep_noise"]
    include_unlabeled = _CTX["include_unlabeled"]
    m_count, _, width, d_range = stack.shape
    gt = np.zeros((y1 - y0, width, d_range), dtype=np.float32)
    mask = np.zeros((y1 - y0, width), dtype=bool)
    summaries = [] if _CTX["with_summaries"] else None
    for y in range(y0, y1):
        # one batched separation for every (member, pixel) pair of the row;
        # per-row results are identical to separating each vector alone
        block = stack[:, y].astype(np.float64).reshape(m_count * width, d_range)
        row_triples = _separate_modes_batch(block, sep_cfg.epsilon, sep_cfg.sigma)
        for x in range(width):
            if label_valid[y, x]:
                anchor = LabelAnchor(
                    d_hat=float(label_values[y, x]), w_hat=anchor_w, b_hat=anchor_b
                )
            elif include_unlabeled:
                anchor = LabelAnchor.invalid()
            else:
                continue
            points = _points_from_triples(
                [row_triples[m * width + x] for m in range(m_count)], anchor
            )
            res = _fuse_and_render(points, anchor, clu_cfg, d_range, keep_noise)
            if res is None:
                continue
            probs, mix = res
            gt[y - y0, x] = probs
            mask[y - y0, x] = True
            if summaries is not None:
                summaries.append(PixelMixture(y=y, x=x, mixture=mix))
    return y0, gt, mask, summaries


def model_ground_truth_volume(
    ensemble: EnsembleVolumes,
    labels: DisparityMap,
    sep_cfg: SeparationConfig = DEFAULT_SEPARATION,
    clu_cfg: ClusterConfig = DEFAULT_CLUSTERING,
    *,
    anchor_w: float = 1.0,
    anchor_b: float = 0.8,
    keep_noise: bool = False,
    include_unlabeled: bool = False,
    with_summaries: bool = False,
    workers: int | None = None,
) -> tuple[ProbabilityVolume, np.ndarray, list[PixelMixture] | None]:
    """Model every pixel of an image grid.

    Pixels without a usable label (invalid, or labeled beyond the candidate
    range) are emitted as all-zero slices with a False mask entry unless
    include_unlabeled requests ensemble-only modeling.  Returns the modeled
    volume, the supervision mask and, when with_summaries is set, the
    per-pixel mixture summaries of all modeled pixels in row-major order.
    """
    h, w = ensemble.height, ensemble.width
    if (labels.height, labels.width) != (h, w):
        raise DataError(
            f"label map is {labels.height}x{labels.width}, ensemble is {h}x{w}"
        )
    d_range = ensemble.d_range
    stack = ensemble.stacked()
    # Labels beyond the candidate range cannot anchor a mode; treat them as
    # unlabeled pixels.
    label_valid = labels.validity & (labels.values <= d_range - 1)

    _CTX.clear()
    _CTX.update(
        stack=stack,
        label_values=labels.values,
        label_valid=label_valid,
        sep_cfg=sep_cfg,
        clu_cfg=clu_cfg,
        anchor_w=float(anchor_w),
        anchor_b=float(anchor_b),
        keep_noise=bool(keep_noise),
        include_unlabeled=bool(include_unlabeled),
        with_summaries=bool(with_summaries),
    )
    try:
        n_workers = workers if workers is not None else (os.cpu_count() or 1)
        n_workers = max(1, min(int(n_workers), h))
        chunks = _row_chunks(h, n_workers)
        if n_workers == 1 or len(chunks) <= 1 or not _fork_available():
            results = [_model_rows(c) for c in chunks]
        else:
            import multiprocessing as mp

            with mp.get_context("fork").Pool(processes=n_workers) as pool:
                results = pool.map(_model_rows, chunks)
    finally:
        _CTX.clear()

    gt = np.zeros((h, w, d_range), dtype=np.float32)
    mask = np.zeros((h, w), dtype=bool)
    summaries = [] if with_summaries else None
    for y0, gt_block, mask_block, block_summaries in results:
        gt[y0:y0 + gt_block.shape[0]] = gt_block
        mask[y0:y0 + mask_block.shape[0]] = mask_block
        if summaries is not None:
            summaries.extend(block_summaries)
    return ProbabilityVolume(gt), mask, summaries


def _row_chunks(height: int, n_workers: int) -> list[tuple[int, int]]:
    if n_workers <= 1:
        return [(0, height)]
    # a few chunks per worker smooths uneven per-row cost
    n_chunks = min(height, n_workers * 4)
    bounds = np.linspace(0, height, n_chunks + 1, dtype=int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _fork_available() -> bool:
    import multiprocessing as mp

    return "fork" in mp.get_all_start_methods()
