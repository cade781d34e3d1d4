"""Deterministic synthetic scenes, ensemble perturbation, a toy block
matcher and brute-force reference implementations for tests.

Everything here is a pure function of its seed: replaying with the same spec
reproduces bit-identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import ClusterConfig, ClusterOutcome, ParameterPoint, _anchor_index
from .errors import ConfigError, DataError
from .types import (
    DisparityMap,
    EnsembleVolumes,
    LaplaceMode,
    ProbabilityVolume,
    B_MIN,
)

__all__ = [
    "SceneSpec",
    "Scene",
    "PerturbSpec",
    "gen_scene",
    "perturb_ensemble",
    "block_match",
    "brute_force_dbscan",
    "shifted_texture_pair",
    "stripe_pair",
    "SPURIOUS_MASS",
]

# Mass of an injected spurious mode, taken proportionally from the true modes
# of the member that carries it.
SPURIOUS_MASS = 0.1


@dataclass(frozen=True)
class SceneSpec:
    """Recipe for a synthetic scene of region-constant Laplacian mixtures.

    The image grid is tiled into square regions; each region draws one
    mixture recipe: a mode count from k_choices, centers separated by gaps
    from gap_range and kept center_margin away from the candidate borders,
    weights above weight_floor summing to one, and widths from b_range.
    Widths are additionally capped at (gap to the nearest neighbor mode) /
    width_gap_div and (distance to the candidate border) / width_border_div
    so that neighboring modes stay resolvable and border truncation stays
    negligible.
    """

    height: int
    width: int
    d_range: int = 96
    seed: int = 0
    region_size: int = 8
    k_choices: tuple[int, ...] = (1, 2, 3)
    gap_range: tuple[float, float] = (8.0, 32.0)
    b_range: tuple[float, float] = (0.5, 3.0)
    weight_floor: float = 0.2
    center_margin: float = 5.0
    width_gap_div: float = 4.0
    width_border_div: float = 3.5

    def __post_init__(self):
        if min(self.height, self.width, self.d_range) < 1:
            raise ConfigError("scene dims must be positive")
        if self.region_size < 1:
            raise ConfigError("region_size must be >= 1")
        if not self.k_choices or any(k not in (1, 2, 3) for k in self.k_choices):
            raise ConfigError(f"k_choices must be a non-empty subset of (1, 2, 3), got {self.k_choices}")
        for name, pair in (("gap_range", self.gap_range), ("b_range", self.b_range)):
            if len(pair) != 2 or not 0 < pair[0] <= pair[1]:
                raise ConfigError(f"{name} must be an ordered positive pair, got {pair}")
        kmax = max(self.k_choices)
        if not 0.0 < self.weight_floor <= 1.0 / kmax:
            raise ConfigError(f"weight_floor must lie in (0, 1/{kmax}], got {self.weight_floor}")
        if self.center_margin < 0:
            raise ConfigError("center_margin must be >= 0")
        placeable = (self.d_range - 1) - 2.0 * self.center_margin
        if placeable < 0 or (kmax - 1) * self.gap_range[0] > placeable:
            raise ConfigError(
                f"cannot place {kmax} centers with gaps >= {self.gap_range[0]} "
                f"inside [{self.center_margin}, {self.d_range - 1 - self.center_margin}]"
            )
        if min(self.width_gap_div, self.width_border_div) <= 0:
            raise ConfigError("width divisors must be positive")


@dataclass(frozen=True)
class Scene:
    """A generated scene: true distributions, labels and true mixture modes
    (row-major per pixel; pixels of one region share the same tuple)."""

    truth: ProbabilityVolume
    labels: DisparityMap
    true_modes: list[tuple[LaplaceMode, ...]]
    spec: SceneSpec


@dataclass(frozen=True)
class PerturbSpec:
    """Ensemble derived from a scene by jittering the true mode parameters.

    Each member re-renders every pixel from centers jittered by at most
    mu_jitter and weights jittered by at most w_jitter.  With probability
    spurious_rate a pixel gets one extra far mode of mass SPURIOUS_MASS
    injected into exactly one randomly chosen member, placed at least
    spurious_min_distance away from every true center so it stays
    uncorroborated.
    """

    members: int = 9
    mu_jitter: float = 1.0
    w_jitter: float = 0.1
    spurious_rate: float = 0.0
    seed: int = 0
    # clearance beyond the clustering radius: jitter plus worst-case fitted
    # center bias, so a spurious point never borders a true cluster
    spurious_min_distance: float = 6.5

    def __post_init__(self):
        if self.members < 1:
            raise ConfigError("members must be >= 1")
        if self.mu_jitter < 0 or self.w_jitter < 0:
            raise ConfigError("jitters must be >= 0")
        if not 0.0 <= self.spurious_rate <= 1.0:
            raise ConfigError(f"spurious_rate must lie in [0, 1], got {self.spurious_rate}")
        if self.spurious_min_distance <= 0:
            raise ConfigError("spurious_min_distance must be positive")


def _region_bounds(extent: int, size: int) -> list[tuple[int, int]]:
    return [(a, min(a + size, extent)) for a in range(0, extent, size)]


def _render_block(mus: np.ndarray, ws: np.ndarray, bs: np.ndarray, d_range: int) -> np.ndarray:
    """Render (npx, K) mixture parameters into (npx, D) unnormalized rows."""
    d = np.arange(d_range, dtype=np.float64)
    b_eff = np.maximum(bs, B_MIN)
    prof = np.exp(-np.abs(d[None, None, :] - mus[:, :, None]) / b_eff[:, :, None])
    prof *= (ws / prof.sum(axis=2))[:, :, None]
    return prof.sum(axis=1)


def _draw_recipe(rng: np.random.Generator, spec: SceneSpec):
    """One region's mixture recipe: (mus, ws, bs) with ascending centers."""
    k = int(rng.choice(np.asarray(spec.k_choices)))
    lo = spec.center_margin
    hi = (spec.d_range - 1) - spec.center_margin
    for _ in range(1000):
        gaps = rng.uniform(spec.gap_range[0], spec.gap_range[1], k - 1)
        span = float(gaps.sum())
        if span <= hi - lo:
            break
    else:
        raise ConfigError("could not place mode centers; loosen gap_range or margins")
    start = lo + rng.uniform(0.0, (hi - lo) - span)
    mus = start + np.concatenate([[0.0], np.cumsum(gaps)])
    u = rng.uniform(0.0, 1.0, k)
    total = u.sum()
    shares = u / total if total > 0 else np.full(k, 1.0 / k)
    ws = spec.weight_floor + (1.0 - spec.weight_floor * k) * shares
    bs = np.empty(k)
    for i in range(k):
        cap = spec.b_range[1]
        if i > 0:
            cap = min(cap, (mus[i] - mus[i - 1]) / spec.width_gap_div)
        if i < k - 1:
            cap = min(cap, (mus[i + 1] - mus[i]) / spec.width_gap_div)
        border = min(mus[i], (spec.d_range - 1) - mus[i])
        cap = min(cap, border / spec.width_border_div)
        lo_b = spec.b_range[0]
        bs[i] = lo_b + (max(cap, lo_b) - lo_b) * rng.random()
    return mus, ws, bs


def gen_scene(spec: SceneSpec) -> Scene:
    """Generate the true distributions, labels and mode parameters."""
    rng = np.random.default_rng(spec.seed)
    h, w, d_range = spec.height, spec.width, spec.d_range
    truth = np.empty((h, w, d_range), dtype=np.float32)
    labels = np.empty((h, w), dtype=np.float32)
    true_modes: list[tuple[LaplaceMode, ...]] = [()] * (h * w)
    for y0, y1 in _region_bounds(h, spec.region_size):
        for x0, x1 in _region_bounds(w, spec.region_size):
            mus, ws, bs = _draw_recipe(rng, spec)
            row = _render_block(mus[None, :], ws[None, :], bs[None, :], d_range)
            row /= row.sum(axis=1, keepdims=True)
            truth[y0:y1, x0:x1] = row[0].astype(np.float32)
            labels[y0:y1, x0:x1] = np.float32(mus[int(np.argmax(ws))])
            modes = tuple(
                LaplaceMode(w=float(ws[i]), mu=float(mus[i]), b=float(bs[i]))
                for i in range(len(mus))
            )
            for y in range(y0, y1):
                base = y * w
                for x in range(x0, x1):
                    true_modes[base + x] = modes
    return Scene(
        truth=ProbabilityVolume(truth),
        labels=DisparityMap(values=labels, validity=np.ones((h, w), dtype=bool)),
        true_modes=true_modes,
        spec=spec,
    )


def _spurious_intervals(modes, spec_scene: SceneSpec, spec_perturb: "PerturbSpec"):
    """Admissible center intervals for a spurious mode.

    Each true mode carves out a clearance that grows with its width: a
    spurious peak closer than ~3.5 widths to a wide neighbor would not
    survive as a separate peak in the mixture at all.
    """
    lo = spec_scene.center_margin
    hi = (spec_scene.d_range - 1) - spec_scene.center_margin
    carve = sorted(
        (m.mu, max(spec_perturb.spurious_min_distance, 3.5 * m.b + spec_perturb.mu_jitter))
        for m in modes
    )
    intervals = []
    cursor = lo
    for mu, radius in carve:
        a, b = mu - radius, mu + radius
        if a > cursor:
            intervals.append((cursor, a))
        cursor = max(cursor, b)
    if cursor < hi:
        intervals.append((cursor, hi))
    if not intervals:
        raise ConfigError(
            "no admissible spurious position; widen the scene or lower spurious_rate"
        )
    return intervals


def perturb_ensemble(scene: Scene, spec: PerturbSpec) -> EnsembleVolumes:
    """Render a jittered ensemble from a scene's true parameters."""
    sspec = scene.spec
    h, w, d_range = sspec.height, sspec.width, sspec.d_range
    m_count = spec.members
    rng = np.random.default_rng(spec.seed)

    sp_flag = rng.random((h, w)) < spec.spurious_rate
    sp_member = rng.integers(0, m_count, size=(h, w))
    sp_upos = rng.random((h, w))
    sp_uwidth = rng.random((h, w))

    # spurious placement resolved per region (same admissible intervals for
    # all of the region's pixels)
    sp_pos = np.zeros((h, w))
    sp_b = np.zeros((h, w))
    row_bounds = _region_bounds(h, sspec.region_size)
    col_bounds = _region_bounds(w, sspec.region_size)
    if spec.spurious_rate > 0.0:
        for y0, y1 in row_bounds:
            for x0, x1 in col_bounds:
                modes = scene.true_modes[y0 * w + x0]
                mus = np.array([m.mu for m in modes])
                intervals = _spurious_intervals(modes, sspec, spec)
                lengths = np.array([b - a for a, b in intervals])
                edges = np.concatenate([[0.0], np.cumsum(lengths)])
                total = edges[-1]
                u = sp_upos[y0:y1, x0:x1] * total
                idx = np.clip(np.searchsorted(edges, u, side="right") - 1, 0, len(intervals) - 1)
                starts = np.array([a for a, _ in intervals])
                pos = starts[idx] + (u - edges[idx])
                # keep centers off half-integer peak ties: a tied peak pair
                # splits into two half-modes and stops being a single point
                frac = pos - np.floor(pos)
                razor = np.abs(frac - 0.5) < 0.005
                if razor.any():
                    ends = starts[idx] + lengths[idx]
                    shift = np.where(pos < (starts[idx] + ends) / 2.0, 0.01, -0.01)
                    pos = np.where(razor, np.clip(pos + shift, starts[idx], ends), pos)
                sp_pos[y0:y1, x0:x1] = pos
                # keep the spurious peak narrow relative to its clearance so
                # it stays a distinct peak of the mixture
                border = np.minimum(pos, (d_range - 1) - pos)
                clearance = np.abs(pos[:, :, None] - mus[None, None, :]).min(axis=2)
                cap = np.minimum(sspec.b_range[1], border / sspec.width_border_div)
                cap = np.minimum(cap, clearance / 3.5)
                cap = np.maximum(cap, sspec.b_range[0])
                sp_b[y0:y1, x0:x1] = (
                    sspec.b_range[0] + (cap - sspec.b_range[0]) * sp_uwidth[y0:y1, x0:x1]
                )

    members = []
    for m in range(m_count):
        vol = np.empty((h, w, d_range), dtype=np.float32)
        for y0, y1 in row_bounds:
            for x0, x1 in col_bounds:
                modes = scene.true_modes[y0 * w + x0]
                k = len(modes)
                npx = (y1 - y0) * (x1 - x0)
                base_mu = np.array([mo.mu for mo in modes])
                base_w = np.array([mo.w for mo in modes])
                base_b = np.array([mo.b for mo in modes])
                mu_j = base_mu + rng.uniform(-spec.mu_jitter, spec.mu_jitter, (npx, k))
                np.clip(mu_j, 0.0, d_range - 1, out=mu_j)
                w_j = np.maximum(base_w + rng.uniform(-spec.w_jitter, spec.w_jitter, (npx, k)), 0.01)
                bs = np.broadcast_to(base_b, (npx, k))
                block = _render_block(mu_j, w_j, bs, d_range)
                carry = sp_flag[y0:y1, x0:x1].ravel() & (sp_member[y0:y1, x0:x1].ravel() == m)
                if carry.any():
                    pos = sp_pos[y0:y1, x0:x1].ravel()[carry]
                    width = sp_b[y0:y1, x0:x1].ravel()[carry]
                    prof = _render_block(
                        pos[:, None],
                        np.full((carry.sum(), 1), SPURIOUS_MASS),
                        width[:, None],
                        d_range,
                    )
                    block[carry] = (1.0 - SPURIOUS_MASS) * block[carry] + prof
                block /= block.sum(axis=1, keepdims=True)
                vol[y0:y1, x0:x1] = block.reshape(y1 - y0, x1 - x0, d_range).astype(np.float32)
        members.append(ProbabilityVolume(vol))
    return EnsembleVolumes(members=tuple(members))


def block_match(
    left: np.ndarray,
    right: np.ndarray,
    d_range: int,
    window: int = 5,
    tau: float = 0.05,
) -> ProbabilityVolume:
    """Toy stereo matcher: windowed mean absolute difference costs turned
    into per-pixel distributions with a softmax.

    cost(y, x, d) compares the window around left (y, x) with the window
    around right (y, x-d); out-of-range indices clamp to the border.  The
    distribution over candidates is softmax(-cost / tau).
    """
    l_img = np.asarray(left, dtype=np.float64)
    r_img = np.asarray(right, dtype=np.float64)
    if l_img.shape != r_img.shape or l_img.ndim != 2:
        raise DataError(f"image shapes differ or are not 2-D: {l_img.shape} vs {r_img.shape}")
    if d_range < 1:
        raise DataError(f"d_range must be >= 1, got {d_range}")
    if window < 1 or window % 2 == 0:
        raise DataError(f"window must be odd and >= 1, got {window}")
    if not tau > 0:
        raise DataError(f"tau must be positive, got {tau}")
    h, w = l_img.shape
    cost = np.empty((h, w, d_range), dtype=np.float64)
    cols = np.arange(w)
    for d in range(d_range):
        shifted = r_img[:, np.clip(cols - d, 0, w - 1)]
        cost[:, :, d] = _box_mean(np.abs(l_img - shifted), window)
    cost -= cost.min(axis=2, keepdims=True)
    prob = np.exp(-cost / tau)
    prob /= prob.sum(axis=2, keepdims=True)
    return ProbabilityVolume(prob.astype(np.float32))


def _box_mean(img: np.ndarray, window: int) -> np.ndarray:
    """Mean filter with replicated borders via an integral image."""
    pad = window // 2
    padded = np.pad(img, pad, mode="edge")
    integral = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1))
    np.cumsum(np.cumsum(padded, axis=0), axis=1, out=integral[1:, 1:])
    h, w = img.shape
    s = (
        integral[window:window + h, window:window + w]
        - integral[:h, window:window + w]
        - integral[window:window + h, :w]
        + integral[:h, :w]
    )
    return s / float(window * window)


def brute_force_dbscan(points: list[ParameterPoint], cfg: ClusterConfig) -> ClusterOutcome:
    """Reference clustering by exhaustive reachability closure (tests only).

    Declarative formulation: core points are those with at least min_pts
    points within eps; clusters are connected components of cores under the
    within-eps relation, created in order of their smallest core index; a
    non-core point within eps of some core joins the earliest-created such
    cluster; everything else is noise.  The anchor, if noise, becomes its own
    singleton cluster, as in cluster_mu.
    """
    anchor = _anchor_index(points)
    n = len(points)
    if n == 0:
        return ClusterOutcome(clusters=(), noise=(), label_cluster=None)
    mus = [p.mode.mu for p in points]
    within = [
        [j for j in range(n) if abs(mus[i] - mus[j]) <= cfg.eps] for i in range(n)
    ]
    core = [len(within[i]) >= cfg.min_pts for i in range(n)]

    comp = [-1] * n
    comps: list[list[int]] = []
    for i in range(n):
        if not core[i] or comp[i] != -1:
            continue
        cid = len(comps)
        stack = [i]
        comp[i] = cid
        group = [i]
        while stack:
            a = stack.pop()
            for j in within[a]:
                if core[j] and comp[j] == -1:
                    comp[j] = cid
                    group.append(j)
                    stack.append(j)
        comps.append(sorted(group))

    clusters = [list(g) for g in comps]
    noise = []
    for i in range(n):
        if core[i]:
            continue
        reachable = sorted({comp[j] for j in within[i] if core[j]})
        if reachable:
            clusters[reachable[0]].append(i)
        else:
            noise.append(i)
    clusters = [sorted(c) for c in clusters]

    label_cluster = None
    if anchor is not None:
        holder = next((k for k, c in enumerate(clusters) if anchor in c), None)
        if holder is None:
            noise.remove(anchor)
            clusters.append([anchor])
            label_cluster = len(clusters) - 1
        else:
            label_cluster = holder
    return ClusterOutcome(
        clusters=tuple(tuple(c) for c in clusters),
        noise=tuple(sorted(noise)),
        label_cluster=label_cluster,
    )


def shifted_texture_pair(height: int, width: int, shift: int, seed: int = 0):
    """Random-texture stereo pair whose true disparity is ``shift`` everywhere.

    The texture is smoothed a little so windowed matching is unambiguous at
    the true offset only.
    """
    if shift < 0 or shift >= width:
        raise DataError(f"shift must lie in [0, {width - 1}], got {shift}")
    rng = np.random.default_rng(seed)
    base = rng.random((height, width + shift))
    base = _box_mean(base, 3)
    base = (base - base.min()) / max(float(np.ptp(base)), 1e-12)
    left = base[:, :width].copy()
    right = base[:, shift:shift + width].copy()
    return left, right


def stripe_pair(height: int, width: int, shift: int, period: int):
    """Vertical-stripe stereo pair: matching is ambiguous module the period,
    so candidate d = shift and d = shift +/- period score equally well."""
    if period < 2:
        raise DataError(f"period must be >= 2, got {period}")
    if shift < 0 or shift >= width:
        raise DataError(f"shift must lie in [0, {width - 1}], got {shift}")
    x = np.arange(width + shift, dtype=np.float64)
    profile = 0.5 + 0.45 * np.sin(2.0 * np.pi * x / period)
    base = np.tile(profile, (height, 1))
    left = base[:, :width].copy()
    right = base[:, shift:shift + width].copy()
    return left, right
