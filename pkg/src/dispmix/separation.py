"""Separation of individual modes from a multi-modal discrete distribution.

Peaks are carved off one at a time: locate the global argmax, grow a span
outward while the profile keeps descending, summarize the span as a
(w, mu, b) triple, zero it out and repeat until no peak rises above the
detection threshold.

The descent test is relative: expansion continues past bin ``cur`` while
``p[cur] - p[next] > sigma * p[cur]``, i.e. while the profile drops by more
than a ``sigma`` fraction per bin.  Plateaus and ascents terminate the span,
so neighbouring peaks are split at their common valley, while the long
shallow tail of a wide mode stays attached to it instead of being shed as
spurious micro-modes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .types import DiscreteDistribution, LaplaceMode, evaluate_laplacian

__all__ = ["SeparationConfig", "DEFAULT_SEPARATION", "separate_modes", "reconstruct_from_modes"]


@dataclass(frozen=True)
class SeparationConfig:
    """Thresholds steering mode separation.

    epsilon: minimum peak probability for a bin to seed a mode.
    sigma: relative per-bin descent threshold for span expansion.
    """

    epsilon: float = 1e-3
    sigma: float = 1e-3

    def __post_init__(self):
        for name, v in (("epsilon", self.epsilon), ("sigma", self.sigma)):
            if not (np.isfinite(v) and v > 0.0):
                raise InvalidParameterError(f"{name} must be positive and finite, got {v}")


DEFAULT_SEPARATION = SeparationConfig()

_CANDIDATE_CACHE: dict[int, np.ndarray] = {}


def _separate_modes_batch(block: np.ndarray, epsilon: float, sigma: float) -> list[list[tuple[float, float, float]]]:
    """Mode separation over a batch of float64 rows.  The block is consumed:
    its contents are undefined afterwards.

    All rows are carved in lockstep: each round extracts the current peak
    mode of every still-active row with whole-batch vector operations, so the
    per-row cost is a few array ops regardless of how many rows share the
    batch.  Rows are fully independent, which makes the output of a row
    identical no matter how rows are batched together.
    """
    n_rows, n = block.shape
    out: list[list[tuple[float, float, float]]] = [[] for _ in range(n_rows)]
    row_ids = np.arange(n_rows)
    if n == 1:
        for i in range(n_rows):
            v = float(block[i, 0])
            if v > epsilon:
                out[i].append((v, 0.0, 0.0))
                block[i, 0] = 0.0
        return out
    grid = _CANDIDATE_CACHE.get(n)
    if grid is None:
        grid = np.arange(n, dtype=np.float64)
        grid.setflags(write=False)
        _CANDIDATE_CACHE[n] = grid
    step = np.arange(n - 1)
    work = block
    ids = row_ids
    for _ in range(n):  # each round zeroes at least one bin per active row
        peak_idx = np.argmax(work, axis=1)  # first occurrence: ties to the smaller index
        alive = work[np.arange(work.shape[0]), peak_idx] > epsilon
        if not alive.all():
            # drop finished rows; remaining rounds only pay for active ones
            work = work[alive]
            ids = ids[alive]
            peak_idx = peak_idx[alive]
            if work.shape[0] == 0:
                break
        rows = np.arange(work.shape[0])
        # descent predicates between adjacent bins; step j sits between
        # bins j and j+1
        diffs = work[:, :-1] - work[:, 1:]
        keep_right = diffs > sigma * work[:, :-1]
        keep_left = (-diffs) > sigma * work[:, 1:]
        # rightwards: stop at the first failing step at or after the peak
        fail_right = ~keep_right & (step[None, :] >= peak_idx[:, None])
        has_r = fail_right.any(axis=1)
        r = np.where(has_r, np.argmax(fail_right, axis=1), n - 1)
        # leftwards: stop just above the last failing step below the peak
        fail_left = ~keep_left & (step[None, :] < peak_idx[:, None])
        has_l = fail_left.any(axis=1)
        last_fail = (n - 2) - np.argmax(fail_left[:, ::-1], axis=1)
        l = np.where(has_l, last_fail + 1, 0)
        # span statistics via prefix sums
        cum_w = np.cumsum(work, axis=1)
        cum_first = np.cumsum(work * grid, axis=1)
        below = np.maximum(l - 1, 0)
        lo_w = np.where(l > 0, cum_w[rows, below], 0.0)
        lo_first = np.where(l > 0, cum_first[rows, below], 0.0)
        w = cum_w[rows, r] - lo_w
        first = cum_first[rows, r] - lo_first
        mu = first / w
        # MAD via a prefix split at the last candidate <= mu; candidates are
        # integers so the split index is floor(mu) clamped into the span
        split = np.clip(mu.astype(np.int64), l, r)
        mass_lo = cum_w[rows, split] - lo_w
        first_lo = cum_first[rows, split] - lo_first
        b = (mu * mass_lo - first_lo + (first - first_lo) - mu * (w - mass_lo)) / w
        np.maximum(b, 0.0, out=b)  # cancellation noise on single-bin spans
        # zero the spans and record the modes
        span = (grid[None, :] >= l[:, None]) & (grid[None, :] <= r[:, None])
        work[span] = 0.0
        for j, i in enumerate(ids):
            out[i].append((float(w[j]), float(mu[j]), float(b[j])))
    return out


def separate_modes(dist: DiscreteDistribution, cfg: SeparationConfig = DEFAULT_SEPARATION) -> list[LaplaceMode]:
    """Split ``dist`` into fitted modes, strongest peak first.

    The input is never modified.  An empty list is returned when no bin
    exceeds ``cfg.epsilon``.  Spans of distinct modes cover disjoint probability
    mass, so the returned weights sum to at most the input's total mass.
    """
    work = dist.probs.copy()[None, :]
    return [
        LaplaceMode(w=w, mu=mu, b=b)
        for w, mu, b in _separate_modes_batch(work, cfg.epsilon, cfg.sigma)[0]
    ]


def reconstruct_from_modes(d_range: int, modes: list[LaplaceMode]) -> np.ndarray:
    """Sum of the rendered profiles of ``modes``; the fit-quality counterpart
    of separate_modes."""
    acc = np.zeros(d_range, dtype=np.float64)
    for mode in modes:
        acc += evaluate_laplacian(d_range, mode)
    return acc
