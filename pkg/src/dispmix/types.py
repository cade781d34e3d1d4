"""Core domain types for per-pixel disparity probability distributions.

A stereo matcher scores D integer disparity candidates d = 0..D-1 per pixel
and emits a discrete probability vector over them.  Individual peaks of such a
vector ("modes") are summarized as parameterized discrete Laplacians (w, mu, b)
where w is the probability mass of the mode, mu its sub-pixel center and b its
empirical mean absolute deviation.  Everything downstream (mode separation,
clustering in parameter space, mixture rendering) works on these types.

All types are immutable after construction and all functions here are pure, so
they can be used freely from parallel workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DataError,
    DegenerateDistributionError,
    InvalidParameterError,
)

# Scale floor used when rendering a Laplacian profile.  Fitted modes that
# occupy a single bin have b == 0; rendering clamps to B_MIN so the profile
# stays well defined while remaining effectively one-hot.
B_MIN = 0.05

# A probability vector is considered normalized when its sum is this close
# to one.
SUM_TOL = 1e-6

# Pixel sums of serialized volumes may drift this far from one (single
# precision softmax outputs); anything worse is a data error.
LOAD_SUM_TOL = 1e-3


def _as_prob_vector(probs, what: str = "probability vector") -> np.ndarray:
    p = np.array(probs, dtype=np.float64)  # owned copy; callers keep their arrays
    if p.ndim != 1 or p.size < 1:
        raise DataError(f"{what} must be a non-empty 1-D vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise DataError(f"{what} contains non-finite entries")
    if np.any(p < 0.0):
        raise DataError(f"{what} contains negative entries")
    return p


@dataclass(frozen=True)
class DiscreteDistribution:
    """Probability vector over the integer disparity candidates 0..D-1.

    Entries are non-negative and finite and sum to at most 1 (+1e-6).  A fully
    normalized vector sums to one; intermediate states produced by stripping
    modes off a distribution may sum to less.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = _as_prob_vector(self.probs)
        s = float(p.sum())
        if s > 1.0 + SUM_TOL:
            raise DataError(f"probability vector sums to {s}, above 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def d_range(self) -> int:
        """Number of disparity candidates D."""
        return int(self.probs.size)

    @property
    def total(self) -> float:
        return float(self.probs.sum())

    def is_normalized(self, tol: float = SUM_TOL) -> bool:
        return abs(self.total - 1.0) <= tol


@dataclass(frozen=True)
class LaplaceMode:
    """One point (w, mu, b) in Laplace parameter space.

    w is the probability mass of the mode (unitless), mu its center in
    disparity candidate units and b the empirical mean absolute deviation of
    the normalized mode, also in disparity units.
    """

    w: float
    mu: float
    b: float

    def __post_init__(self):
        # math.isfinite over np.isfinite: this constructor sits on the
        # per-pixel hot path of the batch drivers
        for name, v in (("w", self.w), ("mu", self.mu), ("b", self.b)):
            if not math.isfinite(v):
                raise InvalidParameterError(f"mode parameter {name} is not finite: {v}")
        if not 0.0 < self.w <= 1.0 + SUM_TOL:
            raise InvalidParameterError(f"mode weight must lie in (0, 1], got {self.w}")
        if self.mu < 0.0:
            raise InvalidParameterError(f"mode center must be >= 0, got {self.mu}")
        if self.b < 0.0:
            raise InvalidParameterError(f"mode scale must be >= 0, got {self.b}")


@dataclass(frozen=True)
class LabelAnchor:
    """Uni-modal Laplacian placed at the disparity label of a pixel.

    The anchor point (w_hat, d_hat, b_hat) is injected into parameter space so
    the labeled disparity always survives clustering.  Pixels without a usable
    label carry valid=False and contribute no anchor.
    """

    d_hat: float
    w_hat: float = 1.0
    b_hat: float = 0.8
    valid: bool = True

    def __post_init__(self):
        if self.valid:
            if not (math.isfinite(self.d_hat) and self.d_hat >= 0.0):
                raise InvalidParameterError(f"label disparity must be finite and >= 0, got {self.d_hat}")
            if not (math.isfinite(self.w_hat) and self.w_hat > 0.0):
                raise InvalidParameterError(f"label weight must be positive, got {self.w_hat}")
            if not (math.isfinite(self.b_hat) and self.b_hat >= 0.0):
                raise InvalidParameterError(f"label scale must be >= 0, got {self.b_hat}")

    @classmethod
    def invalid(cls) -> "LabelAnchor":
        return cls(d_hat=0.0, valid=False)

    def as_mode(self) -> LaplaceMode:
        if not self.valid:
            raise InvalidParameterError("cannot turn an invalid label anchor into a mode")
        return LaplaceMode(w=self.w_hat, mu=self.d_hat, b=self.b_hat)


@dataclass(frozen=True)
class ProbabilityVolume:
    """H x W stack of per-pixel probability vectors, stored row-major float32.

    All-zero pixel slices are legal and denote pixels without supervision.
    """

    data: np.ndarray

    def __post_init__(self):
        a = np.ascontiguousarray(self.data, dtype=np.float32)
        if a.ndim != 3 or min(a.shape) < 1:
            raise DataError(f"volume must be H x W x D with positive dims, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise DataError("volume contains non-finite entries")
        if np.any(a < 0.0):
            raise DataError("volume contains negative entries")
        object.__setattr__(self, "data", a)

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def d_range(self) -> int:
        return int(self.data.shape[2])

    def pixel(self, y: int, x: int) -> np.ndarray:
        """Float64 copy of one pixel's probability vector."""
        return self.data[y, x].astype(np.float64)


@dataclass(frozen=True)
class EnsembleVolumes:
    """M probability volumes over the same image grid and disparity range."""

    members: tuple[ProbabilityVolume, ...]

    def __post_init__(self):
        members = tuple(self.members)
        if len(members) < 1:
            raise DataError("ensemble needs at least one member")
        h, w, d = members[0].data.shape
        for i, m in enumerate(members):
            if m.data.shape != (h, w, d):
                raise DataError(
                    f"ensemble member {i} has shape {m.data.shape}, expected {(h, w, d)}"
                )
        object.__setattr__(self, "members", members)

    @property
    def m_count(self) -> int:
        return len(self.members)

    @property
    def height(self) -> int:
        return self.members[0].height

    @property
    def width(self) -> int:
        return self.members[0].width

    @property
    def d_range(self) -> int:
        return self.members[0].d_range

    def stacked(self) -> np.ndarray:
        """(M, H, W, D) float32 view-or-copy of the member data."""
        return np.stack([m.data for m in self.members], axis=0)


@dataclass(frozen=True)
class DisparityMap:
    """H x W real disparities with a per-pixel validity mask."""

    values: np.ndarray
    validity: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float32, order="C")
        m = np.array(self.validity, dtype=bool, order="C")
        if v.ndim != 2 or min(v.shape) < 1:
            raise DataError(f"disparity map must be 2-D with positive dims, got shape {v.shape}")
        if m.shape != v.shape:
            raise DataError(f"validity mask shape {m.shape} does not match values shape {v.shape}")
        ok = v[m]
        if ok.size and (not np.all(np.isfinite(ok)) or np.any(ok < 0.0)):
            raise DataError("valid disparities must be finite and >= 0")
        v.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "validity", m)

    @classmethod
    def from_encoded(cls, values) -> "DisparityMap":
        """Decode a raw float map where negative or non-finite entries mark
        invalid pixels."""
        v = np.ascontiguousarray(values, dtype=np.float32)
        mask = np.isfinite(v) & (v >= 0.0)
        return cls(values=v, validity=mask)

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def valid_count(self) -> int:
        return int(self.validity.sum())


@dataclass(frozen=True)
class GroundTruthMixture:
    """Fused Laplacian modes modeling one pixel's ground-truth distribution.

    Modes are sorted by ascending center.  When the pixel has a valid label,
    label_cluster_index points at the mode whose center equals the label
    disparity exactly.  noise_count records how many parameter points were
    classified as noise during clustering.
    """

    modes: tuple[LaplaceMode, ...]
    label_cluster_index: int | None = None
    noise_count: int = 0

    def __post_init__(self):
        modes = tuple(self.modes)
        if len(modes) < 1:
            raise InvalidParameterError("a mixture needs at least one mode")
        for a, b in zip(modes, modes[1:]):
            if b.mu < a.mu:
                raise InvalidParameterError("mixture modes must be sorted by ascending center")
        if self.label_cluster_index is not None and not (
            0 <= self.label_cluster_index < len(modes)
        ):
            raise InvalidParameterError(
                f"label cluster index {self.label_cluster_index} out of range for {len(modes)} modes"
            )
        if self.noise_count < 0:
            raise InvalidParameterError("noise count must be >= 0")
        object.__setattr__(self, "modes", modes)

    @property
    def k_count(self) -> int:
        return len(self.modes)

    @property
    def label_mode(self) -> LaplaceMode | None:
        if self.label_cluster_index is None:
            return None
        return self.modes[self.label_cluster_index]


_GRID_CACHE: dict[int, np.ndarray] = {}


def candidate_grid(d_range: int) -> np.ndarray:
    """Read-only float64 vector of the candidates 0..d_range-1 (cached)."""
    grid = _GRID_CACHE.get(d_range)
    if grid is None:
        grid = np.arange(d_range, dtype=np.float64)
        grid.setflags(write=False)
        _GRID_CACHE[d_range] = grid
    return grid


def evaluate_laplacian(d_range: int, mode: LaplaceMode) -> np.ndarray:
    """Render a parameterized mode as a discrete Laplacian profile.

    Returns w * exp(-|d - mu| / b') / sum_d exp(-|d - mu| / b') over the
    candidates d = 0..d_range-1, with b' = max(b, B_MIN).  The output sums to
    the mode weight w.
    """
    if d_range < 1:
        raise InvalidParameterError(f"disparity range must be >= 1, got {d_range}")
    if mode.mu > d_range - 1:
        raise InvalidParameterError(
            f"mode center {mode.mu} outside candidate range [0, {d_range - 1}]"
        )
    b_eff = mode.b if mode.b > B_MIN else B_MIN
    profile = np.exp(-np.abs(candidate_grid(d_range) - mode.mu) / b_eff)
    return mode.w * profile / profile.sum()


def normalize_distribution(probs) -> DiscreteDistribution:
    """Scale a non-negative vector to unit mass."""
    p = np.array(probs, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise DataError(f"probability vector must be a non-empty 1-D vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise DataError("probability vector contains non-finite entries")
    if np.any(p < 0.0):
        raise DegenerateDistributionError("cannot normalize a vector with negative entries")
    s = float(p.sum())
    if s <= 0.0:
        raise DegenerateDistributionError("cannot normalize a vector with zero total mass")
    return DiscreteDistribution(p / s)
