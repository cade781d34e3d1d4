import numpy as np
import pytest

from dispmix import DiscreteDistribution, LaplaceMode, evaluate_laplacian


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def render_laplacian_dist(d_range: int, w: float, mu: float, b: float) -> np.ndarray:
    """Independent rendering of a single mode used as test input."""
    return evaluate_laplacian(d_range, LaplaceMode(w=w, mu=mu, b=b))


def render_mixture_dist(d_range: int, triples) -> DiscreteDistribution:
    """Normalized mixture built directly from (w, mu, b) triples."""
    acc = np.zeros(d_range)
    for w, mu, b in triples:
        acc += render_laplacian_dist(d_range, w, mu, b)
    return DiscreteDistribution(acc / acc.sum())


def brute_force_mean(probs: np.ndarray, lo: int, hi: int) -> float:
    """Probability-weighted mean over bins lo..hi by plain accumulation."""
    w = 0.0
    m = 0.0
    for d in range(lo, hi + 1):
        w += float(probs[d])
        m += float(probs[d]) * d
    return m / w


def brute_force_mad(probs: np.ndarray, lo: int, hi: int, mu: float) -> float:
    """Mean absolute deviation around mu over bins lo..hi."""
    w = 0.0
    acc = 0.0
    for d in range(lo, hi + 1):
        w += float(probs[d])
        acc += float(probs[d]) * abs(d - mu)
    return acc / w
