"""Channel-reciprocity checking between the two link directions.

In a TDD exchange both nodes sample the same medium, so the magnitude
profiles of the two directions should agree up to hardware tolerances and
measurement noise. A relay that amplifies each direction through a
different chain breaks that symmetry; comparing the exchanged magnitude
vectors against a calibrated threshold exposes it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_METRIC_DOMAINS = ("db", "linear")


@dataclass(frozen=True)
class ReciprocityReport:
    dissimilarity: float
    metric: str
    metric_domain: str
    epsilon: float
    verdict: str  # "attack" | "clean"
    magnitude_forward: np.ndarray
    magnitude_reverse: np.ndarray


def reciprocity_dissimilarity(
    magnitude_forward: np.ndarray,
    magnitude_reverse: np.ndarray,
    metric_domain: str = "db",
) -> float:
    """Euclidean distance between the two directions' magnitude profiles.

    The default compares in the dB domain, which cancels the common link
    budget and leaves only per-direction asymmetries; ``linear`` compares
    raw amplitudes.
    """
    fwd = np.asarray(magnitude_forward, dtype=float)
    rev = np.asarray(magnitude_reverse, dtype=float)
    if fwd.shape != rev.shape:
        raise ValueError("magnitude vectors must have matching shapes")
    if fwd.size == 0:
        raise ValueError("magnitude vectors are empty")
    if metric_domain not in _METRIC_DOMAINS:
        raise ValueError(f"metric_domain must be one of {_METRIC_DOMAINS}")
    if metric_domain == "db":
        if np.any(fwd <= 0) or np.any(rev <= 0):
            raise ValueError("magnitudes must be positive in db domain")
        diff = 20.0 * np.log10(fwd) - 20.0 * np.log10(rev)
    else:
        diff = fwd - rev
    return float(np.linalg.norm(diff))


def detect(
    magnitude_forward: np.ndarray,
    magnitude_reverse: np.ndarray,
    epsilon: float,
    metric_domain: str = "db",
) -> ReciprocityReport:
    """Compare one exchange against a calibrated threshold.

    The verdict is ``attack`` exactly when the dissimilarity exceeds
    ``epsilon``.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    value = reciprocity_dissimilarity(magnitude_forward, magnitude_reverse, metric_domain)
    return ReciprocityReport(
        dissimilarity=value,
        metric="euclidean",
        metric_domain=metric_domain,
        epsilon=epsilon,
        verdict="attack" if value > epsilon else "clean",
        magnitude_forward=np.asarray(magnitude_forward, dtype=float),
        magnitude_reverse=np.asarray(magnitude_reverse, dtype=float),
    )


def calibrate_epsilon(clean_samples, quantile: float = 0.99) -> float:
    """Detection threshold from attack-free dissimilarity samples.

    Uses the nearest-rank quantile (no interpolation) so the threshold is
    always one of the observed values. Requires at least 30 samples and a
    quantile strictly inside (0, 1); the endpoints raise
    ``ValueError("degenerate quantile")``.
    """
    samples = np.asarray(clean_samples, dtype=float)
    if samples.size < 30:
        raise ValueError("need at least 30 clean samples to calibrate")
    if not 0.0 < quantile < 1.0:
        raise ValueError("degenerate quantile")
    ordered = np.sort(samples)
    rank = math.ceil(quantile * samples.size)
    return float(ordered[rank - 1])


def ks_statistic(samples_a, samples_b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic (max ECDF gap)."""
    a = np.sort(np.asarray(samples_a, dtype=float))
    b = np.sort(np.asarray(samples_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("KS statistic needs non-empty samples")
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / a.size
    cdf_b = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.abs(cdf_a - cdf_b).max())


def ks_critical_value(n: int, m: int, alpha: float = 0.05) -> float:
    """Large-sample two-sided KS rejection threshold c(alpha)*sqrt((n+m)/(n*m))."""
    if n <= 0 or m <= 0:
        raise ValueError("sample sizes must be positive")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    c_alpha = math.sqrt(-math.log(alpha / 2.0) / 2.0)
    return c_alpha * math.sqrt((n + m) / (n * m))
