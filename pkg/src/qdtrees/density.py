"""Gaussian KDE over a sample's predicted quantile values.

A fitted model answers "what are the conditional quantiles of y for this
sample"; placing one Gaussian kernel on each predicted quantile value turns
that answer into a full conditional density / distribution function.
Bandwidth follows Scott's rule for univariate data, h = sigma_hat * k^(-1/5),
with a small positive fallback when the centers are degenerate so downstream
log-likelihoods stay finite.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtr

_SQRT_2PI = float(np.sqrt(2.0 * np.pi))


class DensityError(ValueError):
    """Raised for invalid density construction."""


@dataclass(frozen=True)
class Density:
    """A uniform mixture of Gaussian kernels: one per center, shared bandwidth."""

    centers: np.ndarray
    bandwidth: float

    def __post_init__(self) -> None:
        centers = np.asarray(self.centers, dtype=np.float64).reshape(-1)
        if centers.size == 0:
            raise DensityError("density needs at least one center")
        if not np.all(np.isfinite(centers)):
            raise DensityError("density centers must be finite")
        if not self.bandwidth > 0:
            raise DensityError(f"bandwidth must be positive, got {self.bandwidth}")
        centers.flags.writeable = False
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "bandwidth", float(self.bandwidth))

    def support(self, padding: float = 6.0) -> tuple[float, float]:
        """Range outside which the density is numerically negligible."""
        pad = padding * self.bandwidth
        return float(self.centers.min() - pad), float(self.centers.max() + pad)


def fallback_bandwidth(mean_center: float) -> float:
    return max(1e-3 * (1.0 + abs(mean_center)), 1e-6)


def kde_from_quantiles(values) -> Density:
    """Density with kernels at ``values`` and a Scott's-rule bandwidth.

    h = sigma_hat * k^(-1/5), sigma_hat the (k-1)-denominator standard
    deviation of the centers.  A single center or constant centers give
    sigma_hat = 0; then h = max(1e-3 * (1 + |mean|), 1e-6).
    """
    centers = np.asarray(values, dtype=np.float64).reshape(-1)
    if centers.size == 0:
        raise DensityError("cannot build a density from no quantile values")
    k = centers.size
    sigma = float(np.std(centers, ddof=1)) if k > 1 else 0.0
    if sigma > 0.0:
        h = sigma * k ** (-0.2)
    else:
        h = fallback_bandwidth(float(np.mean(centers)))
    return Density(centers, h)


def pdf(d: Density, x):
    """Density value(s) at ``x`` (scalar or array)."""
    xs = np.asarray(x, dtype=np.float64)
    z = (xs[..., None] - d.centers) / d.bandwidth
    out = np.exp(-0.5 * z * z).sum(axis=-1) / (d.centers.size * d.bandwidth * _SQRT_2PI)
    return float(out) if np.isscalar(x) else out


def cdf(d: Density, x):
    """Distribution function value(s) at ``x`` (scalar or array)."""
    xs = np.asarray(x, dtype=np.float64)
    z = (xs[..., None] - d.centers) / d.bandwidth
    out = ndtr(z).sum(axis=-1) / d.centers.size
    return float(out) if np.isscalar(x) else out


def curve(d: Density, points: int = 256, padding: float = 6.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(x, pdf, cdf) sampled on an even grid over the density's support."""
    if points < 2:
        raise DensityError(f"need at least 2 curve points, got {points}")
    lo, hi = d.support(padding)
    xs = np.linspace(lo, hi, points)
    return xs, pdf(d, xs), cdf(d, xs)


def save_curve_csv(d: Density, path, points: int = 256, padding: float = 6.0) -> None:
    """Write a plot-ready (x, pdf, cdf) CSV."""
    xs, ps, cs = curve(d, points, padding)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "pdf", "cdf"])
        for row in zip(xs, ps, cs):
            writer.writerow([repr(float(v)) for v in row])
