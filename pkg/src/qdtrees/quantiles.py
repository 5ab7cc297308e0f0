"""Quantile estimation and pinball loss.

The pinball (quantile) loss used throughout is

    QL_q(y, v) = sum_i max{ q * (y_i - v), (q - 1) * (y_i - v) }

i.e. underprediction is penalized by q and overprediction by (1 - q), so the
empirical q-quantile minimizes it.  Losses are unnormalized sums over the
samples in a cover; that additivity is what the search's bounding relies on.

``evaluate_leaf`` computes predictions and losses for a whole quantile grid
in one O(N + |grid|) sweep of a cover instead of |grid| separate O(N)
passes, using the decomposition

    QL_q(y, v) = (1 - q) * (v * n_below - sum_below) + q * (sum_above - v * n_above)

where below/above split the samples at y_i <= v (samples equal to v
contribute zero either way).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

INTERPOLATED = "interpolated"
ORDER_STATISTIC = "order-statistic"
LEAF_VALUE_MODES = (INTERPOLATED, ORDER_STATISTIC)

# Grid levels closer than this are duplicates in all but name: they produce
# identical trees and waste bound slots.
MIN_LEVEL_GAP = 1e-9


class QuantileGridError(ValueError):
    """Raised for invalid quantile level sequences."""


class QuantileGrid:
    """A strictly increasing sequence of quantile levels in (0, 1)."""

    __slots__ = ("qs",)

    def __init__(self, levels) -> None:
        qs = np.asarray(levels, dtype=np.float64)
        if qs.ndim != 1 or qs.size == 0:
            raise QuantileGridError("grid must be a non-empty 1-D sequence")
        if np.any(qs <= 0.0) or np.any(qs >= 1.0):
            raise QuantileGridError(f"quantile levels must lie strictly in (0, 1): {qs}")
        gaps = np.diff(qs)
        if np.any(gaps < MIN_LEVEL_GAP):
            raise QuantileGridError(
                f"quantile levels must be strictly increasing with gaps >= {MIN_LEVEL_GAP}: {qs}"
            )
        self.qs = qs
        self.qs.flags.writeable = False

    @classmethod
    def evenly_spaced(cls, k: int) -> "QuantileGrid":
        """k levels j/(k+1), j = 1..k, spread over the open unit interval."""
        if k < 1:
            raise QuantileGridError(f"need at least one level, got {k}")
        return cls([j / (k + 1) for j in range(1, k + 1)])

    def __len__(self) -> int:
        return int(self.qs.size)

    def __iter__(self):
        return iter(self.qs.tolist())

    def __eq__(self, other) -> bool:
        return isinstance(other, QuantileGrid) and np.array_equal(self.qs, other.qs)

    def __repr__(self) -> str:
        return f"QuantileGrid({self.qs.tolist()})"


@dataclass
class LeafEval:
    """Per-quantile predictions and losses for one cover.

    ``values`` is nondecreasing across the grid; ``losses`` are unnormalized
    sums over the cover, all >= 0.
    """

    n: int
    values: np.ndarray
    losses: np.ndarray


def empirical_quantile(sorted_values, q: float) -> float:
    """Linear-interpolation empirical quantile of a nondecreasing sequence.

    With zero-based indexing, h = q*(N-1) and the result is
    values[floor(h)] + (h - floor(h)) * (values[ceil(h)] - values[floor(h)]).
    q=0 returns the minimum, q=1 the maximum.
    """
    y = np.asarray(sorted_values, dtype=np.float64)
    if y.size == 0:
        raise ValueError("empirical_quantile of an empty sequence")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile level must be in [0, 1], got {q}")
    h = q * (y.size - 1)
    lo = math.floor(h)
    hi = math.ceil(h)
    return float(y[lo] + (h - lo) * (y[hi] - y[lo]))


def pinball_loss(values, v: float, q: float) -> float:
    """Sum of pinball losses of ``values`` against the single prediction ``v``."""
    y = np.asarray(values, dtype=np.float64)
    if y.size == 0:
        raise ValueError("pinball_loss of an empty sequence")
    diff = y - v
    return float(np.sum(np.maximum(q * diff, (q - 1.0) * diff)))


def _quantile_positions(qs: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    h = qs * (n - 1)
    lo = np.floor(h).astype(np.intp)
    hi = np.ceil(h).astype(np.intp)
    return lo, hi, h - lo


def evaluate_sorted(y: np.ndarray, grid: QuantileGrid, mode: str = INTERPOLATED) -> LeafEval:
    """Evaluate all grid quantiles over an already target-sorted value array."""
    n = y.size
    if n == 0:
        raise ValueError("cannot evaluate an empty cover")
    qs = grid.qs
    if mode == INTERPOLATED:
        lo, hi, frac = _quantile_positions(qs, n)
        values = y[lo] + frac * (y[hi] - y[lo])
    elif mode == ORDER_STATISTIC:
        # Smallest order statistic minimizing the pinball loss: index
        # ceil(q*n) - 1 (zero-based), clamped into range.
        k = np.ceil(qs * n).astype(np.intp) - 1
        values = y[np.clip(k, 0, n - 1)]
    else:
        raise ValueError(f"unknown leaf value mode {mode!r}; expected one of {LEAF_VALUE_MODES}")
    csum = np.cumsum(y)
    total = csum[-1]
    k = np.searchsorted(y, values, side="right")
    sum_below = np.where(k > 0, csum[np.maximum(k - 1, 0)], 0.0)
    n_below = k.astype(np.float64)
    losses = (1.0 - qs) * (values * n_below - sum_below) + qs * (
        (total - sum_below) - values * (n - n_below)
    )
    np.maximum(losses, 0.0, out=losses)  # clamp float cancellation; true losses are >= 0
    return LeafEval(n=int(n), values=values, losses=losses)


def evaluate_leaf(ds, cov: np.ndarray, grid: QuantileGrid, mode: str = INTERPOLATED) -> LeafEval:
    """Per-quantile values and losses for the samples selected by ``cov``.

    ``cov`` is a boolean mask over the dataset's (target-sorted) sample
    indices, so the selected targets are already sorted and the whole grid is
    evaluated in a single pass over the cover.
    """
    y = ds.targets[cov]
    if y.size == 0:
        raise ValueError("cannot evaluate an empty cover")
    return evaluate_sorted(y, grid, mode)
