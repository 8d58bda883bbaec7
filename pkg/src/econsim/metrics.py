"""Distributional and welfare indicators computed from samples and snapshots."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class DistributionSample:
    """A nonempty sample of real values with optional nonnegative weights."""

    values: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.size == 0:
            raise ValueError("sample must be nonempty")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            object.__setattr__(self, "weights", w)
            if w.shape != values.shape:
                raise ValueError("weights must match values in shape")
            if np.any(w < 0) or w.sum() <= 0.0:
                raise ValueError("weights must be nonnegative with positive sum")


def _as_values_weights(sample) -> tuple[np.ndarray, Optional[np.ndarray]]:
    if isinstance(sample, DistributionSample):
        return sample.values, sample.weights
    values = np.asarray(sample, dtype=float)
    if values.size == 0:
        raise ValueError("sample must be nonempty")
    return values, None


def gini(sample) -> float:
    """Gini index via sorted cumulative shares.

    Equals the mean absolute pairwise difference divided by twice the mean.
    All values must be nonnegative; an all-zero sample returns 0 by convention.
    """
    x, w = _as_values_weights(sample)
    if np.any(x < 0):
        raise ValueError("gini requires nonnegative values")
    if w is None:
        w = np.ones_like(x)
    total = float(np.sum(w * x))
    if total == 0.0:
        return 0.0
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    wsum = float(np.sum(w))
    cw = np.cumsum(w)
    # Weighted version of G = sum_i (2 i - n - 1) x_i / (n * sum x) where i is
    # the midpoint rank of each observation.
    rank_mid = cw - 0.5 * w
    return float(np.sum(w * x * (2.0 * rank_mid - wsum)) / (wsum * total))


def lorenz_curve(sample, points: Optional[int] = None) -> np.ndarray:
    """Cumulative (population share, value share) polyline from (0,0) to (1,1).

    With `points` given, the curve is linearly resampled at that many evenly
    spaced population shares (still anchored at both endpoints).
    """
    x, w = _as_values_weights(sample)
    if np.any(x < 0):
        raise ValueError("lorenz_curve requires nonnegative values")
    if w is None:
        w = np.ones_like(x)
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    pop = np.concatenate(([0.0], np.cumsum(w) / np.sum(w)))
    total = float(np.sum(w * x))
    if total == 0.0:
        share = pop.copy()  # degenerate sample: diagonal by convention
    else:
        share = np.concatenate(([0.0], np.cumsum(w * x) / total))
    pop[-1] = 1.0  # pin the endpoint against cumsum rounding
    share[-1] = 1.0
    curve = np.column_stack([pop, share])
    if points is not None:
        grid = np.linspace(0.0, 1.0, points)
        curve = np.column_stack([grid, np.interp(grid, pop, share)])
    return curve


def gini_from_lorenz(curve: np.ndarray) -> float:
    """Area-based Gini: 1 - 2 * area under the Lorenz polyline."""
    pop, share = curve[:, 0], curve[:, 1]
    area = float(np.trapezoid(share, pop))
    return 1.0 - 2.0 * area


def wasserstein_1d(a, b, order: int = 1) -> float:
    """Order-1 (default) or order-2 transport distance between 1-D samples.

    Computed exactly as the integral of the gap between empirical quantile
    functions over the merged quantile grid. For equal-size unweighted samples
    the order-1 distance reduces to mean(|sorted(a) - sorted(b)|).
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    xa, _ = _as_values_weights(a)
    xb, _ = _as_values_weights(b)
    xa = np.sort(xa)
    xb = np.sort(xb)
    na, nb = xa.size, xb.size
    # Merged breakpoints of the two step quantile functions.
    qa = np.arange(1, na + 1) / na
    qb = np.arange(1, nb + 1) / nb
    edges = np.union1d(qa, qb)
    widths = np.diff(np.concatenate(([0.0], edges)))
    # The step quantile function takes value x[i-1] on (q_{i-1}, q_i]; the
    # tiny offset guards against float rounding at exact breakpoints.
    ia = np.ceil(edges * na - 1e-12).astype(int) - 1
    ib = np.ceil(edges * nb - 1e-12).astype(int) - 1
    gap = np.abs(xa[np.clip(ia, 0, na - 1)] - xb[np.clip(ib, 0, nb - 1)])
    if order == 1:
        return float(np.sum(widths * gap))
    return float(np.sqrt(np.sum(widths * gap**2)))


def social_welfare(utilities: Sequence[float]) -> float:
    """Aggregate welfare: plain sum of per-agent utilities (empty sum is 0)."""
    arr = np.asarray(utilities, dtype=float)
    return float(arr.sum()) if arr.size else 0.0


def dependency_ratio(ages: Sequence[int], retirement_age: int) -> float:
    """Retirees per working-age individual; +inf (flagged by caller) if nobody is young."""
    ages = np.asarray(ages)
    old = int(np.sum(ages > retirement_age))
    young = int(ages.size - old)
    if young == 0:
        return float("inf")
    return old / young


def load_reference_distribution(path) -> np.ndarray:
    """Read a reference sample for distance metrics: one value per row."""
    values = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not row[0].strip():
                continue
            try:
                values.append(float(row[0]))
            except ValueError as exc:
                raise ValueError(f"{Path(path).name}: bad value at row {i}") from exc
    if not values:
        raise ValueError(f"{Path(path).name}: empty reference distribution")
    return np.asarray(values, dtype=float)
