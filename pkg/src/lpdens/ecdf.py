"""Weighted empirical CDF, tie bookkeeping and evaluation grids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Sample:
    """Sorted observations with mean-one weights and ECDF values.

    ``fhat[i]`` is the right-continuous ECDF evaluated at ``x[i]``; tied
    observations share the cumulative weight through the whole tie. The
    ``unique_*`` arrays hold one entry per distinct value: ``counts`` are
    multiplicities and ``unique_w`` the summed weight of each tie group.
    """

    x: np.ndarray
    w: np.ndarray
    fhat: np.ndarray
    unique_x: np.ndarray
    counts: np.ndarray
    unique_w: np.ndarray
    unique_fhat: np.ndarray

    @property
    def n(self) -> int:
        return int(self.x.size)

    @property
    def has_mass_points(self) -> bool:
        return self.unique_x.size < self.x.size

    @property
    def weighted(self) -> bool:
        return not np.all(self.w == 1.0)


def ingest(values, weights=None) -> Sample:
    """Build a :class:`Sample` from raw observations.

    Raises
    ------
    ValueError
        On fewer than two observations, non-finite values, negative or
        all-zero weights, mismatched lengths, or a sample with a single
        distinct value.
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    if x.size < 2:
        raise ValueError("need at least two observations")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains NaN or infinite values")
    if weights is None:
        w = np.ones_like(x)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if w.shape != x.shape:
            raise ValueError("weights and values differ in length")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if not np.any(w > 0):
            raise ValueError("weights are all zero")

    order = np.argsort(x, kind="stable")
    x = x[order]
    w = w[order]
    n = x.size
    w = w * (n / w.sum())

    unique_x, first, counts = np.unique(x, return_index=True, return_counts=True)
    if unique_x.size == 1:
        raise ValueError("degenerate sample: all observations are equal")
    unique_w = np.add.reduceat(w, first)
    unique_fhat = np.minimum(np.cumsum(unique_w) / n, 1.0)
    unique_fhat[-1] = 1.0
    fhat = np.repeat(unique_fhat, counts)

    arrays = (x, w, fhat, unique_x, counts, unique_w, unique_fhat)
    for arr in arrays:
        arr.setflags(write=False)
    return Sample(*arrays)


def ecdf_at(s: Sample, x):
    """Right-continuous weighted ECDF at ``x`` (scalar or array)."""
    pos = np.searchsorted(s.unique_x, np.asarray(x, dtype=float), side="right")
    vals = np.concatenate(([0.0], s.unique_fhat))[pos]
    if np.ndim(vals) == 0:
        return float(vals)
    return vals


def quantile_grid(s: Sample, k: int = 19) -> np.ndarray:
    """Type-1 (inverse ECDF) quantiles at levels ``i/(k+1)``, deduplicated."""
    if k < 1:
        raise ValueError("grid size must be at least 1")
    levels = np.arange(1, k + 1) / (k + 1)
    # tolerance absorbs rounding in cumulative weights at exact levels
    idx = np.searchsorted(s.unique_fhat, levels - 1e-12, side="left")
    idx = np.minimum(idx, s.unique_x.size - 1)
    return np.unique(s.unique_x[idx])


def effective_n(s: Sample, x: float, h: float, unique: bool = False) -> int:
    """Number of observations (or distinct values) with ``|X - x| <= h``."""
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    arr = s.unique_x if unique else s.x
    lo = np.searchsorted(arr, x - h, side="left")
    hi = np.searchsorted(arr, x + h, side="right")
    return int(hi - lo)
