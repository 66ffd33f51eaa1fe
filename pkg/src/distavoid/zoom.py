"""Zooming-out operator on rasters.

The window of side ``w`` cells is centred on each cell centre.  For even
``w`` the window edge falls on cell midlines, so the two end cells count
with weight 1/2.  Counts are kept in half-cell units per axis (total weight
``(2w)**dim``), which makes the occupied measure of every window an exact
integer and the threshold test exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import ndimage

from .grid import GridIndicator, Number, as_fraction


@dataclass(frozen=True)
class ZoomParams:
    delta: Fraction
    eps: Fraction

    def __init__(self, delta: Number | str, eps: Number | str):
        d, e = as_fraction(delta), as_fraction(eps)
        if d <= 0:
            raise ValueError("delta must be positive")
        if not (0 < e <= 1):
            raise ValueError("eps must lie in (0, 1]")
        object.__setattr__(self, "delta", d)
        object.__setattr__(self, "eps", e)

    @classmethod
    def in_cells(cls, w: int, eps: Number | str, grid: GridIndicator) -> "ZoomParams":
        return cls(w * grid.cell_width, eps)

    def cells(self, grid: GridIndicator) -> int:
        """Window side in whole cells; refuses sizes that are not whole cells."""
        w = self.delta / grid.cell_width
        if w < 1:
            raise ValueError(f"delta={self.delta} is smaller than one cell ({grid.cell_width})")
        if w.denominator != 1:
            raise ValueError(f"delta={self.delta} is not a whole number of cells "
                             f"(width {grid.cell_width})")
        return int(w)


def _circular_run_sum(x: np.ndarray, start: int, length: int, axis: int) -> np.ndarray:
    """out[c] = sum of x[(c + start + j) mod k] for j in [0, length), along axis."""
    k = x.shape[axis]
    if length <= 0:
        return np.zeros_like(x)
    q, r = divmod(length, k)
    total = x.sum(axis=axis, keepdims=True)
    out = q * np.broadcast_to(total, x.shape).copy()
    if r:
        doubled = np.concatenate([x, x], axis=axis)
        cs = np.concatenate([np.zeros_like(np.take(x, [0], axis=axis)),
                             np.cumsum(doubled, axis=axis)], axis=axis)
        s = (np.arange(k) + start) % k
        out = out + np.take(cs, s + r, axis=axis) - np.take(cs, s, axis=axis)
    return out


def _axis_window(x: np.ndarray, w: int, axis: int) -> np.ndarray:
    """Half-cell weighted centred window sum along one axis (weights sum to 2w)."""
    if w % 2:
        h = (w - 1) // 2
        return 2 * _circular_run_sum(x, -h, w, axis)
    h = w // 2
    inner = 2 * _circular_run_sum(x, -(h - 1), w - 1, axis)
    ends = _circular_run_sum(x, -h, 1, axis) + _circular_run_sum(x, h, 1, axis)
    return inner + ends


def window_measure(cells: np.ndarray, w: int) -> np.ndarray:
    """Occupied measure of each centred w-window in units of (half cell)**dim."""
    out = np.asarray(cells).astype(np.int64)
    for axis in range(out.ndim):
        out = _axis_window(out, w, axis)
    return out


def box_average(values: np.ndarray, w: int) -> np.ndarray:
    """Convolution with the normalised centred box of side w cells (periodic)."""
    x = np.asarray(values, dtype=float)
    for axis in range(x.ndim):
        x = _axis_window(x, w, axis)
    return x / float((2 * w) ** x.ndim)


def _zoom_cells(cells: np.ndarray, w: int, eps: Fraction) -> np.ndarray:
    dim = cells.ndim
    scale = (2 * w) ** dim
    # integer count > eps*scale  <=>  count > floor(eps*scale)
    thresh = math.floor(eps * scale)
    return window_measure(cells, w) > thresh


def zoom_out(A: GridIndicator, p: ZoomParams) -> GridIndicator:
    """Cells whose centred delta-window is occupied in more than an eps fraction."""
    w = p.cells(A)
    return A.with_cells(_zoom_cells(A.cells, w, p.eps))


def _dilate(cells: np.ndarray, reach: int) -> np.ndarray:
    if reach <= 0:
        return cells.copy()
    size = 2 * reach + 1
    if size >= cells.shape[0]:
        return np.full_like(cells, bool(cells.any()), dtype=bool)
    return ndimage.maximum_filter(cells.astype(np.uint8), size=size, mode="wrap").astype(bool)


def check_zm_a(A: GridIndicator, p: ZoomParams, t: Number | str) -> bool:
    """Z_delta(eps)A dilated by Q(0,(t-1)delta) lies inside Z_{t delta}(t^-dim eps)A.

    The dilation is rounded down to whole cells.  Refuses ``t`` for which
    ``t * delta`` is not a whole number of cells.
    """
    t = as_fraction(t)
    if t < 1:
        raise ValueError("t must be >= 1")
    w = p.cells(A)
    tw = t * w
    if tw.denominator != 1:
        raise ValueError(f"t*delta = {tw} cells is not a whole number of cells")
    tw = int(tw)
    dim = A.dim
    left = _dilate(_zoom_cells(A.cells, w, p.eps), (tw - w) // 2)
    right = _zoom_cells(A.cells, tw, p.eps * Fraction(w, tw) ** dim)
    return not np.any(left & ~right)


def zm_b_threshold(w1: int, w2: int, eps1: Fraction, eps2: Fraction, dim: int) -> Fraction:
    num = Fraction(w1) ** dim * Fraction(w2) ** dim
    den = Fraction(w1 + w2) ** dim * Fraction(min(w1, w2)) ** dim
    return eps1 * eps2 * num / den


def check_zm_b(A: GridIndicator, p1: ZoomParams, p2: ZoomParams) -> bool:
    """Z_d1(e1) Z_d2(e2) A lies inside Z_{d1+d2}(e') A with the composed threshold."""
    w1, w2 = p1.cells(A), p2.cells(A)
    inner = _zoom_cells(A.cells, w2, p2.eps)
    left = _zoom_cells(inner, w1, p1.eps)
    eps = zm_b_threshold(w1, w2, p1.eps, p2.eps, A.dim)
    right = _zoom_cells(A.cells, w1 + w2, eps)
    return not np.any(left & ~right)


def random_raster(rng: np.random.Generator, k: int, dim: int, fill: float | None = None,
                  period: Number | str = 1) -> GridIndicator:
    if fill is None:
        fill = rng.uniform(0.05, 0.95)
    return GridIndicator(rng.random((k,) * dim) < fill, period)


def zoom_property_battery(seed: int, trials: int, dims=(1, 2), k_max: int = 64) -> dict:
    """Run check_zm_a / check_zm_b on seeded random aligned instances."""
    rng = np.random.default_rng(seed)
    out = {}
    for dim in dims:
        passes_a = passes_b = 0
        for _ in range(trials):
            k = int(rng.integers(4, k_max + 1))
            A = random_raster(rng, k, dim)
            w = int(rng.integers(1, max(2, k // 3) + 1))
            eps = Fraction(int(rng.integers(1, 20)), 20)
            tw = w + int(rng.integers(0, 2 * w + 1))
            if check_zm_a(A, ZoomParams.in_cells(w, eps, A), Fraction(tw, w)):
                passes_a += 1
            w1 = int(rng.integers(1, max(2, k // 4) + 1))
            w2 = int(rng.integers(1, max(2, k // 4) + 1))
            e1 = Fraction(int(rng.integers(1, 20)), 20)
            e2 = Fraction(int(rng.integers(1, 20)), 20)
            if check_zm_b(A, ZoomParams.in_cells(w1, e1, A), ZoomParams.in_cells(w2, e2, A)):
                passes_b += 1
        out[f"dim{dim}"] = {"trials": trials, "zm_a_pass": passes_a, "zm_b_pass": passes_b}
    return out
