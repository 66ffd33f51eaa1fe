"""Distance sets and rasterized periodic sets on the torus.

A :class:`GridIndicator` is the indicator of a union of half-open cells of
width ``period / k`` tiled periodically.  All avoidance checks are done in
integer cell offsets against exact rational distances, so a certificate
produced here does not depend on floating point rounding.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Iterable, Sequence

import numpy as np

Number = int | float | Fraction

CONSERVATIVE = "conservative"
EXACT_CENTER = "exact-center"
SLACK_MODES = (CONSERVATIVE, EXACT_CENTER)

# exact-center tolerance, as a fraction of the period
CENTER_TOL = Fraction(1, 2**40)


def as_fraction(x: Number | str) -> Fraction:
    """Exact rational value of ``x`` (floats convert bit-exactly)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(x)
    return Fraction(float(x))


def _plain(x: Fraction) -> int | Fraction:
    return int(x) if x.denominator == 1 else x


@dataclass(frozen=True)
class DistanceSet:
    """Finite set of forbidden distances, kept as exact rationals."""

    values: tuple[Fraction, ...]

    def __init__(self, values: Iterable[Number | str]):
        vals = sorted({as_fraction(v) for v in values})
        if not vals:
            raise ValueError("distance set must be non-empty")
        if vals[0] <= 0:
            raise ValueError(f"distances must be positive, got {_plain(vals[0])}")
        object.__setattr__(self, "values", tuple(vals))

    @classmethod
    def parse(cls, text: str) -> "DistanceSet":
        """Parse a comma separated list such as ``"1,2,5/2,0.25"``."""
        parts = text.split(",")
        if any(not p.strip() for p in parts):
            raise ValueError(f"malformed distance list {text!r}")
        try:
            return cls(parts)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"malformed distance list {text!r}: {exc}") from None

    @property
    def mode(self) -> str:
        return "integer" if all(v.denominator == 1 for v in self.values) else "real"

    @property
    def r_min(self) -> Fraction:
        return self.values[0]

    @property
    def diam(self) -> Fraction:
        return self.values[-1]

    def ints(self) -> tuple[int, ...]:
        if self.mode != "integer":
            raise ValueError("distance set is not integral")
        return tuple(int(v) for v in self.values)

    def scaled(self, factor: Number | str) -> "DistanceSet":
        f = as_fraction(factor)
        return DistanceSet(v * f for v in self.values)

    def union(self, other: "DistanceSet") -> "DistanceSet":
        return DistanceSet(self.values + other.values)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def to_list(self) -> list[str]:
        return [str(v) for v in self.values]

    def __str__(self) -> str:
        return "{" + ",".join(str(v) for v in self.values) + "}"


@dataclass(frozen=True, eq=False)
class GridIndicator:
    """Boolean raster of a periodic set.

    ``cells`` has shape ``(k,) * dim``; cell ``i`` is the half-open cube of
    side ``period / k`` with lower corner ``i * period / k``.
    """

    dim: int
    period: Fraction
    k: int
    cells: np.ndarray = field(repr=False)

    def __init__(self, cells, period: Number | str = 1):
        arr = np.array(cells, dtype=bool)
        if arr.ndim not in (1, 2):
            raise ValueError(f"only dim 1 and 2 are supported, got {arr.ndim}")
        k = arr.shape[0]
        if k == 0:
            raise ValueError("resolution must be at least 1")
        if any(s != k for s in arr.shape):
            raise ValueError(f"raster must be square, got shape {arr.shape}")
        per = as_fraction(period)
        if per <= 0:
            raise ValueError("period must be positive")
        arr.setflags(write=False)
        object.__setattr__(self, "dim", arr.ndim)
        object.__setattr__(self, "period", per)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "cells", arr)

    @classmethod
    def empty(cls, k: int, dim: int = 1, period: Number | str = 1) -> "GridIndicator":
        if k < 1:
            raise ValueError("resolution must be at least 1")
        return cls(np.zeros((k,) * dim, dtype=bool), period)

    @classmethod
    def full(cls, k: int, dim: int = 1, period: Number | str = 1) -> "GridIndicator":
        if k < 1:
            raise ValueError("resolution must be at least 1")
        return cls(np.ones((k,) * dim, dtype=bool), period)

    @classmethod
    def from_cells(cls, k: int, occupied: Iterable, dim: int = 1,
                   period: Number | str = 1) -> "GridIndicator":
        arr = np.zeros((k,) * dim, dtype=bool)
        for c in occupied:
            arr[c] = True
        return cls(arr, period)

    @property
    def cell_width(self) -> Fraction:
        return self.period / self.k

    @property
    def count(self) -> int:
        return int(self.cells.sum())

    def with_cells(self, cells) -> "GridIndicator":
        return GridIndicator(cells, self.period)

    def shift(self, v: Sequence[int]) -> "GridIndicator":
        """Translate by whole cells (periodically)."""
        v = tuple(int(x) for x in np.atleast_1d(v))
        return self.with_cells(np.roll(self.cells, v, axis=tuple(range(self.dim))))

    def occupied(self) -> list[tuple[int, ...]]:
        return [tuple(int(i) for i in c) for c in np.argwhere(self.cells)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridIndicator):
            return NotImplemented
        return (self.dim == other.dim and self.period == other.period
                and self.k == other.k and np.array_equal(self.cells, other.cells))

    def __hash__(self) -> int:
        return hash((self.dim, self.period, self.k, self.cells.tobytes()))

    def issubset(self, other: "GridIndicator") -> bool:
        _check_same_grid(self, other)
        return not np.any(self.cells & ~other.cells)

    # serialization -------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "period": str(self.period),
            "k": self.k,
            "cells": rle_encode(self.cells.ravel()),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GridIndicator":
        dim, k = int(obj["dim"]), int(obj["k"])
        flat = rle_decode(obj["cells"], k**dim)
        return cls(flat.reshape((k,) * dim), as_fraction(obj["period"]))

    def to_pbm(self) -> str:
        """Plain PBM (P1) text raster; rows are the first axis."""
        if self.dim != 2:
            raise ValueError("PBM output needs a 2-dimensional raster")
        rows = [" ".join("1" if b else "0" for b in row) for row in self.cells]
        return f"P1\n{self.k} {self.k}\n" + "\n".join(rows) + "\n"


def rle_encode(bits: np.ndarray) -> str:
    """Run-length encode a flat bit array as ``"count:bit,..."``."""
    bits = np.asarray(bits, dtype=bool)
    if bits.size == 0:
        return ""
    change = np.flatnonzero(bits[1:] != bits[:-1]) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [bits.size]))
    return ",".join(f"{e - s}:{int(bits[s])}" for s, e in zip(starts, ends))


def rle_decode(text: str, size: int) -> np.ndarray:
    out = []
    if text:
        for tok in text.split(","):
            n, b = tok.split(":")
            if b not in ("0", "1"):
                raise ValueError(f"bad RLE token {tok!r}")
            out.append(np.full(int(n), b == "1", dtype=bool))
    flat = np.concatenate(out) if out else np.zeros(0, dtype=bool)
    if flat.size != size:
        raise ValueError(f"RLE length {flat.size} does not match {size} cells")
    return flat


def _check_same_grid(a: GridIndicator, b: GridIndicator) -> None:
    if (a.dim, a.period, a.k) != (b.dim, b.period, b.k):
        raise ValueError("rasters live on different grids")


@dataclass
class BoundsReport:
    lower: Fraction | float
    upper: Fraction | float
    lower_certificate: dict
    upper_certificate: dict
    method: str

    def __post_init__(self):
        if not (0 <= self.lower <= self.upper <= 1):
            raise ValueError(f"invalid bounds lower={self.lower} upper={self.upper}")

    def to_json(self) -> dict:
        def num(x):
            if isinstance(x, Fraction):
                return {"exact": str(x), "value": float(x)}
            return {"exact": None, "value": float(x)}

        return {
            "lower": num(self.lower),
            "upper": num(self.upper),
            "lower_certificate": self.lower_certificate,
            "upper_certificate": self.upper_certificate,
            "method": self.method,
        }


# distance bands ------------------------------------------------------------

def _band_hit(s: int, dc: Fraction, width_sq: Fraction, strict: bool) -> bool:
    """Is ``|sqrt(s) - dc|`` below (or at most) ``sqrt(width_sq)``?  Exact."""
    lhs = s + dc * dc - width_sq
    if lhs < 0:
        return True
    a, b = lhs * lhs, 4 * dc * dc * s
    return a < b if strict else a <= b


@lru_cache(maxsize=256)
def _offset_table(dcells: tuple[Fraction, ...], dim: int, mode: str) -> np.ndarray:
    """All integer offset vectors whose length falls in a band around some d."""
    if mode == CONSERVATIVE:
        width_sq, strict = Fraction(dim), True
        reach = max(dcells) + math.isqrt(dim) + 1
    else:
        raise AssertionError(mode)
    m = math.floor(reach) + 1
    hits: dict[int, bool] = {}
    rows = []
    for o in itertools.product(range(-m, m + 1), repeat=dim):
        s = sum(x * x for x in o)
        hit = hits.get(s)
        if hit is None:
            hit = any(_band_hit(s, d, width_sq, strict) for d in dcells)
            hits[s] = hit
        if hit:
            rows.append(o)
    return np.array(rows, dtype=np.int64).reshape(-1, dim)


@lru_cache(maxsize=256)
def _center_table(dcells: tuple[Fraction, ...], dim: int, tol: Fraction) -> np.ndarray:
    m = math.floor(max(dcells) + tol) + 1
    rows = []
    tol_sq = tol * tol
    for o in itertools.product(range(-m, m + 1), repeat=dim):
        s = sum(x * x for x in o)
        if any(_band_hit(s, d, tol_sq, False) for d in dcells):
            rows.append(o)
    return np.array(rows, dtype=np.int64).reshape(-1, dim)


def band_offsets(D: DistanceSet, dim: int, k: int, period: Fraction,
                 slack_mode: str = CONSERVATIVE) -> np.ndarray:
    """Integer cell offsets (not reduced mod k) that may realize a distance in D.

    Conservative: the center distance lies strictly within one cell diagonal
    of some d, which covers every distance two half-open cells can realize.
    Exact-center: the center distance is within ``CENTER_TOL * period`` of d.
    """
    cpu = Fraction(k) / as_fraction(period)
    dcells = tuple(d * cpu for d in D)
    if slack_mode == CONSERVATIVE:
        return _offset_table(dcells, dim, CONSERVATIVE)
    if slack_mode == EXACT_CENTER:
        return _center_table(dcells, dim, CENTER_TOL * k)
    raise ValueError(f"unknown slack mode {slack_mode!r}")


def forbidden_residues(D: DistanceSet, dim: int, k: int, period: Fraction,
                       slack_mode: str = CONSERVATIVE) -> np.ndarray:
    """Offsets mod k any of whose periodic lifts realize a forbidden distance.

    Every lift is considered, not only the minimum image, so the result is
    sound for distances longer than half the period as well.
    """
    offs = band_offsets(D, dim, k, period, slack_mode)
    res = np.unique(np.mod(offs, k), axis=0) if len(offs) else offs
    return res.reshape(-1, dim)


def torus_violations(A: GridIndicator, D: DistanceSet,
                     slack_mode: str = CONSERVATIVE) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Unordered pairs of occupied cells that (may) realize a distance in D.

    A cell paired with itself means one of its own periodic translates, or
    the cell's own interior, realizes a forbidden distance.  An empty result
    in conservative mode certifies that the periodic union of cells avoids D.
    """
    if slack_mode not in SLACK_MODES:
        raise ValueError(f"unknown slack mode {slack_mode!r}")
    res = forbidden_residues(D, A.dim, A.k, A.period, slack_mode)
    if A.count == 0 or len(res) == 0:
        return []
    k, dim = A.k, A.dim
    flat = A.cells.ravel()
    occ = np.flatnonzero(flat)
    coords = np.array(np.unravel_index(occ, A.cells.shape)).T
    pairs = set()
    for r in res:
        other = np.mod(coords + r, k)
        other_flat = np.ravel_multi_index(tuple(other.T), A.cells.shape)
        hit = flat[other_flat]
        for a, b in zip(occ[hit], other_flat[hit]):
            pairs.add((min(a, b), max(a, b)))
    shape = A.cells.shape
    out = []
    for a, b in sorted(pairs):
        ca = tuple(int(x) for x in np.unravel_index(a, shape))
        cb = tuple(int(x) for x in np.unravel_index(b, shape))
        out.append((ca, cb))
    return out


def is_avoiding(A: GridIndicator, D: DistanceSet, slack_mode: str = CONSERVATIVE) -> bool:
    """Fast yes/no form of :func:`torus_violations`."""
    res = forbidden_residues(D, A.dim, A.k, A.period, slack_mode)
    axes = tuple(range(A.dim))
    for r in res:
        if np.any(A.cells & np.roll(A.cells, tuple(-int(x) for x in r), axis=axes)):
            return False
    return True


def window_is_avoiding(A: GridIndicator, D: DistanceSet) -> bool:
    """Conservative check treating the raster as a single non-periodic window."""
    offs = band_offsets(D, A.dim, A.k, A.period, CONSERVATIVE)
    k = A.k
    cells = A.cells
    for o in offs:
        if any(abs(int(x)) >= k for x in o):
            continue
        src = tuple(slice(max(0, -int(x)), k - max(0, int(x))) for x in o)
        dst = tuple(slice(max(0, int(x)), k - max(0, -int(x))) for x in o)
        if np.any(cells[src] & cells[dst]):
            return False
    return True


def density(A: GridIndicator) -> Fraction:
    return Fraction(A.count, A.k**A.dim)


def _separating_gap(diam_cells: Fraction, dim: int) -> int:
    """Smallest whole-cell gap g with g + 1 >= diam + sqrt(dim)."""
    g = max(0, math.ceil(diam_cells) - 1)
    while True:
        lead = g + 1 - diam_cells
        if lead >= 0 and lead * lead >= dim:
            return g
        g += 1


def periodize(window: GridIndicator, D: DistanceSet) -> GridIndicator:
    """Tile a D-avoiding window into a D-avoiding periodic set.

    ``window`` is read as the non-periodic content of ``[0, R)^dim`` with
    ``R = window.period``.  Copies are separated by a gap of about ``diam D``
    rounded up to whole cells, so that no pair of cells from different copies
    comes within one cell diagonal of a forbidden distance.
    """
    if not window_is_avoiding(window, D):
        raise ValueError("window is not D-avoiding (conservative check)")
    h = window.cell_width
    g = _separating_gap(D.diam / h, window.dim)
    n = window.k
    size = n + g
    cells = np.zeros((size,) * window.dim, dtype=bool)
    cells[(slice(0, n),) * window.dim] = window.cells
    return GridIndicator(cells, size * h)


def periodize_loss_bound(window: GridIndicator, D: DistanceSet) -> Fraction:
    """Density floor ``d_window / (1 + diam/R)^dim`` minus the whole-cell rounding loss."""
    R = window.period
    base = density(window) / (1 + D.diam / R) ** window.dim
    return base - window.dim * window.cell_width * (1 + math.isqrt(window.dim)) / R


def shrink_fraction(eps: Number, dim: int) -> float:
    return 1.0 - 3.0 ** (1.0 / dim) * float(eps)


def shrink_cells(A: GridIndicator, eps: Number) -> GridIndicator:
    """Refine to resolution k**2, keeping a centered sub-block of each occupied cell.

    The kept block has side ``(1 - 3**(1/dim) * eps)`` of a coarse cell,
    rounded down to whole fine cells.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    k, dim = A.k, A.dim
    m = max(0, math.floor(shrink_fraction(eps, dim) * k))
    off = (k - m) // 2
    block = np.zeros((k,) * dim, dtype=bool)
    block[(slice(off, off + m),) * dim] = True
    fine = np.kron(A.cells.astype(np.uint8), block.astype(np.uint8)).astype(bool)
    return GridIndicator(fine, A.period)
