"""Saturation functionals of discretized admissible measures.

A measure is a finite symmetric list of weighted atoms.  On a raster with
cell width h each atom is rounded to the nearest whole-cell shift, and

    I_sigma(A) = h^dim * sum_atoms w * #{c : A(c) and A(c + shift)}.

The rounding is accounted for in ``error_bound``: translating a union of
cells by u changes it by at most |u_i| * (faces normal to axis i) * h^dim.

Fourier-side bounds use the measure actually summed, i.e. the rounded
atoms on the discrete torus, so every inequality checked here is a theorem
about the computation and not an approximation of one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import special

from .grid import DistanceSet, GridIndicator, Number, as_fraction, forbidden_residues
from .zoom import ZoomParams, box_average, zoom_out

WEIGHT_TOL = 2.0**-40


def c1_constant(dim: int) -> float:
    """Constant in |Q_delta^(xi) - 1| <= c1 delta^2 |xi|^2 used by the gap bounds."""
    return dim * math.pi**2 / 3


@dataclass(frozen=True, eq=False)
class AdmissibleMeasure:
    atoms: np.ndarray
    weights: np.ndarray
    fourier_decay: Callable[[float], float] | None = field(default=None, repr=False)
    label: str = "atomic"

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        weights = np.array(self.weights, dtype=float)
        if len(atoms) == 0 or len(atoms) != len(weights):
            raise ValueError("need one weight per atom")
        if np.any(weights < 0):
            raise ValueError("weights must be non-negative")
        if abs(math.fsum(weights) - 1.0) > WEIGHT_TOL:
            raise ValueError("weights must sum to 1")
        radii = np.sqrt((atoms**2).sum(axis=1))
        if radii.min() <= 0:
            raise ValueError("an admissible measure has no mass at the origin")
        if not _is_symmetric(atoms, weights):
            raise ValueError("measure is not symmetric about 0")
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def support_radius_min(self) -> float:
        return float(np.sqrt((self.atoms**2).sum(axis=1)).min())

    @property
    def support_radius_max(self) -> float:
        return float(np.sqrt((self.atoms**2).sum(axis=1)).max())

    def __len__(self) -> int:
        return len(self.weights)

    @classmethod
    def symmetrized(cls, atoms, weights, label: str = "atomic") -> "AdmissibleMeasure":
        """(sigma(X) + sigma(-X))/2, which has the same avoidance property."""
        atoms = np.array(atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        w = np.array(weights, dtype=float)
        w = w / math.fsum(w)
        return cls(np.concatenate([atoms, -atoms]), np.concatenate([w, w]) / 2, label=label)

    def fourier(self, xi: np.ndarray) -> np.ndarray:
        """sigma^(xi) = sum w cos(2 pi <xi, y>) (real by symmetry)."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        return np.cos(2 * np.pi * xi @ self.atoms.T) @ self.weights


def _is_symmetric(atoms: np.ndarray, weights: np.ndarray) -> bool:
    key = {}
    for a, w in zip(np.round(atoms, 12), weights):
        t = tuple(a + 0.0)
        key[t] = key.get(t, 0.0) + w
    for t, w in key.items():
        neg = tuple(-x + 0.0 for x in t)
        if abs(key.get(neg, -1.0) - w) > WEIGHT_TOL:
            return False
    return True


def _j0_tail_sup(x0: float) -> float:
    """sup_{x > x0} |J0(x)|; |J0| at successive extrema (zeros of J1) decreases."""
    if x0 <= 0:
        return 1.0
    # first J1 zero beyond x0: zeros are near (m + 1/4) pi
    m = max(1, int(x0 / math.pi) + 3)
    zeros = special.jn_zeros(1, m)
    beyond = zeros[zeros > x0]
    nxt = abs(special.j0(beyond[0])) if len(beyond) else 0.0
    return float(max(abs(special.j0(x0)), nxt))


def circle_measure(radius: Number = 1.0, n_atoms: int = 720) -> AdmissibleMeasure:
    """Equal atoms at angles 2 pi j / n on the circle; Fourier decay from J0."""
    if n_atoms < 4 or n_atoms % 2:
        raise ValueError("n_atoms must be even and at least 4")
    r = float(radius)
    if r <= 0:
        raise ValueError("radius must be positive")
    half = n_atoms // 2
    ang = 2 * np.pi * np.arange(half) / n_atoms
    pts = r * np.column_stack([np.cos(ang), np.sin(ang)])
    atoms = np.concatenate([pts, -pts])
    weights = np.full(n_atoms, 1.0 / n_atoms)

    def decay(T: float) -> float:
        return _j0_tail_sup(2 * np.pi * r * float(T))

    return AdmissibleMeasure(atoms, weights, decay, label=f"circle:{r}:{n_atoms}")


def parse_measure(text: str) -> AdmissibleMeasure:
    """``circle:<radius>:<n_atoms>`` or ``points:<x>,<y>;...`` (symmetrized, equal weights)."""
    kind, _, rest = text.partition(":")
    if kind == "circle":
        r, _, n = rest.partition(":")
        return circle_measure(float(r), int(n) if n else 720)
    if kind == "points":
        pts = [[float(v) for v in p.split(",")] for p in rest.split(";") if p.strip()]
        return AdmissibleMeasure.symmetrized(pts, np.ones(len(pts)), label=text)
    raise ValueError(f"unknown measure spec {text!r}")


@dataclass
class SaturationValue:
    value: float
    discretization: tuple[int, Fraction, int]
    error_bound: float
    # exact rational sum of (binary) atom weights times integer pair counts
    exact: Fraction | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("saturation values are non-negative")

    def to_json(self) -> dict:
        k, L, n = self.discretization
        return {"value": self.value, "error_bound": self.error_bound,
                "discretization": {"k": k, "period": str(L), "atoms": n}}


# discretization -------------------------------------------------------------

def _check_support(A: GridIndicator, sigma: AdmissibleMeasure) -> None:
    if sigma.dim != A.dim:
        raise ValueError(f"measure dim {sigma.dim} != raster dim {A.dim}")
    if sigma.support_radius_max >= float(A.period) / 2:
        raise ValueError("support of sigma must be shorter than half the period")


def rounded_shifts(sigma: AdmissibleMeasure, A: GridIndicator) -> tuple[np.ndarray, np.ndarray]:
    """Whole-cell shifts of the atoms and the per-axis rounding residuals (cells)."""
    scaled = sigma.atoms * (A.k / float(A.period))
    shifts = np.rint(scaled).astype(np.int64)
    return shifts, scaled - shifts


def _aggregate(shifts: np.ndarray, weights: np.ndarray) -> tuple[list[tuple[int, ...]], list[float]]:
    """Unique shifts in first-appearance order, weights summed in atom order."""
    order: dict[tuple[int, ...], list[float]] = {}
    for s, w in zip(map(tuple, shifts.tolist()), weights.tolist()):
        order.setdefault(s, []).append(w)
    keys = list(order)
    return keys, [math.fsum(order[s]) for s in keys]


def _face_counts(cells: np.ndarray) -> np.ndarray:
    c = cells.astype(bool)
    return np.array([int(np.count_nonzero(c != np.roll(c, 1, axis=ax))) for ax in range(c.ndim)])


def _rounding_error(cells: np.ndarray, residuals: np.ndarray, weights: np.ndarray, h_d: float) -> float:
    faces = _face_counts(cells)
    per_atom = np.abs(residuals) @ faces
    return float(math.fsum((weights * per_atom).tolist()) * h_d)


def _pair_count(cells: np.ndarray, s: tuple[int, ...]) -> int:
    axes = tuple(range(cells.ndim))
    return int(np.count_nonzero(cells & np.roll(cells, tuple(-x for x in s), axis=axes)))


def i_sigma(A: GridIndicator, sigma: AdmissibleMeasure, *, strict: bool = False) -> SaturationValue:
    """Discretized I_sigma(A) = int A(x) A(x+y) dsigma(y) dx on the torus."""
    _check_support(A, sigma)
    shifts, resid = rounded_shifts(sigma, A)
    if strict:
        _strict_check(shifts, resid)
    keys, wts = _aggregate(shifts, sigma.weights)
    h_d = float(A.cell_width) ** A.dim
    counts = [_pair_count(A.cells, s) for s in keys]
    exact = sum((Fraction(w) * c for w, c in zip(wts, counts) if c), Fraction(0))
    exact *= A.cell_width**A.dim
    err = _rounding_error(A.cells, resid, sigma.weights, h_d)
    return SaturationValue(float(exact), (A.k, A.period, len(sigma)), err, exact)


def _strict_check(shifts: np.ndarray, resid: np.ndarray) -> None:
    if np.any(np.abs(resid) > 0.5):
        raise ValueError("atom rounding exceeds half a cell")
    if np.any(np.all(shifts == 0, axis=1)):
        raise ValueError("an atom rounds onto the zero shift; refine the raster")


def _correlate(b: np.ndarray, a: np.ndarray) -> np.ndarray:
    """out[u] = sum_c b(c) a(c + u), exact for 0/1 inputs."""
    fb = np.fft.fftn(b.astype(float))
    fa = np.fft.fftn(a.astype(float))
    return np.rint(np.fft.ifftn(np.conj(fb) * fa).real).astype(np.int64)


def i_or(A: GridIndicator, s1: AdmissibleMeasure, s2: AdmissibleMeasure) -> SaturationValue:
    """Discretized int A(x) A(x+y1) A(x+y2) dsigma1 dsigma2 dx."""
    _check_support(A, s1)
    _check_support(A, s2)
    sh1, r1 = rounded_shifts(s1, A)
    sh2, r2 = rounded_shifts(s2, A)
    k1, w1 = _aggregate(sh1, s1.weights)
    k2, w2 = _aggregate(sh2, s2.weights)
    h_d = float(A.cell_width) ** A.dim
    cells = A.cells
    axes = tuple(range(A.dim))
    k = A.k
    terms = []
    for u, wu in zip(k1, w1):
        b = cells & np.roll(cells, tuple(-x for x in u), axis=axes)
        if not b.any():
            continue
        corr = _correlate(b, cells)
        for v, wv in zip(k2, w2):
            c = int(corr[tuple(x % k for x in v)])
            if c:
                terms.append(wu * wv * c)
    value = math.fsum(terms) * h_d
    err = (_rounding_error(cells, r1, s1.weights, h_d)
           + _rounding_error(cells, r2, s2.weights, h_d))
    return SaturationValue(value, (A.k, A.period, len(s1) * len(s2)), err)


def discrete_fourier_sup(sigma: AdmissibleMeasure, A: GridIndicator, T: float) -> float:
    """sup over torus frequencies |xi| > T of the rounded measure's transform."""
    shifts, _ = rounded_shifts(sigma, A)
    k, dim = A.k, A.dim
    W = np.zeros((k,) * dim)
    np.add.at(W, tuple(np.mod(shifts, k).T), sigma.weights)
    F = np.abs(np.fft.fftn(W))
    m = np.fft.fftfreq(k, d=1.0 / k)
    grids = np.meshgrid(*([m] * dim), indexing="ij")
    freq = np.sqrt(sum(g**2 for g in grids)) / float(A.period)
    mask = freq > T
    if not mask.any():
        return 0.0
    # float FFT of a probability vector; pad by a rounding margin
    return float(min(1.0, F[mask].max() + 1e-12))


def kernel_c1_ratio(w: int, k: int, dim: int) -> float:
    """max over nonzero frequencies of |K^ - 1| / (delta^2 |xi|^2) for the centred box kernel."""
    e = np.zeros((k,) * dim)
    e[(0,) * dim] = 1.0
    K = np.fft.fftn(box_average(e, w)).real
    m = np.fft.fftfreq(k, d=1.0 / k)
    grids = np.meshgrid(*([m] * dim), indexing="ij")
    # delta * xi = (w h)(m / (k h)) = w m / k, independent of the period
    dxi2 = sum((w * g / k) ** 2 for g in grids)
    nz = dxi2 > 0
    return float((np.abs(K[nz] - 1) / dxi2[nz]).max())


def _norm2(values: np.ndarray, h_d: float) -> float:
    return math.sqrt(float(np.sum(values.astype(float) ** 2)) * h_d)


def _bilinear(f: np.ndarray, g: np.ndarray, keys, wts, h_d: float) -> float:
    axes = tuple(range(f.ndim))
    terms = [w * float(np.sum(f * np.roll(g, tuple(-x for x in s), axis=axes)))
             for s, w in zip(keys, wts)]
    return math.fsum(terms) * h_d


def convlem_gap(f: GridIndicator, g: GridIndicator, sigma: AdmissibleMeasure,
                delta: Number | str, T: float) -> tuple[float, float]:
    """(|I(f,g) - I(f, g*Q_delta)|, (c1 delta^2 T^2 + 2 sup|sigma^|) ||f|| ||g||)."""
    if (f.dim, f.period, f.k) != (g.dim, g.period, g.k):
        raise ValueError("f and g must share a grid")
    if T <= 0:
        raise ValueError("T must be positive")
    _check_support(f, sigma)
    w = ZoomParams(delta, 1).cells(f)
    shifts, _ = rounded_shifts(sigma, f)
    keys, wts = _aggregate(shifts, sigma.weights)
    h_d = float(f.cell_width) ** f.dim
    gv = g.cells.astype(float)
    diff = gv - box_average(gv, w)
    lhs = abs(_bilinear(f.cells.astype(float), diff, keys, wts, h_d))
    d = float(as_fraction(delta))
    tail = discrete_fourier_sup(sigma, f, T)
    rhs = (c1_constant(f.dim) * d * d * T * T + 2 * tail) * _norm2(f.cells, h_d) * _norm2(g.cells, h_d)
    return lhs, rhs


def zoomingout_inequality(A: GridIndicator, sigma: AdmissibleMeasure, delta: Number | str,
                          eps: Number | str) -> tuple[float, float]:
    """(I(A), eps^2 I(Z_delta(eps) A) - 2 (c1 delta^2 T^2 + 2 sup|sigma^|) L^dim), T = delta^-1/2."""
    p = ZoomParams(delta, eps)
    Z = zoom_out(A, p)
    d = float(p.delta)
    T = d ** -0.5
    tail = discrete_fourier_sup(sigma, A, T)
    i_a = i_sigma(A, sigma).value
    i_z = i_sigma(Z, sigma).value
    e = float(p.eps)
    vol = float(A.period) ** A.dim
    bound = e * e * i_z - 2 * (c1_constant(A.dim) * d * d * T * T + 2 * tail) * vol
    return i_a, bound


# batteries ------------------------------------------------------------------

def prune_to_avoiding(A: GridIndicator, D: DistanceSet, rng: np.random.Generator) -> GridIndicator:
    """Greedy random-order subset of A passing the conservative avoidance check."""
    res = forbidden_residues(D, A.dim, A.k, A.period)
    k = A.k
    occ = [tuple(c) for c in np.argwhere(A.cells)]
    rng.shuffle(occ)
    kept = np.zeros_like(A.cells)
    for c in occ:
        if any(kept[tuple((np.add(c, r)) % k)] for r in res):
            continue
        kept[c] = True
    return A.with_cells(kept)


def satprops_battery(seed: int, trials: int, n_atoms: int = 360) -> dict:
    """Seeded checks of the zooming-out inequality and the convolution gap bound."""
    rng = np.random.default_rng(seed)
    sigma = circle_measure(1.0, n_atoms)
    L, k = 4, 32
    zo_pass = cl_pass = 0
    worst_zo = math.inf
    worst_cl = math.inf
    for i in range(trials):
        A = GridIndicator(rng.random((k, k)) < rng.uniform(0.05, 0.95), L)
        w = (1, 2, 4)[i % 3]
        eps = (0.3, 0.5, 0.8)[(i // 3) % 3]
        delta = Fraction(w * L, k)
        i_a, bound = zoomingout_inequality(A, sigma, delta, eps)
        zo_pass += i_a >= bound
        worst_zo = min(worst_zo, i_a - bound)
        f = GridIndicator(rng.random((k, k)) < rng.uniform(0.05, 0.95), L)
        g = GridIndicator(rng.random((k, k)) < rng.uniform(0.05, 0.95), L)
        T = float(delta) ** -0.5 * float(rng.uniform(0.5, 2.0))
        lhs, rhs = convlem_gap(f, g, sigma, delta, T)
        cl_pass += lhs <= rhs
        worst_cl = min(worst_cl, rhs - lhs)
    return {"trials": trials, "zoomingout_pass": int(zo_pass), "convlem_pass": int(cl_pass),
            "zoomingout_min_margin": worst_zo, "convlem_min_margin": worst_cl}
