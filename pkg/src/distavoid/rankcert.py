"""Checkable consequences of the clique bound for distance graphs.

For n points in R^d the squared-distance matrix factors as B + B^T - 2C with
rank B <= 1 and rank C <= d, so its rank is at most d + 2.  The module
computes that rank exactly, audits (d+3)-subsets for repeated distances, and
tests by random evaluation that the generic symmetric zero-diagonal
determinant is a non-zero polynomial.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .grid import as_fraction

MERSENNE_31 = 2**31 - 1


@dataclass(frozen=True)
class PointConfig:
    dim: int
    points: tuple[tuple, ...]
    exact: bool = True

    def __init__(self, points: Sequence[Sequence], dim: int | None = None, exact: bool = True):
        pts = [tuple(p) for p in points]
        if not pts:
            raise ValueError("need at least one point")
        d = len(pts[0]) if dim is None else dim
        if d < 1 or any(len(p) != d for p in pts):
            raise ValueError(f"every point must have {d} coordinates")
        conv = (lambda v: as_fraction(v)) if exact else float
        pts = [tuple(conv(v) for v in p) for p in pts]
        if len(set(pts)) != len(pts):
            raise ValueError("points must be distinct")
        object.__setattr__(self, "dim", d)
        object.__setattr__(self, "points", tuple(pts))
        object.__setattr__(self, "exact", exact)

    @property
    def n(self) -> int:
        return len(self.points)

    def to_json(self) -> dict:
        return {"dim": self.dim, "exact": self.exact,
                "points": [[str(v) for v in p] for p in self.points]}

    @classmethod
    def from_json(cls, obj: dict) -> "PointConfig":
        exact = obj.get("exact", True)
        return cls(obj["points"], obj.get("dim"), exact)


def sqdist_matrix(X: PointConfig) -> list[list]:
    pts = X.points
    return [[sum((a - b) ** 2 for a, b in zip(p, q)) for q in pts] for p in pts]


def gram_form(X: PointConfig) -> list[list]:
    """B + B^T - 2C with B_ij = <x_i, x_i> and C_ij = <x_i, x_j>."""
    pts = X.points
    norms = [sum(v * v for v in p) for p in pts]
    return [[norms[i] + norms[j] - 2 * sum(a * b for a, b in zip(pts[i], pts[j]))
             for j in range(len(pts))] for i in range(len(pts))]


def exact_rank(M: Sequence[Sequence]) -> int:
    """Rank over Q by fraction-exact Gaussian elimination."""
    rows = [[Fraction(v) for v in r] for r in M]
    if not rows:
        return 0
    ncols = len(rows[0])
    rank = 0
    for col in range(ncols):
        piv = next((i for i in range(rank, len(rows)) if rows[i][col] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        p = rows[rank]
        for i in range(rank + 1, len(rows)):
            f = rows[i][col]
            if f:
                f /= p[col]
                rows[i] = [a - f * b for a, b in zip(rows[i], p)]
        rank += 1
    return rank


def float_rank(M: Sequence[Sequence], tol: float) -> int:
    """Rank by complete-pivoting elimination; pivots at most tol * max|M| count as zero."""
    A = np.array(M, dtype=float)
    if A.size == 0:
        return 0
    scale = max(np.abs(A).max(), 1.0)
    rank = 0
    for _ in range(min(A.shape)):
        sub = np.abs(A[rank:, rank:])
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        if sub[i, j] <= tol * scale:
            break
        i += rank
        j += rank
        A[[rank, i]] = A[[i, rank]]
        A[:, [rank, j]] = A[:, [j, rank]]
        A[rank + 1:] -= np.outer(A[rank + 1:, rank] / A[rank, rank], A[rank])
        rank += 1
    return rank


def rank_bound_check(X: PointConfig, tol: float = 1e-9) -> tuple[int, bool]:
    """(rank, rank <= dim + 2); exact when the configuration is rational."""
    M = sqdist_matrix(X)
    rank = exact_rank(M) if X.exact else float_rank(M, tol)
    return rank, rank <= X.dim + 2


def repeated_distance_audit(X: PointConfig, tol: float = 0.0) -> list[tuple[int, ...]]:
    """(dim+3)-subsets whose pairwise distances are all distinct, in lexicographic order."""
    size = X.dim + 3
    if X.n < size:
        return []
    M = sqdist_matrix(X)
    out = []
    for sub in itertools.combinations(range(X.n), size):
        vals = sorted(M[i][j] for i, j in itertools.combinations(sub, 2))
        if X.exact or tol == 0:
            distinct = len(set(vals)) == len(vals)
        else:
            distinct = all(b - a > tol for a, b in zip(vals, vals[1:]))
        if distinct:
            out.append(sub)
    return out


def _is_probable_prime(p: int) -> bool:
    if p < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
    for q in small:
        if p % q == 0:
            return p == q
    d, s = p - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    # these bases are deterministic for p < 3.3e24
    for a in small:
        x = pow(a, d, p)
        if x in (1, p - 1):
            continue
        for _ in range(s - 1):
            x = x * x % p
            if x == p - 1:
                break
        else:
            return False
    return True


def det_mod_p(M: list[list[int]], p: int) -> int:
    A = [[v % p for v in r] for r in M]
    n = len(A)
    det = 1
    for col in range(n):
        piv = next((i for i in range(col, n) if A[i][col]), None)
        if piv is None:
            return 0
        if piv != col:
            A[col], A[piv] = A[piv], A[col]
            det = -det
        det = det * A[col][col] % p
        inv = pow(A[col][col], p - 2, p)
        for i in range(col + 1, n):
            f = A[i][col] * inv % p
            if f:
                A[i] = [(a - f * b) % p for a, b in zip(A[i], A[col])]
    return det % p


def generic_symmetric_det_nonzero(n: int, trials: int = 10, prime: int = MERSENNE_31,
                                  seed: int = 0) -> bool:
    """Schwartz-Zippel test that det of the generic symmetric zero-diagonal n x n matrix is not 0.

    A True answer is a certificate.  A False answer has probability at most
    (n / prime) ** trials when the polynomial is non-zero.
    """
    if not 2 <= n <= 9:
        raise ValueError("n must lie in 2..9")
    if prime <= 2**30 or not _is_probable_prime(prime):
        raise ValueError("prime must be a prime above 2^30")
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = random.Random(seed)
    for _ in range(trials):
        M = [[0] * n for _ in range(n)]
        for i, j in itertools.combinations(range(n), 2):
            M[i][j] = M[j][i] = rng.randrange(prime)
        if det_mod_p(M, prime):
            return True
    return False


def random_rational_config(rng: random.Random, dim: int, n: int, denom: int = 16,
                           span: int = 8) -> PointConfig:
    pts: set[tuple[Fraction, ...]] = set()
    while len(pts) < n:
        pts.add(tuple(Fraction(rng.randint(-span * denom, span * denom), denom)
                      for _ in range(dim)))
    return PointConfig(sorted(pts), dim)


def rank_battery(seed: int, trials: int, dims=(1, 2, 3), extra=range(3, 7)) -> dict:
    rng = random.Random(seed)
    out = {}
    for d in dims:
        for e in extra:
            n = d + e
            passes = max_rank = 0
            for _ in range(trials):
                rank, ok = rank_bound_check(random_rational_config(rng, d, n))
                passes += ok
                max_rank = max(max_rank, rank)
            out[f"d{d}_n{n}"] = {"trials": trials, "passes": passes, "max_rank": max_rank}
    return out
