"""Certified bounds on m(D) for finite D of positive integers.

Lower bounds come from periodic sets: an independent set of the circulant
graph C_n(D) repeated with period n is D-avoiding.  Upper bounds come from
windows: every length-n window of a D-avoiding set is independent in the
interval graph I_n(D), so its density is at most alpha(I_n)/n.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .grid import BoundsReport, DistanceSet
from .mis import DEFAULT_NODE_LIMIT, max_independent_set


@dataclass(frozen=True)
class CirculantInstance:
    """C_n(D): vertices Z_n, edges between residues differing by +-d mod n.

    ``zero_hit`` records that some d is a multiple of n; every non-empty
    n-periodic set then realizes d, so alpha is 0.
    """

    n: int
    connections: frozenset[int]
    zero_hit: bool = False

    @classmethod
    def from_distances(cls, n: int, D: DistanceSet | Iterable[int]) -> "CirculantInstance":
        if n < 1:
            raise ValueError("period n must be >= 1")
        ds = D.ints() if isinstance(D, DistanceSet) else tuple(D)
        res = {d % n for d in ds}
        zero = 0 in res
        res |= {(-r) % n for r in res}
        res.discard(0)
        return cls(n, frozenset(res), zero)

    def adjacency(self) -> list[int]:
        n = self.n
        adj = []
        for v in range(n):
            m = 0
            for r in self.connections:
                m |= 1 << ((v + r) % n)
            adj.append(m)
        return adj


def _mask_members(mask: int) -> tuple[int, ...]:
    return tuple(i for i in range(mask.bit_length()) if mask >> i & 1)


def alpha_circulant(inst: CirculantInstance, *, floor: int = 0,
                    node_limit: int = DEFAULT_NODE_LIMIT) -> tuple[int, int]:
    """Independence number of the circulant graph and its lex-smallest witness mask.

    With ``floor > 0`` only sets larger than ``floor`` are searched for;
    ``(floor, 0)`` means none exists.
    """
    if inst.zero_hit:
        return (0, 0) if floor <= 0 else (floor, 0)
    n = inst.n
    adj = inst.adjacency()
    # vertex transitive: some maximum set contains 0, and the lex-smallest one does
    cand = ((1 << n) - 1) & ~adj[0] & ~1
    res = max_independent_set(adj, cand, floor=max(floor - 1, 0), node_limit=node_limit)
    if res.mask == 0 and res.size == max(floor - 1, 0) and floor > 0:
        return floor, 0
    return res.size + 1, res.mask | 1


def interval_adjacency(n: int, D: DistanceSet | Iterable[int]) -> list[int]:
    ds = D.ints() if isinstance(D, DistanceSet) else tuple(D)
    adj = []
    for i in range(n):
        m = 0
        for d in ds:
            if i + d < n:
                m |= 1 << (i + d)
            if i - d >= 0:
                m |= 1 << (i - d)
        adj.append(m)
    return adj


def alpha_interval(n: int, D: DistanceSet, *, floor: int = 0,
                   node_limit: int = DEFAULT_NODE_LIMIT) -> int:
    """Independence number of I_n(D); alpha/n bounds m(D) from above."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return max_independent_set(interval_adjacency(n, D), floor=floor,
                               node_limit=node_limit).size


@dataclass
class OneDimBounds:
    D: DistanceSet
    n_max: int
    lower: Fraction
    upper: Fraction
    lower_witness: tuple[int, tuple[int, ...]]
    upper_witness: int

    @property
    def exact(self) -> bool:
        return self.lower == self.upper

    def to_report(self) -> BoundsReport:
        n, members = self.lower_witness
        return BoundsReport(
            lower=self.lower,
            upper=self.upper,
            lower_certificate={"kind": "circulant-independent-set", "period": n,
                               "members": list(members)},
            upper_certificate={"kind": "interval-graph-independence-ratio",
                               "n": self.upper_witness,
                               "alpha": int(self.upper * self.upper_witness)},
            method="circulant/interval branch-and-bound",
        )


def _exact_alpha_circulant(args) -> tuple[int, int]:
    n, ds, node_limit = args
    return alpha_circulant(CirculantInstance.from_distances(n, ds), node_limit=node_limit)


def _check_integer(D: DistanceSet) -> tuple[int, ...]:
    if D.mode != "integer":
        raise ValueError("one-dimensional bounds need integer distances")
    return D.ints()


def lower_bound_1d(D: DistanceSet, n_max: int, *, threads: int = 1,
                   node_limit: int = DEFAULT_NODE_LIMIT) -> tuple[Fraction, int, tuple[int, ...]]:
    """max over n <= n_max of alpha(C_n)/n, ties to the smaller n."""
    ds = _check_integer(D)
    best, best_n, best_mask = Fraction(0), 1, 0
    if threads > 1:
        jobs = [(n, ds, node_limit) for n in range(1, n_max + 1)]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            alphas = list(pool.map(_exact_alpha_circulant, jobs, chunksize=1))
        for n, (a, mask) in zip(range(1, n_max + 1), alphas):
            if Fraction(a, n) > best:
                best, best_n, best_mask = Fraction(a, n), n, mask
    else:
        for n in range(1, n_max + 1):
            inst = CirculantInstance.from_distances(n, ds)
            floor = math.floor(best * n)
            a, mask = alpha_circulant(inst, floor=floor, node_limit=node_limit)
            if mask and Fraction(a, n) > best:
                best, best_n, best_mask = Fraction(a, n), n, mask
    return best, best_n, _mask_members(best_mask)


def upper_bound_1d(D: DistanceSet, n_max: int, *,
                   node_limit: int = DEFAULT_NODE_LIMIT) -> tuple[Fraction, int]:
    """min over n <= n_max of alpha(I_n)/n, ties to the smaller n."""
    ds = _check_integer(D)
    best, best_n = Fraction(1), 1
    alpha = 0
    for n in range(1, n_max + 1):
        # alpha(I_n) is alpha(I_{n-1}) or one more
        alpha = max_independent_set(interval_adjacency(n, ds), floor=alpha,
                                    node_limit=node_limit).size
        if Fraction(alpha, n) < best:
            best, best_n = Fraction(alpha, n), n
    return best, best_n


def bounds_1d(D: DistanceSet, n_max: int, *, threads: int = 1,
              node_limit: int = DEFAULT_NODE_LIMIT) -> OneDimBounds:
    """Two-sided certified bracket on m(D) from periods and windows up to n_max."""
    ds = _check_integer(D)
    if n_max < max(ds) + 1:
        raise ValueError(f"n_max must be at least max(D)+1 = {max(ds) + 1}")
    lo, n_lo, members = lower_bound_1d(D, n_max, threads=threads, node_limit=node_limit)
    hi, n_hi = upper_bound_1d(D, n_max, node_limit=node_limit)
    return OneDimBounds(D, n_max, lo, hi, (n_lo, members), n_hi)


def neighborhood(D: DistanceSet, k: int) -> DistanceSet:
    """The k-neighbourhood {x : |x - y| <= k for some y in D}."""
    ds = _check_integer(D)
    if k < 0:
        raise ValueError("k must be non-negative")
    if k >= min(ds):
        raise ValueError(f"k={k} >= min(D)={min(ds)} would introduce non-positive distances")
    return DistanceSet(x for d in ds for x in range(d - k, d + k + 1))


def folded_neighborhood(D: DistanceSet, k: int) -> tuple[set[int], bool]:
    """Absolute values of the k-neighbourhood, and whether it contains 0.

    Used when k >= min(D): the difference set of any non-empty set contains
    0, so a 0 in the forbidden set forces the empty set.
    """
    ds = _check_integer(D)
    vals = {abs(x) for d in ds for x in range(d - k, d + k + 1)}
    zero = 0 in vals
    vals.discard(0)
    return vals, zero


@dataclass
class ProductRow:
    t: int
    lower: Fraction
    upper: Fraction
    reference: Fraction
    verdict: str
    combined: tuple[int, ...]

    def csv_row(self) -> list[str]:
        return [str(self.t), str(self.lower), str(self.upper), str(self.reference), self.verdict]


PRODUCT_HEADER = ["t", "lower", "upper", "reference", "verdict"]


def product_experiment_1d(D1: DistanceSet, D2: DistanceSet, k: int, t_list: Sequence[int],
                          n_max: int, *, threads: int = 1,
                          node_limit: int = DEFAULT_NODE_LIMIT) -> list[ProductRow]:
    """Bracket m(D1 U (t*D2)^k) against m(D1) m(D2) for each t.

    ``verdict`` is ``"verified"`` when the certified upper bound is already
    below the certified lower bound of the product, else ``"undecided"``.
    """
    d1 = _check_integer(D1)
    _check_integer(D2)
    if k < 0 or k % 2:
        raise ValueError(f"k must be a non-negative even integer, got {k}")
    b1 = bounds_1d(D1, max(n_max, max(d1) + 1), threads=threads, node_limit=node_limit)
    slack = max(d1) - k * b1.lower
    if slack > -1:
        raise ValueError(
            f"hypothesis diam(D1) - k*m(D1) <= -1 fails: {max(d1)} - {k}*{b1.lower} = {slack}")
    b2 = bounds_1d(D2, max(n_max, max(D2.ints()) + 1), threads=threads, node_limit=node_limit)
    reference = b1.lower * b2.lower
    rows = []
    for t in t_list:
        if t < 1:
            raise ValueError(f"t must be a positive integer, got {t}")
        vals, zero = folded_neighborhood(D2.scaled(t), k)
        combined = set(d1) | vals
        if zero:
            lo = hi = Fraction(0)
        else:
            b = bounds_1d(DistanceSet(combined), n_max, threads=threads, node_limit=node_limit)
            lo, hi = b.lower, b.upper
        verdict = "verified" if hi < reference else "undecided"
        rows.append(ProductRow(t, lo, hi, reference, verdict, tuple(sorted(combined))))
    return rows
