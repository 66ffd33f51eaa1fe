"""Granular periodic sets: parameter schedule, exact enumeration, annealing.

The search space is the set of k2-granular subsets of the unit torus that
avoid the rescaled distances D/R under the conservative cell check.  Such a
set is a periodic D-avoiding set after scaling by R, so its density is a
certified lower bound on m(D).
"""

from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .grid import (DistanceSet, GridIndicator, Number, as_fraction, density,
                   forbidden_residues, torus_violations)
from .mis import max_independent_set

EXHAUSTIVE_CELL_LIMIT = 25
EXHAUSTIVE = "exhaustive"
LOCAL = "local-search"
MODES = (EXHAUSTIVE, LOCAL)

HEURISTIC_TAG = "heuristic - 8eps guarantee not certified"


class SearchLimitError(ValueError):
    """Requested enumeration is larger than the configured limit."""


@dataclass
class ParamSchedule:
    eps: Fraction
    r: Fraction
    m_tilde: float
    eps2: Fraction
    eps1: float
    delta0: Fraction
    R0: Fraction
    R: Fraction
    k: int
    k2: int
    dim: int
    provenance: str

    def to_json(self) -> dict:
        out = asdict(self)
        for key in ("eps", "r", "eps2", "delta0", "R0", "R"):
            out[key] = str(out[key])
        return out


def _exact(x: Number | str) -> Fraction:
    # decimal literals like 0.1 mean 1/10, not the nearest double
    return Fraction(str(x)) if isinstance(x, float) else as_fraction(x)


def schedule(eps: Number | str, D: DistanceSet, dim: int, delta0: Number | str | None = None,
             R0: Number | str | None = None) -> ParamSchedule:
    """Constants of the granular approximation algorithm.

    delta0 and R0 come from a non-constructive existence statement.  Supply
    both, or neither to get the labelled stub delta0 = eps, R0 = 4 diam D.
    """
    eps = _exact(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if dim < 1:
        raise ValueError("dim must be positive")
    eps = min(eps, Fraction(1, 10))
    r = D.r_min
    s = float(r) / math.sqrt(dim)
    m_tilde = (s / (s + float(D.diam))) ** dim
    eps2 = eps ** (2 * dim)
    eps1 = m_tilde * float(eps2)
    if (delta0 is None) != (R0 is None):
        raise ValueError("supply both delta0 and R0, or neither")
    if delta0 is None:
        delta0, R0, prov = eps, 4 * D.diam, HEURISTIC_TAG
    else:
        delta0, R0, prov = _exact(delta0), _exact(R0), "user-supplied"
    if delta0 <= 0 or R0 <= 0:
        raise ValueError("delta0 and R0 must be positive")
    R = max(R0, dim * D.diam / eps2)
    k = max(math.ceil(1 / eps), math.ceil(1 / delta0))
    return ParamSchedule(eps, r, m_tilde, eps2, eps1, delta0, R0, R, k, k * k, dim, prov)


@dataclass
class SearchResult:
    best: GridIndicator
    m_prime: Fraction
    certified: bool
    search_mode: str
    visited: int
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "best": self.best.to_json(),
            "m_prime": {"exact": str(self.m_prime), "value": float(self.m_prime)},
            "certified": self.certified,
            "search_mode": self.search_mode,
            "visited": self.visited,
            "seed": self.seed,
            **self.extra,
        }


def _neighbours(D: DistanceSet, k2: int, dim: int) -> tuple[list[list[int]], bool]:
    """Conflict lists on the flattened torus; flag if a cell conflicts with itself."""
    res = forbidden_residues(D, dim, k2, Fraction(1))
    self_conflict = any(not np.any(r) for r in res)
    res = [r for r in res if np.any(r)]
    shape = (k2,) * dim
    coords = np.array(np.unravel_index(np.arange(k2**dim), shape)).T
    nbr = []
    for c in coords:
        targets = np.mod(c + np.array(res, dtype=np.int64).reshape(-1, dim), k2)
        nbr.append(sorted(set(np.ravel_multi_index(tuple(targets.T), shape).tolist())))
    return nbr, self_conflict


def _grid_from_flat(x, k2: int, dim: int) -> GridIndicator:
    return GridIndicator(np.array(x, dtype=bool).reshape((k2,) * dim), 1)


def _exhaustive(D: DistanceSet, k2: int, dim: int) -> SearchResult:
    n = k2**dim
    if n > EXHAUSTIVE_CELL_LIMIT:
        raise SearchLimitError(
            f"exhaustive search limited to {EXHAUSTIVE_CELL_LIMIT} cells; "
            f"k2^dim = {n} cells means 2^{n} subsets")
    nbr, self_conflict = _neighbours(D, k2, dim)
    if self_conflict:
        best = GridIndicator.empty(k2, dim)
        return SearchResult(best, Fraction(0), True, EXHAUSTIVE, 1)
    adj = [sum(1 << j for j in nb) for nb in nbr]
    # translations act transitively, so the lex-smallest optimum contains cell 0
    cand = ((1 << n) - 1) & ~adj[0] & ~1
    res = max_independent_set(adj, cand)
    mask = res.mask | 1
    x = [(mask >> i) & 1 for i in range(n)]
    best = _grid_from_flat(x, k2, dim)
    certified = not torus_violations(best, D)
    return SearchResult(best, density(best), certified, EXHAUSTIVE, res.nodes)


@dataclass(frozen=True)
class AnnealConfig:
    penalty: float = 1.5
    t_start: float = 2.0
    t_end: float = 0.05
    block_prob: float = 0.1
    block_max: int = 4


def _anneal(args) -> tuple[list[int], int, int]:
    nbr, k2, dim, budget, seed, cfg = args
    rng = random.Random(seed)
    n = len(nbr)
    x = [0] * n
    conf = [0] * n
    size = viol = 0
    best_size, best_x = 0, x[:]
    lam = cfg.penalty
    cool = (cfg.t_end / cfg.t_start) ** (1.0 / max(budget, 1))
    temp = cfg.t_start

    def flip(c):
        nonlocal size, viol
        if x[c]:
            x[c] = 0
            size -= 1
            viol -= conf[c]
            for j in nbr[c]:
                conf[j] -= 1
        else:
            x[c] = 1
            size += 1
            viol += conf[c]
            for j in nbr[c]:
                conf[j] += 1

    for _ in range(budget):
        if rng.random() < cfg.block_prob:
            length = rng.randint(2, cfg.block_max)
            start = [rng.randrange(k2) for _ in range(dim)]
            axis = rng.randrange(dim)
            cells = []
            for j in range(length):
                p = list(start)
                p[axis] = (p[axis] + j) % k2
                cells.append(int(np.ravel_multi_index(tuple(p), (k2,) * dim)) if dim > 1 else p[0])
            e0 = -size + lam * viol
            for c in cells:
                flip(c)
            delta = (-size + lam * viol) - e0
            if delta > 0 and rng.random() >= math.exp(-delta / temp):
                for c in reversed(cells):
                    flip(c)
        else:
            c = rng.randrange(n)
            delta = (1 - lam * conf[c]) if x[c] else (-1 + lam * conf[c])
            if delta <= 0 or rng.random() < math.exp(-delta / temp):
                flip(c)
        if viol == 0 and size > best_size:
            best_size, best_x = size, x[:]
        temp *= cool

    # repair the final state and fill greedily; keep whichever is larger
    for c in range(n):
        if x[c] and conf[c]:
            flip(c)
    for c in range(n):
        if not x[c] and conf[c] == 0:
            flip(c)
    if size > best_size:
        best_size, best_x = size, x[:]
    return best_x, best_size, budget


def _local_search(D: DistanceSet, k2: int, dim: int, budget: int, seed: int,
                  restarts: int = 1, threads: int = 1,
                  cfg: AnnealConfig = AnnealConfig()) -> SearchResult:
    if budget <= 0:
        raise ValueError("local search needs a positive budget")
    nbr, self_conflict = _neighbours(D, k2, dim)
    if self_conflict:
        return SearchResult(GridIndicator.empty(k2, dim), Fraction(0), True, LOCAL, 0, seed)
    seeds = [seed + i for i in range(restarts)]
    jobs = [(nbr, k2, dim, budget, s, cfg) for s in seeds]
    if threads > 1 and restarts > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(_anneal, jobs))
    else:
        runs = [_anneal(j) for j in jobs]
    # argmax with the smallest seed winning ties
    best_i = max(range(len(runs)), key=lambda i: (runs[i][1], -seeds[i]))
    x = runs[best_i][0]
    best = _grid_from_flat(x, k2, dim)
    certified = not torus_violations(best, D)
    visited = sum(r[2] for r in runs)
    return SearchResult(best, density(best), certified, LOCAL, visited, seeds[best_i],
                        {"restart_sizes": [r[1] for r in runs]})


def enumerate_granular(D_scaled: DistanceSet, k2: int, dim: int, mode: str = EXHAUSTIVE,
                       budget: int = 0, seed: int = 0, *, restarts: int = 1,
                       threads: int = 1) -> SearchResult:
    """Best k2-granular period-1 set avoiding D_scaled (conservative check)."""
    if dim not in (1, 2):
        raise ValueError("dim must be 1 or 2")
    if k2 < 1:
        raise ValueError("k2 must be positive")
    if mode == EXHAUSTIVE:
        return _exhaustive(D_scaled, k2, dim)
    if mode == LOCAL:
        return _local_search(D_scaled, k2, dim, int(budget), seed, restarts, threads)
    raise ValueError(f"unknown mode {mode!r}")


OVERRIDE_KEYS = {"R", "k2", "mode", "budget", "seed", "restarts", "delta0", "R0"}


def m_approx(eps: Number, D: DistanceSet, dim: int, overrides: dict | None = None, *,
             threads: int = 1) -> tuple[Fraction, ParamSchedule, SearchResult, list[str]]:
    """Granular lower bound on m(D); returns (m', schedule, search result, guarantee tags)."""
    ov = dict(overrides or {})
    unknown = set(ov) - OVERRIDE_KEYS
    if unknown:
        raise ValueError(f"unknown overrides {sorted(unknown)}")
    sched = schedule(eps, D, dim, ov.get("delta0"), ov.get("R0"))
    R = _exact(ov["R"]) if "R" in ov else sched.R
    k2 = int(ov.get("k2", sched.k2))
    mode = ov.get("mode", EXHAUSTIVE)
    if mode == "local":
        mode = LOCAL
    if mode == EXHAUSTIVE and k2**dim > EXHAUSTIVE_CELL_LIMIT:
        raise SearchLimitError(
            f"exhaustive search over k2={k2} in dim {dim} has 2^{k2**dim} candidate sets "
            f"(limit {EXHAUSTIVE_CELL_LIMIT} cells); pass overrides R, k2 or mode=local-search")
    D_scaled = D.scaled(1 / R)
    result = enumerate_granular(D_scaled, k2, dim, mode, int(ov.get("budget", 0)),
                                int(ov.get("seed", 0)), restarts=int(ov.get("restarts", 1)),
                                threads=threads)
    tags = []
    if result.certified:
        tags.append("lower bound, certified")
    full_schedule = ("R" not in ov and "k2" not in ov and mode == EXHAUSTIVE
                     and sched.provenance == "user-supplied")
    if full_schedule and result.certified:
        tags.append("within 8eps of m(D)")
    result.extra.update({"R": str(R), "k2": k2, "D_scaled": D_scaled.to_list()})
    return result.m_prime, sched, result, tags


@dataclass
class ScanRow:
    t: int
    lower_combined: Fraction
    lower_d1: Fraction
    lower_d2: Fraction

    @property
    def product(self) -> Fraction:
        return self.lower_d1 * self.lower_d2

    def csv_row(self) -> list[str]:
        return [str(self.t), str(self.lower_combined), str(self.lower_d1),
                str(self.lower_d2), str(self.product)]


SCAN_HEADER = ["t", "lower_combined", "lower_d1", "lower_d2", "product_of_lowers"]


def product_scan(D1: DistanceSet, D2: DistanceSet, t_list, dim: int, overrides: dict,
                 *, threads: int = 1) -> list[ScanRow]:
    """Certified lower bounds on m(D1 U t D2) next to lower(m(D1)) lower(m(D2))."""
    if dim != 2:
        raise ValueError("the product scan needs dim = 2")
    if not overrides or "R" not in overrides or "k2" not in overrides:
        raise ValueError("product scan needs desk-scale overrides R and k2")
    R = _exact(overrides["R"])
    for t in t_list:
        if t < 1:
            raise ValueError(f"t must be positive, got {t}")
        if t * D2.diam / R >= Fraction(1, 2):
            raise ValueError(f"t={t}: t*diam(D2)/R = {t * D2.diam / R} reaches half the "
                             f"period; use R > {2 * t * D2.diam}")
    eps = 0.1
    l1 = m_approx(eps, D1, dim, overrides, threads=threads)[0]
    l2 = m_approx(eps, D2, dim, overrides, threads=threads)[0]
    rows = []
    for t in t_list:
        comb = D1.union(D2.scaled(t))
        lc = m_approx(eps, comb, dim, overrides, threads=threads)[0]
        rows.append(ScanRow(int(t), lc, l1, l2))
    return rows
