"""Exact maximum independent set by branch and bound on bitmask graphs.

Vertices are branched in increasing index order, include-first, and a branch
is cut only when it cannot strictly beat the incumbent.  The first maximum
set reached is therefore the lexicographically smallest one, which makes
witnesses reproducible.  The bound is a greedy clique cover of the
remaining candidates.
"""

from __future__ import annotations

from dataclasses import dataclass


class SolverLimitError(RuntimeError):
    """The search exceeded its node budget before proving optimality."""


DEFAULT_NODE_LIMIT = 20_000_000


@dataclass
class MISResult:
    size: int
    mask: int
    nodes: int

    def members(self) -> list[int]:
        m, out, i = self.mask, [], 0
        while m:
            if m & 1:
                out.append(i)
            m >>= 1
            i += 1
        return out


def _clique_cover_bound(cand: int, adj: list[int]) -> int:
    bound = 0
    rem = cand
    while rem:
        low = rem & -rem
        v = low.bit_length() - 1
        rem ^= low
        common = adj[v] & rem
        while common:
            low = common & -common
            u = low.bit_length() - 1
            rem ^= low
            common &= adj[u]
        bound += 1
    return bound


def max_independent_set(adj: list[int], cand: int | None = None, *, floor: int = 0,
                        node_limit: int = DEFAULT_NODE_LIMIT) -> MISResult:
    """Largest independent set inside ``cand`` (default: all vertices).

    ``adj[v]`` is the neighbour bitmask of ``v``; a self-loop bit makes ``v``
    unusable.  ``floor`` prunes everything of size ``<= floor``; if no
    larger set exists the result has size ``floor`` and mask 0.
    """
    n = len(adj)
    if cand is None:
        cand = (1 << n) - 1
    for v in range(n):
        if adj[v] >> v & 1:
            cand &= ~(1 << v)
    best_size = floor
    best_mask = 0
    nodes = 0
    # explicit stack avoids recursion limits on long paths
    # frame: (chosen_mask, chosen_size, cand)
    stack = [(0, 0, cand)]
    while stack:
        chosen, size, c = stack.pop()
        nodes += 1
        if nodes > node_limit:
            raise SolverLimitError(f"node limit {node_limit} exceeded (n={n})")
        if not c:
            if size > best_size:
                best_size, best_mask = size, chosen
            continue
        if size + c.bit_count() <= best_size:
            continue
        if size + _clique_cover_bound(c, adj) <= best_size:
            continue
        low = c & -c
        v = low.bit_length() - 1
        # exclude branch is pushed first so the include branch runs first
        stack.append((chosen, size, c ^ low))
        stack.append((chosen | low, size + 1, c & ~adj[v] & ~low))
    return MISResult(best_size, best_mask, nodes)

