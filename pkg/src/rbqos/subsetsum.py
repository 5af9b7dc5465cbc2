"""Cardinality-constrained real-valued subset sum over an open interval.

Pick exactly k of n reals whose sum lies strictly inside (lower, upper) and
either maximizes the sum subject to sum <= bound, or minimizes it subject to
sum > bound. Strict inequalities use exact comparison: boundary sums would
break water-level positivity downstream, so no epsilon slack is applied.
"""

from __future__ import annotations

import itertools
from bisect import bisect_right
from dataclasses import dataclass
from typing import Optional, Sequence

MAX_AT_MOST = "max_at_most"
MIN_ABOVE = "min_above"

_MITM_LIMIT = 30
_BRUTE_LIMIT = 22


@dataclass
class SubsetQuery:
    values: Sequence[float]
    k: int
    lower: float
    upper: float
    mode: str
    bound: float

    def __post_init__(self):
        if self.mode not in (MAX_AT_MOST, MIN_ABOVE):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.lower < self.upper:
            raise ValueError("need lower < upper")
        n = len(self.values)
        if not 0 <= self.k <= n:
            raise ValueError(f"k={self.k} outside [0, {n}]")


@dataclass
class SubsetSolution:
    mask: tuple   # 0/1 per index of query.values
    total: float
    exact: bool = True


def _feasible(s: float, q: SubsetQuery) -> bool:
    if not (q.lower < s < q.upper):
        return False
    return s <= q.bound if q.mode == MAX_AT_MOST else s > q.bound


def _better(s: float, mask: tuple, best: Optional[SubsetSolution], mode: str) -> bool:
    if best is None:
        return True
    if s != best.total:
        return s > best.total if mode == MAX_AT_MOST else s < best.total
    return mask < best.mask   # equal sums: lexicographically smallest mask


def brute_force_subset(query: SubsetQuery) -> Optional[SubsetSolution]:
    """Full enumeration oracle; refuses n > 22."""
    n = len(query.values)
    if n > _BRUTE_LIMIT:
        raise ValueError(f"brute force limited to n <= {_BRUTE_LIMIT}, got {n}")
    best = None
    for combo in itertools.combinations(range(n), query.k):
        s = sum(query.values[i] for i in combo)
        if not _feasible(s, query):
            continue
        mask = tuple(1 if i in combo else 0 for i in range(n))
        if _better(s, mask, best, query.mode):
            best = SubsetSolution(mask=mask, total=s)
    return best


def _enumerate_half(values: Sequence[float], offset: int, n_total: int):
    """All subsets of one half, grouped by size, each sorted by (sum, mask)."""
    n = len(values)
    by_size = [[] for _ in range(n + 1)]
    for bits in range(1 << n):
        s = 0.0
        mask = [0] * n_total
        c = 0
        for i in range(n):
            if bits >> i & 1:
                s += values[i]
                mask[offset + i] = 1
                c += 1
        by_size[c].append((s, tuple(mask)))
    for lst in by_size:
        lst.sort()
    return by_size


def _solve_mitm(query: SubsetQuery) -> Optional[SubsetSolution]:
    values = list(query.values)
    n = len(values)
    half = n // 2
    left = _enumerate_half(values[:half], 0, n)
    right = _enumerate_half(values[half:], half, n)
    best = None
    maximize = query.mode == MAX_AT_MOST
    for ka in range(max(0, query.k - (n - half)), min(query.k, half) + 1):
        kb = query.k - ka
        rsub = right[kb]
        if not rsub:
            continue
        rsums = [s for s, _ in rsub]
        for sa, ma in left[ka]:
            if maximize:
                pos = bisect_right(rsums, query.bound - sa) - 1
                while pos >= 0 and sa + rsums[pos] >= query.upper:
                    pos -= 1
                if pos < 0:
                    continue
                s = sa + rsums[pos]
                if not s > query.lower:
                    continue
                # equal-sum run: lexicographically smallest right mask is first
                start = pos
                while start > 0 and rsums[start - 1] == rsums[pos]:
                    start -= 1
                for j in range(start, pos + 1):
                    cand = sa + rsums[j]
                    if cand != s:
                        continue
                    mask = tuple(a | b for a, b in zip(ma, rsub[j][1]))
                    if _better(cand, mask, best, query.mode):
                        best = SubsetSolution(mask=mask, total=cand)
            else:
                pos = bisect_right(rsums, query.bound - sa)
                if pos >= len(rsums):
                    continue
                s = sa + rsums[pos]
                if not s < query.upper:
                    continue
                end = pos
                while end + 1 < len(rsums) and rsums[end + 1] == rsums[pos]:
                    end += 1
                for j in range(pos, end + 1):
                    cand = sa + rsums[j]
                    if cand != s:
                        continue
                    mask = tuple(a | b for a, b in zip(ma, rsub[j][1]))
                    if _better(cand, mask, best, query.mode):
                        best = SubsetSolution(mask=mask, total=cand)
    return best


def _solve_bnb(query: SubsetQuery, node_budget: int) -> Optional[SubsetSolution]:
    """Depth-first branch and bound with prefix attainable-sum pruning."""
    n = len(query.values)
    order = sorted(range(n), key=lambda i: -query.values[i])
    vals = [query.values[i] for i in order]
    # vals is sorted descending, so within any suffix vals[i:] the largest r
    # items are its first r entries and the smallest r are vals[n-r:].
    max_add = [[0.0] * (query.k + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        for r in range(1, min(query.k, n - i) + 1):
            max_add[i][r] = vals[i] + max_add[i + 1][r - 1]
    tail_cum = [0.0] * (n + 1)   # tail_cum[r] = sum of the r smallest values
    for r in range(1, n + 1):
        tail_cum[r] = tail_cum[r - 1] + vals[n - r]
    best: list[Optional[SubsetSolution]] = [None]
    nodes = [0]
    exact = [True]
    maximize = query.mode == MAX_AT_MOST
    chosen: list[int] = []

    def rec(i: int, c: int, s: float):
        if nodes[0] > node_budget:
            exact[0] = False
            return
        nodes[0] += 1
        r = query.k - c
        if r == 0:
            if _feasible(s, query):
                mask = [0] * n
                for j in chosen:
                    mask[order[j]] = 1
                tup = tuple(mask)
                if _better(s, tup, best[0], query.mode):
                    best[0] = SubsetSolution(mask=tup, total=s, exact=True)
            return
        if i >= n or r > n - i:
            return
        hi = s + max_add[i][r]
        lo = s + tail_cum[r]
        if hi <= query.lower or lo >= query.upper:
            return
        if maximize:
            if lo > query.bound:
                return
            if best[0] is not None and hi < best[0].total:
                return
        else:
            if hi <= query.bound:
                return
            if best[0] is not None and lo > best[0].total:
                return
        chosen.append(i)
        rec(i + 1, c + 1, s + vals[i])
        chosen.pop()
        rec(i + 1, c, s)

    rec(0, 0, 0.0)
    if best[0] is not None and not exact[0]:
        best[0] = SubsetSolution(mask=best[0].mask, total=best[0].total, exact=False)
    return best[0]


def solve_subset(query: SubsetQuery, node_budget: int = 2_000_000) -> Optional[SubsetSolution]:
    """Best size-k subset for the query, or None if no subset qualifies.

    Exact meet-in-the-middle up to n = 30; branch and bound with a node
    budget beyond that (the solution carries exact=False if the budget ran
    out before the search completed).
    """
    n = len(query.values)
    if query.k > n:
        raise ValueError("k exceeds the number of values")
    if n <= _MITM_LIMIT:
        return _solve_mitm(query)
    return _solve_bnb(query, node_budget)
