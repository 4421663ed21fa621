"""Two-sided Mann-Whitney rank-sum test.

Exact permutation enumeration for small samples (both sizes <= 8, the scale
of a per-setup run count here); otherwise the tie-corrected normal
approximation with continuity correction.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

EXACT_LIMIT = 8


@dataclass(frozen=True)
class RankSumResult:
    u: float         # U statistic of the first sample
    p_value: float   # two-sided
    method: str      # "exact" or "normal"


def _midranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _u_from_rank_sum(rank_sum: float, n1: int, n2: int) -> float:
    # Wins convention: U = number of (x, y) pairs with x ranked above y.
    return rank_sum - n1 * (n1 + 1) / 2.0


def _exact_p(ranks: list[float], n1: int, u1: float) -> float:
    """Two-sided tail probability of U over all assignments of the pooled
    ranks to the first sample."""
    n = len(ranks)
    n2 = n - n1
    u_lo = min(u1, n1 * n2 - u1)
    u_hi = max(u1, n1 * n2 - u1)
    total = 0
    low_tail = 0
    high_tail = 0
    for combo in itertools.combinations(range(n), n1):
        u = _u_from_rank_sum(sum(ranks[i] for i in combo), n1, n2)
        total += 1
        if u <= u_lo + 1e-12:
            low_tail += 1
        if u >= u_hi - 1e-12:
            high_tail += 1
    return min(1.0, (low_tail + high_tail) / total)


def _normal_p(ranks: list[float], n1: int, u1: float) -> float:
    n = len(ranks)
    n2 = n - n1
    # Tie correction: 1 - sum(t^3 - t)/(n^3 - n) over tie groups.
    counts: dict[float, int] = {}
    for r in ranks:
        counts[r] = counts.get(r, 0) + 1
    tie = 1.0 - sum(c ** 3 - c for c in counts.values()) / float(n ** 3 - n)
    if tie == 0.0:
        return 1.0  # all values identical
    sd = math.sqrt(tie * n1 * n2 * (n + 1) / 12.0)
    big_u = max(u1, n1 * n2 - u1)
    z = (big_u - n1 * n2 / 2.0 - 0.5) / sd  # 0.5: continuity correction
    return min(1.0, 2.0 * 0.5 * math.erfc(z / math.sqrt(2.0)))


def rank_sum(x: Sequence[float], y: Sequence[float]) -> RankSumResult:
    """Two-sided test that x and y come from the same distribution."""
    n1, n2 = len(x), len(y)
    if n1 < 1 or n2 < 1:
        raise ValueError("rank_sum needs non-empty samples")
    ranks = _midranks(list(x) + list(y))
    u1 = _u_from_rank_sum(sum(ranks[:n1]), n1, n2)
    if n1 <= EXACT_LIMIT and n2 <= EXACT_LIMIT:
        return RankSumResult(u=u1, p_value=_exact_p(ranks, n1, u1), method="exact")
    return RankSumResult(u=u1, p_value=_normal_p(ranks, n1, u1), method="normal")


def bonferroni(p_values: Sequence[float]) -> list[float]:
    """Corrected p-values for a family of comparisons, capped at 1."""
    m = len(p_values)
    return [min(1.0, p * m) for p in p_values]
