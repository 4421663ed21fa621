"""Rank-sum test against brute-force enumeration and scipy."""
import itertools

import numpy as np
import pytest
import scipy.stats

from swarmlab.stats import bonferroni, rank_sum


def brute_force_p(x, y):
    """Independent oracle: enumerate every assignment of the pooled values."""
    pooled = list(x) + list(y)
    n1 = len(x)
    # midranks
    order = sorted(range(len(pooled)), key=pooled.__getitem__)
    ranks = [0.0] * len(pooled)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2.0 + 1.0
        i = j + 1
    n2 = len(pooled) - n1

    def u_of(combo):
        return sum(ranks[i] for i in combo) - n1 * (n1 + 1) / 2.0

    u_obs = u_of(range(n1))
    lo, hi = min(u_obs, n1 * n2 - u_obs), max(u_obs, n1 * n2 - u_obs)
    us = [u_of(c) for c in itertools.combinations(range(len(pooled)), n1)]
    p = (sum(u <= lo + 1e-12 for u in us) + sum(u >= hi - 1e-12 for u in us)) / len(us)
    return min(1.0, p)


def test_worked_example_separated_samples():
    res = rank_sum([1, 2, 3, 4], [10, 11, 12, 13])
    assert res.method == "exact"
    assert res.u == 0.0  # x never beats y
    assert res.p_value == pytest.approx(2 / 70, rel=1e-12)
    assert res.p_value == pytest.approx(0.0286, abs=5e-5)


def test_identical_samples_p_one():
    res = rank_sum([3, 3, 3], [3, 3, 3])
    assert res.p_value == 1.0


def test_matches_enumeration_oracle_small_samples():
    rng = np.random.default_rng(31)
    for _ in range(60):
        n1 = int(rng.integers(2, 7))
        n2 = int(rng.integers(2, 7))
        x = list(rng.integers(0, 8, size=n1))  # small range forces ties
        y = list(rng.integers(0, 8, size=n2))
        got = rank_sum(x, y)
        assert got.method == "exact"
        assert got.p_value == pytest.approx(brute_force_p(x, y), rel=1e-12)


def test_matches_enumeration_at_paper_run_count():
    rng = np.random.default_rng(32)
    for _ in range(5):
        x = list(rng.normal(0, 1, size=8))
        y = list(rng.normal(0.5, 1, size=8))
        got = rank_sum(x, y)
        assert got.method == "exact"
        assert got.p_value == pytest.approx(brute_force_p(x, y), rel=1e-12)


def test_normal_approximation_for_large_samples():
    rng = np.random.default_rng(33)
    x = list(rng.normal(0, 1, size=25))
    y = list(rng.normal(0.8, 1, size=30))
    got = rank_sum(x, y)
    assert got.method == "normal"
    ref = scipy.stats.mannwhitneyu(x, y, alternative="two-sided", method="asymptotic")
    assert got.p_value == pytest.approx(ref.pvalue, rel=1e-9)
    assert got.u == pytest.approx(ref.statistic)


def test_normal_approximation_with_heavy_ties():
    rng = np.random.default_rng(35)
    for _ in range(20):
        x = list(rng.integers(0, 6, size=25))
        y = list(rng.integers(1, 7, size=30))
        got = rank_sum(x, y)
        ref = scipy.stats.mannwhitneyu(x, y, alternative="two-sided",
                                       method="asymptotic")
        assert got.p_value == pytest.approx(ref.pvalue, rel=1e-9)


def test_exact_agrees_with_scipy_exact_without_ties():
    rng = np.random.default_rng(34)
    for _ in range(10):
        x = list(rng.normal(0, 1, size=6))
        y = list(rng.normal(1, 1, size=7))
        got = rank_sum(x, y)
        ref = scipy.stats.mannwhitneyu(x, y, alternative="two-sided", method="exact")
        assert got.p_value == pytest.approx(ref.pvalue, rel=1e-9)


def test_bonferroni():
    assert bonferroni([0.01, 0.2, 0.5]) == pytest.approx([0.03, 0.6, 1.0])


def test_empty_sample_rejected():
    with pytest.raises(ValueError):
        rank_sum([], [1.0])
