"""Rank statistics used to filter kernel weights.

Two-sided Mann-Whitney p-values with a size-gated switch: small samples
get the exact permutation distribution (tie-aware, computed by dynamic
programming over integer doubled mid-ranks), larger samples get the
normal approximation with tie correction and continuity correction.
"""

from __future__ import annotations

import math

import numpy as np


def _doubled_midranks(pooled: np.ndarray) -> np.ndarray:
    """Mid-ranks of the pooled sample, doubled so ties stay integers."""
    order = np.argsort(pooled, kind="stable")
    sorted_vals = pooled[order]
    n = len(pooled)
    doubled = np.empty(n, dtype=np.int64)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        # Tied block occupying ranks i+1..j+1 shares rank (i+j+2)/2.
        doubled[order[i:j + 1]] = i + j + 2
        i = j + 1
    return doubled


def exact_extreme_counts(sample0, sample1) -> tuple[int, int]:
    """Exact permutation tail as a pair of integers (extreme, total).

    `extreme` counts the label assignments whose |U - n0*n1/2| is at least
    the observed distance; `total` is C(n0+n1, n0). The two-sided exact
    p-value is their exact ratio.
    """
    a = np.asarray(sample0, dtype=np.float64)
    b = np.asarray(sample1, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    n0, n1 = len(a), len(b)
    doubled = _doubled_midranks(np.concatenate([a, b]))
    # Distance statistic in doubled-rank units: |2U0 - n0*n1| =
    # |sum(doubled ranks of sample0) - n0*(n0+1) - n0*n1|, all integers.
    shift = n0 * (n0 + 1) + n0 * n1
    observed = abs(int(doubled[:n0].sum()) - shift)

    # counts[k][s] = number of k-subsets of the pooled ranks with doubled
    # rank sum s. Python ints keep the arithmetic exact.
    max_sum = int(doubled.sum())
    counts = [[0] * (max_sum + 1) for _ in range(n0 + 1)]
    counts[0][0] = 1
    for dr in doubled.tolist():
        for k in range(n0, 0, -1):
            row_prev = counts[k - 1]
            row = counts[k]
            for s in range(max_sum - dr, -1, -1):
                c = row_prev[s]
                if c:
                    row[s + dr] += c
    total = 0
    extreme = 0
    for s, c in enumerate(counts[n0]):
        if not c:
            continue
        total += c
        if abs(s - shift) >= observed:
            extreme += c
    return extreme, total


def _normal_p(doubled: np.ndarray, n0: int, n1: int) -> float:
    n = n0 + n1
    r0 = doubled[:n0].sum() / 2.0
    u0 = r0 - n0 * (n0 + 1) / 2.0
    u = max(u0, n0 * n1 - u0)
    mu = n0 * n1 / 2.0
    _, tie_sizes = np.unique(doubled, return_counts=True)
    tie_term = float((tie_sizes.astype(np.float64) ** 3 - tie_sizes).sum())
    var = n0 * n1 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0.0:
        return 1.0
    z = (u - mu - 0.5) / math.sqrt(var)
    return min(1.0, max(0.0, math.erfc(z / math.sqrt(2.0))))


def mann_whitney_u(sample0, sample1, exact_threshold: int = 10) -> float:
    """Two-sided Mann-Whitney p-value for two independent samples.

    Exact permutation distribution when both samples have at most
    `exact_threshold` observations, normal approximation with tie and
    continuity corrections otherwise.
    """
    a = np.asarray(sample0, dtype=np.float64)
    b = np.asarray(sample1, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("samples must be 1-d")
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("samples must be finite")
    if len(a) <= exact_threshold and len(b) <= exact_threshold:
        extreme, total = exact_extreme_counts(a, b)
        return extreme / total
    doubled = _doubled_midranks(np.concatenate([a, b]))
    return _normal_p(doubled, len(a), len(b))
