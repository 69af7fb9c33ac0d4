"""Rank statistics used by the comparison analyses.

Two-sided Mann-Whitney U with midranks. Small samples get an exact
p-value computed from the full permutation distribution of the rank sum
(a subset-sum dynamic program over doubled midranks, which stays exact
in the presence of ties); larger samples use the normal approximation
with tie and continuity corrections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, ROUND_FLOOR
from typing import Sequence

import numpy as np

# Full permutation distribution is computed when the pooled sample is
# at most this large; beyond it the DP table cost outweighs the gain.
EXACT_LIMIT = 60


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class MannWhitneyResult:
    u_statistic: float
    p_value: float
    method: str  # "exact" or "normal_approx"


def midranks(pooled: Sequence[float]) -> np.ndarray:
    """Fractional ranks (1-based); tied values share the mean rank."""
    arr = np.asarray(pooled, dtype=float)
    order = np.argsort(arr, kind="mergesort")
    ranks = np.empty(len(arr), dtype=float)
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def mann_whitney_u(a: Sequence[float], b: Sequence[float]) -> MannWhitneyResult:
    """Two-sided Mann-Whitney U test of samples a and b."""
    n1, n2 = len(a), len(b)
    if n1 == 0 or n2 == 0:
        raise StatsError("both samples must be non-empty")
    pooled = [float(v) for v in a] + [float(v) for v in b]
    for v in pooled:
        if not math.isfinite(v):
            raise StatsError(f"non-finite sample value {v!r}")
    ranks = midranks(pooled)
    r1 = float(ranks[:n1].sum())
    u1 = r1 - n1 * (n1 + 1) / 2.0

    if n1 + n2 <= EXACT_LIMIT:
        p = _exact_p(ranks, n1)
        return MannWhitneyResult(u_statistic=u1, p_value=p, method="exact")
    p = _normal_p(ranks, n1, n2, u1)
    return MannWhitneyResult(u_statistic=u1, p_value=p, method="normal_approx")


def _exact_p(ranks: np.ndarray, n1: int) -> float:
    """P(|S - mu| >= |s_obs - mu|) over all equally likely n1-subsets.

    S is the rank sum of the first group. Doubling midranks makes every
    weight an integer, so the subset-sum DP and the comparison against
    the observed deviation are exact.
    """
    doubled = np.rint(ranks * 2).astype(np.int64)
    n = len(ranks)
    s_obs = int(doubled[:n1].sum())
    mu2 = n1 * (n + 1)  # mean of the doubled rank sum
    dev = abs(s_obs - mu2)

    smax = int(doubled.sum())
    # counts[k, s] = number of k-subsets with doubled rank sum s
    counts = np.zeros((n1 + 1, smax + 1), dtype=np.float64)
    counts[0, 0] = 1.0
    for d in doubled:
        d = int(d)
        counts[1:, d:] += counts[:-1, : smax + 1 - d]
    dist = counts[n1]
    total = dist.sum()
    sums = np.arange(smax + 1)
    mass = dist[np.abs(sums - mu2) >= dev].sum()
    return float(min(1.0, mass / total))


def _normal_p(ranks: np.ndarray, n1: int, n2: int, u1: float) -> float:
    n = n1 + n2
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float(((tie_counts**3) - tie_counts).sum())
    sigma_sq = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if sigma_sq <= 0:
        return 1.0  # all pooled values identical
    mu = n1 * n2 / 2.0
    # continuity correction toward the mean
    z = max(abs(u1 - mu) - 0.5, 0.0) / math.sqrt(sigma_sq)
    return min(1.0, math.erfc(z / math.sqrt(2.0)))


def mode_estimate(
    values: Sequence[float | Decimal], bin_width: float | Decimal
) -> Decimal:
    """Center of the most populated half-open histogram bin.

    Bins are [k*w, (k+1)*w); ties between equally full bins resolve to
    the lower bin. Decimal arithmetic keeps bin assignment of 2-decimal
    percentages exact for widths like 0.5.
    """
    if not values:
        raise StatsError("mode of empty input")
    w = Decimal(str(bin_width)) if not isinstance(bin_width, Decimal) else bin_width
    if w <= 0:
        raise StatsError("bin_width must be positive")
    counts: dict[int, int] = {}
    for v in values:
        dv = Decimal(str(v)) if not isinstance(v, Decimal) else v
        k = int((dv / w).to_integral_value(rounding=ROUND_FLOOR))
        counts[k] = counts.get(k, 0) + 1
    best = max(counts.items(), key=lambda kv: (kv[1], -kv[0]))
    return (best[0] + Decimal("0.5")) * w
