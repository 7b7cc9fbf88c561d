"""Pooled-testing prevalence estimation and vector-index risk annotation.

Testing happens at pool level, so per-mosquito infection prevalence must be
estimated from pool pass/fail results. The estimate maximizes

    L(p) = prod_i [1 - (1-p)^n_i]^y_i [(1-p)^n_i]^(1-y_i)

over groups of pools, and feeds the vector-index risk

    risk = avg_abundance * pools_on_day * prevalence / 1000

with avg_abundance = mosquito_count_week / pools_in_week.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

from .data_model import Dataset

MLE_TOL = 1e-10
MLE_MAX_ITER = 200

GROUPINGS = ("trap_week", "trap_day")


class GroupConsistencyError(Exception):
    """Pools in one group disagree on their shared weekly counts."""


@dataclass(frozen=True)
class PoolGroup:
    """Pool sizes and test outcomes entering one prevalence estimate."""

    pool_sizes: tuple[int, ...]
    positives: tuple[bool, ...]

    def __post_init__(self):
        if len(self.pool_sizes) != len(self.positives):
            raise ValueError("pool_sizes and positives must have equal length")
        if not self.pool_sizes:
            raise ValueError("a pool group needs at least one pool")
        if any(n < 1 for n in self.pool_sizes):
            raise ValueError("pool sizes must be positive")


def _score(p: float, sizes, positives) -> float:
    # d/dp log L; positive pools push up, negative pools push down
    q = 1.0 - p
    total = 0.0
    for n, pos in zip(sizes, positives):
        qn = q**n
        if pos:
            total += n * q ** (n - 1) / (1.0 - qn)
        else:
            total -= n / q
    return total


def mle_prevalence(group: PoolGroup) -> float:
    """Maximum-likelihood per-mosquito prevalence for a group of pools.

    Returns 0 when all pools are negative and 1 when all are positive (the
    likelihood is then monotone with no interior maximum; the all-positive
    case carries a warning). Otherwise solved by bracketed bisection on the
    score function to absolute tolerance 1e-10.
    """
    n_pos = sum(group.positives)
    if n_pos == 0:
        return 0.0
    if n_pos == len(group.positives):
        warnings.warn(
            "all pools positive: prevalence estimate saturates at 1", stacklevel=2
        )
        return 1.0

    lo, hi = 1e-15, 1.0 - 1e-15
    for _ in range(MLE_MAX_ITER):
        if hi - lo < MLE_TOL:
            break
        mid = 0.5 * (lo + hi)
        if _score(mid, group.pool_sizes, group.positives) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def vector_index(avg_abundance: float, pools_on_day: int, mle: float) -> float:
    """Abundance-weighted prevalence: avg_abundance * pools_on_day * mle / 1000."""
    if avg_abundance < 0:
        raise ValueError("avg_abundance must be non-negative")
    if pools_on_day < 1:
        raise ValueError("pools_on_day must be >= 1")
    if not 0.0 <= mle <= 1.0:
        raise ValueError("mle must lie in [0, 1]")
    return avg_abundance * pools_on_day * mle / 1000.0


def annotate_risk(dataset: Dataset, grouping: str = "trap_week") -> Dataset:
    """Fill every pool's ``risk`` field; returns a new Dataset.

    Pools are grouped per trap by week (default) or by collection day; the
    group's prevalence estimate is combined with each pool's own abundance
    figures. Groups never span traps.
    """
    if grouping not in GROUPINGS:
        raise ValueError(f"grouping must be one of {GROUPINGS}")

    def key(p):
        base = (p.trap_id, p.year, p.week)
        return base if grouping == "trap_week" else base + (p.day_of_week,)

    groups: dict[tuple, list[int]] = {}
    for i, p in enumerate(dataset.pools):
        groups.setdefault(key(p), []).append(i)

    risks: list[float] = [0.0] * len(dataset.pools)
    saturated = 0
    for gkey, idxs in groups.items():
        members = [dataset.pools[i] for i in idxs]
        weekly = {(m.mosquito_count_week, m.pools_in_week) for m in members}
        if len(weekly) > 1:
            raise GroupConsistencyError(
                f"group {gkey}: inconsistent mosquito_count_week/pools_in_week values {sorted(weekly)}"
            )
        group = PoolGroup(
            pool_sizes=tuple(m.pool_size for m in members),
            positives=tuple(m.test_positive for m in members),
        )
        with warnings.catch_warnings():
            # all-positive saturation is reported once per dataset below
            warnings.simplefilter("ignore")
            mle = mle_prevalence(group)
        if all(group.positives):
            saturated += 1
        for i, m in zip(idxs, members):
            avg_abundance = m.mosquito_count_week / m.pools_in_week
            risks[i] = vector_index(avg_abundance, m.pools_on_day, mle)
    if saturated:
        warnings.warn(
            f"{saturated} of {len(groups)} groups had every pool positive; "
            "their prevalence estimates saturate at 1",
            stacklevel=2,
        )

    pools = tuple(replace(p, risk=risks[i]) for i, p in enumerate(dataset.pools))
    return replace(dataset, pools=pools)
