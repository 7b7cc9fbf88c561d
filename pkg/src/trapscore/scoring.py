"""Trap scores from cross-validated confusion statistics.

The headline score is the weighted mean (m * avg_spec + avg_sens) / (m + 1)
over the traps whose sensitivity is computable (at least one positive pool
in some test fold). The specificity-only variant avg_spec applies to every
trap and backs the broader analysis of false-alarm behaviour.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .evaluation import TrapConfusion

DEFAULT_M = 0.9
HISTOGRAM_BINS = 20


@dataclass(frozen=True)
class TrapScorecard:
    trap_id: str
    avg_sens: float | None
    avg_spec: float | None
    score: float | None
    score_prime: float | None
    m: float
    in_tstar: bool


@dataclass(frozen=True)
class ScoreReport:
    scorecards: tuple[TrapScorecard, ...]
    m: float
    summary: dict


def select_tstar(confusions: dict[str, TrapConfusion]) -> set[str]:
    """Traps whose sensitivity is defined: some test fold held a positive pool."""
    return {t for t, c in confusions.items() if c.avg_sens is not None}


def score(avg_sens: float, avg_spec: float, m: float) -> float:
    """Weighted mean (m * avg_spec + avg_sens) / (m + 1)."""
    if avg_sens is None:
        raise ValueError("avg_sens undefined: score applies only to traps in T*")
    if not 0.0 < m <= 1.0:
        raise ValueError("m must lie in (0, 1]")
    if not (0.0 <= avg_sens <= 1.0 and 0.0 <= avg_spec <= 1.0):
        raise ValueError("avg_sens and avg_spec must lie in [0, 1]")
    return (m * avg_spec + avg_sens) / (m + 1.0)


def specificity_score(avg_spec: float) -> float:
    """Specificity-only score, applicable to all traps."""
    if avg_spec is None:
        raise ValueError("avg_spec undefined: trap has no negative pools in any fold")
    return avg_spec


def _histogram(values) -> list[int]:
    counts, _ = np.histogram(values, bins=HISTOGRAM_BINS, range=(0.0, 1.0))
    return [int(c) for c in counts]


def score_report(confusions: dict[str, TrapConfusion], m: float = DEFAULT_M) -> ScoreReport:
    """Scorecards for every trap plus summary statistics.

    The weighted score covers T*; the specificity-only variant covers every
    trap with a defined specificity. Summary holds mean/min/max and a
    20-bin histogram for each, or None for an empty T*.
    """
    tstar = select_tstar(confusions)
    cards = []
    for trap_id in sorted(confusions):
        c = confusions[trap_id]
        sens, spec = c.avg_sens, c.avg_spec
        in_tstar = trap_id in tstar
        card = TrapScorecard(
            trap_id=trap_id,
            avg_sens=sens,
            avg_spec=spec,
            score=score(sens, spec, m) if in_tstar and spec is not None else None,
            score_prime=spec,
            m=m,
            in_tstar=in_tstar,
        )
        cards.append(card)

    def section(values):
        if not values:
            return None
        arr = np.asarray(values, dtype=float)
        return {
            "count": len(values),
            "mean": float(arr.mean()),
            "min": float(arr.min()),
            "max": float(arr.max()),
            "histogram": _histogram(arr),
        }

    summary = {
        "m": m,
        "weighted": section([c.score for c in cards if c.score is not None]),
        "specificity_only": section([c.score_prime for c in cards if c.score_prime is not None]),
    }
    return ScoreReport(scorecards=tuple(cards), m=m, summary=summary)


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def read_scores_csv(path: str | Path, m: float = DEFAULT_M) -> list[TrapScorecard]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cards = []
        for row in reader:
            cards.append(
                TrapScorecard(
                    trap_id=row["trap_id"],
                    avg_sens=float(row["avg_sens"]) if row["avg_sens"] else None,
                    avg_spec=float(row["avg_spec"]) if row["avg_spec"] else None,
                    score=float(row["score"]) if row["score"] else None,
                    score_prime=float(row["score_prime"]) if row["score_prime"] else None,
                    m=m,
                    in_tstar=row["in_tstar"] == "1",
                )
            )
    return cards


def write_scores_csv(path: str | Path, report: ScoreReport, sites) -> None:
    """Scores CSV: trap_id,latitude,longitude,avg_sens,avg_spec,score,score_prime,in_tstar."""
    table = {s.trap_id: s for s in sites}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(
            ["trap_id", "latitude", "longitude", "avg_sens", "avg_spec", "score", "score_prime", "in_tstar"]
        )
        for card in report.scorecards:
            site = table.get(card.trap_id)
            lat = repr(site.latitude) if site else ""
            lon = repr(site.longitude) if site else ""
            out.writerow(
                [
                    card.trap_id,
                    lat,
                    lon,
                    _fmt(card.avg_sens),
                    _fmt(card.avg_spec),
                    _fmt(card.score),
                    _fmt(card.score_prime),
                    int(card.in_tstar),
                ]
            )
