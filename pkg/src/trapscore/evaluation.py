"""Cross-validated trap evaluation: folds, ROC curves, weighted thresholds.

Each year's pools are split into 5 folds; fold f's test set pools rows from
every year. Per fold, the spatial model is fit on the other four and its
test predictions are classified at the threshold maximizing
TPR(k) - m * FPR(k). Per-trap confusion counts accumulate across folds into
average sensitivity/specificity, left undefined when a trap never has the
relevant class in a test split.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data_model import Dataset
from . import glmm

N_FOLDS = 5
THRESHOLD_SPLITS = ("test", "train")


class FoldFitError(Exception):
    def __init__(self, fold: int, cause: Exception):
        super().__init__(f"model fit failed on fold {fold}: {cause}")
        self.fold = fold
        self.cause = cause


@dataclass(frozen=True)
class FoldAssignment:
    fold_index: tuple[int, ...]
    seed: int
    n_folds: int = N_FOLDS


@dataclass(frozen=True)
class RocCurve:
    """Operating points at every distinct threshold, ascending.

    Predicted-positive means prob strictly greater than the threshold, so
    threshold 0 gives (tpr, fpr) = (1, 1) and threshold 1 gives (0, 0) for
    probabilities in (0, 1).
    """

    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray


@dataclass
class TrapConfusion:
    """Per-fold confusion counts for one trap, with fold-averaged rates."""

    trap_id: str
    tp: list[int]
    fn: list[int]
    tn: list[int]
    fp: list[int]

    @property
    def avg_sens(self) -> float | None:
        rates = [t / (t + f) for t, f in zip(self.tp, self.fn) if t + f > 0]
        return sum(rates) / len(rates) if rates else None

    @property
    def avg_spec(self) -> float | None:
        rates = [t / (t + f) for t, f in zip(self.tn, self.fp) if t + f > 0]
        return sum(rates) / len(rates) if rates else None

    @property
    def n_pos(self) -> int:
        return sum(self.tp) + sum(self.fn)

    @property
    def n_neg(self) -> int:
        return sum(self.tn) + sum(self.fp)


@dataclass(frozen=True)
class CrossValidationResult:
    confusions: dict[str, TrapConfusion]
    fold_rocs: tuple[RocCurve, ...]
    fold_thresholds: tuple[float, ...]
    m: float
    seed: int


def make_folds(dataset: Dataset, seed: int, n_folds: int = N_FOLDS) -> FoldAssignment:
    """Assign each pool a fold index, stratified by year, deterministic in seed.

    Within a year, pools are shuffled and dealt round-robin, so fold sizes
    differ by at most one. Years with fewer pools than folds are dealt the
    same way, with a warning.
    """
    if not dataset.pools:
        raise ValueError("cannot fold an empty dataset")
    rng = np.random.default_rng(seed)
    by_year: dict[int, list[int]] = {}
    for i, p in enumerate(dataset.pools):
        by_year.setdefault(p.year, []).append(i)

    fold = np.zeros(len(dataset.pools), dtype=int)
    for year in sorted(by_year):
        idxs = np.array(by_year[year])
        if len(idxs) < n_folds:
            warnings.warn(
                f"year {year} has only {len(idxs)} pools; folds will be uneven",
                stacklevel=2,
            )
        order = rng.permutation(len(idxs))
        fold[idxs[order]] = np.arange(len(idxs)) % n_folds
    return FoldAssignment(fold_index=tuple(int(f) for f in fold), seed=seed, n_folds=n_folds)


def roc_curve(labels, probs) -> RocCurve:
    """Operating points of the prob > threshold classifier at all thresholds.

    Thresholds are the distinct predicted probabilities plus sentinels 0 and
    1. Requires both classes.
    """
    labels = np.asarray(labels, dtype=bool)
    probs = np.asarray(probs, dtype=float)
    if labels.shape != probs.shape:
        raise ValueError("labels and probs must have the same length")
    n_pos = int(labels.sum())
    n_neg = int(len(labels) - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_curve needs both classes present")

    thresholds = np.unique(np.concatenate([probs, [0.0, 1.0]]))
    pos_sorted = np.sort(probs[labels])
    neg_sorted = np.sort(probs[~labels])
    # count of scores strictly greater than each threshold
    tp = len(pos_sorted) - np.searchsorted(pos_sorted, thresholds, side="right")
    fp = len(neg_sorted) - np.searchsorted(neg_sorted, thresholds, side="right")
    return RocCurve(thresholds=thresholds, tpr=tp / n_pos, fpr=fp / n_neg)


def optimal_threshold(roc: RocCurve, m: float) -> float:
    """Threshold maximizing TPR - m * FPR; ties resolve to the smaller value.

    The smaller-threshold tie-break favors sensitivity.
    """
    if not 0.0 < m <= 1.0:
        raise ValueError("m must lie in (0, 1]")
    objective = roc.tpr - m * roc.fpr
    return float(roc.thresholds[int(np.argmax(objective))])


def _pools_subset(dataset: Dataset, pools) -> Dataset:
    return replace(dataset, pools=tuple(pools))


def cross_validate(
    dataset: Dataset,
    config: glmm.FitConfig,
    m: float,
    seed: int,
    threshold_split: str = "test",
    n_folds: int = N_FOLDS,
) -> CrossValidationResult:
    """Per-year 5-fold CV of the spatial model with per-trap confusion counts.

    The classification threshold is chosen per fold from the test-split ROC
    by default (``threshold_split="train"`` uses the training fit instead).
    A test split with a single class falls back to the training split for
    threshold selection.
    """
    if threshold_split not in THRESHOLD_SPLITS:
        raise ValueError(f"threshold_split must be one of {THRESHOLD_SPLITS}")
    if not 0.0 < m <= 1.0:
        raise ValueError("m must lie in (0, 1]")

    folds = make_folds(dataset, seed, n_folds)
    fold_arr = np.array(folds.fold_index)
    trap_ids = sorted({p.trap_id for p in dataset.pools})
    confusions = {
        t: TrapConfusion(t, [0] * n_folds, [0] * n_folds, [0] * n_folds, [0] * n_folds)
        for t in trap_ids
    }

    rocs: list[RocCurve] = []
    thresholds: list[float] = []
    for f in range(n_folds):
        test_mask = fold_arr == f
        train_pools = [p for p, is_test in zip(dataset.pools, test_mask) if not is_test]
        test_pools = [p for p, is_test in zip(dataset.pools, test_mask) if is_test]
        if not test_pools or not train_pools:
            raise FoldFitError(f, ValueError("empty train or test split"))
        try:
            model = glmm.fit(_pools_subset(dataset, train_pools), config)
            probs = glmm.predict_prob(model, test_pools, dataset)
            labels = np.array([bool(p.response) for p in test_pools])

            roc_source = threshold_split
            if roc_source == "test" and labels.min() == labels.max():
                roc_source = "train"
            if roc_source == "test":
                roc = roc_curve(labels, probs)
            else:
                train_probs = glmm.predict_prob(model, train_pools, dataset)
                train_labels = np.array([bool(p.response) for p in train_pools])
                roc = roc_curve(train_labels, train_probs)
            k = optimal_threshold(roc, m)
        except Exception as err:
            raise FoldFitError(f, err) from err

        rocs.append(roc)
        thresholds.append(k)
        predicted = probs > k
        for pool, lab, pred in zip(test_pools, labels, predicted):
            c = confusions[pool.trap_id]
            if lab and pred:
                c.tp[f] += 1
            elif lab:
                c.fn[f] += 1
            elif pred:
                c.fp[f] += 1
            else:
                c.tn[f] += 1

    return CrossValidationResult(
        confusions=confusions,
        fold_rocs=tuple(rocs),
        fold_thresholds=tuple(thresholds),
        m=m,
        seed=seed,
    )


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def write_confusion_csv(path: str | Path, confusions: dict[str, TrapConfusion]) -> None:
    """CSV export: trap_id,avg_sens,avg_spec,n_pos,n_neg (blank = undefined)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["trap_id", "avg_sens", "avg_spec", "n_pos", "n_neg"])
        for trap_id in sorted(confusions):
            c = confusions[trap_id]
            out.writerow([trap_id, _fmt(c.avg_sens), _fmt(c.avg_spec), c.n_pos, c.n_neg])


def write_roc_csv(path: str | Path, rocs) -> None:
    """CSV export of per-fold ROC points: fold,threshold,tpr,fpr."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["fold", "threshold", "tpr", "fpr"])
        for f, roc in enumerate(rocs):
            for k, t, fp in zip(roc.thresholds, roc.tpr, roc.fpr):
                out.writerow([f, repr(float(k)), repr(float(t)), repr(float(fp))])


@dataclass(frozen=True)
class ConfusionSummary:
    """Fold-averaged rates as re-read from a confusion CSV."""

    trap_id: str
    avg_sens: float | None
    avg_spec: float | None
    n_pos: int
    n_neg: int


def read_confusion_csv(path: str | Path) -> dict[str, ConfusionSummary]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        out = {}
        for row in reader:
            out[row["trap_id"]] = ConfusionSummary(
                trap_id=row["trap_id"],
                avg_sens=float(row["avg_sens"]) if row["avg_sens"] else None,
                avg_spec=float(row["avg_spec"]) if row["avg_spec"] else None,
                n_pos=int(row["n_pos"]),
                n_neg=int(row["n_neg"]),
            )
    return out
