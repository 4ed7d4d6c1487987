"""Negativity-aware relevance and ranking metrics.

Recommended items the user never rated are ignored: they count neither as
false positives nor anywhere else. "Positive" always means rating value
strictly greater than the negativity threshold. Ranked metrics are
evaluated on a window of the first n positions; gains use 2^r - 1 and
losses 2^(-r) - 1 with a log2 rank discount.

The kernels are deliberately plain Python sums in rank order so that an
independent re-derivation produces bit-identical values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

Holdout = Mapping[int, float]


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int


def _window(rec: Sequence[int], n: int | None) -> Sequence[int]:
    if n is None:
        return rec
    if n < 0:
        raise ValueError("window length must be non-negative")
    return rec[:n]


def confusion(rec: Sequence[int], holdout: Holdout, threshold: float, n: int | None = None) -> Confusion:
    """Count tp/fp/tn/fn of the first n recommendations against the holdout.

    Items outside the holdout are skipped entirely; unrecommended holdout
    items become fn (positives) or tn (negatives).
    """
    seen = set()
    tp = fp = 0
    for item in _window(rec, n):
        if item in holdout:
            seen.add(item)
            if holdout[item] > threshold:
                tp += 1
            else:
                fp += 1
    fn = sum(1 for item, v in holdout.items() if v > threshold and item not in seen)
    tn = sum(1 for item, v in holdout.items() if v <= threshold and item not in seen)
    return Confusion(tp=tp, fp=fp, tn=tn, fn=fn)


def precision(conf: Confusion) -> float:
    denom = conf.tp + conf.fp
    return conf.tp / denom if denom else 0.0


def recall(conf: Confusion) -> float:
    denom = conf.tp + conf.fn
    return conf.tp / denom if denom else 0.0


def fpr(conf: Confusion) -> float:
    """False positive rate fp / (fp + tn), the ROC-curve x axis."""
    denom = conf.fp + conf.tn
    return conf.fp / denom if denom else 0.0


def _gain(value: float, rank: int) -> float:
    return (2.0 ** value - 1.0) / math.log2(rank + 1)


def _loss(value: float, rank: int) -> float:
    return (2.0 ** (-value) - 1.0) / (-math.log2(rank + 1))


def dcg(rec: Sequence[int], holdout: Holdout, threshold: float, n: int | None = None) -> float:
    """Discounted cumulative gain over matched positives; negatives and
    unrated recommendations contribute nothing."""
    total = 0.0
    for rank, item in enumerate(_window(rec, n), start=1):
        if item in holdout and holdout[item] > threshold:
            total += _gain(holdout[item], rank)
    return total


def idcg(holdout: Holdout, threshold: float) -> float:
    """Gain of the ideal ordering: all holdout positives at ranks 1, 2, ..."""
    values = sorted((v for v in holdout.values() if v > threshold), reverse=True)
    total = 0.0
    for rank, value in enumerate(values, start=1):
        total += _gain(value, rank)
    return total


def ndcg(rec: Sequence[int], holdout: Holdout, threshold: float, n: int | None = None) -> float:
    ideal = idcg(holdout, threshold)
    if ideal == 0.0:
        return 0.0
    return dcg(rec, holdout, threshold, n) / ideal


def dcl(rec: Sequence[int], holdout: Holdout, threshold: float, n: int | None = None) -> float:
    """Discounted cumulative loss over matched negatives; every term is
    positive and shrinks as the match moves deeper."""
    total = 0.0
    for rank, item in enumerate(_window(rec, n), start=1):
        if item in holdout and holdout[item] <= threshold:
            total += _loss(holdout[item], rank)
    return total


def idcl(holdout: Holdout, threshold: float, n: int, arrangement: str = "deepest") -> float:
    """Loss of the ideal placement of the holdout negatives.

    "deepest" (default): negatives sit at the bottom of the top-n window,
    ranks n, n-1, ..., most irrelevant deepest; negatives that do not fit
    in the window are dropped. "top" is the alternative reading that ranks
    the negatives alone at 1, 2, ...
    """
    values = sorted(v for v in holdout.values() if v <= threshold)
    if arrangement == "deepest":
        placed = [(n - offset, value) for offset, value in enumerate(values) if n - offset >= 1]
        placed.sort(key=lambda rv: rv[0])
    elif arrangement == "top":
        placed = list(enumerate(values, start=1))
    else:
        raise ValueError(f"unknown arrangement {arrangement!r}")
    total = 0.0
    for rank, value in placed:
        total += _loss(value, rank)
    return total


def ndcl(
    rec: Sequence[int],
    holdout: Holdout,
    threshold: float,
    n: int | None = None,
    arrangement: str = "deepest",
) -> float:
    window = len(rec) if n is None else n
    ideal = idcl(holdout, threshold, window, arrangement)
    if ideal == 0.0:
        return 0.0
    return dcl(rec, holdout, threshold, n) / ideal


METRICS = ("precision", "recall", "fpr", "ndcg", "ndcl")


def user_curves(
    rec: Sequence[int],
    holdout: Holdout,
    threshold: float,
    n_max: int,
    arrangement: str = "deepest",
) -> dict[str, list[float]]:
    """All five metrics at every n in 1..n_max for one user, in one pass.

    Values are NaN where the metric is undefined for this user (so callers
    can exclude the user from that average). Sums run in rank order, which
    keeps every value bit-identical to the one-shot kernels.
    """
    n_pos = sum(1 for v in holdout.values() if v > threshold)
    n_neg = len(holdout) - n_pos
    ideal_gain = idcg(holdout, threshold)
    out = {name: [] for name in METRICS}
    tp = fp = 0
    gain = loss = 0.0
    for n in range(1, n_max + 1):
        if n <= len(rec):
            item = rec[n - 1]
            if item in holdout:
                value = holdout[item]
                if value > threshold:
                    tp += 1
                    gain += _gain(value, n)
                else:
                    fp += 1
                    loss += _loss(value, n)
        matched = tp + fp
        out["precision"].append(tp / matched if matched else math.nan)
        out["recall"].append(tp / n_pos if n_pos else math.nan)
        out["fpr"].append(fp / n_neg if n_neg else math.nan)
        out["ndcg"].append(gain / ideal_gain if ideal_gain else math.nan)
        if n_neg:
            out["ndcl"].append(loss / idcl(holdout, threshold, n, arrangement))
        else:
            out["ndcl"].append(math.nan)
    return out


@dataclass
class MetricCurves:
    """Cross-validated metric curves: per-fold means plus CV mean and std."""

    ns: np.ndarray
    fold_means: dict[str, np.ndarray]  # folds x n
    mean: dict[str, np.ndarray]
    std: dict[str, np.ndarray]


def aggregate_curves(per_fold: Sequence[Mapping[str, np.ndarray]]) -> MetricCurves:
    """Average user curves within each fold, then mean/std across folds.

    Input: per fold, a mapping metric name -> (users x n) array with NaN
    marking users for whom the metric is undefined at that n (they are left
    out of that average). A fold with no defined user at some n contributes
    0 there. Std is the population convention.
    """
    if not per_fold:
        raise ValueError("need at least one fold")
    names = list(per_fold[0].keys())
    n_cols = None
    fold_means: dict[str, list[np.ndarray]] = {name: [] for name in names}
    for fold in per_fold:
        for name in names:
            arr = np.asarray(fold[name], dtype=np.float64)
            if arr.ndim != 2 or arr.shape[0] == 0:
                raise ValueError("each fold needs a non-empty users x n array")
            if n_cols is None:
                n_cols = arr.shape[1]
            elif arr.shape[1] != n_cols:
                raise ValueError("folds disagree on the n range")
            defined = ~np.isnan(arr)
            counts = defined.sum(axis=0)
            sums = np.where(defined, arr, 0.0).sum(axis=0)
            fold_means[name].append(np.where(counts > 0, sums / np.maximum(counts, 1), 0.0))
    stacked = {name: np.vstack(rows) for name, rows in fold_means.items()}
    return MetricCurves(
        ns=np.arange(1, n_cols + 1),
        fold_means=stacked,
        mean={name: arr.mean(axis=0) for name, arr in stacked.items()},
        std={name: arr.std(axis=0, ddof=0) for name, arr in stacked.items()},
    )


def rmse(predicted: Sequence[float], actual: Sequence[float]) -> float:
    predicted = np.asarray(predicted, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if predicted.shape != actual.shape:
        raise ValueError("prediction and actual vectors differ in length")
    if predicted.size == 0:
        raise ValueError("cannot compute RMSE of an empty set")
    return float(np.sqrt(np.mean((predicted - actual) ** 2)))
