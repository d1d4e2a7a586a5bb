"""ROC and precision-recall evaluation computed from first principles.

The positive class throughout is *normal driving*: the cosine score grows
with similarity to the normal template, so a good scorer ranks positives
above negatives.  Anomaly-as-positive AUCs are obtainable by flipping labels
and negating scores, which leaves ROC AUC unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LabeledScores:
    """Scores paired with binary labels (True = positive = normal)."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        y = np.asarray(self.labels, dtype=bool)
        if s.ndim != 1 or y.ndim != 1 or s.shape != y.shape:
            raise ValueError("scores and labels must be 1-D and equal length")
        if not np.all(np.isfinite(s)):
            raise ValueError("scores contain non-finite entries")
        if not (y.any() and (~y).any()):
            raise ValueError("both classes must be present")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "labels", y)


def _tie_groups(scores: np.ndarray):
    """Indices grouped by equal score, in descending score order."""
    order = np.argsort(-scores, kind="stable")
    groups = []
    start = 0
    for i in range(1, len(order) + 1):
        if i == len(order) or scores[order[i]] != scores[order[start]]:
            groups.append(order[start:i])
            start = i
    return groups


def roc_auc(ls: LabeledScores) -> float:
    """Area under the ROC curve via the Mann-Whitney statistic.

    Equals P(score_pos > score_neg) + 0.5 * P(score_pos == score_neg),
    computed with average ranks over tie groups.
    """
    s, y = ls.scores, ls.labels
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    order = np.argsort(s, kind="stable")
    ranks = np.empty(y.size, dtype=np.float64)
    sorted_s = s[order]
    i = 0
    while i < y.size:
        j = i
        while j < y.size and sorted_s[j] == sorted_s[i]:
            j += 1
        # average 1-based rank of the tie group [i, j)
        ranks[order[i:j]] = 0.5 * (i + 1 + j)
        i = j
    rank_sum_pos = float(ranks[y].sum())
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def pr_auc(ls: LabeledScores) -> float:
    """Average precision over descending score thresholds.

    Step-wise AP (sum of precision * recall increments); tie groups cross
    each threshold atomically.  Trapezoidal PR interpolation is deliberately
    avoided as it is optimistically biased.
    """
    s, y = ls.scores, ls.labels
    n_pos = int(y.sum())
    ap = 0.0
    tp = 0
    fp = 0
    prev_recall = 0.0
    for group in _tie_groups(s):
        tp += int(y[group].sum())
        fp += len(group) - int(y[group].sum())
        recall = tp / n_pos
        precision = tp / (tp + fp)
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap


def roc_curve_points(ls: LabeledScores) -> list[tuple[float, float]]:
    """(FPR, TPR) points at every tie-grouped threshold, plus the endpoints."""
    s, y = ls.scores, ls.labels
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    points = [(0.0, 0.0)]
    tp = 0
    fp = 0
    for group in _tie_groups(s):
        tp += int(y[group].sum())
        fp += len(group) - int(y[group].sum())
        points.append((fp / n_neg, tp / n_pos))
    return points


def pr_curve_points(ls: LabeledScores) -> list[tuple[float, float]]:
    """(recall, precision) points at every tie-grouped threshold."""
    s, y = ls.scores, ls.labels
    n_pos = int(y.sum())
    points = []
    tp = 0
    fp = 0
    for group in _tie_groups(s):
        tp += int(y[group].sum())
        fp += len(group) - int(y[group].sum())
        points.append((tp / n_pos, tp / (tp + fp)))
    return points


def dump_curves(ls: LabeledScores, roc_path: str, pr_path: str) -> None:
    """Write curve points as two-column CSVs for external plotting."""
    with open(roc_path, "w") as f:
        f.write("fpr,tpr\n")
        for fpr, tpr in roc_curve_points(ls):
            f.write(f"{fpr!r},{tpr!r}\n")
    with open(pr_path, "w") as f:
        f.write("recall,precision\n")
        for rec, prec in pr_curve_points(ls):
            f.write(f"{rec!r},{prec!r}\n")
