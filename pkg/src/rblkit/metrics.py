"""Evaluation metrics: mask overlap scores, classification rates, Cohen's
kappa, AUROC, and the two-sample t-test.

AUROC is the Mann-Whitney statistic P(score+ > score-) + 0.5 P(tie),
computed by exact pair counting for small inputs (its own brute-force
oracle) and by the equivalent average-rank method for large ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .domain import InputError, RblStage, ToothAssessment

__all__ = [
    "ConfusionMatrix",
    "Rates",
    "dice",
    "jaccard",
    "pixel_accuracy",
    "rates",
    "cohens_kappa",
    "auroc",
    "roc_curve",
    "stage_scores_for_auroc",
    "two_sample_t_test",
]

PAIR_COUNT_MAX_N = 10_000


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, bool)
    b = np.asarray(b, bool)
    if a.shape != b.shape:
        raise InputError(f"mask shapes differ: {a.shape} vs {b.shape}")
    return a, b


def dice(a: np.ndarray, b: np.ndarray) -> float:
    """2|a&b| / (|a| + |b|); two empty masks score 1.0 by convention."""
    a, b = _check_pair(a, b)
    denom = int(a.sum()) + int(b.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / denom


def jaccard(a: np.ndarray, b: np.ndarray) -> float:
    """|a&b| / |a or b|; two empty masks score 1.0 by convention."""
    a, b = _check_pair(a, b)
    union = int((a | b).sum())
    if union == 0:
        return 1.0
    return int((a & b).sum()) / union


def pixel_accuracy(pred: np.ndarray, ref: np.ndarray) -> float:
    """Fraction of pixels classified identically."""
    pred = np.asarray(pred)
    ref = np.asarray(ref)
    if pred.shape != ref.shape:
        raise InputError(f"mask shapes differ: {pred.shape} vs {ref.shape}")
    return float(np.mean(pred == ref))


@dataclass(frozen=True)
class ConfusionMatrix:
    """Square count matrix: rows = reference class, columns = predicted."""

    counts: np.ndarray
    classes: tuple

    def __post_init__(self):
        counts = np.asarray(self.counts, np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise InputError("confusion matrix must be square")
        if counts.shape[0] != len(self.classes):
            raise InputError("class list length must match matrix size")
        if (counts < 0).any():
            raise InputError("confusion counts must be nonnegative")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_pairs(cls, reference: Sequence, predicted: Sequence, classes: Sequence):
        classes = tuple(classes)
        index = {c: i for i, c in enumerate(classes)}
        counts = np.zeros((len(classes), len(classes)), np.int64)
        for r, p in zip(reference, predicted, strict=True):
            counts[index[r], index[p]] += 1
        return cls(counts=counts, classes=classes)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class Rates:
    sensitivity: Optional[float]
    specificity: Optional[float]
    accuracy: Optional[float]
    flags: tuple[str, ...] = ()


def rates(cm: ConfusionMatrix, positive_class) -> Rates:
    """One-vs-rest sensitivity, specificity, accuracy for one class."""
    if cm.total == 0:
        raise InputError("empty confusion matrix")
    if positive_class not in cm.classes:
        raise InputError(f"class {positive_class!r} not in matrix")
    k = cm.classes.index(positive_class)
    counts = cm.counts
    tp = int(counts[k, k])
    fn = int(counts[k, :].sum()) - tp
    fp = int(counts[:, k].sum()) - tp
    tn = cm.total - tp - fn - fp

    flags = []
    sens = spec = None
    if tp + fn > 0:
        sens = tp / (tp + fn)
    else:
        flags.append("sensitivity-undefined")
    if tn + fp > 0:
        spec = tn / (tn + fp)
    else:
        flags.append("specificity-undefined")
    acc = (tp + tn) / cm.total
    return Rates(sensitivity=sens, specificity=spec, accuracy=acc, flags=tuple(flags))


def cohens_kappa(cm: ConfusionMatrix) -> float:
    """Chance-corrected agreement; degenerate margins give 1 or 0."""
    n = cm.total
    if n == 0:
        raise InputError("empty confusion matrix")
    counts = cm.counts.astype(float)
    p_o = float(np.trace(counts)) / n
    p_e = float(np.sum(counts.sum(axis=0) * counts.sum(axis=1))) / (n * n)
    if p_e == 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


def _auroc_pair_count(pos: np.ndarray, neg: np.ndarray) -> float:
    wins = ties = 0
    chunk = max(1, PAIR_COUNT_MAX_N * PAIR_COUNT_MAX_N // max(len(neg), 1) // 16)
    for start in range(0, len(pos), chunk):
        p = pos[start : start + chunk, None]
        wins += int((p > neg[None, :]).sum())
        ties += int((p == neg[None, :]).sum())
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


def _auroc_ranks(pos: np.ndarray, neg: np.ndarray) -> float:
    scores = np.concatenate([neg, pos])
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), float)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average rank, 1-based
        i = j + 1
    r_pos = float(ranks[len(neg) :].sum())
    n_pos, n_neg = len(pos), len(neg)
    u = r_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def auroc(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """Probability a random positive outscores a random negative (ties half)."""
    scores = np.asarray(scores, float)
    labels = np.asarray(labels, bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise InputError("scores and labels must be equal-length 1-D sequences")
    pos = scores[labels]
    neg = scores[~labels]
    if len(pos) == 0 or len(neg) == 0:
        raise InputError("auroc needs at least one positive and one negative")
    if len(scores) <= PAIR_COUNT_MAX_N:
        return _auroc_pair_count(pos, neg)
    return _auroc_ranks(pos, neg)


def roc_curve(scores: Sequence[float], labels: Sequence[bool]) -> list[tuple[float, float]]:
    """(FPR, TPR) points from a descending threshold sweep, for plotting."""
    scores = np.asarray(scores, float)
    labels = np.asarray(labels, bool)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise InputError("roc_curve needs both classes")
    order = np.argsort(-scores, kind="stable")
    points = [(0.0, 0.0)]
    tp = fp = 0
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        tp += int(sorted_labels[i : j + 1].sum())
        fp += (j - i + 1) - int(sorted_labels[i : j + 1].sum())
        points.append((fp / n_neg, tp / n_pos))
        i = j + 1
    return points


def stage_scores_for_auroc(
    assessments: Sequence[ToothAssessment], target_stage: RblStage
) -> tuple[list[float], list[bool]]:
    """One-vs-rest labels plus a continuous score for the target stage.

    Staged percentages order the loss stages directly; for the no-bone-loss
    target the negated CEJ-crest distance serves as the score (smaller
    distance = more likely no bone loss).
    """
    scores: list[float] = []
    labels: list[bool] = []
    for tooth in assessments:
        if tooth.stage is None:
            continue
        if target_stage == RblStage.NO_BONE_LOSS:
            mm = tooth.max_len1_mm
            if mm is None:
                continue
            scores.append(-mm)
        else:
            if tooth.tooth_rbl_percent is None:
                continue
            scores.append(tooth.tooth_rbl_percent)
        labels.append(tooth.stage == target_stage)
    return scores, labels


def two_sample_t_test(
    xs: Sequence[float], ys: Sequence[float], paired: bool = False
) -> tuple[float, float]:
    """Student's t with a two-sided p-value.

    Unpaired uses the pooled-variance statistic; paired tests the
    differences. p comes from the regularized incomplete beta form of the
    t CDF. Zero variance with equal means degenerates to (0, 1).
    """
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    if xs.ndim != 1 or ys.ndim != 1 or len(xs) < 2 or len(ys) < 2:
        raise InputError("each sample needs >= 2 values")
    if paired:
        if len(xs) != len(ys):
            raise InputError("paired test needs equal-length samples")
        d = xs - ys
        n = len(d)
        df = n - 1
        sd = float(d.std(ddof=1))
        mean = float(d.mean())
        if sd == 0.0:
            return (0.0, 1.0) if mean == 0.0 else (float(np.sign(mean) * np.inf), 0.0)
        t = mean / (sd / np.sqrt(n))
    else:
        n, m = len(xs), len(ys)
        df = n + m - 2
        vx = float(xs.var(ddof=1))
        vy = float(ys.var(ddof=1))
        pooled = ((n - 1) * vx + (m - 1) * vy) / df
        diff = float(xs.mean() - ys.mean())
        if pooled == 0.0:
            return (0.0, 1.0) if diff == 0.0 else (float(np.sign(diff) * np.inf), 0.0)
        t = diff / np.sqrt(pooled * (1.0 / n + 1.0 / m))
    if t == 0.0:
        return 0.0, 1.0
    p = float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))
    return float(t), p
