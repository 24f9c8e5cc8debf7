"""Classification measures, difficulty splits, and paired significance tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import stats as spstats

from .corpus import DataError

# ---- prediction sets ----


@dataclass
class PredictionSet:
    """Per-document class score vectors paired with true labels."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        self.scores = np.asarray(self.scores, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.scores.ndim != 2 or self.scores.shape[0] < 1:
            raise DataError("scores must form a non-empty (m, K) matrix")
        if self.labels.shape != (self.scores.shape[0],):
            raise DataError("labels must align with score rows")
        if self.scores.shape[1] < 2:
            raise DataError("need at least two classes")
        if self.labels.min() < 0 or self.labels.max() >= self.scores.shape[1]:
            raise DataError("labels out of range")

    @property
    def m(self) -> int:
        return self.scores.shape[0]

    @property
    def n_classes(self) -> int:
        return self.scores.shape[1]

    def predicted(self) -> np.ndarray:
        """Argmax class per document, ties broken toward the lowest index."""
        return np.argmax(self.scores, axis=1)

    def correct(self) -> np.ndarray:
        return self.predicted() == self.labels


def collect_predictions(model, docs) -> PredictionSet:
    """Run a model over documents and bundle probabilities with labels."""
    rows = [model.predict(d).probs for d in docs]
    labels = [d.label for d in docs]
    return PredictionSet(np.array(rows), np.array(labels))


# ---- headline measures ----


def accuracy(preds: PredictionSet) -> float:
    """Fraction of documents whose top-scoring class is the true label."""
    return float(np.mean(preds.correct()))


def top_l_accuracy(preds: PredictionSet, level: int) -> float:
    """Fraction of documents whose label sits among the `level` best classes.

    Boundary ties admit the lowest class index first (stable descending sort).
    """
    if not 1 <= level <= preds.n_classes:
        raise ValueError(f"level must lie in [1, {preds.n_classes}]")
    order = np.argsort(-preds.scores, axis=1, kind="stable")
    top = order[:, :level]
    hits = (top == preds.labels[:, None]).any(axis=1)
    return float(np.mean(hits))


@dataclass
class F1Breakdown:
    """Per-class precision, recall, and F1 with their macro average."""

    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    macro: float


def macro_f1(preds: PredictionSet) -> F1Breakdown:
    """Unweighted mean of per-class F1; 0/0 ratios score zero."""
    k = preds.n_classes
    pred = preds.predicted()
    precision = np.zeros(k)
    recall = np.zeros(k)
    f1 = np.zeros(k)
    for c in range(k):
        tp = float(np.sum((pred == c) & (preds.labels == c)))
        fp = float(np.sum((pred == c) & (preds.labels != c)))
        fn = float(np.sum((pred != c) & (preds.labels == c)))
        precision[c] = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall[c] = tp / (tp + fn) if tp + fn > 0 else 0.0
        denom = precision[c] + recall[c]
        f1[c] = 2.0 * precision[c] * recall[c] / denom if denom > 0 else 0.0
    return F1Breakdown(precision, recall, f1, float(np.mean(f1)))


def fidelity(preds_a: PredictionSet, preds_b: PredictionSet) -> float:
    """Fraction of documents where two models pick the same class."""
    if preds_a.m != preds_b.m or preds_a.n_classes != preds_b.n_classes:
        raise DataError("prediction sets must cover the same documents")
    return float(np.mean(preds_a.predicted() == preds_b.predicted()))


# ---- difficulty groups ----

# class frequency bands over the test split; both boundaries land in "average"
GROUP_ORDER = ("easy", "average", "hard")


def difficulty_partition(counts) -> dict:
    """Split class indices into easy (>1000), average ([100, 1000]), hard (<100)."""
    groups: dict = {"easy": [], "average": [], "hard": []}
    for c, n in enumerate(counts):
        if n > 1000:
            groups["easy"].append(c)
        elif n >= 100:
            groups["average"].append(c)
        else:
            groups["hard"].append(c)
    return {g: ids for g, ids in groups.items() if ids}


def group_by_difficulty(preds: PredictionSet, counts=None) -> dict:
    """Macro F1 restricted to each difficulty band; empty bands are omitted."""
    if counts is None:
        counts = np.bincount(preds.labels, minlength=preds.n_classes)
    counts = list(counts)
    if len(counts) != preds.n_classes:
        raise DataError("need one test count per class")
    breakdown = macro_f1(preds)
    return {g: float(np.mean(breakdown.f1[ids]))
            for g, ids in difficulty_partition(counts).items()}


# ---- significance ----


class McNemarResult(NamedTuple):
    statistic: float
    p: float


def _chi2_tail(x: float) -> float:
    """Upper tail of the chi-square distribution with one degree of freedom."""
    return math.erfc(math.sqrt(x / 2.0))


def mcnemar_test(correct_a, correct_b) -> McNemarResult:
    """Continuity-corrected paired test on disagreement counts.

    One-sided for "a beats b": p is half the chi-square tail when the
    disagreements favour a (b_count > c_count) and the complement otherwise,
    so swapping the models mirrors p around one half.
    """
    correct_a = np.asarray(correct_a, dtype=bool)
    correct_b = np.asarray(correct_b, dtype=bool)
    if correct_a.shape != correct_b.shape or correct_a.ndim != 1:
        raise DataError("correctness vectors must cover the same documents")
    b_count = int(np.sum(correct_a & ~correct_b))
    c_count = int(np.sum(~correct_a & correct_b))
    if b_count + c_count == 0:
        return McNemarResult(0.0, 1.0)
    stat = (abs(b_count - c_count) - 1.0) ** 2 / (b_count + c_count)
    tail = _chi2_tail(stat)
    p = 0.5 * tail if b_count > c_count else 1.0 - 0.5 * tail
    return McNemarResult(float(stat), float(p))


class TTestResult(NamedTuple):
    t: float
    p: float
    degenerate: bool = False


def macro_t_test(f1_a, f1_b) -> TTestResult:
    """Paired one-sided Student test on per-class F1 differences.

    Identical inputs sit at p = 0.5 by convention; zero spread with a
    non-zero mean difference collapses to an infinite statistic and is
    flagged as degenerate.
    """
    f1_a = np.asarray(f1_a, dtype=float)
    f1_b = np.asarray(f1_b, dtype=float)
    if f1_a.shape != f1_b.shape or f1_a.ndim != 1:
        raise DataError("per-class F1 vectors must share one class set")
    k = f1_a.shape[0]
    if k < 2:
        raise ValueError("paired test needs at least two classes")
    d = f1_a - f1_b
    mean = float(np.mean(d))
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 0.5)
        t = math.inf if mean > 0 else -math.inf
        return TTestResult(t, 0.0 if mean > 0 else 1.0, degenerate=True)
    t = mean / (sd / math.sqrt(k))
    return TTestResult(float(t), float(spstats.t.sf(t, k - 1)))


def significance_stars(p: float) -> str:
    """Asterisk code for a p-value: * below 1e-2, ** below 1e-3, *** below 1e-4."""
    if p < 1e-4:
        return "***"
    if p < 1e-3:
        return "**"
    if p < 1e-2:
        return "*"
    return ""


# ---- reports ----


@dataclass
class MetricsReport:
    """Bundle of the standard measures over one prediction set."""

    accuracy: float
    top_l: dict
    macro_f1: float
    precision: list
    recall: list
    f1: list
    difficulty: dict = field(default_factory=dict)
    fidelity: float | None = None

    def to_dict(self) -> dict:
        out = {
            "accuracy": self.accuracy,
            "top_l": {str(k): v for k, v in self.top_l.items()},
            "macro_f1": self.macro_f1,
            "precision": list(self.precision),
            "recall": list(self.recall),
            "f1": list(self.f1),
            "difficulty": dict(self.difficulty),
        }
        if self.fidelity is not None:
            out["fidelity"] = self.fidelity
        return out


def evaluate(preds: PredictionSet, levels=None, class_counts=None,
             reference: PredictionSet | None = None) -> MetricsReport:
    """Compute the full report; default top levels are 1/3/5 capped at K."""
    if levels is None:
        levels = [l for l in (1, 3, 5) if l <= preds.n_classes]
    breakdown = macro_f1(preds)
    return MetricsReport(
        accuracy=accuracy(preds),
        top_l={int(l): top_l_accuracy(preds, int(l)) for l in levels},
        macro_f1=breakdown.macro,
        precision=breakdown.precision.tolist(),
        recall=breakdown.recall.tolist(),
        f1=breakdown.f1.tolist(),
        difficulty=group_by_difficulty(preds, class_counts),
        fidelity=None if reference is None else fidelity(preds, reference),
    )


def render_report(report: MetricsReport, class_names=None) -> str:
    lines = [f"accuracy        {report.accuracy:.4f}"]
    for level in sorted(report.top_l):
        lines.append(f"top-{level} accuracy  {report.top_l[level]:.4f}")
    lines.append(f"macro F1        {report.macro_f1:.4f}")
    for group in GROUP_ORDER:
        if group in report.difficulty:
            lines.append(f"{group:7s} F1      {report.difficulty[group]:.4f}")
    if report.fidelity is not None:
        lines.append(f"fidelity        {report.fidelity:.4f}")
    if class_names is not None:
        lines.append("")
        lines.append("class            prec   recall    F1")
        for i, name in enumerate(class_names):
            lines.append(f"{name:15s} {report.precision[i]:6.3f} "
                         f"{report.recall[i]:8.3f} {report.f1[i]:6.3f}")
    return "\n".join(lines) + "\n"


# ---- model comparison ----


@dataclass
class ComparisonRow:
    """One model's headline numbers with significance against the baseline."""

    name: str
    accuracy: float
    macro_f1: float
    mcnemar_p: float | None = None
    t_p: float | None = None


def compare_models(named: dict, baseline: str) -> list:
    """Score every prediction set and test each non-baseline one
    against the baseline (McNemar on accuracy, paired t on macro F1)."""
    if baseline not in named:
        raise DataError(f"baseline {baseline!r} not among the models")
    base = named[baseline]
    base_f1 = macro_f1(base)
    rows = [ComparisonRow(baseline, accuracy(base), base_f1.macro)]
    for name, preds in named.items():
        if name == baseline:
            continue
        breakdown = macro_f1(preds)
        mc = mcnemar_test(preds.correct(), base.correct())
        tt = macro_t_test(breakdown.f1, base_f1.f1)
        rows.append(ComparisonRow(name, accuracy(preds), breakdown.macro,
                                  mcnemar_p=mc.p, t_p=tt.p))
    return rows


def render_comparison(rows) -> str:
    lines = ["model            accuracy      macro F1"]
    for row in rows:
        acc_star = "" if row.mcnemar_p is None else significance_stars(row.mcnemar_p)
        f1_star = "" if row.t_p is None else significance_stars(row.t_p)
        lines.append(f"{row.name:15s} {row.accuracy:8.4f}{acc_star:4s} "
                     f"{row.macro_f1:8.4f}{f1_star:4s}")
    return "\n".join(lines) + "\n"
