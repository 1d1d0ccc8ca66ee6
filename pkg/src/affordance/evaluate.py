"""Evaluation harness: top-k classification accuracy and the precision-recall
protocol over plausibility distances (lower distance = more plausible)."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, ShapeError, UndefinedPrecisionError


def rank_classes(probs: np.ndarray) -> np.ndarray:
    """Class ids by descending probability, ties broken by the lowest id."""
    p = np.asarray(probs, dtype=np.float64)
    return np.argsort(-p, axis=-1, kind="stable")


def topk_accuracies(probs: np.ndarray, labels, k_max: int = 5) -> list[float]:
    """accuracy@k for k = 1..k_max over an (N, K) probability matrix."""
    p = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64)
    if p.shape[0] != y.shape[0]:
        raise ShapeError(f"{p.shape[0]} probability rows vs {y.shape[0]} labels")
    if p.shape[0] == 0:
        raise EmptyInputError("no evaluation rows")
    ranked = rank_classes(p)
    out = []
    for k in range(1, k_max + 1):
        hits = (ranked[:, :k] == y[:, None]).any(axis=1)
        out.append(float(hits.mean()))
    return out


def evaluate_topk(classifier, records, k_max: int = 5) -> list[float]:
    """Top-k accuracy of a classifier over records with cached features and
    ground-truth classes."""
    from .model import _as_feature_matrix

    records = list(records)
    if not records:
        raise EmptyInputError("empty test set")
    feat_dim = np.asarray(records[0].features).shape[1]
    X = _as_feature_matrix([r.features for r in records], feat_dim)
    y = np.array([r.class_id for r in records], dtype=np.int64)
    probs = classifier.probabilities(X)
    return topk_accuracies(probs, y, k_max)


def pr_curve(scores, labels):
    """Precision/recall at every distinct score threshold.

    A sample is predicted plausible when its score (a distance) is <= the
    threshold; the sweep runs over ascending distinct scores, so recall is
    non-decreasing. Returns (points, average_precision) with points as
    (precision, recall, threshold) triples and AP by step integration.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    if s.shape != y.shape or s.ndim != 1:
        raise ShapeError(f"scores {s.shape} and labels {y.shape} must be aligned 1-D")
    if s.size == 0:
        raise EmptyInputError("no scores")
    n_pos = int(y.sum())
    n_neg = int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedPrecisionError("need both positive and negative labels")
    order = np.argsort(s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    tp_cum = np.cumsum(y_sorted)
    # last index of each distinct score = the sweep's threshold points
    is_last = np.ones(s.size, dtype=bool)
    is_last[:-1] = s_sorted[:-1] != s_sorted[1:]
    points = []
    ap = 0.0
    prev_recall = 0.0
    for i in np.where(is_last)[0]:
        tp = int(tp_cum[i])
        pp = i + 1
        precision = tp / pp
        recall = tp / n_pos
        points.append((precision, recall, float(s_sorted[i])))
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return points, float(ap)


@dataclass
class EvalReport:
    """Top-k table plus PR sweep, the shape every evaluation run emits."""

    topk: list            # accuracies for k = 1..5
    pr_points: list       # (precision, recall, threshold)
    average_precision: float
    n_positive: int
    n_negative: int

    def __post_init__(self):
        for p, r, _ in self.pr_points:
            if not (0.0 <= p <= 1.0 and 0.0 <= r <= 1.0):
                raise ShapeError("precision and recall must lie in [0, 1]")
        recalls = [r for _, r, _ in self.pr_points]
        if any(b < a for a, b in zip(recalls, recalls[1:])):
            raise ShapeError("recall must be non-decreasing along the sweep")

    @property
    def prevalence(self) -> float:
        total = self.n_positive + self.n_negative
        return self.n_positive / total if total else 0.0

    def to_json(self) -> str:
        return json.dumps(
            {
                "topk": self.topk,
                "average_precision": self.average_precision,
                "n_positive": self.n_positive,
                "n_negative": self.n_negative,
                "pr_points": [
                    {"precision": p, "recall": r, "threshold": t}
                    for p, r, t in self.pr_points
                ],
            },
            separators=(",", ":"),
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        doc = json.loads(text)
        return cls(
            topk=doc["topk"],
            pr_points=[(d["precision"], d["recall"], d["threshold"]) for d in doc["pr_points"]],
            average_precision=doc["average_precision"],
            n_positive=doc["n_positive"],
            n_negative=doc["n_negative"],
        )

    def to_text(self) -> str:
        lines = ["top-k classification accuracy"]
        lines.append("  " + "  ".join(f"top-{k}" for k in range(1, len(self.topk) + 1)))
        lines.append("  " + "  ".join(f"{a * 100:5.1f}%" for a in self.topk))
        lines.append("")
        lines.append(f"plausibility PR: AP={self.average_precision:.4f} "
                     f"(prevalence baseline {self.prevalence:.4f}, "
                     f"{self.n_positive} pos / {self.n_negative} neg)")
        lines.append("  precision  recall  threshold")
        for p, r, t in self.pr_points:
            lines.append(f"  {p:9.4f}  {r:6.4f}  {t:.6g}")
        return "\n".join(lines)

    def pr_csv(self) -> str:
        rows = ["precision,recall,threshold"]
        rows.extend(f"{p!r},{r!r},{t!r}" for p, r, t in self.pr_points)
        return "\n".join(rows) + "\n"


def calibrate_delta(scores, labels) -> float:
    """Distance threshold maximizing F1 on a labeled validation split."""
    points, _ = pr_curve(scores, labels)
    best_t, best_f1 = points[0][2], -1.0
    for p, r, t in points:
        if p + r == 0:
            continue
        f1 = 2 * p * r / (p + r)
        if f1 > best_f1:
            best_f1, best_t = f1, t
    return float(best_t)
