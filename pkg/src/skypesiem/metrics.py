"""Table-style classification metrics, ROC curves and threshold calibration."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, LengthMismatch, OutOfRange, SingleClass
from .learnkit import CLASS_LABELS, LabeledDataset

DEFAULT_AUC_TH = 0.905
DEFAULT_R_TH = 1.0


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def tp_rate(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def fp_rate(self) -> float:
        d = self.fp + self.tn
        return self.fp / d if d else 0.0


@dataclass
class ClassificationReport:
    per_class: dict[str, ConfusionCounts]
    mae: float
    rmse: float
    n: int
    auc: float | None = None

    def tp_rate(self, label: str) -> float:
        return self.per_class[label].tp_rate

    def fp_rate(self, label: str) -> float:
        return self.per_class[label].fp_rate


def _as_index(labels) -> np.ndarray:
    out = []
    for v in labels:
        if isinstance(v, (int, np.integer)):
            out.append(int(v))
        else:
            out.append(CLASS_LABELS.index(v) if v in CLASS_LABELS else
                       [c.value for c in CLASS_LABELS].index(str(v)))
    return np.asarray(out, dtype=int)


def classification_report(truth, predicted, probabilities) -> ClassificationReport:
    """TP/FP rate per class plus MAE/RMSE over per-class probability residuals.

    ``truth`` and ``predicted`` are class indices (0 = Skype) or labels;
    ``probabilities`` is an ``(n, 2)`` array of (p_skype, p_normal).
    """
    t = _as_index(truth)
    p = _as_index(predicted)
    P = np.asarray(probabilities, dtype=float).reshape(-1, 2)
    if not (len(t) == len(p) == len(P)):
        raise LengthMismatch(f"lengths differ: truth={len(t)} predicted={len(p)} proba={len(P)}")
    if len(t) == 0:
        raise EmptyInput("no instances to score")
    per_class = {}
    for k, lab in enumerate(CLASS_LABELS):
        per_class[lab.value] = ConfusionCounts(
            tp=int(((p == k) & (t == k)).sum()), fp=int(((p == k) & (t != k)).sum()),
            tn=int(((p != k) & (t != k)).sum()), fn=int(((p != k) & (t == k)).sum()))
    onehot = np.eye(2)[t]
    resid = np.abs(P - onehot)
    return ClassificationReport(per_class, float(resid.mean()), float(np.sqrt((resid ** 2).mean())), len(t))


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc_auc(truth, scores, positive: int = 0) -> RocCurve:
    """ROC for ranking ``scores`` against ``truth == positive``.

    Thresholds sweep the distinct scores in descending order; tied scores
    move the curve diagonally, so the trapezoidal area equals the
    Mann-Whitney statistic with ties counted one half.
    """
    t = _as_index(truth)
    s = np.asarray(scores, dtype=float)
    if len(t) != len(s):
        raise LengthMismatch("truth and scores differ in length")
    if len(t) == 0:
        raise EmptyInput("no instances")
    pos = t == positive
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC is undefined with a single class")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    pos_sorted = pos[order]
    # last index of each run of equal scores
    last = np.r_[np.flatnonzero(s_sorted[1:] != s_sorted[:-1]), len(s) - 1]
    tp = np.cumsum(pos_sorted)[last]
    fp = np.cumsum(~pos_sorted)[last]
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    thresholds = np.r_[np.inf, s_sorted[last]]
    # integrate in counts to keep the area exact up to one final division
    area = float(np.sum(np.diff(np.r_[0, fp]) * (np.r_[0, tp][1:] + np.r_[0, tp][:-1])) / 2.0)
    return RocCurve(fpr, tpr, thresholds, area / (n_pos * n_neg))


@dataclass
class ThresholdConfig:
    auc_th: float = DEFAULT_AUC_TH
    r_th: float = DEFAULT_R_TH

    def __post_init__(self):
        if not 0.0 <= self.auc_th <= 1.0:
            raise OutOfRange(f"auc_th {self.auc_th} outside [0, 1]")
        if not 0.0 <= self.r_th <= 10.0:
            raise OutOfRange(f"r_th {self.r_th} outside [0, 10]")

    def to_dict(self) -> dict:
        return {"auc_th": self.auc_th, "r_th": self.r_th}

    @classmethod
    def from_dict(cls, d: dict) -> "ThresholdConfig":
        return cls(float(d["auc_th"]), float(d.get("r_th", DEFAULT_R_TH)))


def calibrate_threshold(validation: LabeledDataset, models, r_th: float = DEFAULT_R_TH) -> ThresholdConfig:
    """``auc_th`` := AUC of the ensemble's mean-posterior score on ``validation``."""
    from .voting import Ensemble

    ens = models if isinstance(models, Ensemble) else Ensemble(models)
    if len(validation) == 0:
        raise EmptyInput("empty validation set")
    _, _, scores = ens.decide_many(validation.X)
    return ThresholdConfig(roc_auc(validation.y, scores).auc, r_th)


# ---------------------------------------------------------------------------
# report files

REPORT_COLUMNS = ("TP Rate", "FP Rate", "MAE", "RMSE", "AUC", "Class")


@dataclass
class ReportRow:
    classifier: str
    klass: str
    tp_rate: float
    fp_rate: float
    mae: float
    rmse: float
    auc: float


@dataclass
class EvaluationResult:
    rows: list[ReportRow] = field(default_factory=list)
    roc: dict[str, RocCurve] = field(default_factory=dict)


def report_rows(name: str, rep: ClassificationReport, auc: float) -> list[ReportRow]:
    return [ReportRow(name, lab, rep.tp_rate(lab), rep.fp_rate(lab), rep.mae, rep.rmse, auc)
            for lab in (c.value for c in CLASS_LABELS)]


def format_report(rows: list[ReportRow]) -> str:
    """Plain-text table grouped by classifier, one line per class."""
    lines = []
    width = max([len(r.classifier) for r in rows] + [10])
    head = f"{'Classifier':<{width}}  " + "  ".join(f"{c:>8}" for c in REPORT_COLUMNS)
    lines.append(head)
    lines.append("-" * len(head))
    prev = None
    for r in rows:
        name = r.classifier if r.classifier != prev else ""
        prev = r.classifier
        lines.append(f"{name:<{width}}  {r.tp_rate:8.3f}  {r.fp_rate:8.3f}  {r.mae:8.4f}  "
                     f"{r.rmse:8.4f}  {r.auc:8.4f}  {r.klass:>8}")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> list[ReportRow]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    rows = []
    current = None
    for ln in lines[2:]:
        parts = ln.split()
        nums, klass = parts[-6:-1], parts[-1]
        name = " ".join(parts[:-6])
        if name:
            current = name
        rows.append(ReportRow(current, klass, *(float(x) for x in nums)))
    return rows


def roc_csv(curves: dict[str, RocCurve]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["classifier", "fpr", "tpr"])
    for name, c in curves.items():
        for f, t in c.points:
            w.writerow([name, repr(f), repr(t)])
    return buf.getvalue()


def read_roc_csv(text: str) -> dict[str, list[tuple[float, float]]]:
    out: dict[str, list[tuple[float, float]]] = {}
    for row in csv.DictReader(io.StringIO(text)):
        out.setdefault(row["classifier"], []).append((float(row["fpr"]), float(row["tpr"])))
    return out


def trapezoid_area(points: list[tuple[float, float]]) -> float:
    area = 0.0
    for (f0, t0), (f1, t1) in zip(points, points[1:]):
        area += (f1 - f0) * (t0 + t1) / 2.0
    return area


def error_scatter_csv(X: np.ndarray, truth, predicted) -> str:
    """(avg_lgt, avg_iat, predicted, correct) per instance."""
    t = _as_index(truth)
    p = _as_index(predicted)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["avg_lgt", "avg_iat", "predicted", "correct"])
    for x, ti, pi in zip(np.atleast_2d(X), t, p):
        w.writerow([repr(float(x[1])), repr(float(x[5])), CLASS_LABELS[pi].value, int(ti == pi)])
    return buf.getvalue()

