"""Confusion matrices and classification metrics.

Counts are integers and every ratio is formed with exact rational
arithmetic before conversion to float, so a metric like 7/9 accuracy is
the correctly-rounded float and per-class F1 values hit textbook
fractions exactly.  Undefined ratios (zero denominators) are reported
as None and excluded from macro averages rather than silently zeroed.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import BadLabel, EmptyTestSet
from .network import forward_batch
from .training import LabeledSequence, stack_batch


@dataclass(frozen=True)
class ClassMetrics:
    label: int
    support: int           # row sum: how many true instances
    predicted: int         # column sum: how many predictions
    true_positives: int
    precision: float | None
    recall: float | None
    f1: float | None


@dataclass(frozen=True)
class EvalReport:
    confusion: np.ndarray          # rows = true class, columns = predicted
    accuracy: float
    per_class: tuple[ClassMetrics, ...]
    macro_precision: float | None
    macro_recall: float | None
    macro_f1: float | None
    micro_precision: float
    micro_recall: float
    micro_f1: float
    undefined_labels: tuple[int, ...]   # classes with any undefined metric

    @property
    def classes(self) -> int:
        return self.confusion.shape[0]

    @property
    def total(self) -> int:
        return int(self.confusion.sum())


def _ratio(num: int, den: int) -> float | None:
    if den == 0:
        return None
    return float(Fraction(num, den))


def confusion_from_pairs(true_labels, predicted_labels, classes: int) -> np.ndarray:
    matrix = np.zeros((classes, classes), dtype=np.int64)
    for truth, pred in zip(true_labels, predicted_labels, strict=True):
        if not 0 <= truth < classes:
            raise BadLabel(f"true label {truth} outside [0, {classes})")
        if not 0 <= pred < classes:
            raise BadLabel(f"predicted label {pred} outside [0, {classes})")
        matrix[truth, pred] += 1
    return matrix


def report_from_confusion(confusion: np.ndarray) -> EvalReport:
    confusion = np.asarray(confusion, dtype=np.int64)
    if confusion.ndim != 2 or confusion.shape[0] != confusion.shape[1]:
        raise BadLabel(f"confusion matrix must be square, got {confusion.shape}")
    classes = confusion.shape[0]
    total = int(confusion.sum())
    if total == 0:
        raise EmptyTestSet("confusion matrix holds no observations")

    diag = [int(confusion[k, k]) for k in range(classes)]
    row = [int(confusion[k].sum()) for k in range(classes)]
    col = [int(confusion[:, k].sum()) for k in range(classes)]

    per_class = []
    undefined = []
    prec_fracs, rec_fracs, f1_fracs = [], [], []
    for k in range(classes):
        tp, fp, fn = diag[k], col[k] - diag[k], row[k] - diag[k]
        precision = _ratio(tp, tp + fp)
        recall = _ratio(tp, tp + fn)
        f1 = _ratio(2 * tp, 2 * tp + fp + fn) if (2 * tp + fp + fn) else None
        if None in (precision, recall, f1):
            undefined.append(k)
        if precision is not None:
            prec_fracs.append(Fraction(tp, tp + fp))
        if recall is not None:
            rec_fracs.append(Fraction(tp, tp + fn))
        if f1 is not None:
            f1_fracs.append(Fraction(2 * tp, 2 * tp + fp + fn))
        per_class.append(ClassMetrics(
            label=k, support=row[k], predicted=col[k], true_positives=tp,
            precision=precision, recall=recall, f1=f1,
        ))

    def macro(fracs):
        if not fracs:
            return None
        return float(sum(fracs, Fraction(0)) / len(fracs))

    tp_total = sum(diag)
    micro = float(Fraction(tp_total, total))  # pooled TP / (TP+FP) = TP / (TP+FN) = acc
    return EvalReport(
        confusion=confusion,
        accuracy=float(Fraction(tp_total, total)),
        per_class=tuple(per_class),
        macro_precision=macro(prec_fracs),
        macro_recall=macro(rec_fracs),
        macro_f1=macro(f1_fracs),
        micro_precision=micro,
        micro_recall=micro,
        micro_f1=micro,
        undefined_labels=tuple(undefined),
    )


def evaluate(model, test_set: list[LabeledSequence], batch_size: int = 16) -> EvalReport:
    """Run the model over a labelled set and summarise the outcomes."""
    if not test_set:
        raise EmptyTestSet("no test sequences to evaluate")
    truths, preds = [], []
    for start in range(0, len(test_set), batch_size):
        chunk = test_set[start:start + batch_size]
        x, labels = stack_batch(chunk, model.classes)
        probs = forward_batch(model, x).probs
        truths.extend(int(v) for v in labels)
        preds.extend(int(v) for v in np.argmax(probs, axis=1))
    return report_from_confusion(confusion_from_pairs(truths, preds, model.classes))


def render_confusion(confusion: np.ndarray, label_names=None) -> str:
    """Fixed-width text grid, one row per true class."""
    confusion = np.asarray(confusion)
    classes = confusion.shape[0]
    if label_names is None:
        label_names = [str(k) for k in range(classes)]
    name_w = max(len(str(n)) for n in label_names)
    cell_w = max(len(str(int(v))) for v in confusion.ravel()) if confusion.size else 1
    cell_w = max(cell_w, *(len(str(n)) for n in label_names))
    out = io.StringIO()
    out.write(" " * (name_w + 7))
    out.write(" ".join(f"{n:>{cell_w}}" for n in label_names))
    out.write("\n")
    for k in range(classes):
        out.write(f"true {label_names[k]:>{name_w}} |")
        out.write(" ".join(f"{int(v):>{cell_w}}" for v in confusion[k]))
        out.write("\n")
    return out.getvalue()


def confusion_csv(confusion: np.ndarray, label_names=None) -> str:
    """Deterministic CSV: header of predicted labels, one row per true class."""
    confusion = np.asarray(confusion)
    classes = confusion.shape[0]
    if label_names is None:
        label_names = [str(k) for k in range(classes)]
    lines = ["true\\pred," + ",".join(str(n) for n in label_names)]
    for k in range(classes):
        lines.append(str(label_names[k]) + "," + ",".join(str(int(v)) for v in confusion[k]))
    return "\n".join(lines) + "\n"


def format_report(report: EvalReport, label_names=None) -> str:
    """Human-readable metrics block used by the command-line evaluator."""
    classes = report.classes
    if label_names is None:
        label_names = [str(k) for k in range(classes)]

    def fmt(v):
        return "n/a" if v is None else f"{v:.6f}"

    lines = [
        f"sequences: {report.total}",
        f"accuracy: {report.accuracy:.6f}",
        f"macro precision: {fmt(report.macro_precision)}",
        f"macro recall: {fmt(report.macro_recall)}",
        f"macro f1: {fmt(report.macro_f1)}",
        f"micro precision: {fmt(report.micro_precision)}",
        f"micro recall: {fmt(report.micro_recall)}",
        f"micro f1: {fmt(report.micro_f1)}",
        "",
        f"{'class':>8} {'support':>8} {'precision':>10} {'recall':>10} {'f1':>10}",
    ]
    for cm in report.per_class:
        lines.append(
            f"{label_names[cm.label]:>8} {cm.support:>8} "
            f"{fmt(cm.precision):>10} {fmt(cm.recall):>10} {fmt(cm.f1):>10}"
        )
    if report.undefined_labels:
        names = ", ".join(str(label_names[k]) for k in report.undefined_labels)
        lines.append("")
        lines.append(f"metrics undefined (no support or no predictions) for: {names}")
    return "\n".join(lines) + "\n"
