from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gesturelstm.errors import BadLabel, EmptyTestSet
from gesturelstm.evaluation import (
    confusion_csv,
    confusion_from_pairs,
    evaluate,
    format_report,
    render_confusion,
    report_from_confusion,
)
from gesturelstm.features import GestureSequence
from gesturelstm.network import DlstmModel, predict_batch
from gesturelstm.training import LabeledSequence
from oracles import confusion_metrics_reference

WORKED = np.array([[2, 1, 0], [0, 2, 0], [1, 0, 3]])


def test_worked_example_exact():
    report = report_from_confusion(WORKED)
    assert report.accuracy == float(Fraction(7, 9))
    precisions = [c.precision for c in report.per_class]
    recalls = [c.recall for c in report.per_class]
    f1s = [c.f1 for c in report.per_class]
    assert precisions == [float(Fraction(2, 3)), float(Fraction(2, 3)), 1.0]
    assert recalls == [float(Fraction(2, 3)), 1.0, float(Fraction(3, 4))]
    assert f1s == [float(Fraction(2, 3)), float(Fraction(4, 5)), float(Fraction(6, 7))]
    assert report.undefined_labels == ()
    # macros over exact fractions
    assert report.macro_precision == float((Fraction(2, 3) + Fraction(2, 3) + 1) / 3)
    assert report.macro_recall == float((Fraction(2, 3) + 1 + Fraction(3, 4)) / 3)
    assert report.macro_f1 == float((Fraction(2, 3) + Fraction(4, 5) + Fraction(6, 7)) / 3)
    assert report.micro_precision == report.accuracy
    assert report.micro_recall == report.accuracy
    assert report.micro_f1 == report.accuracy


def test_class_bookkeeping():
    report = report_from_confusion(WORKED)
    assert [c.support for c in report.per_class] == [3, 2, 4]
    assert [c.predicted for c in report.per_class] == [3, 3, 3]
    assert [c.true_positives for c in report.per_class] == [2, 2, 3]
    assert report.total == 9
    assert report.classes == 3


def test_undefined_metrics_flagged_and_excluded():
    # class 2 never occurs and is never predicted: all three metrics undefined
    matrix = np.array([[3, 1, 0], [0, 2, 0], [0, 0, 0]])
    report = report_from_confusion(matrix)
    c2 = report.per_class[2]
    assert c2.precision is None and c2.recall is None and c2.f1 is None
    assert report.undefined_labels == (2,)
    # macro over the two defined classes only
    assert report.macro_recall == float((Fraction(3, 4) + Fraction(2, 2)) / 2)
    assert report.macro_precision == float((Fraction(3, 3) + Fraction(2, 3)) / 2)


def test_precision_undefined_recall_defined():
    # class 1 has support but is never predicted
    matrix = np.array([[2, 0], [3, 0]])
    report = report_from_confusion(matrix)
    c1 = report.per_class[1]
    assert c1.precision is None
    assert c1.recall == 0.0
    assert c1.f1 == 0.0
    assert report.undefined_labels == (1,)


def test_empty_and_malformed():
    with pytest.raises(EmptyTestSet):
        report_from_confusion(np.zeros((3, 3), dtype=int))
    with pytest.raises(BadLabel):
        report_from_confusion(np.zeros((2, 3), dtype=int))


@given(arrays(np.int64, (4, 4), elements=st.integers(0, 20)))
def test_matches_fraction_oracle(matrix):
    if matrix.sum() == 0:
        return
    report = report_from_confusion(matrix)
    ref = confusion_metrics_reference(matrix)

    def as_float(v):
        return None if v is None else float(v)

    assert report.accuracy == as_float(ref["accuracy"])
    assert report.macro_precision == as_float(ref["macro_precision"])
    assert report.macro_recall == as_float(ref["macro_recall"])
    assert report.macro_f1 == as_float(ref["macro_f1"])
    for cm, (p, r, f) in zip(report.per_class, ref["per_class"]):
        assert cm.precision == as_float(p)
        assert cm.recall == as_float(r)
        assert cm.f1 == as_float(f)
    # micro recall is exactly the accuracy, always
    assert report.micro_recall == report.accuracy


def test_confusion_from_pairs():
    matrix = confusion_from_pairs([0, 0, 1, 2, 2], [0, 1, 1, 2, 0], classes=3)
    assert np.array_equal(matrix, [[1, 1, 0], [0, 1, 0], [1, 0, 1]])
    with pytest.raises(BadLabel):
        confusion_from_pairs([0, 3], [0, 0], classes=3)
    with pytest.raises(BadLabel):
        confusion_from_pairs([0, 0], [0, -1], classes=3)


def test_evaluate_consistent_with_predictions(rng):
    model = DlstmModel.init_random(4, 1, 3, seed=2)
    items = []
    for i in range(9):
        data = rng.normal(size=(5, 31))
        items.append(LabeledSequence(sequence=GestureSequence(data=data), label=i % 3))
    report = evaluate(model, items, batch_size=4)
    x = np.stack([it.sequence.data for it in items])
    preds = predict_batch(model, x)
    expected = confusion_from_pairs([it.label for it in items], preds, 3)
    assert np.array_equal(report.confusion, expected)
    assert report.total == 9


def test_evaluate_empty():
    model = DlstmModel.init_random(4, 1, 3, seed=2)
    with pytest.raises(EmptyTestSet):
        evaluate(model, [])


def test_render_confusion_grid():
    text = render_confusion(WORKED, ["ab", "c", "d"])
    lines = text.splitlines()
    assert len(lines) == 4
    assert lines[1].startswith("true ab |")
    assert "2 1 0" in lines[1].replace("  ", " ")


def test_confusion_csv_round_trip():
    csv = confusion_csv(WORKED)
    lines = csv.strip().splitlines()
    assert lines[0] == "true\\pred,0,1,2"
    parsed = np.array([[int(v) for v in line.split(",")[1:]] for line in lines[1:]])
    assert np.array_equal(parsed, WORKED)
    # deterministic output
    assert confusion_csv(WORKED) == csv


def test_format_report_mentions_undefined():
    matrix = np.array([[3, 0], [2, 0]])
    text = format_report(report_from_confusion(matrix))
    assert "n/a" in text
    assert "undefined" in text
    assert "accuracy: 0.600000" in text
