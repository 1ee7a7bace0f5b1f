import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ernetcl.errors import EmptyError, ShapeError
from ernetcl.metrics import aggregate, build_report, confusion_matrix, f1_scores

from oracles import brute_metrics

Y = [0, 0, 1, 1, 2]
P = [0, 1, 1, 1, 2]


def test_perfect_predictions_are_diagonal():
    assert np.array_equal(confusion_matrix([0, 1, 2, 1], [0, 1, 2, 1], 3), np.diag([1, 2, 1]))


def test_empty_input():
    assert np.array_equal(confusion_matrix([], [], 3), np.zeros((3, 3)))


def test_worked_example_counts():
    assert confusion_matrix(Y, P, 3).tolist() == [[1, 1, 0], [0, 2, 0], [0, 0, 1]]


def test_length_mismatch():
    with pytest.raises(ShapeError):
        confusion_matrix([0, 1], [0], 2)


def test_f1_diagonal():
    _, _, f1 = f1_scores(np.diag([3, 1, 2]))
    assert np.array_equal(f1, [1.0, 1.0, 1.0])


def test_absent_class_scores_zero():
    _, _, f1 = f1_scores(confusion_matrix([0, 1], [0, 1], 3))
    assert f1[2] == 0.0


def test_worked_example_f1():
    _, _, f1 = f1_scores(confusion_matrix(Y, P, 3))
    np.testing.assert_allclose(f1, [2 / 3, 0.8, 1.0], rtol=0, atol=1e-15)


def test_worked_example_aggregates():
    cm = confusion_matrix(Y, P, 3)
    # (2*2/3 + 2*0.8 + 1*1) / 5 and (2/3 + 0.8 + 1) / 3 by hand
    assert aggregate(cm, "weighted") == pytest.approx(0.78666666666666667, abs=1e-12)
    assert aggregate(cm, "micro") == pytest.approx(0.8, abs=1e-12)
    assert aggregate(cm, "macro") == pytest.approx(0.82222222222222222, abs=1e-12)


def test_perfect_all_modes():
    cm = confusion_matrix([0, 1, 2, 2], [0, 1, 2, 2], 3)
    for mode in ("weighted", "micro", "macro"):
        assert aggregate(cm, mode) == 1.0


def test_exclude_everything():
    with pytest.raises(EmptyError):
        aggregate(np.eye(2, dtype=int), "micro", exclude=[0, 1])


def test_neutral_exclusion_convention():
    # class 0 is neutral. gold neutral predicted 1 -> FP for class 1; gold 2 predicted neutral -> FN for class 2.
    y = [0, 2, 1, 2]
    p = [1, 0, 1, 2]
    tp, fp, fn = 2, 1, 1
    expected = 2 * tp / (2 * tp + fp + fn)
    assert aggregate(confusion_matrix(y, p, 3), "micro", exclude=[0]) == pytest.approx(expected, abs=1e-15)


labels = st.integers(0, 4)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(labels, labels), max_size=50), st.sets(st.integers(0, 4), max_size=3))
def test_aggregates_match_brute_force(pairs, exclude):
    y = [a for a, _ in pairs]
    p = [b for _, b in pairs]
    cm = confusion_matrix(y, p, 5)
    ref = brute_metrics(y, p, 5, exclude)
    np.testing.assert_allclose(f1_scores(cm)[2], ref["f1"], rtol=0, atol=1e-12)
    for mode in ("weighted", "micro", "macro"):
        assert abs(aggregate(cm, mode, exclude) - ref[mode]) < 1e-12
    if pairs:
        assert aggregate(cm, "micro") == pytest.approx(np.mean(np.equal(y, p)), abs=1e-15)
        _, _, f1 = f1_scores(cm)
        present = cm.sum(axis=1) > 0
        w = aggregate(cm, "weighted")
        assert f1[present].min() - 1e-12 <= w <= f1[present].max() + 1e-12


def test_report_optional_neutral_field():
    names = ["neutral", "joy", "anger"]
    with_neutral = build_report(Y, P, names, neutral_index=0)
    without = build_report(Y, P, names)
    assert with_neutral.micro_f1_excl_neutral is not None
    assert without.micro_f1_excl_neutral is None
    assert "micro_f1_excl_neutral" not in without.to_kv()
    assert "micro_f1_excl_neutral=" in with_neutral.to_kv()


def test_report_rendering_names_classes():
    text = build_report(Y, P, ["neutral", "joy", "anger"]).render()
    for token in ("neutral", "joy", "anger", "weighted_f1=0.786667", "micro_f1=0.800000", "macro_f1=0.822222"):
        assert token in text
