"""Tests for grounding metrics and accuracy reports."""
import numpy as np
import pytest

from sceneground.evaluation import (
    EvalRecord,
    accuracy_report,
    format_report_table,
    iou3d,
    mask_iou,
    nr3d_accuracy,
    nr3d_match,
)
from sceneground.scene.models import Aabb3, Mask2D

UNIT = Aabb3.from_list([0, 0, 0, 1, 1, 1])


def shifted(box: Aabb3, dx: float = 0.0, dy: float = 0.0, dz: float = 0.0) -> Aabb3:
    offset = np.array([dx, dy, dz])
    return Aabb3.from_list([*(np.asarray(box.min) + offset), *(np.asarray(box.max) + offset)])


def test_iou3d_half_shift_is_one_third():
    assert abs(iou3d(UNIT, shifted(UNIT, dx=0.5)) - 1.0 / 3.0) < 1e-9


def test_iou3d_identical_disjoint_and_degenerate():
    assert iou3d(UNIT, UNIT) == 1.0
    assert iou3d(UNIT, shifted(UNIT, dx=2.0)) == 0.0
    flat = Aabb3.from_list([0, 0, 0, 1, 1, 0])
    assert iou3d(flat, UNIT) == 0.0
    assert iou3d(flat, flat) == 1.0


def test_iou3d_is_symmetric_and_translation_invariant():
    rng = np.random.default_rng(8)
    for _ in range(50):
        lo_a, lo_b = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
        a = Aabb3.from_list([*lo_a, *(lo_a + rng.uniform(0.1, 2, 3))])
        b = Aabb3.from_list([*lo_b, *(lo_b + rng.uniform(0.1, 2, 3))])
        assert iou3d(a, b) == pytest.approx(iou3d(b, a))
        assert iou3d(shifted(a, 3, -2, 1), shifted(b, 3, -2, 1)) == pytest.approx(iou3d(a, b))
        assert 0.0 <= iou3d(a, b) <= 1.0


def test_mask_iou():
    square = np.zeros((20, 20), dtype=bool)
    square[0:10, 0:10] = True
    half = np.zeros((20, 20), dtype=bool)
    half[0:10, 5:15] = True
    assert mask_iou(Mask2D("00000", square), Mask2D("00000", half)) == pytest.approx(1.0 / 3.0)

    empty = Mask2D("00000", np.zeros((20, 20), dtype=bool))
    assert mask_iou(empty, empty) == 1.0
    with pytest.raises(ValueError):
        mask_iou(empty, Mask2D("00000", np.zeros((10, 20), dtype=bool)))


def records(ious, splits=()):
    return [EvalRecord(query_id=f"q{i}", iou3d=v, splits=splits) for i, v in enumerate(ious)]


def test_accuracy_report_counts_thresholds():
    report = accuracy_report(records([0.9, 0.3, 0.2, 0.6]))
    assert (report.overall.acc25, report.overall.acc50) == (75.0, 50.0)
    assert report.overall.count == 4


def test_hits_are_strictly_greater():
    report = accuracy_report(records([0.26]))
    assert (report.overall.acc25, report.overall.acc50) == (100.0, 0.0)
    on_threshold = EvalRecord(query_id="q", iou3d=0.25)
    assert not on_threshold.hit25


def test_report_splits_and_weighted_overall():
    unique = records([0.9, 0.1], splits=("unique",))
    multiple = [EvalRecord(query_id=f"m{i}", iou3d=v, splits=("multiple", "hard")) for i, v in enumerate([0.6, 0.6, 0.3])]
    report = accuracy_report(unique + multiple)

    assert [r.split for r in report.rows] == ["overall", "unique", "multiple", "hard"]
    assert report.row("unique").acc25 == 50.0
    assert report.row("multiple").acc50 == 66.7
    split_hits = report.row("unique").acc25 * 2 + report.row("multiple").acc25 * 3
    assert report.overall.acc25 == pytest.approx(split_hits / 5, abs=0.1)

    with pytest.raises(ValueError):
        accuracy_report([])


def test_missing_prediction_scores_zero():
    record = EvalRecord.score("q1", None, UNIT)
    assert record.iou3d == 0.0 and not record.hit25


def test_mask_columns_only_when_masks_are_scored():
    plain = format_report_table(accuracy_report(records([0.9, 0.3])))
    assert plain.splitlines()[0].split() == ["split", "count", "Acc@0.25", "Acc@0.5"]
    assert plain.splitlines()[1].split() == ["overall", "2", "100.0", "50.0"]

    masked = [EvalRecord(query_id="q", iou3d=0.9, mask_iou=0.4), EvalRecord(query_id="r", iou3d=0.1)]
    table = format_report_table(accuracy_report(masked))
    assert table.splitlines()[1].split() == ["overall", "2", "50.0", "50.0", "100.0", "0.0"]


def test_nr3d_match_closest_center_and_tie():
    pred = Aabb3.from_list([0, 0, 0, 1, 1, 1])
    left = shifted(pred, dx=-1.0)
    right = shifted(pred, dx=1.0)
    far = shifted(pred, dy=5.0)
    assert nr3d_match(pred, [far, right]) == 1
    assert nr3d_match(pred, [far, left, right]) == 1
    assert nr3d_match(pred, [far, right, left]) == 1
    with pytest.raises(ValueError):
        nr3d_match(pred, [])


def test_nr3d_match_invariant_under_translation():
    rng = np.random.default_rng(4)
    gts = [Aabb3.from_list([*lo, *(lo + 0.5)]) for lo in rng.uniform(-3, 3, size=(6, 3))]
    pred = Aabb3.from_list([0.1, 0.2, 0.3, 0.7, 0.9, 1.0])
    moved = [shifted(g, 10, -4, 2) for g in gts]
    assert nr3d_match(shifted(pred, 10, -4, 2), moved) == nr3d_match(pred, gts)


def test_nr3d_accuracy():
    assert nr3d_accuracy([(0, 0), (1, 2), (None, 1), (3, 3)]) == 50.0
    with pytest.raises(ValueError):
        nr3d_accuracy([])
