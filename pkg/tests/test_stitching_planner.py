"""Tests for the dynamic stitching planner."""
import math
from collections import Counter

import pytest

from sceneground.stitching import CANDIDATE_LAYOUTS, Layout, plan_layouts
from sceneground.stitching.planner import LAYOUT_4, LAYOUT_8, LAYOUT_16, LAYOUT_27


def counts(plan):
    return Counter((e.layout.rows, e.layout.cols) for e in plan.entries)


# =============================================================================
# WORKED EXAMPLES
# =============================================================================

def test_forty_frames_limit_six():
    assert counts(plan_layouts(40, 6)) == {(4, 1): 2, (2, 4): 4}


def test_eighty_four_frames_limit_six():
    assert counts(plan_layouts(84, 6)) == {(4, 1): 1, (8, 2): 5}


def test_four_frames_limit_one():
    plan = plan_layouts(4, 1)
    assert [(e.layout, e.frame_ids) for e in plan.entries] == [
        (LAYOUT_4, ("00000", "00001", "00002", "00003"))
    ]


def test_overflow_two_hundred_frames_limit_six():
    plan = plan_layouts(200, 6)
    assert counts(plan) == {(9, 3): 7, (8, 2): 1}
    assert plan.image_count == 8
    assert plan.soft_limit_exceeded


def test_zero_frames_give_empty_plan():
    plan = plan_layouts(0, 6)
    assert plan.entries == ()
    assert not plan.soft_limit_exceeded


def test_invalid_arguments():
    with pytest.raises(ValueError):
        plan_layouts(-1, 6)
    with pytest.raises(ValueError):
        plan_layouts(3, 0)
    with pytest.raises(ValueError):
        plan_layouts(3, 2, ["00000"])


def test_custom_frame_ids_are_placed_in_order():
    ids = ["00003", "00010", "00012", "00040", "00041"]
    plan = plan_layouts(5, 1, ids)
    assert [fid for e in plan.entries for fid in e.frame_ids] == ids


def test_layout_str():
    assert str(Layout(rows=2, cols=4)) == "(2, 4)"
    assert [l.capacity for l in CANDIDATE_LAYOUTS] == [4, 8, 16, 27]


# =============================================================================
# EXHAUSTIVE SWEEP AGAINST A DIRECT TRANSCRIPTION
# =============================================================================

def oracle_counts(n, limit):
    """Layout counts straight from the pseudocode, written independently of the planner."""
    def ceil_pos(a, b):
        return max(math.ceil(a / b), 0)

    if n == 0:
        return Counter()
    if n <= 4 * limit:
        return Counter({LAYOUT_4: math.ceil(n / 4)})
    if n <= 8 * limit:
        n8 = ceil_pos(n - 4 * limit, 4)
        n4 = limit - n8
        return Counter({LAYOUT_4: n4, LAYOUT_8: math.ceil((n - 4 * n4) / 8)})
    if n <= 16 * limit:
        n16 = ceil_pos(n - 8 * limit, 8)
        rest = max(n - 16 * n16, 0)
        n48 = limit - n16
        n8 = ceil_pos(rest - 4 * n48, 4)
        n4 = n48 - n8
        last = n - 4 * n4 - 8 * n8
        return Counter({LAYOUT_4: n4, LAYOUT_8: n8, LAYOUT_16: math.ceil(last / 16)})
    if n <= 27 * limit:
        n27 = ceil_pos(n - 16 * limit, 11)
        n4816 = limit - n27
        rest = max(n - 27 * n27, 0)
        n16 = ceil_pos(rest - 8 * n4816, 8)
        n48 = n4816 - n16
        rest = max(rest - 16 * n16, 0)
        n8 = ceil_pos(rest - 4 * n48, 4)
        n4 = n48 - n8
        last = n - 4 * n4 - 8 * n8 - 16 * n16
        return Counter({LAYOUT_4: n4, LAYOUT_8: n8, LAYOUT_16: n16, LAYOUT_27: math.ceil(last / 27)})
    n27 = n // 27
    return Counter({LAYOUT_27: n27}) + oracle_counts(n - 27 * n27, 1)


def test_exhaustive_sweep():
    for limit in range(1, 11):
        previous_images = 0
        for n in range(0, 501):
            plan = plan_layouts(n, limit)
            placed = [fid for e in plan.entries for fid in e.frame_ids]

            assert plan.total_capacity >= n
            assert sorted(placed) == [f"{i:05d}" for i in range(n)]
            assert len(set(placed)) == n

            capacities = [e.layout.capacity for e in plan.entries]
            assert capacities == sorted(capacities)
            assert all(len(e.frame_ids) > 0 for e in plan.entries)
            if plan.entries and n <= 27 * limit:
                largest = capacities[-1]
                assert all(len(e.frame_ids) == e.layout.capacity for e in plan.entries if e.layout.capacity < largest)

            if n <= 4 * limit:
                assert all(e.layout == LAYOUT_4 for e in plan.entries)
            if n <= 27 * limit:
                assert plan.image_count <= limit
                assert not plan.soft_limit_exceeded
            else:
                assert plan.soft_limit_exceeded
                assert sum(1 for e in plan.entries if e.layout == LAYOUT_27) >= n // 27

            expected = +oracle_counts(n, limit)
            assert Counter(e.layout for e in plan.entries) == expected, (n, limit)

            assert plan.image_count >= previous_images, (n, limit)
            previous_images = plan.image_count


def test_plans_are_deterministic():
    assert plan_layouts(137, 4) == plan_layouts(137, 4)


def test_layout_counts_groups_consecutive_entries():
    plan = plan_layouts(40, 6)
    assert plan.layout_counts() == [(LAYOUT_4, 2), (LAYOUT_8, 4)]
    assert plan_layouts(0, 6).layout_counts() == []


# =============================================================================
# ABLATION STRATEGIES
# =============================================================================

def test_no_stitching_gives_one_frame_per_image():
    plan = plan_layouts(5, 6, strategy="none")
    assert [(e.layout, e.frame_ids) for e in plan.entries] == [
        (Layout(rows=1, cols=1), (f"{k:05d}",)) for k in range(5)
    ]
    assert not plan.soft_limit_exceeded
    assert plan_layouts(7, 6, strategy="none").soft_limit_exceeded


def test_fixed_strategy_uses_eight_by_two_only():
    plan = plan_layouts(40, 6, strategy="fixed")
    assert counts(plan) == {(8, 2): 3}
    assert [len(e.frame_ids) for e in plan.entries] == [16, 16, 8]
    assert not plan.soft_limit_exceeded
    assert plan_layouts(97, 6, strategy="fixed").soft_limit_exceeded


def test_square_strategy_stays_within_the_limit():
    plan = plan_layouts(100, 6, strategy="square")
    assert counts(plan) == {(5, 4): 5}
    assert [fid for e in plan.entries for fid in e.frame_ids] == [f"{k:05d}" for k in range(100)]

    for n in range(1, 300):
        for limit in (1, 2, 6):
            plan = plan_layouts(n, limit, strategy="square")
            layout = plan.entries[0].layout
            assert plan.image_count <= limit, (n, limit)
            assert layout.rows - layout.cols in (0, 1), (n, limit)
            assert not plan.soft_limit_exceeded


def test_unknown_strategy_is_rejected():
    with pytest.raises(ValueError, match="unknown stitching strategy"):
        plan_layouts(4, 1, strategy="spiral")
