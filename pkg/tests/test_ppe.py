"""Wearable-item association and windowed compliance checks."""

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from shiftwatch.geometry import box_center
from shiftwatch.ingest import DetectionClass
from shiftwatch.ppe import (
    ComplianceWindow,
    InsufficientEvidence,
    PPEConfig,
    associate_ppe,
    evaluate_compliance,
)

from conftest import make_detection, make_frame

HARDHAT = DetectionClass.HARDHAT
VEST = DetectionClass.SAFETY_VEST
GLOVES = DetectionClass.GLOVES
ALL_REQUIRED = {HARDHAT, VEST, GLOVES}


def ppe_frame(*dets):
    return make_frame(detections=tuple(dets))


class TestPPEConfig:
    def test_defaults(self):
        cfg = PPEConfig()
        assert cfg.required_items == frozenset(ALL_REQUIRED)
        assert cfg.window_frames == 30
        assert cfg.min_observations == 10

    def test_required_items_must_be_nonempty(self):
        with pytest.raises(ValueError):
            PPEConfig(required_items=frozenset())

    def test_min_observations_bounded_by_window(self):
        with pytest.raises(ValueError):
            PPEConfig(window_frames=10, min_observations=11)

    def test_non_wearable_class_rejected(self):
        with pytest.raises(ValueError):
            PPEConfig(required_items=frozenset({DetectionClass.LADDER}))


class TestAssociatePPE:
    def test_centroid_inside_single_box(self):
        frame = ppe_frame(make_detection(HARDHAT, bbox=(12.0, 12.0, 4.0, 4.0)))
        boxes = {1: (100.0, 100.0, 50.0, 80.0), 2: (0.0, 0.0, 50.0, 80.0)}
        assert associate_ppe(frame, boxes) == {1: set(), 2: {HARDHAT}}

    def test_centroid_inside_no_box_unassigned(self):
        frame = ppe_frame(make_detection(HARDHAT, bbox=(500.0, 500.0, 4.0, 4.0)))
        boxes = {1: (0.0, 0.0, 50.0, 80.0)}
        assert associate_ppe(frame, boxes) == {1: set()}

    def test_overlap_tie_goes_to_nearer_center(self):
        # both boxes contain the centroid (25, 40); #5 is strictly nearer
        frame = ppe_frame(make_detection(HARDHAT, bbox=(23.0, 38.0, 4.0, 4.0)))
        boxes = {3: (0.0, 0.0, 60.0, 120.0), 5: (10.0, 10.0, 40.0, 70.0)}
        centroid = (25.0, 40.0)
        d3 = math.dist(centroid, box_center(boxes[3]))
        d5 = math.dist(centroid, box_center(boxes[5]))
        assert d5 < d3  # the oracle the tie-break must reproduce
        assert associate_ppe(frame, boxes) == {3: set(), 5: {HARDHAT}}

    def test_exact_distance_tie_goes_to_lowest_id(self):
        frame = ppe_frame(make_detection(HARDHAT, bbox=(23.0, 38.0, 4.0, 4.0)))
        box = (0.0, 0.0, 50.0, 80.0)
        assert associate_ppe(frame, {9: box, 4: box}) == {9: set(), 4: {HARDHAT}}

    def test_mask_centroid_preferred_over_bbox_center(self):
        # bbox center sits in #1, mask centroid in #2: mask wins
        det = make_detection(HARDHAT, bbox=(0.0, 0.0, 10.0, 10.0), mask_centroid=(75.0, 40.0))
        boxes = {1: (0.0, 0.0, 20.0, 20.0), 2: (60.0, 20.0, 40.0, 40.0)}
        assert associate_ppe(ppe_frame(det), boxes)[2] == {HARDHAT}

    def test_non_wearable_detections_ignored(self):
        frame = ppe_frame(make_detection(DetectionClass.WORKER, bbox=(10.0, 10.0, 5.0, 5.0)))
        assert associate_ppe(frame, {1: (0.0, 0.0, 50.0, 80.0)}) == {1: set()}

    def test_each_detection_assigned_at_most_once(self):
        frame = ppe_frame(make_detection(VEST, bbox=(20.0, 30.0, 4.0, 4.0)))
        boxes = {1: (0.0, 0.0, 50.0, 80.0), 2: (5.0, 5.0, 50.0, 80.0)}
        result = associate_ppe(frame, boxes)
        assert sum(VEST in items for items in result.values()) == 1


class TestComplianceWindow:
    def test_observed_mark_appended(self):
        w = ComplianceWindow(worker_id=1)
        w.update(0, {HARDHAT})
        assert w.observation_count(HARDHAT) == 1
        assert w.observation_count(VEST) == 0
        assert w.presence_frames == 1

    def test_window_holds_last_30_of_35(self):
        w = ComplianceWindow(worker_id=1)
        for i in range(35):
            w.update(i, {HARDHAT} if i < 5 else set())
        assert w.presence_frames == 30
        # ring-buffer oracle: frames 5..34 remain, all hardhat-free
        assert w.evidence_frames() == tuple(range(5, 35))
        assert w.observation_count(HARDHAT) == 0

    def test_frame_span(self):
        w = ComplianceWindow(worker_id=1)
        for i in (3, 6, 9):
            w.update(i, ALL_REQUIRED)
        assert w.frame_span() == (3, 9)


class TestEvaluateCompliance:
    def _window(self, marks):
        """marks: list of observed-item sets, one per presence frame."""
        w = ComplianceWindow(worker_id=7)
        for i, items in enumerate(marks):
            w.update(i, items)
        return w

    def test_vest_never_observed_flagged(self):
        w = self._window([{HARDHAT, GLOVES}] * 30)
        candidate = evaluate_compliance(w)
        assert candidate is not None
        assert candidate.missing_items == (VEST,)
        assert candidate.worker_id == 7
        assert candidate.first_frame == 0
        assert candidate.last_frame == 29

    def test_all_items_observed_once_is_compliant(self):
        marks = [set() for _ in range(12)]
        marks[3] = {HARDHAT}
        marks[5] = {VEST}
        marks[9] = {GLOVES}
        assert evaluate_compliance(self._window(marks)) is None

    def test_insufficient_presence_refuses_to_judge(self):
        w = self._window([set()] * 5)
        with pytest.raises(InsufficientEvidence):
            evaluate_compliance(w)

    def test_threshold_boundary(self):
        """Exactly min_observations presence frames is enough to judge."""
        w = self._window([{HARDHAT, GLOVES}] * 10)
        candidate = evaluate_compliance(w)
        assert candidate.missing_items == (VEST,)
        with pytest.raises(InsufficientEvidence):
            evaluate_compliance(self._window([{HARDHAT, GLOVES}] * 9))

    def test_multiple_missing_items_sorted(self):
        w = self._window([{HARDHAT}] * 15)
        candidate = evaluate_compliance(w)
        assert candidate.missing_items == (GLOVES, VEST)

    def test_missing_items_subset_of_required(self):
        cfg = PPEConfig(required_items=frozenset({HARDHAT}))
        w = ComplianceWindow(worker_id=1, cfg=cfg)
        for i in range(12):
            w.update(i, set())
        candidate = evaluate_compliance(w)
        assert set(candidate.missing_items) <= cfg.required_items

    @given(
        st.lists(
            st.sets(st.sampled_from(sorted(ALL_REQUIRED)), max_size=3),
            min_size=1,
            max_size=50,
        )
    )
    def test_no_judgment_below_min_observations(self, marks):
        """A candidate can never come from fewer than min_observations frames."""
        w = ComplianceWindow(worker_id=1)
        for i, items in enumerate(marks):
            w.update(i, items)
        if w.presence_frames < w.cfg.min_observations:
            with pytest.raises(InsufficientEvidence):
                evaluate_compliance(w)
        else:
            evaluate_compliance(w)  # judgment allowed; outcome may be either

    @given(
        st.lists(
            st.sets(st.sampled_from(sorted(ALL_REQUIRED)), max_size=3),
            min_size=10,
            max_size=30,
        ),
        st.integers(0, 29),
        st.sampled_from(sorted(ALL_REQUIRED)),
    )
    def test_monotone_evidence(self, marks, at, item):
        """Adding one observation of an item can never add it to missing_items."""
        at = min(at, len(marks) - 1)
        base = self._window(marks)
        boosted_marks = list(marks)
        boosted_marks[at] = set(boosted_marks[at]) | {item}
        boosted = self._window(boosted_marks)
        base_candidate = evaluate_compliance(base)
        boosted_candidate = evaluate_compliance(boosted)
        base_missing = set(base_candidate.missing_items) if base_candidate else set()
        boosted_missing = set(boosted_candidate.missing_items) if boosted_candidate else set()
        assert boosted_missing <= base_missing
        assert item not in boosted_missing
