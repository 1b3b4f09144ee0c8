"""PPE-to-worker association and temporal compliance evaluation.

A wearable detection belongs to the worker whose box contains its centroid.
Compliance is judged over an accumulation window of recent sightings of the
worker, never from a single frame: an item is "missing" only when it was
observed zero times across the whole window.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .geometry import box_center, contains_point
from .ingest import PPE_CLASSES, DetectionClass, FrameRecord

__all__ = [
    "PPEConfig",
    "ComplianceWindow",
    "PPEViolationCandidate",
    "InsufficientEvidence",
    "associate_ppe",
    "evaluate_compliance",
]

DEFAULT_REQUIRED: frozenset[DetectionClass] = frozenset(
    {DetectionClass.HARDHAT, DetectionClass.SAFETY_VEST, DetectionClass.GLOVES}
)


class InsufficientEvidence(Exception):
    """Too few sightings of the worker to judge compliance yet."""


@dataclass(frozen=True)
class PPEConfig:
    required_items: frozenset[DetectionClass] = DEFAULT_REQUIRED
    window_frames: int = 30
    min_observations: int = 10

    def __post_init__(self) -> None:
        if not self.required_items:
            raise ValueError("required_items must be non-empty")
        if not self.required_items <= PPE_CLASSES:
            raise ValueError("required_items must be wearable classes")
        if not 1 <= self.min_observations <= self.window_frames:
            raise ValueError("min_observations must be in [1, window_frames]")


@dataclass(frozen=True)
class PPEViolationCandidate:
    worker_id: int
    missing_items: tuple[DetectionClass, ...]
    first_frame: int
    last_frame: int
    evidence_frames: tuple[int, ...]


def associate_ppe(
    frame: FrameRecord,
    worker_boxes: dict[int, tuple[float, float, float, float]],
) -> dict[int, set[DetectionClass]]:
    """Assign each wearable detection to the worker box containing its centroid.

    Containment ties go to the nearest box center (then lowest worker_id).
    Items contained by no box stay unassigned. Each detection contributes to
    at most one worker.
    """
    assigned: dict[int, set[DetectionClass]] = {wid: set() for wid in worker_boxes}
    for det in frame.detections:
        if det.class_label not in PPE_CLASSES:
            continue
        centroid = det.centroid()
        holders = [
            wid for wid, box in worker_boxes.items() if contains_point(box, centroid)
        ]
        if not holders:
            continue
        winner = min(
            holders,
            key=lambda wid: (
                math.dist(centroid, box_center(worker_boxes[wid])),
                wid,
            ),
        )
        assigned[winner].add(det.class_label)
    return assigned


@dataclass
class ComplianceWindow:
    """Ring buffer of per-item sighting marks for one worker.

    Advance with :meth:`update` once per processed frame the worker appears
    in; frames without the worker leave the window untouched.
    """

    worker_id: int
    cfg: PPEConfig = field(default_factory=PPEConfig)
    _marks: dict[DetectionClass, deque[tuple[int, bool]]] = field(init=False)

    def __post_init__(self) -> None:
        self._marks = {
            item: deque(maxlen=self.cfg.window_frames) for item in sorted(self.cfg.required_items)
        }

    def update(self, frame_index: int, observed_items: set[DetectionClass]) -> None:
        for item, marks in self._marks.items():
            marks.append((frame_index, item in observed_items))

    @property
    def presence_frames(self) -> int:
        """Sightings of the worker currently inside the window."""
        return len(next(iter(self._marks.values())))

    def observation_count(self, item: DetectionClass) -> int:
        return sum(seen for _, seen in self._marks[item])

    def frame_span(self) -> tuple[int, int]:
        frames = [f for f, _ in next(iter(self._marks.values()))]
        return frames[0], frames[-1]

    def evidence_frames(self) -> tuple[int, ...]:
        return tuple(f for f, _ in next(iter(self._marks.values())))


def evaluate_compliance(
    window: ComplianceWindow, cfg: PPEConfig | None = None
) -> PPEViolationCandidate | None:
    """Emit a violation candidate for items never observed in the window.

    Returns None when every required item was seen at least once.

    Raises:
        InsufficientEvidence: fewer presence frames than min_observations;
            the worker has not been seen enough to judge.
    """
    cfg = cfg or window.cfg
    presence = window.presence_frames
    if presence < cfg.min_observations:
        raise InsufficientEvidence(
            f"worker {window.worker_id}: {presence} presence frames < {cfg.min_observations}"
        )
    missing = tuple(
        item for item in sorted(cfg.required_items) if window.observation_count(item) == 0
    )
    if not missing:
        return None
    first, last = window.frame_span()
    return PPEViolationCandidate(
        worker_id=window.worker_id,
        missing_items=missing,
        first_frame=first,
        last_frame=last,
        evidence_frames=window.evidence_frames(),
    )
