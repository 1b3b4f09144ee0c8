"""Shared builders for stream records used across the suite."""

from __future__ import annotations

import json

from shiftwatch.ingest import (
    Camera,
    Detection,
    DetectionClass,
    FrameRecord,
    KeypointSet,
)


def make_detection(
    label: DetectionClass = DetectionClass.WORKER,
    confidence: float = 0.9,
    bbox: tuple[float, float, float, float] = (10.0, 20.0, 40.0, 80.0),
    frame_index: int = 0,
    timestamp_s: float = 0.0,
    **kwargs,
) -> Detection:
    return Detection(
        class_label=label,
        confidence=confidence,
        bbox=bbox,
        frame_index=frame_index,
        timestamp_s=timestamp_s,
        **kwargs,
    )


def make_pose(
    keypoints: list[tuple[float, float, float]] | None = None,
    frame_index: int = 0,
    timestamp_s: float = 0.0,
) -> KeypointSet:
    if keypoints is None:
        keypoints = [(100.0 + i, 50.0 + i, 0.9) for i in range(17)]
    return KeypointSet(keypoints=tuple(keypoints), frame_index=frame_index, timestamp_s=timestamp_s)


def make_frame(
    frame_index: int = 0,
    timestamp_s: float = 0.0,
    camera: Camera = Camera.WALL,
    detections: tuple[Detection, ...] = (),
    poses: tuple[KeypointSet, ...] = (),
) -> FrameRecord:
    return FrameRecord(
        frame_index=frame_index,
        timestamp_s=timestamp_s,
        camera=camera,
        detections=detections,
        poses=poses,
    )


def frame_line(
    frame_index: int,
    timestamp_s: float,
    camera: str = "WALL",
    detections: list[dict] | None = None,
    poses: list[dict] | None = None,
) -> str:
    """One wire-format stream line."""
    return json.dumps(
        {
            "frame_index": frame_index,
            "timestamp_s": timestamp_s,
            "camera": camera,
            "detections": detections or [],
            "poses": poses or [],
        }
    )


def det_obj(label: str = "worker", confidence: float = 0.9, bbox=None, **extra) -> dict:
    obj = {"class_label": label, "confidence": confidence, "bbox": bbox or [10, 20, 40, 80]}
    obj.update(extra)
    return obj
