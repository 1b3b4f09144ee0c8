"""Detection/pose stream ingestion.

Parses line-delimited frame records, applies the recall-oriented confidence
gate, subsamples fixed-camera streams, and partitions the shift timeline into
bounded chunks for downstream verification.

Wire format: one JSON object per line with fields ``frame_index``,
``timestamp_s``, optional ``camera``, ``detections[]`` and ``poses[]``. Each
detection carries ``class_label``, ``confidence``, ``bbox`` (x, y, w, h),
optional ``mask_centroid`` (x, y) and optional ``appearance_rgb`` (r, g, b,
0-255) used for identity embeddings. Each pose carries ``keypoints``: exactly
17 ``[x, y, confidence]`` triples in COCO order.
"""

from __future__ import annotations

import enum
import io
import json
import math
from dataclasses import dataclass, field, replace

__all__ = [
    "Camera",
    "DetectionClass",
    "PPE_CLASSES",
    "Detection",
    "KeypointSet",
    "FrameRecord",
    "Chunk",
    "IngestConfig",
    "MalformedRecord",
    "EmptyStream",
    "ParseResult",
    "parse_stream",
    "serialize_frames",
    "gate_detections",
    "stride_frames",
    "chunk_timeline",
    "chunk_bounds",
]

COCO_KEYPOINT_COUNT = 17


class Camera(str, enum.Enum):
    POV = "POV"
    WALL = "WALL"


class DetectionClass(str, enum.Enum):
    """The 12 semantic classes the upstream detector is mapped onto."""

    WORKER = "worker"
    HARDHAT = "hardhat"
    SAFETY_VEST = "safety_vest"
    GLOVES = "gloves"
    SAFETY_GOGGLES = "safety_goggles"
    RESPIRATOR = "respirator"
    EXCAVATOR = "excavator"
    CRANE = "crane"
    FORKLIFT = "forklift"
    TRUCK = "truck"
    LADDER = "ladder"
    SCAFFOLD = "scaffold"


#: Wearable classes eligible for PPE-to-worker association.
PPE_CLASSES: frozenset[DetectionClass] = frozenset(
    {
        DetectionClass.HARDHAT,
        DetectionClass.SAFETY_VEST,
        DetectionClass.GLOVES,
        DetectionClass.SAFETY_GOGGLES,
        DetectionClass.RESPIRATOR,
    }
)


class MalformedRecord(ValueError):
    """A stream line that violates the record schema. Carries the 1-based line number."""

    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number
        self.reason = reason


class EmptyStream(ValueError):
    """A stream that yielded zero valid frame records."""


@dataclass(frozen=True)
class Detection:
    class_label: DetectionClass
    confidence: float
    bbox: tuple[float, float, float, float]  # (x, y, w, h) pixels
    frame_index: int
    timestamp_s: float
    mask_centroid: tuple[float, float] | None = None
    appearance_rgb: tuple[int, int, int] | None = None

    def centroid(self) -> tuple[float, float]:
        """Mask centroid when available, else the bbox center."""
        if self.mask_centroid is not None:
            return self.mask_centroid
        x, y, w, h = self.bbox
        return (x + w / 2.0, y + h / 2.0)


@dataclass(frozen=True)
class KeypointSet:
    keypoints: tuple[tuple[float, float, float], ...]  # 17 x (x, y, confidence)
    frame_index: int
    timestamp_s: float

    def __post_init__(self) -> None:
        if len(self.keypoints) != COCO_KEYPOINT_COUNT:
            raise ValueError(f"expected {COCO_KEYPOINT_COUNT} keypoints, got {len(self.keypoints)}")


@dataclass(frozen=True)
class FrameRecord:
    frame_index: int
    timestamp_s: float
    camera: Camera
    detections: tuple[Detection, ...] = ()
    poses: tuple[KeypointSet, ...] = ()


@dataclass(frozen=True)
class Chunk:
    """A bounded contiguous slice of the shift timeline.

    ``video_uri`` references the source footage for this time span (the
    pipeline never decodes video; the reference is handed to the verifier).
    """

    start_s: float
    end_s: float
    frames: tuple[FrameRecord, ...]
    video_uri: str | None = None

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class IngestConfig:
    conf_gate: float = 0.15
    wall_frame_stride: int = 3
    chunk_length_s: float = 60.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.conf_gate <= 1.0:
            raise ValueError("conf_gate must be in [0, 1]")
        if self.wall_frame_stride < 1:
            raise ValueError("wall_frame_stride must be >= 1")
        if self.chunk_length_s <= 0:
            raise ValueError("chunk_length_s must be positive")


@dataclass
class ParseResult:
    """Valid frames plus skip-with-report diagnostics for malformed lines."""

    frames: list[FrameRecord]
    malformed: list[MalformedRecord] = field(default_factory=list)


def _require(cond: bool, line_no: int, reason: str) -> None:
    if not cond:
        raise MalformedRecord(line_no, reason)


def _as_real(value: object, line_no: int, name: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise MalformedRecord(line_no, f"{name} must be a finite number")
    return float(value)


def _parse_detection(obj: object, line_no: int, frame_index: int, timestamp_s: float) -> Detection:
    _require(isinstance(obj, dict), line_no, "detection must be an object")
    assert isinstance(obj, dict)
    try:
        label = DetectionClass(obj.get("class_label"))
    except ValueError:
        raise MalformedRecord(line_no, f"unknown class_label {obj.get('class_label')!r}") from None
    conf = _as_real(obj.get("confidence"), line_no, "confidence")
    _require(0.0 <= conf <= 1.0, line_no, f"confidence {conf} outside [0, 1]")
    bbox = obj.get("bbox")
    _require(isinstance(bbox, (list, tuple)) and len(bbox) == 4, line_no, "bbox must have 4 entries")
    x, y, w, h = (_as_real(v, line_no, "bbox entry") for v in bbox)  # type: ignore[union-attr]
    _require(w > 0 and h > 0, line_no, "bbox width and height must be positive")
    centroid = obj.get("mask_centroid")
    if centroid is not None:
        _require(
            isinstance(centroid, (list, tuple)) and len(centroid) == 2,
            line_no,
            "mask_centroid must have 2 entries",
        )
        centroid = tuple(_as_real(v, line_no, "mask_centroid entry") for v in centroid)
    rgb = obj.get("appearance_rgb")
    if rgb is not None:
        _require(
            isinstance(rgb, (list, tuple)) and len(rgb) == 3
            and all(isinstance(v, int) and 0 <= v <= 255 for v in rgb),
            line_no,
            "appearance_rgb must be 3 ints in [0, 255]",
        )
        rgb = (int(rgb[0]), int(rgb[1]), int(rgb[2]))
    return Detection(
        class_label=label,
        confidence=conf,
        bbox=(x, y, w, h),
        frame_index=frame_index,
        timestamp_s=timestamp_s,
        mask_centroid=centroid,
        appearance_rgb=rgb,
    )


def _parse_pose(obj: object, line_no: int, frame_index: int, timestamp_s: float) -> KeypointSet:
    _require(isinstance(obj, dict), line_no, "pose must be an object")
    assert isinstance(obj, dict)
    kps = obj.get("keypoints")
    _require(
        isinstance(kps, (list, tuple)) and len(kps) == COCO_KEYPOINT_COUNT,
        line_no,
        f"keypoints must have exactly {COCO_KEYPOINT_COUNT} entries",
    )
    parsed = []
    for kp in kps:  # type: ignore[union-attr]
        _require(isinstance(kp, (list, tuple)) and len(kp) == 3, line_no, "keypoint must be [x, y, conf]")
        kx, ky, kc = (_as_real(v, line_no, "keypoint entry") for v in kp)
        _require(0.0 <= kc <= 1.0, line_no, f"keypoint confidence {kc} outside [0, 1]")
        parsed.append((kx, ky, kc))
    return KeypointSet(keypoints=tuple(parsed), frame_index=frame_index, timestamp_s=timestamp_s)


def _parse_line(line: str, line_no: int, camera: Camera) -> FrameRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(line_no, f"invalid JSON: {exc.msg}") from None
    _require(isinstance(obj, dict), line_no, "record must be a JSON object")
    frame_index = obj.get("frame_index")
    _require(
        isinstance(frame_index, int) and not isinstance(frame_index, bool) and frame_index >= 0,
        line_no,
        "frame_index must be a non-negative integer",
    )
    timestamp_s = _as_real(obj.get("timestamp_s"), line_no, "timestamp_s")
    _require(timestamp_s >= 0.0, line_no, "timestamp_s must be non-negative")
    if "camera" in obj:
        _require(obj["camera"] == camera.value, line_no, f"camera {obj['camera']!r} does not match stream camera {camera.value!r}")
    detections = tuple(
        _parse_detection(d, line_no, frame_index, timestamp_s) for d in obj.get("detections", [])
    )
    poses = tuple(_parse_pose(p, line_no, frame_index, timestamp_s) for p in obj.get("poses", []))
    return FrameRecord(
        frame_index=frame_index,
        timestamp_s=timestamp_s,
        camera=camera,
        detections=detections,
        poses=poses,
    )


def parse_stream(
    source: io.IOBase | bytes | str,
    camera: Camera,
    strict: bool = False,
) -> ParseResult:
    """Parse a line-delimited stream of frame records.

    Malformed lines are skipped and reported (``ParseResult.malformed``) so a
    single corrupt record cannot void a shift; pass ``strict=True`` to raise
    on the first bad line instead. Frames are returned ordered by
    ``frame_index``.

    Raises:
        EmptyStream: when zero valid records were found.
        MalformedRecord: in strict mode, on the first schema violation.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw

    frames: list[FrameRecord] = []
    malformed: list[MalformedRecord] = []
    last_ts = -math.inf
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = _parse_line(line, line_no, camera)
            _require(
                record.timestamp_s >= last_ts,
                line_no,
                f"timestamp_s {record.timestamp_s} regresses below {last_ts}",
            )
        except MalformedRecord as exc:
            if strict:
                raise
            malformed.append(exc)
            continue
        last_ts = record.timestamp_s
        frames.append(record)

    if not frames:
        raise EmptyStream(f"no valid records in {camera.value} stream")
    frames.sort(key=lambda f: f.frame_index)
    return ParseResult(frames=frames, malformed=malformed)


def serialize_frames(frames: list[FrameRecord]) -> str:
    """Inverse of :func:`parse_stream` for valid records (round-trip safe)."""
    lines = []
    for f in frames:
        obj: dict = {
            "frame_index": f.frame_index,
            "timestamp_s": f.timestamp_s,
            "camera": f.camera.value,
            "detections": [],
            "poses": [],
        }
        for d in f.detections:
            det: dict = {
                "class_label": d.class_label.value,
                "confidence": d.confidence,
                "bbox": list(d.bbox),
            }
            if d.mask_centroid is not None:
                det["mask_centroid"] = list(d.mask_centroid)
            if d.appearance_rgb is not None:
                det["appearance_rgb"] = list(d.appearance_rgb)
            obj["detections"].append(det)
        for p in f.poses:
            obj["poses"].append({"keypoints": [list(kp) for kp in p.keypoints]})
        lines.append(json.dumps(obj))
    return "\n".join(lines) + ("\n" if lines else "")


def gate_detections(frames: list[FrameRecord], cfg: IngestConfig) -> list[FrameRecord]:
    """Drop detections below the confidence gate (inclusive: conf == gate survives)."""
    gated = []
    for f in frames:
        kept = tuple(d for d in f.detections if d.confidence >= cfg.conf_gate)
        gated.append(replace(f, detections=kept) if len(kept) != len(f.detections) else f)
    return gated


def stride_frames(frames: list[FrameRecord], cfg: IngestConfig) -> list[FrameRecord]:
    """Subsample fixed-camera frames; body-worn streams pass through at full rate.

    Keeps WALL frames whose ``frame_index`` is a multiple of the stride, so the
    kept set is reproducible even across dropped or missing frames.
    """
    if cfg.wall_frame_stride == 1:
        return list(frames)
    return [
        f
        for f in frames
        if f.camera is not Camera.WALL or f.frame_index % cfg.wall_frame_stride == 0
    ]


def chunk_bounds(duration_s: float, chunk_length_s: float = 60.0) -> list[tuple[float, float]]:
    """Disjoint ``[start, end)`` spans of at most ``chunk_length_s`` covering ``[0, duration_s)``."""
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    count = max(1, math.ceil(duration_s / chunk_length_s))
    bounds = []
    for k in range(count):
        start = k * chunk_length_s
        end = min((k + 1) * chunk_length_s, duration_s)
        if end <= start:
            break
        bounds.append((start, end))
    return bounds


def chunk_timeline(
    frames: list[FrameRecord],
    cfg: IngestConfig,
    video_uri: str | None = None,
    duration_s: float | None = None,
) -> list[Chunk]:
    """Partition time-ordered frames into non-overlapping chunks.

    Boundaries are computed from timestamps (variable frame rate tolerated).
    The final chunk may be shorter; a frame timestamped exactly at the total
    duration lands in the final chunk. Per-chunk video references use media
    fragments (``uri#t=start,end``) when a base ``video_uri`` is supplied.

    Raises:
        EmptyStream: when ``frames`` is empty.
    """
    if not frames:
        raise EmptyStream("cannot chunk an empty frame list")
    if duration_s is None:
        duration_s = max(f.timestamp_s for f in frames)
        if duration_s <= 0.0:
            duration_s = cfg.chunk_length_s  # single-instant stream: one chunk
    bounds = chunk_bounds(duration_s, cfg.chunk_length_s)
    buckets: list[list[FrameRecord]] = [[] for _ in bounds]
    for f in frames:
        idx = min(int(f.timestamp_s // cfg.chunk_length_s), len(bounds) - 1)
        buckets[idx].append(f)
    chunks = []
    for (start, end), bucket in zip(bounds, buckets):
        uri = f"{video_uri}#t={start:g},{end:g}" if video_uri else None
        chunks.append(Chunk(start_s=start, end_s=end, frames=tuple(bucket), video_uri=uri))
    return chunks
