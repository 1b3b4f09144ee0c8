"""Persistent worker identity for a single camera stream.

Two mechanisms keep identities stable: short occlusions are bridged by a
constant-velocity motion model with greedy IoU association, and long gaps are
bridged by re-associating appearance embeddings against a per-shift identity
database. One tracker instance per stream; instances are stateful and must be
stepped in time order.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .geometry import Box, iou
from .ingest import Detection

__all__ = [
    "TrackStatus",
    "MotionState",
    "Track",
    "TrackerConfig",
    "AppearanceEmbedding",
    "WorkerIdentity",
    "IdentityDatabase",
    "Tracker",
    "DegenerateRegion",
    "associate_greedy",
    "compute_embedding",
    "cosine_similarity",
]

EMBEDDING_HISTORY = 8


class DegenerateRegion(ValueError):
    """An embedding was requested for a region with no pixels."""


class TrackStatus(enum.Enum):
    ACTIVE = "ACTIVE"
    LOST = "LOST"
    RETIRED = "RETIRED"


@dataclass(frozen=True)
class TrackerConfig:
    iou_gate: float = 0.3
    max_lost_frames: int = 30
    embed_sim_threshold: float = 0.80
    embedding_dim: int = 64

    def __post_init__(self) -> None:
        if not 0.0 <= self.iou_gate <= 1.0:
            raise ValueError("iou_gate must be in [0, 1]")
        if self.max_lost_frames < 1:
            raise ValueError("max_lost_frames must be >= 1")
        if not 0.0 <= self.embed_sim_threshold <= 1.0:
            raise ValueError("embed_sim_threshold must be in [0, 1]")
        bins = round(self.embedding_dim ** (1 / 3))
        if bins**3 != self.embedding_dim:
            raise ValueError("embedding_dim must be a perfect cube (joint color histogram)")


@dataclass(frozen=True)
class AppearanceEmbedding:
    vector: tuple[float, ...]

    @property
    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.vector))


def cosine_similarity(a: AppearanceEmbedding, b: AppearanceEmbedding) -> float:
    if len(a.vector) != len(b.vector):
        raise ValueError("embedding dimensions differ")
    dot = sum(x * y for x, y in zip(a.vector, b.vector))
    denom = a.norm * b.norm
    if denom == 0.0:
        return 0.0
    return dot / denom


def compute_embedding(
    region: np.ndarray | tuple[int, int, int],
    dim: int = 64,
) -> AppearanceEmbedding:
    """Joint 3-D color histogram over a worker region, L2-normalized.

    Accepts an (H, W, 3) uint8 pixel array or a single (r, g, b) color
    summary as emitted on the detection wire format. The histogram has
    cube-root(dim) bins per channel, so a uniform-color region maps to a
    single bin with norm 1.

    Raises:
        DegenerateRegion: when the region contains no pixels.
    """
    bins = round(dim ** (1 / 3))
    if bins**3 != dim:
        raise ValueError("dim must be a perfect cube")
    if isinstance(region, np.ndarray):
        if region.ndim != 3 or region.shape[2] != 3:
            raise ValueError("pixel region must have shape (H, W, 3)")
        if region.shape[0] == 0 or region.shape[1] == 0:
            raise DegenerateRegion("empty pixel region")
        pixels = region.reshape(-1, 3).astype(np.int64)
    else:
        pixels = np.asarray([region], dtype=np.int64)
        if pixels.shape != (1, 3):
            raise ValueError("color summary must be an (r, g, b) triple")
    if pixels.min() < 0 or pixels.max() > 255:
        raise ValueError("channel values must be in [0, 255]")
    idx = np.minimum(pixels * bins // 256, bins - 1)
    joint = (idx[:, 0] * bins + idx[:, 1]) * bins + idx[:, 2]
    hist = np.bincount(joint, minlength=dim).astype(np.float64)
    hist /= np.linalg.norm(hist)
    return AppearanceEmbedding(vector=tuple(hist.tolist()))


@dataclass
class MotionState:
    """Constant-velocity box state; velocities are per frame-index unit."""

    cx: float
    cy: float
    w: float
    h: float
    vx: float = 0.0
    vy: float = 0.0

    def predict(self, dt: float) -> Box:
        return (
            self.cx + self.vx * dt - self.w / 2.0,
            self.cy + self.vy * dt - self.h / 2.0,
            self.w,
            self.h,
        )

    @classmethod
    def from_box(cls, box: Box) -> "MotionState":
        x, y, w, h = box
        return cls(cx=x + w / 2.0, cy=y + h / 2.0, w=w, h=h)


@dataclass
class Track:
    track_id: int
    state: MotionState
    last_seen_frame: int
    hits: int = 1
    status: TrackStatus = TrackStatus.ACTIVE
    misses: int = 0
    embedding: AppearanceEmbedding | None = None
    worker_id: int | None = None


def associate_greedy(
    predicted: list[tuple[int, Box]],
    detections: list[Box],
    iou_gate: float,
) -> dict[int, int]:
    """Greedy one-to-one matching by descending IoU, gated at iou_gate.

    Returns {detection_index: track_id}. Ties break on lowest track_id, then
    lowest detection index, so the result is order-independent.
    """
    pairs = []
    for track_id, pbox in predicted:
        for d_idx, dbox in enumerate(detections):
            score = iou(pbox, dbox)
            if score >= iou_gate and score > 0.0:
                pairs.append((score, track_id, d_idx))
    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
    assigned: dict[int, int] = {}
    used_tracks: set[int] = set()
    for score, track_id, d_idx in pairs:
        if track_id in used_tracks or d_idx in assigned:
            continue
        assigned[d_idx] = track_id
        used_tracks.add(track_id)
    return assigned


class Tracker:
    """Stateful per-stream tracker. Call :meth:`step` once per processed frame."""

    def __init__(self, cfg: TrackerConfig | None = None):
        self.cfg = cfg or TrackerConfig()
        self.tracks: dict[int, Track] = {}
        self._next_id = 1

    def _live_tracks(self) -> list[Track]:
        return [t for t in self.tracks.values() if t.status is not TrackStatus.RETIRED]

    def step(
        self,
        frame_index: int,
        worker_detections: list[Detection],
        embeddings: list[AppearanceEmbedding | None] | None = None,
    ) -> dict[int, int]:
        """Advance one frame; returns {detection_index: track_id}.

        Unassigned detections spawn new tracks. Unmatched live tracks
        increment their miss counter; a track retires once its misses exceed
        max_lost_frames. RETIRED tracks never reactivate.
        """
        if embeddings is None:
            embeddings = [None] * len(worker_detections)
        live = self._live_tracks()
        predicted = [
            (t.track_id, t.state.predict(frame_index - t.last_seen_frame)) for t in live
        ]
        assignment = associate_greedy(
            predicted, [d.bbox for d in worker_detections], self.cfg.iou_gate
        )

        matched_tracks = set(assignment.values())
        for d_idx, track_id in assignment.items():
            det = worker_detections[d_idx]
            self._update_track(self.tracks[track_id], det, frame_index, embeddings[d_idx])

        for t in live:
            if t.track_id in matched_tracks:
                continue
            t.misses += 1
            if t.misses > self.cfg.max_lost_frames:
                t.status = TrackStatus.RETIRED
            elif t.status is TrackStatus.ACTIVE:
                t.status = TrackStatus.LOST

        for d_idx, det in enumerate(worker_detections):
            if d_idx in assignment:
                continue
            track = Track(
                track_id=self._next_id,
                state=MotionState.from_box(det.bbox),
                last_seen_frame=frame_index,
                embedding=embeddings[d_idx],
            )
            self._next_id += 1
            self.tracks[track.track_id] = track
            assignment[d_idx] = track.track_id
        return assignment

    def _update_track(
        self,
        track: Track,
        det: Detection,
        frame_index: int,
        embedding: AppearanceEmbedding | None,
    ) -> None:
        x, y, w, h = det.bbox
        ncx, ncy = x + w / 2.0, y + h / 2.0
        dt = frame_index - track.last_seen_frame
        if dt > 0:
            track.state.vx = (ncx - track.state.cx) / dt
            track.state.vy = (ncy - track.state.cy) / dt
        track.state.cx, track.state.cy = ncx, ncy
        track.state.w, track.state.h = w, h
        track.last_seen_frame = frame_index
        track.hits += 1
        track.misses = 0
        track.status = TrackStatus.ACTIVE
        if embedding is not None:
            track.embedding = embedding


@dataclass
class WorkerIdentity:
    worker_id: int
    embeddings: deque[AppearanceEmbedding]
    track_history: list[int]
    first_seen_s: float
    last_seen_s: float

    def to_record(self) -> dict:
        """Serializable record for persistence."""
        return {
            "worker_id": self.worker_id,
            "embeddings": [list(e.vector) for e in self.embeddings],
            "track_history": list(self.track_history),
            "first_seen_s": self.first_seen_s,
            "last_seen_s": self.last_seen_s,
        }

    @classmethod
    def from_record(cls, record: dict) -> "WorkerIdentity":
        return cls(
            worker_id=int(record["worker_id"]),
            embeddings=deque(
                (AppearanceEmbedding(vector=tuple(v)) for v in record["embeddings"]),
                maxlen=EMBEDDING_HISTORY,
            ),
            track_history=[int(t) for t in record["track_history"]],
            first_seen_s=float(record["first_seen_s"]),
            last_seen_s=float(record["last_seen_s"]),
        )


@dataclass
class IdentityDatabase:
    """Per-shift registry of worker identities keyed by appearance."""

    threshold: float = 0.80
    identities: dict[int, WorkerIdentity] = field(default_factory=dict)
    _next_worker_id: int = 1

    def reassociate(self, track: Track, timestamp_s: float) -> int:
        """Resolve a track to a worker identity by embedding similarity.

        The best-matching identity at or above the threshold absorbs the
        track's embedding (bounded history, oldest evicted); otherwise a
        fresh worker_id is minted. Deterministic: ties go to the lowest
        worker_id.
        """
        if track.embedding is None:
            raise ValueError("track has no embedding")
        best_id: int | None = None
        best_sim = -1.0
        for worker_id in sorted(self.identities):
            identity = self.identities[worker_id]
            sim = max(cosine_similarity(track.embedding, e) for e in identity.embeddings)
            if sim > best_sim:
                best_id, best_sim = worker_id, sim
        if best_id is not None and best_sim >= self.threshold:
            identity = self.identities[best_id]
            identity.embeddings.append(track.embedding)
            if track.track_id not in identity.track_history:
                identity.track_history.append(track.track_id)
            identity.last_seen_s = max(identity.last_seen_s, timestamp_s)
            track.worker_id = best_id
            return best_id
        worker_id = self._next_worker_id
        self._next_worker_id += 1
        self.identities[worker_id] = WorkerIdentity(
            worker_id=worker_id,
            embeddings=deque([track.embedding], maxlen=EMBEDDING_HISTORY),
            track_history=[track.track_id],
            first_seen_s=timestamp_s,
            last_seen_s=timestamp_s,
        )
        track.worker_id = worker_id
        return worker_id
