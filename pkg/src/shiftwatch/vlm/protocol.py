"""Construction and execution of the three verifier passes.

Pass independence is structural: the first pass's message array has no
machine evidence or image segments to leak, the second pass's builder cannot
receive first-pass text at all, and the third pass's array carries no video.
Violating any of these requires editing this module, not a prompt.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

from ..ingest import Camera, Chunk
from .client import GenerationParams, VLMClient, VLMRequest, call_with_retry
from .evidence import CALIBRATION_TABLE
from .messages import AnnotatedFrame, MessageArray, Segment, SegmentKind
from .prompts import load_template
from .schema import SchemaViolation, VLMAssessment, parse_assessment

__all__ = [
    "MissingVideo",
    "NoFrames",
    "MissingUpstream",
    "PassOutputs",
    "ProtocolConfig",
    "build_pass1",
    "build_pass2",
    "build_pass3",
    "run_protocol",
]


class MissingVideo(ValueError):
    """The chunk carries no video reference."""


class NoFrames(ValueError):
    """The frame-grounded pass needs at least one annotated frame."""


class MissingUpstream(ValueError):
    """A reconciliation input is empty. Carries the missing pass number."""

    def __init__(self, pass_number: int):
        super().__init__(f"pass {pass_number} notes are empty")
        self.pass_number = pass_number


@dataclass(frozen=True)
class PassOutputs:
    pass1_notes: str
    pass2_notes: str
    pass3_raw: str
    parsed: VLMAssessment | None


@dataclass(frozen=True)
class ProtocolConfig:
    retry_budget: int = 3
    backoff_base_s: float = 0.5
    params: GenerationParams = GenerationParams()

    def __post_init__(self) -> None:
        if self.retry_budget < 1:
            raise ValueError("retry_budget must be >= 1")
        if self.backoff_base_s < 0:
            raise ValueError("backoff_base_s must be >= 0")


def _addendum(camera: Camera) -> str:
    name = "pov_addendum.txt" if camera is Camera.POV else "wall_addendum.txt"
    return load_template(name)


def _span_text(chunk: Chunk) -> str:
    return f"covering t={chunk.start_s:.2f}s to t={chunk.end_s:.2f}s"


def build_pass1(chunk: Chunk, camera: Camera) -> MessageArray:
    """First pass: raw video only. No image or machine-evidence segments exist
    in the returned array, so nothing downstream can leak into it.

    Raises:
        MissingVideo: the chunk has no video reference.
    """
    if not chunk.video_uri:
        raise MissingVideo(f"chunk [{chunk.start_s}, {chunk.end_s}) has no video reference")
    return MessageArray(
        segments=(
            Segment(SegmentKind.SYSTEM_TEXT, text=load_template("pass1_system.txt")),
            Segment(SegmentKind.SYSTEM_TEXT, text=_addendum(camera)),
            Segment(
                SegmentKind.USER_TEXT,
                text=f"Review the attached site video segment {_span_text(chunk)} "
                "and file your written inspection report.",
            ),
            Segment(SegmentKind.VIDEO_REF, uri=chunk.video_uri),
        )
    )


def build_pass2(
    chunk: Chunk,
    annotated_frames: list[AnnotatedFrame],
    yolo_evidence: str,
    camera: Camera,
) -> MessageArray:
    """Second pass: video, annotated frames, and machine evidence with the
    calibration table. The signature has no parameter for first-pass text,
    which is the isolation guarantee.

    Raises:
        MissingVideo: the chunk has no video reference.
        NoFrames: no annotated frames were supplied.
    """
    if not chunk.video_uri:
        raise MissingVideo(f"chunk [{chunk.start_s}, {chunk.end_s}) has no video reference")
    if not annotated_frames:
        raise NoFrames("pass 2 requires at least one annotated frame")
    segments = [
        Segment(SegmentKind.SYSTEM_TEXT, text=load_template("pass2_system.txt")),
        Segment(SegmentKind.SYSTEM_TEXT, text=_addendum(camera)),
        Segment(
            SegmentKind.USER_TEXT,
            text=f"Review the attached site video segment {_span_text(chunk)}, "
            "the machine-annotated frames, and the detection data below. "
            "Write your independent professional assessment.",
        ),
        Segment(SegmentKind.VIDEO_REF, uri=chunk.video_uri),
    ]
    segments.extend(
        Segment(SegmentKind.IMAGE_REF, uri=frame.uri, frame_ordinal=i)
        for i, frame in enumerate(annotated_frames)
    )
    segments.append(
        Segment(
            SegmentKind.MACHINE_EVIDENCE_TEXT,
            text=CALIBRATION_TABLE + "\n\n" + yolo_evidence,
        )
    )
    return MessageArray(segments=tuple(segments))


def build_pass3(
    pass1_notes: str,
    pass2_notes: str,
    annotated_frames: list[AnnotatedFrame],
    yolo_evidence: str,
) -> MessageArray:
    """Third pass: committed text plus annotated frames; no video segment is
    ever constructed. Each image is preceded by an "[Annotated frame i]"
    marker so hazards can ground themselves by index.

    Raises:
        MissingUpstream: a pass's notes are empty.
    """
    if not pass1_notes.strip():
        raise MissingUpstream(1)
    if not pass2_notes.strip():
        raise MissingUpstream(2)
    segments = [
        Segment(SegmentKind.SYSTEM_TEXT, text=load_template("pass3_system.txt")),
        Segment(SegmentKind.USER_TEXT, text=load_template("pass3_reconciliation.txt")),
        Segment(
            SegmentKind.USER_TEXT,
            text="SOURCE 1 — Jamie's field inspection report:\n\n" + pass1_notes,
        ),
        Segment(
            SegmentKind.USER_TEXT,
            text="SOURCE 2 — Marcus's independent assessment:\n\n" + pass2_notes,
        ),
        Segment(
            SegmentKind.MACHINE_EVIDENCE_TEXT,
            text=CALIBRATION_TABLE + "\n\n" + yolo_evidence,
        ),
    ]
    for i, frame in enumerate(annotated_frames):
        segments.append(Segment(SegmentKind.USER_TEXT, text=f"[Annotated frame {i}]"))
        segments.append(Segment(SegmentKind.IMAGE_REF, uri=frame.uri, frame_ordinal=i))
    segments.append(Segment(SegmentKind.USER_TEXT, text=load_template("pass3_output_format.txt")))
    return MessageArray(segments=tuple(segments))


def _correction_text(error: SchemaViolation) -> str:
    return (
        "Your previous response failed validation and was rejected.\n"
        f"Field: {error.field}\n"
        f"Problem: {error.detail or 'schema violation'}\n"
        "Return the corrected assessment as a single JSON object in the "
        "specified output format. Output the JSON object and nothing else."
    )


def run_protocol(
    chunk: Chunk,
    client: VLMClient,
    camera: Camera,
    annotated_frames: list[AnnotatedFrame],
    yolo_evidence: str,
    cfg: ProtocolConfig | None = None,
    chunk_key: str | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> PassOutputs:
    """Run the full three-pass protocol for one chunk.

    Passes 1 and 2 have disjoint inputs and no mutual dependency; pass 3
    runs strictly after both. A structurally invalid pass-3 object earns one
    corrective re-prompt quoting the validator's field path; if that also
    fails, the outputs are returned with parsed=None and the caller falls
    back to machine evidence alone.

    Raises:
        ClientError: a pass exhausted its retry budget.
    """
    cfg = cfg or ProtocolConfig()
    key = chunk_key or f"{chunk.start_s:g}-{chunk.end_s:g}"

    def call(pass_number: int, messages: MessageArray) -> str:
        request = VLMRequest(
            segments=messages, params=cfg.params, pass_number=pass_number, chunk_key=key
        )
        return call_with_retry(
            client, request, budget=cfg.retry_budget, backoff_base_s=cfg.backoff_base_s, sleep=sleep
        )

    pass1_notes = call(1, build_pass1(chunk, camera))
    pass2_notes = call(2, build_pass2(chunk, annotated_frames, yolo_evidence, camera))

    pass3_messages = build_pass3(pass1_notes, pass2_notes, annotated_frames, yolo_evidence)
    pass3_raw = call(3, pass3_messages)
    try:
        parsed = parse_assessment(pass3_raw, len(annotated_frames))
    except SchemaViolation as error:
        corrected = MessageArray(
            segments=pass3_messages.segments
            + (Segment(SegmentKind.USER_TEXT, text=_correction_text(error)),)
        )
        pass3_raw = call(3, corrected)
        try:
            parsed = parse_assessment(pass3_raw, len(annotated_frames))
        except SchemaViolation:
            parsed = None
    return PassOutputs(
        pass1_notes=pass1_notes, pass2_notes=pass2_notes, pass3_raw=pass3_raw, parsed=parsed
    )
