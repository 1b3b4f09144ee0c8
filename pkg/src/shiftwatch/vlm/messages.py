"""Multimodal message arrays for the verifier passes.

Segment tags are the sole carriers of modality: isolation guarantees (which
pass may see video, images, or machine evidence) are asserted by counting
tags, never by scanning strings.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

__all__ = ["SegmentKind", "Segment", "MessageArray", "AnnotatedFrame"]


class SegmentKind(enum.Enum):
    SYSTEM_TEXT = "SYSTEM_TEXT"
    USER_TEXT = "USER_TEXT"
    VIDEO_REF = "VIDEO_REF"
    IMAGE_REF = "IMAGE_REF"
    MACHINE_EVIDENCE_TEXT = "MACHINE_EVIDENCE_TEXT"


_TEXT_KINDS = {SegmentKind.SYSTEM_TEXT, SegmentKind.USER_TEXT, SegmentKind.MACHINE_EVIDENCE_TEXT}
_MEDIA_KINDS = {SegmentKind.VIDEO_REF, SegmentKind.IMAGE_REF}


@dataclass(frozen=True)
class AnnotatedFrame:
    """A still frame selected for the verifier, with its source position."""

    frame_index: int
    timestamp_s: float
    uri: str


@dataclass(frozen=True)
class Segment:
    kind: SegmentKind
    text: str | None = None
    uri: str | None = None
    frame_ordinal: int | None = None  # 0-based position among a pass's annotated frames

    def __post_init__(self) -> None:
        if self.kind in _TEXT_KINDS:
            if self.text is None or self.uri is not None:
                raise ValueError(f"{self.kind.value} segments carry text only")
        else:
            if self.uri is None or self.text is not None:
                raise ValueError(f"{self.kind.value} segments carry a URI only")
        if (self.frame_ordinal is not None) != (self.kind is SegmentKind.IMAGE_REF):
            raise ValueError("frame_ordinal is set exactly on IMAGE_REF segments")
        if self.frame_ordinal is not None and self.frame_ordinal < 0:
            raise ValueError("frame_ordinal must be >= 0")


@dataclass(frozen=True)
class MessageArray:
    segments: tuple[Segment, ...]

    def count_of(self, kind: SegmentKind) -> int:
        return sum(1 for s in self.segments if s.kind is kind)

    def texts_of(self, kind: SegmentKind) -> tuple[str, ...]:
        return tuple(s.text for s in self.segments if s.kind is kind)

    def __iter__(self):
        return iter(self.segments)

    def __len__(self) -> int:
        return len(self.segments)
