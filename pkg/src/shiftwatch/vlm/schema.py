"""Structured output contract for the reconciliation pass.

The final pass must emit one JSON object; everything the rest of the
pipeline consumes is validated here, with violations reported by field path
so a single re-prompt can quote them back to the model.
"""

from __future__ import annotations

import enum
import json

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..violations import VLM_HAZARD_TYPES, Severity, ViolationType

__all__ = [
    "PPEItemState",
    "AssessmentConfidence",
    "PPEStatus",
    "HazardDetail",
    "VLMAssessment",
    "SchemaViolation",
    "FrameIndexOutOfRange",
    "parse_assessment",
]


class SchemaViolation(ValueError):
    """Assessment text violates the output contract. Carries the field path."""

    def __init__(self, field: str, detail: str = ""):
        super().__init__(f"{field}: {detail}" if detail else field)
        self.field = field
        self.detail = detail


class FrameIndexOutOfRange(SchemaViolation):
    """best_frame_index does not address a supplied annotated frame."""


class PPEItemState(str, enum.Enum):
    PRESENT = "PRESENT"
    ABSENT = "ABSENT"
    UNCLEAR = "UNCLEAR"


class AssessmentConfidence(str, enum.Enum):
    LOW = "LOW"
    MEDIUM = "MEDIUM"
    HIGH = "HIGH"


class PPEStatus(BaseModel):
    model_config = ConfigDict(frozen=True)

    helmet: PPEItemState
    vest: PPEItemState
    gloves: PPEItemState


class HazardDetail(BaseModel):
    model_config = ConfigDict(frozen=True)

    violation_type: ViolationType
    severity: Severity
    best_frame_index: int = Field(ge=0)
    rationale: str = ""

    @field_validator("violation_type")
    @classmethod
    def _reportable_type(cls, v: ViolationType) -> ViolationType:
        if v not in VLM_HAZARD_TYPES:
            raise ValueError(f"{v.value} is not a reportable hazard type")
        return v


class VLMAssessment(BaseModel):
    model_config = ConfigDict(frozen=True)

    scene_summary: str
    worker_count: int = Field(ge=0)
    equipment_present: tuple[str, ...] = ()
    ppe_per_worker: tuple[PPEStatus, ...] = ()
    reasoning: str
    hazards: tuple[HazardDetail, ...] = ()
    no_hazards: bool
    confidence: AssessmentConfidence

    @field_validator("reasoning")
    @classmethod
    def _reasoning_nonempty(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("reasoning must be non-empty")
        return v

    @model_validator(mode="after")
    def _no_hazards_consistent(self) -> "VLMAssessment":
        if self.no_hazards != (len(self.hazards) == 0):
            raise ValueError("no_hazards must be true exactly when hazards is empty")
        return self


def _extract_json_object(raw: str) -> str:
    """Pull the first complete top-level JSON object out of raw model text.

    Tolerates surrounding prose and code fences.

    Raises:
        SchemaViolation: no complete object found.
    """
    start = raw.find("{")
    if start == -1:
        raise SchemaViolation("$", "no JSON object found in response")
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(raw)):
        ch = raw[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return raw[start : i + 1]
    raise SchemaViolation("$", "unterminated JSON object in response")


def _field_path(err: dict) -> str:
    parts = []
    for loc in err["loc"]:
        if isinstance(loc, int):
            parts[-1] += f"[{loc}]"
        else:
            parts.append(str(loc))
    return ".".join(parts) if parts else "$"


def parse_assessment(pass3_raw: str, n_frames: int) -> VLMAssessment:
    """Parse and validate the reconciliation pass output.

    Raises:
        SchemaViolation: malformed JSON or any schema-contract breach, with
            the offending field path.
        FrameIndexOutOfRange: a hazard's best_frame_index is not a valid
            0-based index into the supplied annotated frames.
    """
    try:
        obj = json.loads(_extract_json_object(pass3_raw))
    except json.JSONDecodeError as exc:
        raise SchemaViolation("$", f"invalid JSON: {exc.msg}") from None
    try:
        assessment = VLMAssessment.model_validate(obj)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise SchemaViolation(_field_path(first), first["msg"]) from None
    for i, hazard in enumerate(assessment.hazards):
        if hazard.best_frame_index >= n_frames:
            raise FrameIndexOutOfRange(
                f"hazards[{i}].best_frame_index",
                f"index {hazard.best_frame_index} with {n_frames} annotated frames",
            )
    return assessment
