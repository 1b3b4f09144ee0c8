"""Three-pass verifier protocol: message construction, evidence rendering,
client adapters, and structured-output validation."""

from .client import (
    ClientError,
    FatalClientError,
    GenerationParams,
    HTTPChatClient,
    RetriableClientError,
    ScriptedVLMClient,
    VLMClient,
    VLMRequest,
    call_with_retry,
)
from .evidence import (
    CALIBRATION_TABLE,
    RENDER_NAMES,
    ConfidenceBand,
    HazardLine,
    OutOfRange,
    WorkerStatusLine,
    band_of,
    render_evidence,
)
from .messages import AnnotatedFrame, MessageArray, Segment, SegmentKind
from .prompts import TEMPLATE_NAMES, load_template, template_checksums
from .protocol import (
    MissingUpstream,
    MissingVideo,
    NoFrames,
    PassOutputs,
    ProtocolConfig,
    build_pass1,
    build_pass2,
    build_pass3,
    run_protocol,
)
from .schema import (
    AssessmentConfidence,
    FrameIndexOutOfRange,
    HazardDetail,
    PPEItemState,
    PPEStatus,
    SchemaViolation,
    VLMAssessment,
    parse_assessment,
)

__all__ = [
    "AnnotatedFrame",
    "AssessmentConfidence",
    "CALIBRATION_TABLE",
    "ClientError",
    "ConfidenceBand",
    "FatalClientError",
    "FrameIndexOutOfRange",
    "GenerationParams",
    "HTTPChatClient",
    "HazardDetail",
    "HazardLine",
    "MessageArray",
    "MissingUpstream",
    "MissingVideo",
    "NoFrames",
    "OutOfRange",
    "PPEItemState",
    "PPEStatus",
    "PassOutputs",
    "ProtocolConfig",
    "RENDER_NAMES",
    "RetriableClientError",
    "SchemaViolation",
    "ScriptedVLMClient",
    "Segment",
    "SegmentKind",
    "TEMPLATE_NAMES",
    "VLMAssessment",
    "VLMClient",
    "VLMRequest",
    "WorkerStatusLine",
    "band_of",
    "build_pass1",
    "build_pass2",
    "build_pass3",
    "call_with_retry",
    "load_template",
    "parse_assessment",
    "render_evidence",
    "run_protocol",
    "template_checksums",
]
