"""Machine evidence rendered as structured text for the verifier passes.

The renderer is deterministic: equal inputs produce byte-identical text.
Detections below the NOISE boundary are still rendered; the calibration
table instructs the model to discard them, and silently dropping them would
leave that instruction with nothing to act on.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from ..ingest import Detection, DetectionClass
from ..violations import ViolationType

__all__ = [
    "ConfidenceBand",
    "OutOfRange",
    "band_of",
    "CALIBRATION_TABLE",
    "HazardLine",
    "WorkerStatusLine",
    "render_evidence",
    "render_name",
]

EVIDENCE_HEADER = "MACHINE DETECTION EVIDENCE"

#: Names used on the evidence wire; the verifier sees plain words.
RENDER_NAMES = {
    DetectionClass.WORKER: "person",
    DetectionClass.HARDHAT: "helmet",
    DetectionClass.SAFETY_VEST: "vest",
    DetectionClass.GLOVES: "gloves",
    DetectionClass.SAFETY_GOGGLES: "goggles",
    DetectionClass.RESPIRATOR: "respirator",
}

#: Display order for PPE item lists (helmet first, as worn top-down).
_ITEM_ORDER = ("helmet", "vest", "gloves", "goggles", "respirator")


class OutOfRange(ValueError):
    """Confidence outside [0, 1]."""


class ConfidenceBand(str, enum.Enum):
    HIGH = "HIGH"
    MODERATE = "MODERATE"
    WEAK = "WEAK"
    NOISE = "NOISE"


def band_of(conf: float) -> ConfidenceBand:
    """Calibration band for a detector confidence.

    HIGH at or above 0.70, MODERATE from 0.40, WEAK from 0.15, NOISE below.

    Raises:
        OutOfRange: conf outside [0, 1].
    """
    if not 0.0 <= conf <= 1.0:
        raise OutOfRange(f"confidence {conf} outside [0, 1]")
    if conf >= 0.70:
        return ConfidenceBand.HIGH
    if conf >= 0.40:
        return ConfidenceBand.MODERATE
    if conf >= 0.15:
        return ConfidenceBand.WEAK
    return ConfidenceBand.NOISE


CALIBRATION_TABLE = """YOLO CONFIDENCE CALIBRATION:
  >= 0.70     HIGH      Strong prior: detection is real
  0.40-0.69   MODERATE  Verify visually
  0.15-0.39   WEAK      Must confirm in video
  < 0.15      NOISE     Discard unless confirmed"""


def render_name(label: DetectionClass) -> str:
    return RENDER_NAMES.get(label, label.value)


@dataclass(frozen=True)
class HazardLine:
    """A machine-side hazard candidate anchored to a timestamp."""

    timestamp_s: float
    violation_type: ViolationType
    worker_id: int
    item_confidences: tuple[tuple[str, float], ...] = ()


@dataclass(frozen=True)
class WorkerStatusLine:
    """Windowed per-worker PPE summary for the chunk."""

    worker_id: int
    present: tuple[str, ...]
    missing: tuple[str, ...]


def _item_key(name: str) -> tuple[int, str]:
    try:
        return (_ITEM_ORDER.index(name), name)
    except ValueError:
        return (len(_ITEM_ORDER), name)


def _items_text(names: tuple[str, ...]) -> str:
    return "[" + ", ".join(sorted(names, key=_item_key)) + "]"


def render_evidence(
    detections: list[Detection],
    hazards: list[HazardLine] = (),
    worker_status: list[WorkerStatusLine] = (),
) -> str:
    """Render chunk evidence in the fixed line format.

    Detections must be time-ordered. One block per distinct timestamp: the
    header line carries the strongest detection, continuation lines carry
    two detections each, and hazard lines for that timestamp follow. Worker
    PPE summaries close the text. Every confidence is tagged with its
    calibration band.
    """
    lines = [EVIDENCE_HEADER]

    by_ts: dict[float, list[Detection]] = {}
    for det in detections:
        by_ts.setdefault(det.timestamp_s, []).append(det)
    hazards_by_ts: dict[float, list[HazardLine]] = {}
    for hz in hazards:
        hazards_by_ts.setdefault(hz.timestamp_s, []).append(hz)

    for ts in sorted(set(by_ts) | set(hazards_by_ts)):
        lines.append("")
        dets = sorted(
            by_ts.get(ts, []),
            key=lambda d: (-d.confidence, render_name(d.class_label)),
        )
        items = [
            f"{render_name(d.class_label)}={d.confidence:.2f} [{band_of(d.confidence).value}]"
            for d in dets
        ]
        prefix = f"t={ts:.2f}s | detections: "
        if items:
            lines.append(prefix + items[0])
            for i in range(1, len(items), 2):
                lines.append(" " * 11 + "  ".join(items[i : i + 2]))
        else:
            lines.append(prefix + "none")
        for hz in sorted(
            hazards_by_ts.get(ts, []), key=lambda h: (h.violation_type.value, h.worker_id)
        ):
            lines.append(f"  hazards: {hz.violation_type.value} (worker #{hz.worker_id})")
            if hz.item_confidences:
                inner = ", ".join(f"{name}={conf:.2f}" for name, conf in hz.item_confidences)
                lines.append(" " * 11 + f"[{inner}]")

    for status in sorted(worker_status, key=lambda s: s.worker_id):
        verdict = "[VIOLATION]" if status.missing else "[OK]"
        lines.append("")
        lines.append(f"Worker #{status.worker_id} {verdict}")
        lines.append(f"  present={_items_text(status.present)}  missing={_items_text(status.missing)}")

    return "\n".join(lines)
