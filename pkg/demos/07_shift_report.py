"""
A complete shift, end to end
============================

Everything together: a wall-camera detection stream where one worker never
shows a vest, a roster with a lapsed training record, scripted verifier
responses, and the deterministic report that comes out the other side.
Running the same shift twice against the same store regenerates the report
byte for byte without reprocessing.
"""

import json
import tempfile
from pathlib import Path

from shiftwatch.config import AppConfig
from shiftwatch.ingest import Camera, Detection, DetectionClass, FrameRecord, serialize_frames
from shiftwatch.pipeline import ShiftInputs, run_shift
from shiftwatch.reporting import ShiftStore
from shiftwatch.vlm import ScriptedVLMClient


def det(label, conf, bbox, i, ts, rgb=None):
    return Detection(class_label=label, confidence=conf, bbox=bbox,
                     frame_index=i, timestamp_s=ts, appearance_rgb=rgb)


frames = []
for i in range(120):
    ts = i * 0.5
    x = 100.0 + 0.2 * i
    frames.append(FrameRecord(
        frame_index=i, timestamp_s=ts, camera=Camera.WALL,
        detections=(
            det(DetectionClass.WORKER, 0.9, (x, 100.0, 60.0, 160.0), i, ts, (40, 160, 60)),
            det(DetectionClass.HARDHAT, 0.84, (x + 15, 105.0, 30.0, 20.0), i, ts),
            det(DetectionClass.GLOVES, 0.71, (x + 20, 220.0, 20.0, 15.0), i, ts),
        ),
    ))

workdir = Path(tempfile.mkdtemp())
(workdir / "wall.jsonl").write_text(serialize_frames(frames))
(workdir / "roster.csv").write_text("worker_id,training_expiry_date\n1,2026-05-01\n")

scripts = {
    ("wall-0", 1): "One worker is moving conduit with no vest over the sweatshirt.",
    ("wall-0", 2): "Stills agree with the detector: missing vest, helmet and gloves on.",
    ("wall-0", 3): json.dumps({
        "scene_summary": "conduit staging along the east wall",
        "worker_count": 1,
        "equipment_present": [],
        "ppe_per_worker": [],
        "reasoning": "observers and detector all point at the absent vest",
        "hazards": [{"violation_type": "PPE_MISSING", "severity": "MEDIUM",
                     "best_frame_index": 0, "rationale": "no vest in any frame"}],
        "no_hazards": False,
        "confidence": "HIGH",
    }),
}

inputs = ShiftInputs(
    shift_id="2026-08-21-day",
    site_id="site-7",
    site_name="North Tower",
    start_utc="2026-08-21T06:00:00Z",
    end_utc="2026-08-21T14:00:00Z",
    wall_stream=workdir / "wall.jsonl",
    roster=workdir / "roster.csv",
)

store = ShiftStore(workdir / "shiftwatch.db")
cfg = AppConfig()

result = run_shift(inputs, cfg, store, ScriptedVLMClient(responses=scripts), sleep=lambda s: None)
print(result.report_text)

print("audit trail:")
for record in result.audit_records:
    print(f"  {record}")

again = run_shift(inputs, cfg, store, ScriptedVLMClient(responses=scripts), sleep=lambda s: None)
print(f"\nresubmission reprocessed: {again.reprocessed}, "
      f"byte-identical: {again.report_json == result.report_json}")
