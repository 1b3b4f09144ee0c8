"""
Three-pass verification over one chunk
======================================

Two independent observers look at the same minute of footage: the first
sees only raw video, the second sees the video plus annotated frames and
the detector's evidence table. A third pass reconciles their committed
reports into a structured assessment. Independence is structural: the
message arrays physically lack the excluded inputs.

A scripted client stands in for the live model, which also demonstrates the
schema retry: the first pass-3 reply is invalid and the corrective
re-prompt fixes it.
"""

import json

from shiftwatch.ingest import Camera, Chunk
from shiftwatch.vlm import AnnotatedFrame, ScriptedVLMClient, run_protocol
from shiftwatch.vlm.messages import SegmentKind
from shiftwatch.vlm.protocol import build_pass1, build_pass2, build_pass3

chunk = Chunk(start_s=0.0, end_s=60.0, frames=(), video_uri="vid://site7/cam2#t=0,60")
frames = [
    AnnotatedFrame(frame_index=30, timestamp_s=15.0, uri="img://chunk0/f30"),
    AnnotatedFrame(frame_index=60, timestamp_s=30.0, uri="img://chunk0/f60"),
]
evidence = "t=15.00s | detections: person=0.91, hardhat=0.85\nWorker 2: wearing [helmet], missing [vest]"

# what each pass is physically allowed to see
for name, array in (
    ("pass 1", build_pass1(chunk, Camera.WALL)),
    ("pass 2", build_pass2(chunk, frames, evidence, Camera.WALL)),
    ("pass 3", build_pass3("observer notes", "review notes", frames, evidence)),
):
    counts = {k.value: array.count_of(k) for k in SegmentKind if array.count_of(k)}
    print(f"{name}: {counts}")

assessment = {
    "scene_summary": "two workers near the material hoist",
    "worker_count": 2,
    "equipment_present": [],
    "ppe_per_worker": [],
    "reasoning": "both observers flagged the missing vest and the detector confirms it",
    "hazards": [
        {
            "violation_type": "PPE_MISSING",
            "severity": "MEDIUM",
            "best_frame_index": 0,
            "rationale": "worker 2 has no vest in either annotated frame",
        }
    ],
    "no_hazards": False,
    "confidence": "HIGH",
}

client = ScriptedVLMClient(
    responses={
        1: "One worker moves material without a high-visibility vest.",
        2: "The annotated stills confirm the vest is absent; the hard hat is worn.",
        # first reply violates the schema (worker_count negative), the
        # corrective re-prompt earns the valid object
        3: [json.dumps({**assessment, "worker_count": -1}), json.dumps(assessment)],
    }
)

outputs = run_protocol(chunk, client, Camera.WALL, frames, evidence, sleep=lambda s: None)
print(f"\npass-3 replies consumed: {sum(1 for r in client.requests if r.pass_number == 3)}")
print(f"assessment valid: {outputs.parsed is not None}")
print(f"  summary: {outputs.parsed.scene_summary}")
for h in outputs.parsed.hazards:
    print(f"  hazard: {h.violation_type.value} [{h.severity.value}] frame {h.best_frame_index}")
