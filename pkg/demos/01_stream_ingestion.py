"""
Detection stream ingestion: parse, gate, stride, chunk
======================================================

The engine consumes line-delimited JSON emitted by the on-site detector.
Malformed lines are skipped with a report, low-confidence detections are
gated out, fixed wall-camera footage is strided down, and the surviving
frames are cut into bounded chunks for verification.
"""

import json

from shiftwatch.ingest import (
    Camera,
    IngestConfig,
    chunk_timeline,
    gate_detections,
    parse_stream,
    stride_frames,
)


def frame_line(i, ts, dets):
    return json.dumps(
        {
            "frame_index": i,
            "timestamp_s": ts,
            "camera": "WALL",
            "detections": dets,
            "poses": [],
        }
    )


def det(label, conf):
    return {"class_label": label, "confidence": conf, "bbox": [10, 20, 40, 80]}


# A 90-second stream at 1 fps. Frame 30 carries a noise-level detection,
# line 45 is corrupt, and frame 60 is missing its timestamp.
lines = []
for i in range(90):
    dets = [det("worker", 0.9)]
    if i == 30:
        dets.append(det("hardhat", 0.05))  # below the 0.15 gate
    lines.append(frame_line(i, float(i), dets))
lines[45] = "{corrupt json"
lines[60] = '{"frame_index": 60, "camera": "WALL", "detections": [], "poses": []}'

result = parse_stream("\n".join(lines), Camera.WALL)
print(f"parsed {len(result.frames)} frames, skipped {len(result.malformed)}:")
for bad in result.malformed:
    print(f"  line {bad.line_number}: {bad.reason}")

cfg = IngestConfig()  # conf_gate 0.15, stride 3, 60 s chunks
gated = gate_detections(result.frames, cfg)
print(f"\ndetections surviving the gate in frame 30: "
      f"{[d.class_label.value for d in gated[30].detections]}")

strided = stride_frames(gated, cfg)
print(f"stride 3 keeps {len(strided)} of {len(gated)} wall frames")

chunks = chunk_timeline(strided, cfg, video_uri="vid://site7/cam2")
print(f"\n{len(chunks)} chunks:")
for c in chunks:
    print(f"  [{c.start_s:6.1f}s, {c.end_s:6.1f}s)  {len(c.frames):2d} frames  {c.video_uri}")
