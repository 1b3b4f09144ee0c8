"""
PPE compliance over a temporal window
=====================================

Single-frame PPE checks are noisy: a hard hat hidden for one frame is not a
violation. Sightings accumulate in a ring buffer per worker; a violation
candidate is emitted only when the worker has been seen often enough and an
item has zero sightings in the whole window.
"""

from shiftwatch.ingest import Detection, DetectionClass, FrameRecord, Camera
from shiftwatch.ppe import (
    ComplianceWindow,
    InsufficientEvidence,
    PPEConfig,
    associate_ppe,
    evaluate_compliance,
)

cfg = PPEConfig()  # window 30 frames, at least 10 sightings required
print(f"required items: {sorted(i.value for i in cfg.required_items)}")


def det(label, bbox, i):
    return Detection(class_label=label, confidence=0.8, bbox=bbox,
                     frame_index=i, timestamp_s=float(i))


def frame(i):
    # worker with hard hat and gloves; the vest never shows up
    dets = (
        det(DetectionClass.WORKER, (100.0, 100.0, 60.0, 160.0), i),
        det(DetectionClass.HARDHAT, (115.0, 105.0, 30.0, 20.0), i),
        det(DetectionClass.GLOVES, (120.0, 220.0, 20.0, 15.0), i),
    )
    return FrameRecord(frame_index=i, timestamp_s=float(i), camera=Camera.WALL, detections=dets)


window = ComplianceWindow(worker_id=4, cfg=cfg)

# five sightings are not enough evidence to call anything
for i in range(5):
    items = associate_ppe(frame(i), {4: (100.0, 100.0, 60.0, 160.0)})
    window.update(i, items[4])
try:
    evaluate_compliance(window, cfg)
except InsufficientEvidence as e:
    print(f"after 5 frames: {e}")

# after a full window the missing vest is undeniable
for i in range(5, 30):
    items = associate_ppe(frame(i), {4: (100.0, 100.0, 60.0, 160.0)})
    window.update(i, items[4])

for item in sorted(cfg.required_items):
    print(f"  {item.value:12s} seen in {window.observation_count(item):2d}/{window.presence_frames} frames")

verdict = evaluate_compliance(window, cfg)
print(f"\nworker {verdict.worker_id} missing {[i.value for i in verdict.missing_items]}, "
      f"evidence spans frames {verdict.first_frame}..{verdict.last_frame}")
