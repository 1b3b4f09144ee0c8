"""
Worker tracking and shift-persistent identity
=============================================

Frame-to-frame tracks come from IoU association with a constant-velocity
motion model. Identities persist across track deaths: when a worker leaves
the scene long enough for the track to be dropped, the appearance embedding
re-associates the new track to the same worker_id.
"""

from shiftwatch.ingest import Detection, DetectionClass
from shiftwatch.tracking import IdentityDatabase, Tracker, TrackerConfig, compute_embedding


def worker(x, i):
    return Detection(
        class_label=DetectionClass.WORKER,
        confidence=0.9,
        bbox=(x, 50.0, 30.0, 70.0),
        frame_index=i,
        timestamp_s=float(i),
    )


cfg = TrackerConfig(max_lost_frames=15)
tracker = Tracker(cfg)
identities = IdentityDatabase()

# two workers with distinct jacket colors
red = compute_embedding((200, 30, 30), cfg.embedding_dim)
blue = compute_embedding((30, 30, 200), cfg.embedding_dim)


def step(i, observations):
    dets = [worker(x, i) for x, _ in observations]
    embs = [e for _, e in observations]
    assignment = tracker.step(i, dets, embs)
    ids = {}
    for d_idx, track_id in assignment.items():
        track = tracker.tracks[track_id]
        if track.worker_id is None:
            identities.reassociate(track, float(i))
        ids[round(dets[d_idx].bbox[0])] = track.worker_id
    return ids


print("two workers walking, red left to right, blue the other way:")
for i in range(5):
    print(f"  frame {i}: {step(i, [(100 + 4 * i, red), (300 - 4 * i, blue)])}")

# red disappears behind a container for 8 frames; within the coast budget
# the same track picks the worker up again
for i in range(5, 13):
    step(i, [(300 - 4 * i, blue)])
print(f"\nafter an 8-frame occlusion: {step(13, [(152, red), (248, blue)])}")

# a 30-frame absence exceeds max_lost_frames and the track is dropped;
# the appearance embedding still recovers the same identity
for i in range(14, 44):
    step(i, [(300 - 4 * i if 300 - 4 * i > 0 else 20, blue)])
print(f"after a 30-frame absence:   {step(44, [(200, red)])}")
print(f"\nidentities registered this shift: {sorted(identities.identities)}")
