"""
Posture scoring from body-worn camera skeletons
===============================================

Every pose is reduced to six joint angles, scored in two groups (trunk,
neck, and legs against arms), and the combined risk maps onto the posture
violation ladder. A deep trunk bend escalates straight to the highest level
regardless of what the arms are doing.
"""

import math

from shiftwatch.ergonomics import assess_pose, compute_angles, gate_keypoints
from shiftwatch.ingest import KeypointSet


def skeleton(trunk_deg, arm_deg=10.0):
    """Synthetic COCO-17 skeleton: bend the trunk, raise one arm."""
    rad = math.radians(trunk_deg)
    t = (math.sin(rad), -math.cos(rad))
    p = (-t[1], t[0])
    hip = (100.0, 300.0)
    sh = (hip[0] + 120 * t[0], hip[1] + 120 * t[1])
    kp = [(0.0, 0.0, 0.0)] * 17
    kp[0] = (sh[0] + 40 * t[0], sh[1] + 40 * t[1], 0.9)
    for idx, dx in ((1, -5), (2, 5), (3, -10), (4, 10)):
        kp[idx] = (kp[0][0] + dx, kp[0][1] - 5, 0.9)
    kp[5] = (sh[0] - 20 * p[0], sh[1] - 20 * p[1], 0.9)
    kp[6] = (sh[0] + 20 * p[0], sh[1] + 20 * p[1], 0.9)
    arm = math.radians(arm_deg)
    down = (-t[0], -t[1])
    raised = (
        down[0] * math.cos(arm) - down[1] * math.sin(arm),
        down[0] * math.sin(arm) + down[1] * math.cos(arm),
    )
    kp[7] = (kp[5][0] + 50 * down[0], kp[5][1] + 50 * down[1], 0.9)
    kp[8] = (kp[6][0] + 50 * raised[0], kp[6][1] + 50 * raised[1], 0.9)
    kp[9] = (kp[7][0] + 40 * down[0], kp[7][1] + 40 * down[1], 0.9)
    kp[10] = (kp[8][0] + 40 * raised[0], kp[8][1] + 40 * raised[1], 0.9)
    kp[11] = (hip[0] - 18, hip[1], 0.9)
    kp[12] = (hip[0] + 18, hip[1], 0.9)
    for knee, ankle, hip_i in ((13, 15, 11), (14, 16, 12)):
        kp[knee] = (kp[hip_i][0], 380.0, 0.9)
        kp[ankle] = (kp[hip_i][0], 460.0, 0.9)
    return KeypointSet(keypoints=tuple(kp), frame_index=0, timestamp_s=0.0)


for label, trunk, arm in (
    ("standing upright", 5.0, 10.0),
    ("light stoop", 30.0, 10.0),
    ("bent over a rebar mat", 55.0, 10.0),
    ("deep bend", 72.0, 10.0),
    ("upright, reaching overhead", 5.0, 80.0),
):
    kps = skeleton(trunk, arm)
    angles = compute_angles(gate_keypoints(kps))
    result = assess_pose(kps)
    name = result.violation_type.value if result.violation_type else "compliant"
    print(f"{label:28s} trunk {angles.trunk_flexion_deg:5.1f}  arm {angles.arm_raise_deg:5.1f}  "
          f"A={result.scores.score_a} B={result.scores.score_b} "
          f"combined={result.scores.combined}  level {result.risk_level}  {name}")
