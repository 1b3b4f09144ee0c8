"""Joint-angle extraction and posture risk classification.

Pipeline: gate keypoints by confidence, derive six body angles from the
gated COCO-17 skeleton, score them in two groups (trunk-led and arm-led),
then map the combined score plus direct angle triggers onto a four-level
risk class.

All functions here are pure; evaluation may be parallelized freely across
frames and workers.

Angle recipes operate on the 2-D image projection (y grows downward):

* trunk flexion: hip-midpoint to shoulder-midpoint vector vs image vertical
* trunk lateral: frontal lean of that vector, measured against the shoulder
  line, stored as an unsigned magnitude in [0, 90]
* neck flexion: shoulder-midpoint to nose vector vs the torso axis
* knee angle: hip-knee-ankle interior angle, worse (more flexed) side
* arm raise: shoulder to elbow vector vs the torso-down axis, worse side
* elbow flexion: shoulder-elbow-wrist interior angle on the raised arm's side

Monocular projection compresses out-of-plane motion, so "body twist" is
proxied by trunk lateral lean exceeding a threshold; see ErgoConfig.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .ingest import KeypointSet
from .violations import ViolationType

__all__ = [
    "KP",
    "TRUNK_KEYPOINTS",
    "ErgoConfig",
    "GatedKeypoints",
    "AngleSet",
    "RebaScores",
    "PostureViolation",
    "MissingAngle",
    "gate_keypoints",
    "compute_angles",
    "score_group_a",
    "score_group_b",
    "combine_and_classify",
    "assess_pose",
]

_EPS = 1e-9


class KP(enum.IntEnum):
    """COCO-17 keypoint indices."""

    NOSE = 0
    LEFT_EYE = 1
    RIGHT_EYE = 2
    LEFT_EAR = 3
    RIGHT_EAR = 4
    LEFT_SHOULDER = 5
    RIGHT_SHOULDER = 6
    LEFT_ELBOW = 7
    RIGHT_ELBOW = 8
    LEFT_WRIST = 9
    RIGHT_WRIST = 10
    LEFT_HIP = 11
    RIGHT_HIP = 12
    LEFT_KNEE = 13
    RIGHT_KNEE = 14
    LEFT_ANKLE = 15
    RIGHT_ANKLE = 16


TRUNK_KEYPOINTS = (KP.LEFT_SHOULDER, KP.RIGHT_SHOULDER, KP.LEFT_HIP, KP.RIGHT_HIP)


class MissingAngle(Exception):
    """A required angle could not be computed from the gated keypoints."""

    def __init__(self, angle: str):
        super().__init__(f"angle {angle!r} is absent")
        self.angle = angle


@dataclass(frozen=True)
class ErgoConfig:
    kp_gate: float = 0.65
    trunk_awkward_deg: float = 48.0
    trunk_msd_deg: float = 65.0
    arm_overreach_deg: float = 65.0
    lateral_twist_deg: float = 15.0

    def __post_init__(self) -> None:
        if not 0.0 < self.kp_gate <= 1.0:
            raise ValueError("kp_gate must be in (0, 1]")
        for name in ("trunk_awkward_deg", "trunk_msd_deg", "arm_overreach_deg", "lateral_twist_deg"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.trunk_awkward_deg >= self.trunk_msd_deg:
            raise ValueError("trunk_awkward_deg must be below trunk_msd_deg")


@dataclass(frozen=True)
class GatedKeypoints:
    """Keypoints with per-point validity after the confidence gate."""

    points: tuple[tuple[float, float], ...]
    confidences: tuple[float, ...]
    valid: tuple[bool, ...]
    frame_index: int
    timestamp_s: float

    def min_confidence(self, indices: tuple[int, ...] = TRUNK_KEYPOINTS) -> float:
        """Weakest gate-passing confidence among the given keypoints (0 if any invalid)."""
        confs = [self.confidences[i] if self.valid[i] else 0.0 for i in indices]
        return min(confs)


@dataclass(frozen=True)
class AngleSet:
    """Six body angles in degrees; None marks an angle whose contributing
    keypoints did not all pass the gate."""

    trunk_flexion_deg: float | None = None
    trunk_lateral_deg: float | None = None
    neck_flexion_deg: float | None = None
    knee_angle_deg: float | None = None
    arm_raise_deg: float | None = None
    elbow_flexion_deg: float | None = None

    def __post_init__(self) -> None:
        for name, value in self.__dict__.items():
            if value is not None and not 0.0 <= value <= 180.0 + 1e-9:
                raise ValueError(f"{name}={value} outside [0, 180]")


@dataclass(frozen=True)
class RebaScores:
    score_a: int
    score_b: int
    delta: int

    def __post_init__(self) -> None:
        if self.score_a < 1 or self.score_b < 1 or self.delta < 0:
            raise ValueError("scores must satisfy score_a >= 1, score_b >= 1, delta >= 0")

    @property
    def combined(self) -> int:
        return max(self.score_a, self.score_b) + self.delta


@dataclass(frozen=True)
class PostureViolation:
    """Per-frame posture classification; violation_type None means compliant."""

    violation_type: ViolationType | None
    risk_level: int
    angles: AngleSet
    scores: RebaScores
    worker_id: int | None = None
    frame_index: int | None = None


def gate_keypoints(kps: KeypointSet, cfg: ErgoConfig | None = None) -> GatedKeypoints:
    """Mark keypoints below the confidence gate invalid (gate is inclusive)."""
    cfg = cfg or ErgoConfig()
    return GatedKeypoints(
        points=tuple((x, y) for x, y, _ in kps.keypoints),
        confidences=tuple(c for _, _, c in kps.keypoints),
        valid=tuple(c >= cfg.kp_gate for _, _, c in kps.keypoints),
        frame_index=kps.frame_index,
        timestamp_s=kps.timestamp_s,
    )


def _angle_between(a: tuple[float, float], b: tuple[float, float]) -> float | None:
    """Unsigned angle between two vectors in degrees, None for degenerate input."""
    if math.hypot(*a) < _EPS or math.hypot(*b) < _EPS:
        return None
    dot = a[0] * b[0] + a[1] * b[1]
    cross = a[0] * b[1] - a[1] * b[0]
    return math.degrees(math.atan2(abs(cross), dot))


def _sub(p: tuple[float, float], q: tuple[float, float]) -> tuple[float, float]:
    return (p[0] - q[0], p[1] - q[1])


def _interior(
    apex: tuple[float, float], p: tuple[float, float], q: tuple[float, float]
) -> float | None:
    return _angle_between(_sub(p, apex), _sub(q, apex))


def compute_angles(gated: GatedKeypoints) -> AngleSet:
    """Derive the six body angles; an angle is absent unless every keypoint
    in its recipe passed the gate (and the geometry is non-degenerate)."""
    pts, ok = gated.points, gated.valid

    def mid(i: int, j: int) -> tuple[float, float]:
        return ((pts[i][0] + pts[j][0]) / 2.0, (pts[i][1] + pts[j][1]) / 2.0)

    trunk = lateral = neck = knee = arm = elbow = None
    torso_axis: tuple[float, float] | None = None

    if all(ok[i] for i in TRUNK_KEYPOINTS):
        shoulder_mid = mid(KP.LEFT_SHOULDER, KP.RIGHT_SHOULDER)
        hip_mid = mid(KP.LEFT_HIP, KP.RIGHT_HIP)
        t = _sub(shoulder_mid, hip_mid)
        trunk = _angle_between(t, (0.0, -1.0))
        if trunk is not None:
            torso_axis = t
            shoulder_line = _sub(pts[KP.RIGHT_SHOULDER], pts[KP.LEFT_SHOULDER])
            ns = math.hypot(*shoulder_line)
            if ns >= _EPS:
                nt = math.hypot(*t)
                d = abs(t[0] * shoulder_line[0] + t[1] * shoulder_line[1]) / (nt * ns)
                lateral = math.degrees(math.asin(min(1.0, d)))
            if ok[KP.NOSE]:
                neck = _angle_between(_sub(pts[KP.NOSE], shoulder_mid), t)

    # worse knee = smaller interior angle (more flexion); tie keeps the left side
    for hip, kneept, ankle in (
        (KP.LEFT_HIP, KP.LEFT_KNEE, KP.LEFT_ANKLE),
        (KP.RIGHT_HIP, KP.RIGHT_KNEE, KP.RIGHT_ANKLE),
    ):
        if ok[hip] and ok[kneept] and ok[ankle]:
            interior = _interior(pts[kneept], pts[hip], pts[ankle])
            if interior is not None and (knee is None or interior < knee):
                knee = interior

    # worse arm = larger raise; tie keeps the left side
    arm_side: tuple[int, int, int] | None = None
    if torso_axis is not None:
        down = (-torso_axis[0], -torso_axis[1])
        for shoulder, elbowpt, wrist in (
            (KP.LEFT_SHOULDER, KP.LEFT_ELBOW, KP.LEFT_WRIST),
            (KP.RIGHT_SHOULDER, KP.RIGHT_ELBOW, KP.RIGHT_WRIST),
        ):
            if ok[shoulder] and ok[elbowpt]:
                raise_deg = _angle_between(_sub(pts[elbowpt], pts[shoulder]), down)
                if raise_deg is not None and (arm is None or raise_deg > arm):
                    arm = raise_deg
                    arm_side = (shoulder, elbowpt, wrist)
    if arm_side is not None and ok[arm_side[2]]:
        shoulder, elbowpt, wrist = arm_side
        elbow = _interior(pts[elbowpt], pts[shoulder], pts[wrist])

    return AngleSet(
        trunk_flexion_deg=trunk,
        trunk_lateral_deg=lateral,
        neck_flexion_deg=neck,
        knee_angle_deg=knee,
        arm_raise_deg=arm,
        elbow_flexion_deg=elbow,
    )


def score_group_a(angles: AngleSet, cfg: ErgoConfig | None = None) -> int:
    """Trunk-led score: stepped trunk flexion plus lateral/neck/knee bonuses.

    Raises:
        MissingAngle: trunk flexion absent; the pose is too sparse to score.
    """
    cfg = cfg or ErgoConfig()
    trunk = angles.trunk_flexion_deg
    if trunk is None:
        raise MissingAngle("trunk")
    if trunk < 20.0:
        score = 1
    elif trunk < cfg.trunk_awkward_deg:
        score = 2
    elif trunk < cfg.trunk_msd_deg:
        score = 3
    else:
        score = 4
    if angles.trunk_lateral_deg is not None and angles.trunk_lateral_deg > cfg.lateral_twist_deg:
        score += 1
    if angles.neck_flexion_deg is not None and angles.neck_flexion_deg > 20.0:
        score += 1
    if angles.knee_angle_deg is not None and 180.0 - angles.knee_angle_deg > 60.0:
        score += 1
    return score


def score_group_b(angles: AngleSet, cfg: ErgoConfig | None = None) -> int:
    """Arm-led score: stepped arm raise plus an out-of-range elbow bonus.

    Raises:
        MissingAngle: arm raise absent.
    """
    cfg = cfg or ErgoConfig()
    arm = angles.arm_raise_deg
    if arm is None:
        raise MissingAngle("arm")
    if arm < 20.0:
        score = 1
    elif arm < 45.0:
        score = 2
    elif arm < cfg.arm_overreach_deg:
        score = 3
    else:
        score = 4
    if angles.elbow_flexion_deg is not None and not 60.0 <= angles.elbow_flexion_deg <= 100.0:
        score += 1
    return score


_LEVEL_TYPE: dict[int, ViolationType | None] = {
    1: None,
    2: ViolationType.AWKWARD_POSTURE,
    3: ViolationType.OVERREACH,
    4: ViolationType.MSD_HIGH_RISK,
}


def _level_from_combined(combined: int) -> int:
    if combined >= 8:
        return 4
    if combined >= 5:
        return 3
    if combined >= 3:
        return 2
    return 1


def combine_and_classify(
    angles: AngleSet,
    cfg: ErgoConfig | None = None,
    worker_id: int | None = None,
    frame_index: int | None = None,
) -> PostureViolation:
    """Combine group scores and apply direct angle triggers.

    The combined score is max(score_a, score_b) plus an interaction bonus of
    1 when both groups are elevated (>= 3). Direct triggers then floor the
    risk level: trunk beyond the severe threshold forces the top level,
    moderate trunk flexion forces at least level 2, and a raised arm with
    concurrent lateral lean forces at least level 3. The final class is the
    worst of the score-derived and trigger-derived levels.

    Raises:
        MissingAngle: either group score was uncomputable.
    """
    cfg = cfg or ErgoConfig()
    a = score_group_a(angles, cfg)
    b = score_group_b(angles, cfg)
    delta = 1 if a >= 3 and b >= 3 else 0
    scores = RebaScores(score_a=a, score_b=b, delta=delta)
    level = _level_from_combined(scores.combined)

    trunk = angles.trunk_flexion_deg
    lat = angles.trunk_lateral_deg
    arm = angles.arm_raise_deg
    if trunk is not None and trunk > cfg.trunk_msd_deg:
        level = max(level, 4)
    elif trunk is not None and trunk > cfg.trunk_awkward_deg:
        level = max(level, 2)
    if arm is not None and lat is not None and arm > cfg.arm_overreach_deg and lat > cfg.lateral_twist_deg:
        level = max(level, 3)

    return PostureViolation(
        violation_type=_LEVEL_TYPE[level],
        risk_level=level,
        angles=angles,
        scores=scores,
        worker_id=worker_id,
        frame_index=frame_index,
    )


def assess_pose(
    kps: KeypointSet,
    cfg: ErgoConfig | None = None,
    worker_id: int | None = None,
) -> PostureViolation:
    """Gate, measure, and classify one skeleton.

    Raises:
        MissingAngle: too few gate-passing keypoints for both group scores.
    """
    cfg = cfg or ErgoConfig()
    gated = gate_keypoints(kps, cfg)
    angles = compute_angles(gated)
    return combine_and_classify(angles, cfg, worker_id=worker_id, frame_index=kps.frame_index)
