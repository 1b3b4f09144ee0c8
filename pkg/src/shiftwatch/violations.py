"""Violation taxonomy shared across the pipeline.

The verification protocol emits a fixed set of hazard types; the reporting
layer additionally accepts a few event types that can only originate from
other evidence sources (worker roster, specialised detector classes), so the
full enum here is a superset of what the verifier is allowed to produce.
"""

from __future__ import annotations

import enum


class UnknownType(ValueError):
    """Value is not a member of the violation taxonomy in question."""


class ViolationType(str, enum.Enum):
    PPE_MISSING = "PPE_MISSING"
    FALL_PROTECTION_MISSING = "FALL_PROTECTION_MISSING"
    PROXIMITY_HAZARD = "PROXIMITY_HAZARD"
    ZONE_BREACH = "ZONE_BREACH"
    LADDER_MISUSE = "LADDER_MISUSE"
    SCAFFOLD_VIOLATION = "SCAFFOLD_VIOLATION"
    BEHAVIORAL_UNSAFE = "BEHAVIORAL_UNSAFE"
    AWKWARD_POSTURE = "AWKWARD_POSTURE"
    MSD_HIGH_RISK = "MSD_HIGH_RISK"
    OVERREACH = "OVERREACH"
    KNEELING_SQUATTING_LOW = "KNEELING_SQUATTING_LOW"
    # Accepted by reporting but never produced by the verifier output schema.
    EYE_FACE_PPE_MISSING = "EYE_FACE_PPE_MISSING"
    MACHINE_GUARDING = "MACHINE_GUARDING"
    TRAINING_EXPIRED = "TRAINING_EXPIRED"
    RESPIRATORY_PPE_MISSING = "RESPIRATORY_PPE_MISSING"


#: The eleven hazard types the verifier's structured output may contain.
VLM_HAZARD_TYPES: frozenset[ViolationType] = frozenset(
    {
        ViolationType.PPE_MISSING,
        ViolationType.FALL_PROTECTION_MISSING,
        ViolationType.PROXIMITY_HAZARD,
        ViolationType.ZONE_BREACH,
        ViolationType.LADDER_MISUSE,
        ViolationType.SCAFFOLD_VIOLATION,
        ViolationType.BEHAVIORAL_UNSAFE,
        ViolationType.AWKWARD_POSTURE,
        ViolationType.MSD_HIGH_RISK,
        ViolationType.OVERREACH,
        ViolationType.KNEELING_SQUATTING_LOW,
    }
)


class Severity(str, enum.Enum):
    LOW = "LOW"
    MEDIUM = "MEDIUM"
    HIGH = "HIGH"
    CRITICAL = "CRITICAL"

    @property
    def rank(self) -> int:
        return _SEVERITY_RANK[self]


_SEVERITY_RANK = {
    Severity.LOW: 0,
    Severity.MEDIUM: 1,
    Severity.HIGH: 2,
    Severity.CRITICAL: 3,
}


def max_severity(a: Severity, b: Severity) -> Severity:
    """Escalating merge: the more severe of the two."""
    return a if a.rank >= b.rank else b
