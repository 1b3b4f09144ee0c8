"""Deterministic reconciliation of observer flags against machine signals.

Six asymmetric rules resolve disagreement between the raw-video observer
(generator), the annotation-aware observer (discriminator), and the detector.
The asymmetry encodes a prior: observers are trusted on behaviour and motion,
the machine on spatial and PPE evidence. A post-validator then audits the
verifier's own structured output for traceability to upstream signals.

Exactly one rule applies to any input pattern, in fixed precedence
1, 6, 2, 3, 5, 4: agreement first, explicit conflict next, then
single-observer patterns, then machine-only.

Machine-only signals in the middle band (0.40 <= conf < 0.70) are discarded
but logged. The rules state outcomes only for the strong (>= 0.70) and weak
(< 0.40) ends; resolving the gap toward discard is precision-conservative
while the log keeps the events available for recall analysis.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .violations import VLM_HAZARD_TYPES, UnknownType, ViolationType
from .vlm.schema import VLMAssessment

__all__ = [
    "FlagSource",
    "Clarity",
    "Stance",
    "Category",
    "Decision",
    "ObserverFlag",
    "MachineSignal",
    "ReconcileDecision",
    "ValidatorRemoval",
    "EmptyInput",
    "UnknownType",
    "classify_category",
    "reconcile",
    "validate_pass3",
    "extract_observer_flags",
    "DECISION_ORDER",
]

STRONG_MACHINE_CONF = 0.60
FLAG_NOTE_CONF = 0.70
DISCARD_CONF = 0.40


class FlagSource(enum.Enum):
    GENERATOR = "GENERATOR"
    DISCRIMINATOR = "DISCRIMINATOR"


class Clarity(enum.Enum):
    CLEAR = "CLEAR"
    TENTATIVE = "TENTATIVE"


class Stance(enum.Enum):
    """Whether the observer asserts or explicitly contests the violation."""

    AFFIRM = "AFFIRM"
    DENY = "DENY"


class Category(enum.Enum):
    OBSERVER_STRONG = "OBSERVER_STRONG"
    MACHINE_STRONG = "MACHINE_STRONG"


class Decision(enum.Enum):
    FLAG_HIGH = "FLAG_HIGH"
    FLAG = "FLAG"
    FLAG_WITH_NOTE = "FLAG_WITH_NOTE"
    DISCARD_LOGGED = "DISCARD_LOGGED"
    DISCARD = "DISCARD"


#: Severity order for the monotonicity property (discard lowest).
DECISION_ORDER = {
    Decision.DISCARD: 0,
    Decision.DISCARD_LOGGED: 1,
    Decision.FLAG_WITH_NOTE: 2,
    Decision.FLAG: 3,
    Decision.FLAG_HIGH: 4,
}


class EmptyInput(ValueError):
    """reconcile() requires at least one flag or signal."""


@dataclass(frozen=True)
class ObserverFlag:
    source: FlagSource
    violation_type: ViolationType
    clarity: Clarity = Clarity.CLEAR
    stance: Stance = Stance.AFFIRM
    note: str = ""


@dataclass(frozen=True)
class MachineSignal:
    violation_type: ViolationType
    max_confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.max_confidence <= 1.0:
            raise ValueError("max_confidence must be in [0, 1]")


@dataclass(frozen=True)
class ReconcileDecision:
    violation_type: ViolationType
    decision: Decision
    applied_rule: int
    justification: str


_OBSERVER_STRONG = frozenset(
    {
        ViolationType.BEHAVIORAL_UNSAFE,
        ViolationType.ZONE_BREACH,
        ViolationType.LADDER_MISUSE,
    }
)


def classify_category(violation_type: ViolationType) -> Category:
    """Which evidence source gets the benefit of the doubt for this type.

    Behavioural and motion violations favour the raw-video observer; spatial,
    PPE, and posture violations favour the annotation-and-detector side
    (posture types originate from the pose pipeline, so the machine has the
    stronger contextual access there).

    Raises:
        UnknownType: not one of the reportable hazard types.
    """
    if violation_type not in VLM_HAZARD_TYPES:
        raise UnknownType(f"{violation_type.value} is not a reconcilable hazard type")
    if violation_type in _OBSERVER_STRONG:
        return Category.OBSERVER_STRONG
    return Category.MACHINE_STRONG


def _affirms(flag: ObserverFlag | None) -> bool:
    return flag is not None and flag.stance is Stance.AFFIRM


def _decide(
    violation_type: ViolationType,
    decision: Decision,
    rule: int,
    justification: str,
) -> ReconcileDecision:
    return ReconcileDecision(
        violation_type=violation_type,
        decision=decision,
        applied_rule=rule,
        justification=justification,
    )


def reconcile(
    gen: ObserverFlag | None,
    disc: ObserverFlag | None,
    machine: MachineSignal | None,
) -> ReconcileDecision:
    """Apply the asymmetric reconciliation rules to one violation type.

    Raises:
        EmptyInput: no flag and no signal were supplied.
        ValueError: inputs refer to different violation types.
        UnknownType: the type is not reconcilable.
    """
    present = [x for x in (gen, disc, machine) if x is not None]
    if not present:
        raise EmptyInput("reconcile requires at least one flag or signal")
    types = {x.violation_type for x in present}
    if len(types) > 1:
        raise ValueError(f"mixed violation types: {sorted(t.value for t in types)}")
    vtype = present[0].violation_type
    category = classify_category(vtype)
    conf = machine.max_confidence if machine is not None else None

    # rule 1: full agreement
    if _affirms(gen) and _affirms(disc) and machine is not None:
        return _decide(
            vtype, Decision.FLAG_HIGH, 1,
            f"both observers flagged {vtype.value} and the machine confirms at {conf:.2f}",
        )

    # rule 6: observers present and in explicit conflict; the category's
    # favoured observer wins
    if gen is not None and disc is not None and gen.stance is not disc.stance:
        favoured = gen if category is Category.OBSERVER_STRONG else disc
        side = "generator" if favoured is gen else "discriminator"
        if favoured.stance is Stance.AFFIRM:
            return _decide(
                vtype, Decision.FLAG, 6,
                f"observers split on {vtype.value}; {category.value} favours the {side}, who flagged it",
            )
        return _decide(
            vtype, Decision.DISCARD_LOGGED, 6,
            f"observers split on {vtype.value}; {category.value} favours the {side}, who contested it",
        )

    # rule 2: generator-only with a structured override present (the flag's
    # own tentativeness); a clear generator-only flag has no override and
    # falls through to rule 5, since missing machine detection is not a
    # reason to overrule
    if _affirms(gen) and disc is None and gen.clarity is Clarity.TENTATIVE:
        if conf is not None and conf >= DISCARD_CONF:
            return _decide(
                vtype, Decision.FLAG_WITH_NOTE, 2,
                f"tentative generator flag for {vtype.value} corroborated by machine at {conf:.2f}",
            )
        return _decide(
            vtype, Decision.DISCARD_LOGGED, 2,
            f"tentative generator flag for {vtype.value} with no corroboration",
        )

    # rule 3: discriminator-only with strong machine evidence
    if _affirms(disc) and gen is None and conf is not None and conf >= STRONG_MACHINE_CONF:
        return _decide(
            vtype, Decision.FLAG, 3,
            f"discriminator flagged {vtype.value} and machine evidence is strong ({conf:.2f})",
        )

    # rule 5: observer-only patterns not already resolved
    if _affirms(gen) or _affirms(disc):
        if _affirms(gen) and _affirms(disc):
            if gen.clarity is Clarity.CLEAR or disc.clarity is Clarity.CLEAR:
                return _decide(
                    vtype, Decision.FLAG, 5,
                    f"both observers flagged {vtype.value} without machine detection; a clear human observation is sufficient",
                )
            return _decide(
                vtype, Decision.FLAG_WITH_NOTE, 5,
                f"both observers tentatively flagged {vtype.value}; corroborating but unconfirmed",
            )
        flag = disc if _affirms(disc) else gen
        if flag.clarity is Clarity.CLEAR:
            return _decide(
                vtype, Decision.FLAG, 5,
                f"{flag.source.value.lower()} clearly flagged {vtype.value}; a clear human observation is sufficient evidence",
            )
        return _decide(
            vtype, Decision.DISCARD_LOGGED, 5,
            f"single tentative observation of {vtype.value} without strong machine evidence",
        )

    # rule 4: no affirming observer
    if machine is None:
        return _decide(
            vtype, Decision.DISCARD, 4,
            f"{vtype.value} contested by observers with no machine signal",
        )
    denied = (gen is not None) or (disc is not None)
    if denied:
        if conf >= DISCARD_CONF:
            return _decide(
                vtype, Decision.DISCARD_LOGGED, 4,
                f"machine reported {vtype.value} at {conf:.2f} but an observer explicitly contested it",
            )
        return _decide(
            vtype, Decision.DISCARD, 4,
            f"weak machine signal for {vtype.value} ({conf:.2f}) with observer denial",
        )
    if conf >= FLAG_NOTE_CONF:
        return _decide(
            vtype, Decision.FLAG_WITH_NOTE, 4,
            f"machine-only detection of {vtype.value} at {conf:.2f}; flagged with explanatory note",
        )
    if conf >= DISCARD_CONF:
        return _decide(
            vtype, Decision.DISCARD_LOGGED, 4,
            f"machine-only detection of {vtype.value} at {conf:.2f} in the indeterminate band; discarded but logged",
        )
    return _decide(
        vtype, Decision.DISCARD, 4,
        f"machine-only detection of {vtype.value} at {conf:.2f} below the noise floor",
    )


@dataclass(frozen=True)
class ValidatorRemoval:
    violation_type: ViolationType
    best_frame_index: int
    reason: str  # "unsupported" | "rule4_discard" | "weak_machine_only"


def validate_pass3(
    assessment: VLMAssessment,
    gen_flags: list[ObserverFlag],
    disc_flags: list[ObserverFlag],
    machine_signals: list[MachineSignal],
) -> tuple[VLMAssessment, list[ValidatorRemoval]]:
    """Audit the verifier's hazards for upstream traceability.

    A hazard survives only with an affirming generator flag, an affirming
    discriminator flag, or a machine signal of the same type at or above
    0.70. Machine-only hazards below 0.40 are removed per the discard
    clause; the 0.40-0.70 machine-only band is removed as weak; hazards with
    no upstream signal at all are removed as suspected hallucinations. The
    transform only ever removes hazards.
    """
    gen_affirmed = {f.violation_type for f in gen_flags if f.stance is Stance.AFFIRM}
    disc_affirmed = {f.violation_type for f in disc_flags if f.stance is Stance.AFFIRM}
    machine_conf: dict[ViolationType, float] = {}
    for signal in machine_signals:
        machine_conf[signal.violation_type] = max(
            machine_conf.get(signal.violation_type, 0.0), signal.max_confidence
        )

    kept = []
    removals = []
    for hazard in assessment.hazards:
        vtype = hazard.violation_type
        observed = vtype in gen_affirmed or vtype in disc_affirmed
        conf = machine_conf.get(vtype)
        if observed or (conf is not None and conf >= FLAG_NOTE_CONF):
            kept.append(hazard)
            continue
        if conf is None:
            reason = "unsupported"
        elif conf < DISCARD_CONF:
            reason = "rule4_discard"
        else:
            reason = "weak_machine_only"
        removals.append(
            ValidatorRemoval(
                violation_type=vtype, best_frame_index=hazard.best_frame_index, reason=reason
            )
        )
    audited = assessment.model_copy(
        update={"hazards": tuple(kept), "no_hazards": not kept}
    )
    return audited, removals


# ---------------------------------------------------------------------------
# free-text flag extraction (live-run glue; tests construct flags directly)

_TYPE_PATTERNS: tuple[tuple[ViolationType, tuple[str, ...]], ...] = (
    (ViolationType.FALL_PROTECTION_MISSING, ("harness", "fall protection", "unprotected edge", "no tie-off")),
    (ViolationType.SCAFFOLD_VIOLATION, ("scaffold",)),
    (ViolationType.LADDER_MISUSE, ("ladder",)),
    (ViolationType.ZONE_BREACH, ("exclusion zone", "restricted area", "zone breach", "barricade")),
    (ViolationType.PROXIMITY_HAZARD, ("too close", "proximity", "swing radius", "blind spot")),
    (ViolationType.BEHAVIORAL_UNSAFE, ("phone", "running", "horseplay", "unsafe behaviour", "unsafe behavior", "throwing")),
    (ViolationType.MSD_HIGH_RISK, ("severe bend", "deep bend", "high-risk posture", "back strain")),
    (ViolationType.OVERREACH, ("overreach", "reaching over", "reaching above")),
    (ViolationType.KNEELING_SQUATTING_LOW, ("kneel", "squat", "crouch")),
    (ViolationType.AWKWARD_POSTURE, ("awkward", "stooping", "bent over", "twisted posture", "poor posture")),
    (ViolationType.PPE_MISSING, ("no vest", "missing vest", "without a vest", "no hard hat", "no hardhat", "no helmet", "missing helmet", "no gloves", "missing gloves", "bare hands", "no ppe", "missing ppe")),
)

_HEDGE_WORDS = ("maybe", "possibly", "might", "unclear", "hard to tell", "not sure", "appears", "seems", "can't confirm", "cannot confirm")

_DENY_MARKERS = ("no sign of", "did not see", "didn't see", "no evidence of", "looks compliant", "false positive", "looks like noise", "disagree", "not a violation", "properly", "correctly")


def extract_observer_flags(notes: str, source: FlagSource) -> list[ObserverFlag]:
    """Heuristic extraction of structured flags from free-text pass notes.

    Documented behaviour, not NLP: each sentence is scanned for type keyword
    patterns; hedging words make a mention TENTATIVE; denial markers in the
    same sentence make it a DENY. Per type, an affirming mention beats a
    denial and CLEAR beats TENTATIVE (safety-conservative). The first
    matching sentence becomes the flag's note.
    """
    sentences = [s.strip() for s in notes.replace("\n", " ").split(".") if s.strip()]
    found: dict[ViolationType, ObserverFlag] = {}
    for sentence in sentences:
        low = sentence.lower()
        for vtype, patterns in _TYPE_PATTERNS:
            if not any(p in low for p in patterns):
                continue
            stance = Stance.DENY if any(m in low for m in _DENY_MARKERS) else Stance.AFFIRM
            clarity = Clarity.TENTATIVE if any(h in low for h in _HEDGE_WORDS) else Clarity.CLEAR
            candidate = ObserverFlag(
                source=source, violation_type=vtype, clarity=clarity, stance=stance, note=sentence
            )
            current = found.get(vtype)
            if current is None:
                found[vtype] = candidate
            elif current.stance is Stance.DENY and stance is Stance.AFFIRM:
                found[vtype] = candidate
            elif (
                current.stance is stance
                and current.clarity is Clarity.TENTATIVE
                and clarity is Clarity.CLEAR
            ):
                found[vtype] = candidate
    return [found[t] for t in sorted(found, key=lambda v: v.value)]
