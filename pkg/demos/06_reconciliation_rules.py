"""
Reconciling observers against the detector
==========================================

Per violation type, each chunk yields up to three signals: the raw-video
observer, the annotation-aware observer, and the detector's best
confidence. Six asymmetric rules turn every combination into one decision
on a fixed severity ladder. The same machinery then strips any structured
hazard that no signal supports.
"""

from shiftwatch.reconcile import (
    Clarity,
    FlagSource,
    MachineSignal,
    ObserverFlag,
    Stance,
    reconcile,
    validate_pass3,
)
from shiftwatch.violations import ViolationType
from shiftwatch.vlm.schema import HazardDetail, VLMAssessment


def flag(source, vtype, clarity=Clarity.CLEAR, stance=Stance.AFFIRM):
    return ObserverFlag(source=source, violation_type=vtype, clarity=clarity, stance=stance)


def show(label, gen, disc, machine):
    d = reconcile(gen, disc, machine)
    print(f"  rule {d.applied_rule}: {d.decision.value:15s} {label}")
    print(f"          {d.justification}")


PPE = ViolationType.PPE_MISSING
ZONE = ViolationType.ZONE_BREACH
G, D = FlagSource.GENERATOR, FlagSource.DISCRIMINATOR

print("decision ladder, strongest corroboration first:")
show("everyone agrees",
     flag(G, PPE), flag(D, PPE), MachineSignal(violation_type=PPE, max_confidence=0.88))
show("observers disagree on a behavioural call; the raw-video observer wins",
     flag(G, ZONE), flag(D, ZONE, stance=Stance.DENY), None)
show("observers disagree on a PPE call; the annotation-aware observer wins",
     flag(G, PPE), flag(D, PPE, stance=Stance.DENY),
     MachineSignal(violation_type=PPE, max_confidence=0.55))
show("hesitant first observer, detector backs it",
     flag(G, PPE, clarity=Clarity.TENTATIVE), None,
     MachineSignal(violation_type=PPE, max_confidence=0.45))
show("only the second observer, but the detector is strong",
     None, flag(D, PPE), MachineSignal(violation_type=PPE, max_confidence=0.72))
show("one clear human observation, nothing else",
     flag(G, ZONE), None, None)
show("detector alone at high confidence",
     None, None, MachineSignal(violation_type=PPE, max_confidence=0.84))
show("detector alone in the grey zone is logged, not flagged",
     None, None, MachineSignal(violation_type=PPE, max_confidence=0.50))

# the validator removes hazards with no upstream support
assessment = VLMAssessment(
    scene_summary="deck pour",
    worker_count=2,
    reasoning="reconciled",
    hazards=(
        HazardDetail(violation_type=PPE, severity="MEDIUM", best_frame_index=0),
        HazardDetail(violation_type=ViolationType.LADDER_MISUSE, severity="HIGH", best_frame_index=1),
    ),
    no_hazards=False,
    confidence="HIGH",
)
filtered, removals = validate_pass3(
    assessment,
    gen_flags=[flag(G, PPE)],
    disc_flags=[],
    machine_signals=[MachineSignal(violation_type=PPE, max_confidence=0.88)],
)
print("\nvalidator pass over a structured assessment:")
print(f"  kept:    {[h.violation_type.value for h in filtered.hazards]}")
print(f"  removed: {[(r.violation_type.value, r.reason) for r in removals]}")
