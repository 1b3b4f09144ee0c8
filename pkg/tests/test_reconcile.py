"""Reconciliation rules against an independent brute-force oracle.

The rulebook below is a straight-line transcription of the six rules and
their fixed precedence (1, 6, 2, 3, 5, 4), written before the engine and
kept deliberately naive. Observer states are (stance, clarity) tuples or
None; category is a plain string.
"""

import itertools

import pytest
from hypothesis import given, strategies as st

from shiftwatch.reconcile import (
    DECISION_ORDER,
    Category,
    Clarity,
    Decision,
    EmptyInput,
    FlagSource,
    MachineSignal,
    ObserverFlag,
    Stance,
    UnknownType,
    classify_category,
    extract_observer_flags,
    reconcile,
    validate_pass3,
)
from shiftwatch.violations import Severity, ViolationType
from shiftwatch.vlm.schema import (
    AssessmentConfidence,
    HazardDetail,
    VLMAssessment,
)


def rulebook(gen, disc, conf, category):
    gen_affirm = gen is not None and gen[0] == "AFFIRM"
    disc_affirm = disc is not None and disc[0] == "AFFIRM"

    # 1: agreement (both observers and the machine concur)
    if gen_affirm and disc_affirm and conf is not None:
        return "FLAG_HIGH", 1
    # 6: conflict; the category's favoured observer wins
    if gen is not None and disc is not None and gen[0] != disc[0]:
        winner = gen if category == "OBSERVER_STRONG" else disc
        return ("FLAG", 6) if winner[0] == "AFFIRM" else ("DISCARD_LOGGED", 6)
    # 2: generator-only, tentative; machine corroboration rescues it
    if gen_affirm and disc is None and gen[1] == "TENTATIVE":
        if conf is not None and conf >= 0.40:
            return "FLAG_WITH_NOTE", 2
        return "DISCARD_LOGGED", 2
    # 3: discriminator-only with strong machine evidence
    if disc_affirm and gen is None and conf is not None and conf >= 0.60:
        return "FLAG", 3
    # 5: remaining observer flags; clear observation suffices
    if gen_affirm and disc_affirm:
        if gen[1] == "CLEAR" or disc[1] == "CLEAR":
            return "FLAG", 5
        return "FLAG_WITH_NOTE", 5
    if gen_affirm or disc_affirm:
        lone = gen if gen_affirm else disc
        return ("FLAG", 5) if lone[1] == "CLEAR" else ("DISCARD_LOGGED", 5)
    # 4: no affirming observer
    if conf is None:
        return "DISCARD", 4
    if gen is not None or disc is not None:
        return ("DISCARD_LOGGED", 4) if conf >= 0.40 else ("DISCARD", 4)
    if conf >= 0.70:
        return "FLAG_WITH_NOTE", 4
    if conf >= 0.40:
        return "DISCARD_LOGGED", 4
    return "DISCARD", 4


MACHINE_GRID = (None, 0.10, 0.30, 0.39, 0.40, 0.50, 0.59, 0.60, 0.65, 0.70, 0.75, 0.90)
AFFIRM_STATES = (None, ("AFFIRM", "TENTATIVE"), ("AFFIRM", "CLEAR"))
ALL_STATES = AFFIRM_STATES + (("DENY", "TENTATIVE"), ("DENY", "CLEAR"))

# one representative type per category
GRID_TYPES = (ViolationType.ZONE_BREACH, ViolationType.PPE_MISSING)
GRID_CATEGORY = {
    ViolationType.ZONE_BREACH: "OBSERVER_STRONG",
    ViolationType.PPE_MISSING: "MACHINE_STRONG",
}


def build_flag(state, source, vtype):
    if state is None:
        return None
    stance, clarity = state
    return ObserverFlag(
        source=source,
        violation_type=vtype,
        clarity=Clarity[clarity],
        stance=Stance[stance],
    )


def build_signal(conf, vtype):
    if conf is None:
        return None
    return MachineSignal(violation_type=vtype, max_confidence=conf)


def grid_cases(observer_states):
    cases = []
    for vtype, g, d, conf in itertools.product(
        GRID_TYPES, observer_states, observer_states, MACHINE_GRID
    ):
        if g is None and d is None and conf is None:
            continue
        cases.append((g, d, conf, vtype))
    return cases


def affirm_grid():
    return grid_cases(AFFIRM_STATES)


def run_case(g, d, conf, vtype):
    decision = reconcile(
        build_flag(g, FlagSource.GENERATOR, vtype),
        build_flag(d, FlagSource.DISCRIMINATOR, vtype),
        build_signal(conf, vtype),
    )
    return decision.decision.value, decision.applied_rule


class TestOracleEquivalence:
    def test_affirm_grid_is_large_enough(self):
        assert len(affirm_grid()) >= 120

    def test_affirm_grid_matches_rulebook(self):
        for g, d, conf, vtype in affirm_grid():
            expected = rulebook(g, d, conf, GRID_CATEGORY[vtype])
            assert run_case(g, d, conf, vtype) == expected, (g, d, conf, vtype)

    def test_full_stance_grid_matches_rulebook(self):
        # 5 x 5 x 12 x 2 minus the two all-absent combinations
        cases = grid_cases(ALL_STATES)
        assert len(cases) == 598
        for g, d, conf, vtype in cases:
            expected = rulebook(g, d, conf, GRID_CATEGORY[vtype])
            assert run_case(g, d, conf, vtype) == expected, (g, d, conf, vtype)


class TestWorkedExamples:
    def test_full_agreement_flags_high(self):
        got = run_case(("AFFIRM", "CLEAR"), ("AFFIRM", "CLEAR"), 0.9, ViolationType.PPE_MISSING)
        assert got == ("FLAG_HIGH", 1)

    def test_discriminator_only_with_strong_machine(self):
        got = run_case(None, ("AFFIRM", "CLEAR"), 0.60, ViolationType.PPE_MISSING)
        assert got == ("FLAG", 3)

    def test_machine_only_above_note_threshold(self):
        got = run_case(None, None, 0.75, ViolationType.PPE_MISSING)
        assert got == ("FLAG_WITH_NOTE", 4)

    def test_machine_only_below_noise_floor(self):
        got = run_case(None, None, 0.30, ViolationType.PPE_MISSING)
        assert got == ("DISCARD", 4)

    def test_clear_generator_alone_is_sufficient(self):
        got = run_case(("AFFIRM", "CLEAR"), None, None, ViolationType.PPE_MISSING)
        assert got == ("FLAG", 5)

    def test_conflict_on_behavioural_type_favours_generator(self):
        got = run_case(
            ("AFFIRM", "CLEAR"), ("DENY", "CLEAR"), None, ViolationType.ZONE_BREACH
        )
        assert got == ("FLAG", 6)

    def test_conflict_on_ppe_type_favours_discriminator(self):
        got = run_case(
            ("AFFIRM", "CLEAR"), ("DENY", "CLEAR"), 0.5, ViolationType.PPE_MISSING
        )
        assert got == ("DISCARD_LOGGED", 6)

    def test_tentative_generator_rescued_by_machine(self):
        got = run_case(("AFFIRM", "TENTATIVE"), None, 0.40, ViolationType.PPE_MISSING)
        assert got == ("FLAG_WITH_NOTE", 2)

    def test_tentative_generator_without_corroboration(self):
        got = run_case(("AFFIRM", "TENTATIVE"), None, 0.39, ViolationType.PPE_MISSING)
        assert got == ("DISCARD_LOGGED", 2)

    def test_machine_only_middle_band_is_logged(self):
        got = run_case(None, None, 0.55, ViolationType.PPE_MISSING)
        assert got == ("DISCARD_LOGGED", 4)


CATEGORY_TABLE = {
    ViolationType.BEHAVIORAL_UNSAFE: Category.OBSERVER_STRONG,
    ViolationType.ZONE_BREACH: Category.OBSERVER_STRONG,
    ViolationType.LADDER_MISUSE: Category.OBSERVER_STRONG,
    ViolationType.PPE_MISSING: Category.MACHINE_STRONG,
    ViolationType.FALL_PROTECTION_MISSING: Category.MACHINE_STRONG,
    ViolationType.PROXIMITY_HAZARD: Category.MACHINE_STRONG,
    ViolationType.SCAFFOLD_VIOLATION: Category.MACHINE_STRONG,
    ViolationType.AWKWARD_POSTURE: Category.MACHINE_STRONG,
    ViolationType.MSD_HIGH_RISK: Category.MACHINE_STRONG,
    ViolationType.OVERREACH: Category.MACHINE_STRONG,
    ViolationType.KNEELING_SQUATTING_LOW: Category.MACHINE_STRONG,
}


class TestCategoryTable:
    def test_total_over_reportable_types(self):
        assert len(CATEGORY_TABLE) == 11
        for vtype, expected in CATEGORY_TABLE.items():
            assert classify_category(vtype) is expected

    def test_reporting_only_types_rejected(self):
        with pytest.raises(UnknownType):
            classify_category(ViolationType.TRAINING_EXPIRED)
        with pytest.raises(UnknownType):
            classify_category(ViolationType.MACHINE_GUARDING)


class TestInputValidation:
    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            reconcile(None, None, None)

    def test_mixed_violation_types(self):
        gen = build_flag(("AFFIRM", "CLEAR"), FlagSource.GENERATOR, ViolationType.PPE_MISSING)
        machine = build_signal(0.8, ViolationType.ZONE_BREACH)
        with pytest.raises(ValueError, match="mixed"):
            reconcile(gen, None, machine)

    def test_signal_confidence_bounds(self):
        with pytest.raises(ValueError):
            MachineSignal(violation_type=ViolationType.PPE_MISSING, max_confidence=1.2)
        with pytest.raises(ValueError):
            MachineSignal(violation_type=ViolationType.PPE_MISSING, max_confidence=-0.1)

    def test_unknown_type_rejected(self):
        machine = build_signal(0.9, ViolationType.TRAINING_EXPIRED)
        with pytest.raises(UnknownType):
            reconcile(None, None, machine)


observer_state = st.sampled_from(ALL_STATES)


class TestProperties:
    @given(
        gen=observer_state,
        disc=observer_state,
        lo=st.floats(min_value=0.0, max_value=1.0),
        hi=st.floats(min_value=0.0, max_value=1.0),
        vtype=st.sampled_from(GRID_TYPES),
    )
    def test_monotone_in_machine_confidence(self, gen, disc, lo, hi, vtype):
        if lo > hi:
            lo, hi = hi, lo
        d_lo, _ = run_case(gen, disc, lo, vtype)
        d_hi, _ = run_case(gen, disc, hi, vtype)
        assert DECISION_ORDER[Decision(d_lo)] <= DECISION_ORDER[Decision(d_hi)]

    @given(
        gen=observer_state,
        disc=observer_state,
        conf=st.floats(min_value=0.0, max_value=1.0),
        vtype=st.sampled_from(GRID_TYPES),
    )
    def test_machine_presence_never_lowers_the_decision(self, gen, disc, conf, vtype):
        if gen is None and disc is None:
            return
        d_absent, _ = run_case(gen, disc, None, vtype)
        d_present, _ = run_case(gen, disc, conf, vtype)
        assert DECISION_ORDER[Decision(d_absent)] <= DECISION_ORDER[Decision(d_present)]

    def test_determinism_including_justification(self):
        for g, d, conf, vtype in affirm_grid():
            gen = build_flag(g, FlagSource.GENERATOR, vtype)
            disc = build_flag(d, FlagSource.DISCRIMINATOR, vtype)
            machine = build_signal(conf, vtype)
            assert reconcile(gen, disc, machine) == reconcile(gen, disc, machine)


def assessment_with(hazards):
    return VLMAssessment(
        scene_summary="two workers near the east scaffold",
        worker_count=2,
        reasoning="cross-checked both observer reports against detections",
        hazards=tuple(hazards),
        no_hazards=not hazards,
        confidence=AssessmentConfidence.MEDIUM,
    )


def hazard(vtype, frame=0):
    return HazardDetail(
        violation_type=vtype, severity=Severity.MEDIUM, best_frame_index=frame
    )


class TestValidatePass3:
    def test_hazard_matching_generator_flag_retained(self):
        a = assessment_with([hazard(ViolationType.PPE_MISSING)])
        gen = [build_flag(("AFFIRM", "CLEAR"), FlagSource.GENERATOR, ViolationType.PPE_MISSING)]
        audited, removals = validate_pass3(a, gen, [], [])
        assert audited.hazards == a.hazards
        assert removals == []

    def test_hazard_matching_strong_machine_retained(self):
        a = assessment_with([hazard(ViolationType.PPE_MISSING)])
        signals = [build_signal(0.70, ViolationType.PPE_MISSING)]
        audited, removals = validate_pass3(a, [], [], signals)
        assert len(audited.hazards) == 1
        assert removals == []

    def test_unsupported_hazard_removed(self):
        a = assessment_with([hazard(ViolationType.LADDER_MISUSE, frame=2)])
        audited, removals = validate_pass3(a, [], [], [])
        assert audited.hazards == ()
        assert audited.no_hazards is True
        assert len(removals) == 1
        assert removals[0].reason == "unsupported"
        assert removals[0].best_frame_index == 2

    def test_machine_only_below_discard_threshold_removed(self):
        a = assessment_with([hazard(ViolationType.PPE_MISSING)])
        signals = [build_signal(0.35, ViolationType.PPE_MISSING)]
        _, removals = validate_pass3(a, [], [], signals)
        assert [r.reason for r in removals] == ["rule4_discard"]

    def test_machine_only_middle_band_removed_as_weak(self):
        a = assessment_with([hazard(ViolationType.PPE_MISSING)])
        signals = [build_signal(0.69, ViolationType.PPE_MISSING)]
        _, removals = validate_pass3(a, [], [], signals)
        assert [r.reason for r in removals] == ["weak_machine_only"]

    def test_denying_flag_is_not_support(self):
        a = assessment_with([hazard(ViolationType.PPE_MISSING)])
        disc = [
            ObserverFlag(
                source=FlagSource.DISCRIMINATOR,
                violation_type=ViolationType.PPE_MISSING,
                stance=Stance.DENY,
            )
        ]
        audited, removals = validate_pass3(a, [], disc, [])
        assert audited.hazards == ()
        assert [r.reason for r in removals] == ["unsupported"]

    def test_mixed_hazards_filtered_selectively(self):
        a = assessment_with(
            [
                hazard(ViolationType.PPE_MISSING),
                hazard(ViolationType.ZONE_BREACH, frame=1),
                hazard(ViolationType.OVERREACH, frame=3),
            ]
        )
        gen = [build_flag(("AFFIRM", "CLEAR"), FlagSource.GENERATOR, ViolationType.ZONE_BREACH)]
        signals = [build_signal(0.9, ViolationType.PPE_MISSING)]
        audited, removals = validate_pass3(a, gen, [], signals)
        kept = {h.violation_type for h in audited.hazards}
        assert kept == {ViolationType.PPE_MISSING, ViolationType.ZONE_BREACH}
        assert [r.violation_type for r in removals] == [ViolationType.OVERREACH]

    def test_signal_confidence_aggregated_by_max(self):
        a = assessment_with([hazard(ViolationType.PPE_MISSING)])
        signals = [
            build_signal(0.30, ViolationType.PPE_MISSING),
            build_signal(0.80, ViolationType.PPE_MISSING),
        ]
        audited, removals = validate_pass3(a, [], [], signals)
        assert len(audited.hazards) == 1
        assert removals == []

    @given(
        supported=st.lists(st.sampled_from(sorted(CATEGORY_TABLE, key=lambda v: v.value)), unique=True),
        unsupported=st.lists(st.sampled_from(sorted(CATEGORY_TABLE, key=lambda v: v.value)), unique=True),
    )
    def test_soundness_output_subset_of_input(self, supported, unsupported):
        unsupported = [v for v in unsupported if v not in supported]
        a = assessment_with([hazard(v) for v in supported + unsupported])
        signals = [build_signal(0.95, v) for v in supported]
        audited, removals = validate_pass3(a, [], [], signals)
        assert set(audited.hazards) <= set(a.hazards)
        assert {h.violation_type for h in audited.hazards} == set(supported)
        assert {r.violation_type for r in removals} == set(unsupported)
        assert audited.no_hazards == (len(audited.hazards) == 0)


class TestFlagExtraction:
    def test_ppe_mention_becomes_clear_affirm(self):
        flags = extract_observer_flags(
            "Worker on the left has no vest. Otherwise routine activity.",
            FlagSource.GENERATOR,
        )
        assert len(flags) == 1
        f = flags[0]
        assert f.violation_type is ViolationType.PPE_MISSING
        assert f.clarity is Clarity.CLEAR
        assert f.stance is Stance.AFFIRM
        assert f.source is FlagSource.GENERATOR
        assert "no vest" in f.note

    def test_hedged_mention_is_tentative(self):
        flags = extract_observer_flags(
            "One worker might be too close to the excavator swing radius.",
            FlagSource.GENERATOR,
        )
        assert [f.violation_type for f in flags] == [ViolationType.PROXIMITY_HAZARD]
        assert flags[0].clarity is Clarity.TENTATIVE

    def test_denial_marker_flips_stance(self):
        flags = extract_observer_flags(
            "I see no evidence of a zone breach near the barricade.",
            FlagSource.DISCRIMINATOR,
        )
        assert [f.stance for f in flags] == [Stance.DENY]
        assert flags[0].violation_type is ViolationType.ZONE_BREACH

    def test_affirming_mention_beats_denial(self):
        text = (
            "The ladder placement looks compliant at first. "
            "Later the same ladder is leaned at a dangerous angle."
        )
        flags = extract_observer_flags(text, FlagSource.GENERATOR)
        assert [f.violation_type for f in flags] == [ViolationType.LADDER_MISUSE]
        assert flags[0].stance is Stance.AFFIRM

    def test_multiple_types_sorted_by_value(self):
        text = (
            "A worker is on the phone while walking. "
            "Another has no hard hat. "
            "Someone is kneeling on rebar for several minutes."
        )
        flags = extract_observer_flags(text, FlagSource.GENERATOR)
        values = [f.violation_type.value for f in flags]
        assert values == sorted(values)
        assert set(values) == {
            ViolationType.BEHAVIORAL_UNSAFE.value,
            ViolationType.PPE_MISSING.value,
            ViolationType.KNEELING_SQUATTING_LOW.value,
        }

    def test_clean_text_yields_nothing(self):
        flags = extract_observer_flags(
            "Steady concrete pour, all workers in full PPE, good housekeeping.",
            FlagSource.GENERATOR,
        )
        assert flags == []

    def test_clear_mention_upgrades_earlier_hedge(self):
        text = (
            "Someone might be squatting behind the mixer, hard to tell. "
            "Now clearly the same worker is squatting under the load."
        )
        flags = extract_observer_flags(text, FlagSource.GENERATOR)
        assert [f.clarity for f in flags] == [Clarity.CLEAR]
