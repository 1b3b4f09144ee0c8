"""End-of-shift orchestration across both camera streams.

Per stream: parse, gate, stride (fixed cameras only), then track workers and
accumulate PPE evidence (wall) or score posture per skeleton (body-worn).
The timeline is cut into chunks; each chunk runs the three-pass verification
protocol against rendered machine evidence, observer flags are extracted
from the pass notes, and the reconciliation engine decides which violation
types become safety events. Events deduplicate in the store; the report is
generated once the shift closes.

Determinism: identical inputs yield byte-identical structured reports. A
shift that is already closed in the store is not reprocessed; its report is
regenerated as-is (shifts are immutable once finalized).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, TextIO

from .config import AppConfig, ClientConfig
from .ergonomics import MissingAngle, assess_pose, gate_keypoints
from .ingest import (
    Camera,
    Chunk,
    DetectionClass,
    chunk_timeline,
    gate_detections,
    parse_stream,
    stride_frames,
)
from .ppe import ComplianceWindow, InsufficientEvidence, associate_ppe, evaluate_compliance
from .reconcile import (
    Decision,
    FlagSource,
    MachineSignal,
    ObserverFlag,
    ReconcileDecision,
    UnknownType,
    ValidatorRemoval,
    extract_observer_flags,
    reconcile,
    validate_pass3,
)
from .reporting import (
    UNATTRIBUTED_WORKER_ID,
    EventCandidate,
    EventSource,
    ShiftReport,
    ShiftStore,
    UnknownShift,
    generate_report,
    load_roster,
    render_text,
    training_events,
)
from .tracking import IdentityDatabase, Tracker, compute_embedding
from .violations import Severity, ViolationType
from .vlm import (
    AnnotatedFrame,
    HazardLine,
    HTTPChatClient,
    PassOutputs,
    RENDER_NAMES,
    ScriptedVLMClient,
    VLMClient,
    WorkerStatusLine,
    render_evidence,
    run_protocol,
)

__all__ = [
    "ShiftInputs",
    "ChunkOutcome",
    "ShiftResult",
    "run_shift",
    "build_client",
    "write_audit",
    "FLAGGED_DECISIONS",
]

FLAGGED_DECISIONS = frozenset(
    {Decision.FLAG_HIGH, Decision.FLAG, Decision.FLAG_WITH_NOTE}
)

# events from observer-only decisions carry no machine severity; derive one
_DECISION_SEVERITY = {
    Decision.FLAG_HIGH: Severity.HIGH,
    Decision.FLAG: Severity.MEDIUM,
    Decision.FLAG_WITH_NOTE: Severity.LOW,
}

_RISK_SEVERITY = {2: Severity.MEDIUM, 3: Severity.HIGH, 4: Severity.CRITICAL}

#: Evidence frames retained per machine candidate (reports stay bounded).
EVIDENCE_CAP = 8

_GRAY = (128, 128, 128)


@dataclass(frozen=True)
class ShiftInputs:
    shift_id: str
    site_id: str
    start_utc: str
    end_utc: str
    site_name: str = ""
    wall_stream: str | Path | None = None
    pov_stream: str | Path | None = None
    wall_video_uri: str | None = None
    pov_video_uri: str | None = None
    roster: str | Path | None = None


@dataclass(frozen=True)
class _Candidate:
    """Machine-side violation candidate prior to reconciliation."""

    violation_type: ViolationType
    worker_id: int
    severity: Severity
    confidence: float
    first_timestamp_s: float
    evidence: tuple[tuple[int, float], ...]


@dataclass
class _StreamAnalysis:
    camera: Camera
    chunks: list[Chunk]
    candidates: list[_Candidate]
    worker_status: list[WorkerStatusLine]
    worker_ids: list[int]
    malformed: int
    base_uri: str


@dataclass
class ChunkOutcome:
    chunk_key: str
    camera: Camera
    outputs: PassOutputs
    decisions: list[ReconcileDecision]
    removals: list[ValidatorRemoval]


@dataclass
class ShiftResult:
    shift_id: str
    report: ShiftReport
    report_json: bytes
    report_text: str
    audit_records: list[dict]
    chunk_outcomes: list[ChunkOutcome] = field(default_factory=list)
    malformed_lines: dict[str, int] = field(default_factory=dict)
    reprocessed: bool = True

    @property
    def event_count(self) -> int:
        return self.report.total_events


def _read(source: str | Path) -> str:
    return Path(source).read_text()


def _embedding_for(det, dim: int):
    rgb = det.appearance_rgb if det.appearance_rgb is not None else _GRAY
    return compute_embedding(rgb, dim)


def _analyze_wall(text: str, cfg: AppConfig, base_uri: str) -> _StreamAnalysis:
    parsed = parse_stream(text, Camera.WALL)
    frames = stride_frames(gate_detections(parsed.frames, cfg.ingest), cfg.ingest)

    tracker = Tracker(cfg.tracker)
    identities = IdentityDatabase(threshold=cfg.tracker.embed_sim_threshold)
    windows: dict[int, ComplianceWindow] = {}
    worker_conf: dict[int, float] = {}
    frame_ts: dict[int, float] = {}

    for frame in frames:
        frame_ts[frame.frame_index] = frame.timestamp_s
        workers = [d for d in frame.detections if d.class_label is DetectionClass.WORKER]
        embeddings = [_embedding_for(d, cfg.tracker.embedding_dim) for d in workers]
        assignment = tracker.step(frame.frame_index, workers, embeddings)

        worker_boxes: dict[int, tuple[float, float, float, float]] = {}
        for d_idx, track_id in assignment.items():
            track = tracker.tracks[track_id]
            if track.worker_id is None:
                identities.reassociate(track, frame.timestamp_s)
            wid = track.worker_id
            worker_boxes[wid] = workers[d_idx].bbox
            worker_conf[wid] = max(worker_conf.get(wid, 0.0), workers[d_idx].confidence)

        for wid, items in associate_ppe(frame, worker_boxes).items():
            window = windows.setdefault(wid, ComplianceWindow(worker_id=wid, cfg=cfg.ppe))
            window.update(frame.frame_index, items)

    candidates = []
    status = []
    for wid in sorted(windows):
        window = windows[wid]
        present = tuple(
            RENDER_NAMES[item]
            for item in sorted(cfg.ppe.required_items)
            if window.observation_count(item) > 0
        )
        missing = tuple(
            RENDER_NAMES[item]
            for item in sorted(cfg.ppe.required_items)
            if window.observation_count(item) == 0
        )
        status.append(WorkerStatusLine(worker_id=wid, present=present, missing=missing))
        try:
            verdict = evaluate_compliance(window, cfg.ppe)
        except InsufficientEvidence:
            continue
        if verdict is None:
            continue
        evidence = tuple(
            (fi, frame_ts[fi]) for fi in verdict.evidence_frames[:EVIDENCE_CAP]
        )
        candidates.append(
            _Candidate(
                violation_type=ViolationType.PPE_MISSING,
                worker_id=wid,
                severity=Severity.MEDIUM,
                confidence=worker_conf[wid],
                first_timestamp_s=evidence[0][1],
                evidence=evidence,
            )
        )

    return _StreamAnalysis(
        camera=Camera.WALL,
        chunks=chunk_timeline(frames, cfg.ingest, base_uri),
        candidates=candidates,
        worker_status=status,
        worker_ids=sorted(identities.identities),
        malformed=len(parsed.malformed),
        base_uri=base_uri,
    )


def _analyze_pov(text: str, cfg: AppConfig, base_uri: str) -> _StreamAnalysis:
    parsed = parse_stream(text, Camera.POV)
    frames = gate_detections(parsed.frames, cfg.ingest)

    # worst observed occurrence per violation type
    best: dict[ViolationType, tuple[int, float, float, list[tuple[int, float]]]] = {}
    for frame in frames:
        for kps in frame.poses:
            try:
                verdict = assess_pose(kps, cfg.ergo)
            except MissingAngle:
                continue
            if verdict.violation_type is None:
                continue
            conf = gate_keypoints(kps, cfg.ergo).min_confidence()
            vtype = verdict.violation_type
            level, max_conf, first_ts, evidence = best.get(
                vtype, (0, 0.0, frame.timestamp_s, [])
            )
            if len(evidence) < EVIDENCE_CAP:
                evidence.append((frame.frame_index, frame.timestamp_s))
            best[vtype] = (
                max(level, verdict.risk_level),
                max(max_conf, conf),
                min(first_ts, frame.timestamp_s),
                evidence,
            )

    candidates = [
        _Candidate(
            violation_type=vtype,
            worker_id=UNATTRIBUTED_WORKER_ID,
            severity=_RISK_SEVERITY[level],
            confidence=conf,
            first_timestamp_s=first_ts,
            evidence=tuple(evidence),
        )
        for vtype, (level, conf, first_ts, evidence) in sorted(
            best.items(), key=lambda kv: kv[0].value
        )
    ]

    return _StreamAnalysis(
        camera=Camera.POV,
        chunks=chunk_timeline(frames, cfg.ingest, base_uri),
        candidates=candidates,
        worker_status=[],
        worker_ids=[],
        malformed=len(parsed.malformed),
        base_uri=base_uri,
    )


def _annotated_frames(
    chunk: Chunk, candidates: list[_Candidate], base_uri: str, limit: int
) -> list[AnnotatedFrame]:
    """Violation-anchored frame selection with uniform fallback."""
    in_chunk = {f.frame_index: f.timestamp_s for f in chunk.frames}
    anchored: list[tuple[int, float]] = []
    seen = set()
    for cand in candidates:
        for fi, ts in cand.evidence:
            if fi in in_chunk and fi not in seen:
                anchored.append((fi, ts))
                seen.add(fi)
    anchored.sort(key=lambda p: p[0])
    if not anchored:
        step = max(1, len(chunk.frames) // limit)
        anchored = [
            (f.frame_index, f.timestamp_s) for f in chunk.frames[::step]
        ]
    anchored = anchored[:limit]
    return [
        AnnotatedFrame(frame_index=fi, timestamp_s=ts, uri=f"{base_uri}#frame={fi}")
        for fi, ts in anchored
    ]


def _chunk_candidates(chunk: Chunk, candidates: list[_Candidate]) -> list[_Candidate]:
    indices = {f.frame_index for f in chunk.frames}
    return [c for c in candidates if any(fi in indices for fi, _ in c.evidence)]


def _process_chunk(
    chunk: Chunk,
    chunk_key: str,
    analysis: _StreamAnalysis,
    cfg: AppConfig,
    client: VLMClient,
    sleep: Callable[[float], None],
) -> tuple[ChunkOutcome, list[EventCandidate]]:
    local = _chunk_candidates(chunk, analysis.candidates)
    annotated = _annotated_frames(
        chunk, local, analysis.base_uri, cfg.annotated_frames_per_chunk
    )
    detections = [d for f in chunk.frames for d in f.detections]
    hazards = [
        HazardLine(
            timestamp_s=c.first_timestamp_s,
            violation_type=c.violation_type,
            worker_id=c.worker_id,
        )
        for c in local
    ]
    evidence_text = render_evidence(detections, hazards, analysis.worker_status)

    outputs = run_protocol(
        chunk,
        client,
        analysis.camera,
        annotated,
        evidence_text,
        cfg.protocol,
        chunk_key=chunk_key,
        sleep=sleep,
    )

    gen = extract_observer_flags(outputs.pass1_notes, FlagSource.GENERATOR)
    disc = extract_observer_flags(outputs.pass2_notes, FlagSource.DISCRIMINATOR)
    gen_by_type: dict[ViolationType, ObserverFlag] = {f.violation_type: f for f in gen}
    disc_by_type: dict[ViolationType, ObserverFlag] = {f.violation_type: f for f in disc}
    signals: dict[ViolationType, MachineSignal] = {}
    for cand in local:
        prior = signals.get(cand.violation_type)
        if prior is None or cand.confidence > prior.max_confidence:
            signals[cand.violation_type] = MachineSignal(
                violation_type=cand.violation_type, max_confidence=cand.confidence
            )

    decisions = []
    events = []
    types = sorted(
        set(gen_by_type) | set(disc_by_type) | set(signals), key=lambda v: v.value
    )
    for vtype in types:
        try:
            decision = reconcile(
                gen_by_type.get(vtype), disc_by_type.get(vtype), signals.get(vtype)
            )
        except UnknownType:
            continue
        decisions.append(decision)
        if decision.decision not in FLAGGED_DECISIONS:
            continue
        matching = [c for c in local if c.violation_type is vtype]
        if matching:
            for cand in matching:
                events.append(
                    EventCandidate(
                        worker_id=cand.worker_id,
                        violation_type=vtype,
                        severity=cand.severity,
                        source=EventSource(analysis.camera.value),
                        first_timestamp_s=cand.first_timestamp_s,
                        evidence_frames=cand.evidence,
                        applied_rule=decision.applied_rule,
                    )
                )
        else:
            events.append(
                EventCandidate(
                    worker_id=UNATTRIBUTED_WORKER_ID,
                    violation_type=vtype,
                    severity=_DECISION_SEVERITY[decision.decision],
                    source=EventSource(analysis.camera.value),
                    first_timestamp_s=annotated[0].timestamp_s,
                    evidence_frames=tuple(
                        (af.frame_index, af.timestamp_s) for af in annotated
                    ),
                    applied_rule=decision.applied_rule,
                )
            )

    removals: list[ValidatorRemoval] = []
    if outputs.parsed is not None:
        _, removals = validate_pass3(outputs.parsed, gen, disc, list(signals.values()))

    outcome = ChunkOutcome(
        chunk_key=chunk_key,
        camera=analysis.camera,
        outputs=outputs,
        decisions=decisions,
        removals=removals,
    )
    return outcome, events


def _audit_records(outcome: ChunkOutcome) -> list[dict]:
    records = [
        {
            "chunk": outcome.chunk_key,
            "violation_type": d.violation_type.value,
            "decision": d.decision.value,
            "applied_rule": d.applied_rule,
            "removed_by_validator": False,
        }
        for d in outcome.decisions
    ]
    records += [
        {
            "chunk": outcome.chunk_key,
            "violation_type": r.violation_type.value,
            "decision": None,
            "applied_rule": None,
            "removed_by_validator": True,
        }
        for r in outcome.removals
    ]
    return records


def run_shift(
    inputs: ShiftInputs,
    cfg: AppConfig,
    store: ShiftStore,
    client: VLMClient,
    progress: Callable[[int, int], None] | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> ShiftResult:
    """Process one shift end to end and generate its report.

    Raises:
        ValueError: neither stream supplied.
        EmptyStream: a supplied stream contains no valid frames.
    """
    if inputs.wall_stream is None and inputs.pov_stream is None:
        raise ValueError("at least one stream is required")

    try:
        existing = store.shift_row(inputs.shift_id)
    except UnknownShift:
        existing = None
    if existing is not None and existing["closed"]:
        report = generate_report(store, inputs.shift_id)
        return ShiftResult(
            shift_id=inputs.shift_id,
            report=report,
            report_json=report.to_json_bytes(),
            report_text=render_text(report),
            audit_records=[],
            reprocessed=False,
        )

    analyses: list[_StreamAnalysis] = []
    if inputs.wall_stream is not None:
        uri = inputs.wall_video_uri or f"stream://{inputs.shift_id}/wall"
        analyses.append(_analyze_wall(_read(inputs.wall_stream), cfg, uri))
    if inputs.pov_stream is not None:
        uri = inputs.pov_video_uri or f"stream://{inputs.shift_id}/pov"
        analyses.append(_analyze_pov(_read(inputs.pov_stream), cfg, uri))

    total_chunks = sum(len(a.chunks) for a in analyses)
    if progress:
        progress(0, total_chunks)

    store.add_site(inputs.site_id, inputs.site_name or inputs.site_id)
    store.add_worker(UNATTRIBUTED_WORKER_ID, inputs.site_id)
    for analysis in analyses:
        for wid in analysis.worker_ids:
            store.add_worker(wid, inputs.site_id)

    roster_candidates: list[EventCandidate] = []
    if inputs.roster is not None:
        roster = load_roster(inputs.roster)
        for wid in sorted(roster):
            store.add_worker(wid, inputs.site_id)
        roster_candidates = training_events(roster, inputs.start_utc)

    store.open_shift(inputs.shift_id, inputs.site_id, inputs.start_utc, inputs.end_utc)

    outcomes: list[ChunkOutcome] = []
    audit: list[dict] = []
    done = 0
    for analysis in analyses:
        for idx, chunk in enumerate(analysis.chunks):
            chunk_key = f"{analysis.camera.value.lower()}-{idx}"
            outcome, events = _process_chunk(
                chunk, chunk_key, analysis, cfg, client, sleep
            )
            outcomes.append(outcome)
            audit.extend(_audit_records(outcome))
            for event in events:
                store.record_event(inputs.shift_id, event)
            done += 1
            if progress:
                progress(done, total_chunks)

    for candidate in roster_candidates:
        store.record_event(inputs.shift_id, candidate)

    store.close_shift(inputs.shift_id)
    report = generate_report(store, inputs.shift_id)
    return ShiftResult(
        shift_id=inputs.shift_id,
        report=report,
        report_json=report.to_json_bytes(),
        report_text=render_text(report),
        audit_records=audit,
        chunk_outcomes=outcomes,
        malformed_lines={a.camera.value: a.malformed for a in analyses},
    )


def write_audit(records: list[dict], sink: TextIO) -> None:
    """Append audit records as line-delimited JSON."""
    for record in records:
        sink.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")


def _parse_script_key(key: str):
    chunk, sep, pass_no = key.rpartition(":")
    if sep and chunk:
        return (chunk, int(pass_no))
    return int(key)


def build_client(
    client_cfg: ClientConfig, script_path: str | Path | None = None
) -> VLMClient:
    """HTTP client from config, or a scripted offline client from a JSON file.

    Script keys are a pass number ("3") or chunk-qualified ("wall-0:3");
    values are a response string or a list served in order.
    """
    if script_path is None:
        return HTTPChatClient(
            base_url=client_cfg.base_url,
            model=client_cfg.model,
            api_key=client_cfg.api_key,
            timeout_s=client_cfg.timeout_s,
        )
    raw = json.loads(Path(script_path).read_text())
    responses = {_parse_script_key(k): v for k, v in raw.items()}
    return ScriptedVLMClient(responses=responses)
