"""Event persistence, OSHA mapping, and end-of-shift report generation.

The store is an embedded SQLite database with four tables (sites, workers,
shifts, safety_events); the schema is the contract, the engine is not.
Events are deduplicated per (shift, worker, violation type): a repeat
observation merges into the existing row instead of inserting, with
escalating severity and unioned evidence.

Reports are deterministic: the generation timestamp is the shift's end (the
report describes the shift, not the wall clock of the machine that rendered
it), orderings are total, and the JSON form uses sorted keys and fixed
separators so a resubmitted shift reproduces the document byte for byte.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import json
import sqlite3
import threading
from dataclasses import dataclass
from pathlib import Path

from .violations import Severity, UnknownType, ViolationType, max_severity
from .vlm.prompts import template_checksums

__all__ = [
    "REPORT_SCHEMA_VERSION",
    "UNATTRIBUTED_WORKER_ID",
    "OSHA_STANDARDS",
    "EventSource",
    "EventCandidate",
    "StoredEvent",
    "WorkerSection",
    "ShiftReport",
    "StoreError",
    "UnknownSite",
    "UnknownWorker",
    "UnknownShift",
    "ClosedShift",
    "map_osha",
    "ShiftStore",
    "generate_report",
    "render_text",
    "load_roster",
    "training_events",
]

REPORT_SCHEMA_VERSION = 1

#: Sentinel worker row for events that could not be tied to a tracked worker.
UNATTRIBUTED_WORKER_ID = 0

#: Violation types with a specific standard; every other type reports
#: severity only (the dash rows of the coverage table).
OSHA_STANDARDS: dict[ViolationType, str] = {
    ViolationType.FALL_PROTECTION_MISSING: "1926.501",
    ViolationType.TRAINING_EXPIRED: "1926.503",
    ViolationType.SCAFFOLD_VIOLATION: "1926.451",
    ViolationType.EYE_FACE_PPE_MISSING: "1926.102",
    ViolationType.MACHINE_GUARDING: "1910.212",
}

RECOMMENDATIONS: dict[ViolationType, str] = {
    ViolationType.PPE_MISSING: "Re-brief on required PPE and verify items at the gate check before next entry.",
    ViolationType.FALL_PROTECTION_MISSING: "Stop work at height until harness and anchorage are verified by a competent person.",
    ViolationType.PROXIMITY_HAZARD: "Review equipment exclusion distances and assign a spotter for active plant.",
    ViolationType.ZONE_BREACH: "Re-walk zone boundaries with the crew and check barricade signage.",
    ViolationType.LADDER_MISUSE: "Toolbox talk on ladder angle, tie-off, and three-point contact.",
    ViolationType.SCAFFOLD_VIOLATION: "Have the scaffold re-inspected and re-tagged before further use.",
    ViolationType.BEHAVIORAL_UNSAFE: "Supervisor follow-up on site conduct rules; repeat occurrences escalate.",
    ViolationType.AWKWARD_POSTURE: "Review manual-handling technique; consider repositioning the work surface.",
    ViolationType.MSD_HIGH_RISK: "Schedule an ergonomic assessment; rotate the task and add mechanical assistance.",
    ViolationType.OVERREACH: "Provide a platform or reposition materials to keep work within comfortable reach.",
    ViolationType.KNEELING_SQUATTING_LOW: "Provide knee protection and rotate prolonged low-level tasks.",
    ViolationType.EYE_FACE_PPE_MISSING: "Verify eye/face protection against the task hazard assessment.",
    ViolationType.MACHINE_GUARDING: "Take the machine out of service until guarding is restored.",
    ViolationType.TRAINING_EXPIRED: "Suspend task assignment until training is renewed and recorded.",
    ViolationType.RESPIRATORY_PPE_MISSING: "Check the task against the respiratory protection program before resuming.",
}


class EventSource(str, enum.Enum):
    WALL = "WALL"
    POV = "POV"
    WORKER_DB = "WORKER_DB"


class StoreError(Exception):
    pass


class UnknownSite(StoreError):
    pass


class UnknownWorker(StoreError):
    pass


class UnknownShift(StoreError):
    pass


class ClosedShift(StoreError):
    """Shift has been finalized; no further events accepted."""


def map_osha(violation_type: ViolationType) -> str | None:
    """Standard code for a violation type, or None for severity-only rows."""
    if not isinstance(violation_type, ViolationType):
        raise UnknownType(f"{violation_type!r} is not a violation type")
    return OSHA_STANDARDS.get(violation_type)


@dataclass(frozen=True)
class EventCandidate:
    worker_id: int
    violation_type: ViolationType
    severity: Severity
    source: EventSource
    first_timestamp_s: float
    evidence_frames: tuple[tuple[int, float], ...] = ()
    applied_rule: int | None = None

    def __post_init__(self) -> None:
        if self.source is not EventSource.WORKER_DB and not self.evidence_frames:
            raise ValueError("camera-sourced events require evidence frames")
        if self.applied_rule is not None and not 1 <= self.applied_rule <= 6:
            raise ValueError("applied_rule must be in 1..6")
        if self.first_timestamp_s < 0:
            raise ValueError("first_timestamp_s must be non-negative")


@dataclass(frozen=True)
class StoredEvent:
    event_id: int
    shift_id: str
    worker_id: int
    violation_type: ViolationType
    severity: Severity
    osha_standard: str | None
    source: EventSource
    first_timestamp_s: float
    evidence_frames: tuple[tuple[int, float], ...]
    applied_rule: int | None


_DDL = """
CREATE TABLE IF NOT EXISTS sites (
    site_id TEXT PRIMARY KEY,
    name    TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS workers (
    worker_id      INTEGER PRIMARY KEY,
    site_id        TEXT NOT NULL REFERENCES sites(site_id),
    embeddings_ref TEXT
);
CREATE TABLE IF NOT EXISTS shifts (
    shift_id  TEXT PRIMARY KEY,
    site_id   TEXT NOT NULL REFERENCES sites(site_id),
    start_utc TEXT NOT NULL,
    end_utc   TEXT NOT NULL,
    closed    INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS safety_events (
    event_id          INTEGER PRIMARY KEY AUTOINCREMENT,
    shift_id          TEXT NOT NULL REFERENCES shifts(shift_id),
    worker_id         INTEGER NOT NULL REFERENCES workers(worker_id),
    violation_type    TEXT NOT NULL,
    severity          TEXT NOT NULL,
    osha_standard     TEXT,
    source            TEXT NOT NULL,
    first_timestamp_s REAL NOT NULL,
    evidence_frames   TEXT NOT NULL,
    applied_rule      INTEGER,
    UNIQUE (shift_id, worker_id, violation_type)
);
"""


def _encode_evidence(frames: tuple[tuple[int, float], ...]) -> str:
    return json.dumps([[int(i), float(t)] for i, t in frames], separators=(",", ":"))


def _decode_evidence(blob: str) -> tuple[tuple[int, float], ...]:
    return tuple((int(i), float(t)) for i, t in json.loads(blob))


class ShiftStore:
    """Single-writer store; all statements run under one lock.

    Accepts a filesystem path or ":memory:".
    """

    def __init__(self, path: str | Path = ":memory:"):
        self._conn = sqlite3.connect(str(path), check_same_thread=False)
        self._conn.execute("PRAGMA foreign_keys = ON")
        self._lock = threading.Lock()
        with self._lock, self._conn:
            self._conn.executescript(_DDL)

    def close(self) -> None:
        self._conn.close()

    def __enter__(self) -> "ShiftStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- registration -------------------------------------------------

    def add_site(self, site_id: str, name: str) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT OR IGNORE INTO sites (site_id, name) VALUES (?, ?)", (site_id, name)
            )

    def add_worker(self, worker_id: int, site_id: str, embeddings_ref: str | None = None) -> None:
        with self._lock, self._conn:
            if self._conn.execute(
                "SELECT 1 FROM sites WHERE site_id = ?", (site_id,)
            ).fetchone() is None:
                raise UnknownSite(site_id)
            self._conn.execute(
                "INSERT OR IGNORE INTO workers (worker_id, site_id, embeddings_ref) VALUES (?, ?, ?)",
                (worker_id, site_id, embeddings_ref),
            )

    def open_shift(self, shift_id: str, site_id: str, start_utc: str, end_utc: str) -> None:
        with self._lock, self._conn:
            if self._conn.execute(
                "SELECT 1 FROM sites WHERE site_id = ?", (site_id,)
            ).fetchone() is None:
                raise UnknownSite(site_id)
            self._conn.execute(
                "INSERT OR IGNORE INTO shifts (shift_id, site_id, start_utc, end_utc) VALUES (?, ?, ?, ?)",
                (shift_id, site_id, start_utc, end_utc),
            )

    def close_shift(self, shift_id: str) -> None:
        with self._lock, self._conn:
            cur = self._conn.execute("UPDATE shifts SET closed = 1 WHERE shift_id = ?", (shift_id,))
            if cur.rowcount == 0:
                raise UnknownShift(shift_id)

    def shift_row(self, shift_id: str) -> dict:
        with self._lock:
            row = self._conn.execute(
                "SELECT shift_id, site_id, start_utc, end_utc, closed FROM shifts WHERE shift_id = ?",
                (shift_id,),
            ).fetchone()
        if row is None:
            raise UnknownShift(shift_id)
        return {
            "shift_id": row[0],
            "site_id": row[1],
            "start_utc": row[2],
            "end_utc": row[3],
            "closed": bool(row[4]),
        }

    # -- events -------------------------------------------------------

    def record_event(self, shift_id: str, candidate: EventCandidate) -> int:
        """Insert, or merge into the existing (shift, worker, type) row.

        Merge keeps the earliest timestamp and first applied_rule, escalates
        severity to the max seen, and unions evidence frames.
        """
        with self._lock, self._conn:
            shift = self._conn.execute(
                "SELECT closed FROM shifts WHERE shift_id = ?", (shift_id,)
            ).fetchone()
            if shift is None:
                raise UnknownShift(shift_id)
            if shift[0]:
                raise ClosedShift(shift_id)
            if self._conn.execute(
                "SELECT 1 FROM workers WHERE worker_id = ?", (candidate.worker_id,)
            ).fetchone() is None:
                raise UnknownWorker(str(candidate.worker_id))

            existing = self._conn.execute(
                "SELECT event_id, severity, first_timestamp_s, evidence_frames, applied_rule"
                " FROM safety_events WHERE shift_id = ? AND worker_id = ? AND violation_type = ?",
                (shift_id, candidate.worker_id, candidate.violation_type.value),
            ).fetchone()
            if existing is None:
                cur = self._conn.execute(
                    "INSERT INTO safety_events (shift_id, worker_id, violation_type, severity,"
                    " osha_standard, source, first_timestamp_s, evidence_frames, applied_rule)"
                    " VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)",
                    (
                        shift_id,
                        candidate.worker_id,
                        candidate.violation_type.value,
                        candidate.severity.value,
                        map_osha(candidate.violation_type),
                        candidate.source.value,
                        candidate.first_timestamp_s,
                        _encode_evidence(tuple(sorted(set(candidate.evidence_frames)))),
                        candidate.applied_rule,
                    ),
                )
                return cur.lastrowid

            event_id, severity, first_ts, evidence_blob, applied_rule = existing
            merged_severity = max_severity(Severity(severity), candidate.severity)
            merged_evidence = tuple(
                sorted(set(_decode_evidence(evidence_blob)) | set(candidate.evidence_frames))
            )
            self._conn.execute(
                "UPDATE safety_events SET severity = ?, first_timestamp_s = ?, evidence_frames = ?"
                " WHERE event_id = ?",
                (
                    merged_severity.value,
                    min(first_ts, candidate.first_timestamp_s),
                    _encode_evidence(merged_evidence),
                    event_id,
                ),
            )
            return event_id

    def _rows_to_events(self, rows) -> list[StoredEvent]:
        return [
            StoredEvent(
                event_id=r[0],
                shift_id=r[1],
                worker_id=r[2],
                violation_type=ViolationType(r[3]),
                severity=Severity(r[4]),
                osha_standard=r[5],
                source=EventSource(r[6]),
                first_timestamp_s=r[7],
                evidence_frames=_decode_evidence(r[8]),
                applied_rule=r[9],
            )
            for r in rows
        ]

    _EVENT_COLS = (
        "event_id, shift_id, worker_id, violation_type, severity, osha_standard,"
        " source, first_timestamp_s, evidence_frames, applied_rule"
    )

    def events_for_shift(self, shift_id: str) -> list[StoredEvent]:
        self.shift_row(shift_id)
        with self._lock:
            rows = self._conn.execute(
                f"SELECT {self._EVENT_COLS} FROM safety_events WHERE shift_id = ?"
                " ORDER BY worker_id, violation_type",
                (shift_id,),
            ).fetchall()
        return self._rows_to_events(rows)

    def events_for_worker(self, worker_id: int) -> list[StoredEvent]:
        with self._lock:
            if self._conn.execute(
                "SELECT 1 FROM workers WHERE worker_id = ?", (worker_id,)
            ).fetchone() is None:
                raise UnknownWorker(str(worker_id))
            rows = self._conn.execute(
                f"SELECT {self._EVENT_COLS} FROM safety_events WHERE worker_id = ?"
                " ORDER BY shift_id, violation_type",
                (worker_id,),
            ).fetchall()
        return self._rows_to_events(rows)


# -- report generation ----------------------------------------------------


@dataclass(frozen=True)
class WorkerSection:
    worker_id: int
    event_count: int
    events: tuple[StoredEvent, ...]


@dataclass(frozen=True)
class ShiftReport:
    shift_id: str
    site_id: str
    window_start: str
    window_end: str
    generated_at: str
    sections: tuple[WorkerSection, ...]
    total_events: int
    by_severity: dict[str, int]
    by_type: dict[str, int]
    checksums: dict[str, str]

    @property
    def all_compliant(self) -> bool:
        return self.total_events == 0

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "shift_id": self.shift_id,
            "site_id": self.site_id,
            "window": {"start": self.window_start, "end": self.window_end},
            "generated_at": self.generated_at,
            "all_compliant": self.all_compliant,
            "totals": {
                "events": self.total_events,
                "workers_with_events": len(self.sections),
                "by_severity": self.by_severity,
                "by_type": self.by_type,
            },
            "workers": [
                {
                    "worker_id": s.worker_id,
                    "event_count": s.event_count,
                    "events": [
                        {
                            "violation_type": e.violation_type.value,
                            "severity": e.severity.value,
                            "osha_standard": e.osha_standard,
                            "source": e.source.value,
                            "first_timestamp_s": e.first_timestamp_s,
                            "evidence_frames": [[i, t] for i, t in e.evidence_frames],
                            "applied_rule": e.applied_rule,
                            "recommendation": RECOMMENDATIONS[e.violation_type],
                        }
                        for e in s.events
                    ],
                }
                for s in self.sections
            ],
            "prompt_template_checksums": self.checksums,
        }

    def to_json_bytes(self) -> bytes:
        return (json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n").encode()


def generate_report(store: ShiftStore, shift_id: str) -> ShiftReport:
    """Build the structured report for a shift.

    Worker sections are ordered by event count descending (repeat offenders
    first), worker id ascending on ties; events within a section by first
    timestamp, then type.
    """
    shift = store.shift_row(shift_id)
    events = store.events_for_shift(shift_id)

    per_worker: dict[int, list[StoredEvent]] = {}
    for event in events:
        per_worker.setdefault(event.worker_id, []).append(event)
    sections = tuple(
        WorkerSection(
            worker_id=wid,
            event_count=len(evts),
            events=tuple(sorted(evts, key=lambda e: (e.first_timestamp_s, e.violation_type.value))),
        )
        for wid, evts in sorted(per_worker.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    )

    by_severity = {s.value: 0 for s in Severity}
    by_type: dict[str, int] = {}
    for event in events:
        by_severity[event.severity.value] += 1
        by_type[event.violation_type.value] = by_type.get(event.violation_type.value, 0) + 1

    return ShiftReport(
        shift_id=shift_id,
        site_id=shift["site_id"],
        window_start=shift["start_utc"],
        window_end=shift["end_utc"],
        generated_at=shift["end_utc"],
        sections=sections,
        total_events=len(events),
        by_severity=by_severity,
        by_type=dict(sorted(by_type.items())),
        checksums=template_checksums(),
    )


def _worker_label(worker_id: int) -> str:
    if worker_id == UNATTRIBUTED_WORKER_ID:
        return "UNATTRIBUTED"
    return f"WORKER #{worker_id}"


def render_text(report: ShiftReport) -> str:
    lines = [
        "SHIFT SAFETY REPORT",
        "===================",
        f"shift: {report.shift_id}   site: {report.site_id}",
        f"window: {report.window_start} to {report.window_end}",
        f"generated: {report.generated_at}",
        f"schema: {REPORT_SCHEMA_VERSION}",
        "",
        "SUMMARY",
        f"  events: {report.total_events}   workers involved: {len(report.sections)}",
        "  by severity: "
        + "  ".join(f"{s.value}={report.by_severity[s.value]}" for s in Severity),
    ]
    if report.all_compliant:
        lines += ["", "No safety events recorded; shift fully compliant."]
    for section in report.sections:
        plural = "s" if section.event_count != 1 else ""
        lines += ["", f"{_worker_label(section.worker_id)} ({section.event_count} event{plural})"]
        for e in section.events:
            osha = e.osha_standard if e.osha_standard else "-"
            rule = f"rule {e.applied_rule}" if e.applied_rule else "-"
            lines.append(
                f"  - {e.violation_type.value} [{e.severity.value}]"
                f" first at {e.first_timestamp_s:.2f}s  osha: {osha}  source: {e.source.value}  audit: {rule}"
            )
            evidence = ", ".join(f"frame {i} @ {t:.2f}s" for i, t in e.evidence_frames)
            if evidence:
                lines.append(f"    evidence: {evidence}")
            lines.append(f"    recommendation: {RECOMMENDATIONS[e.violation_type]}")
    lines += ["", "PROMPT TEMPLATES"]
    for name, digest in sorted(report.checksums.items()):
        lines.append(f"  {name} sha256={digest}")
    return "\n".join(lines) + "\n"


# -- worker roster import --------------------------------------------------


def load_roster(path: str | Path) -> dict[int, dt.date]:
    """Read a roster CSV with columns worker_id, training_expiry_date."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"worker_id", "training_expiry_date"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValueError("roster requires columns worker_id, training_expiry_date")
        return {
            int(row["worker_id"]): dt.date.fromisoformat(row["training_expiry_date"])
            for row in reader
        }


def training_events(
    roster: dict[int, dt.date], shift_start_utc: str
) -> list[EventCandidate]:
    """TRAINING_EXPIRED candidates for workers whose expiry precedes the shift.

    Training that expires on the shift's start date is still valid that day.
    """
    shift_date = dt.datetime.fromisoformat(shift_start_utc.replace("Z", "+00:00")).date()
    out = []
    for worker_id in sorted(roster):
        if roster[worker_id] < shift_date:
            out.append(
                EventCandidate(
                    worker_id=worker_id,
                    violation_type=ViolationType.TRAINING_EXPIRED,
                    severity=Severity.MEDIUM,
                    source=EventSource.WORKER_DB,
                    first_timestamp_s=0.0,
                )
            )
    return out
