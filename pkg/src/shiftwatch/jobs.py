"""In-memory registry of shift-processing jobs with a guarded state machine."""

from __future__ import annotations

import enum
import itertools
import threading
from dataclasses import dataclass

__all__ = ["JobStatus", "JobRecord", "JobRegistry", "UnknownJob", "IllegalTransition"]


class JobStatus(str, enum.Enum):
    QUEUED = "QUEUED"
    RUNNING = "RUNNING"
    FAILED = "FAILED"
    DONE = "DONE"


LEGAL_TRANSITIONS = frozenset(
    {
        (JobStatus.QUEUED, JobStatus.RUNNING),
        (JobStatus.RUNNING, JobStatus.FAILED),
        (JobStatus.RUNNING, JobStatus.DONE),
    }
)


class UnknownJob(KeyError):
    pass


class IllegalTransition(RuntimeError):
    pass


@dataclass
class JobRecord:
    job_id: str
    shift_id: str
    status: JobStatus = JobStatus.QUEUED
    chunks_done: int = 0
    chunks_total: int = 0
    error: str | None = None

    def snapshot(self) -> dict:
        return {
            "job_id": self.job_id,
            "shift_id": self.shift_id,
            "status": self.status.value,
            "progress": {"chunks_done": self.chunks_done, "chunks_total": self.chunks_total},
            "error": self.error,
        }


class JobRegistry:
    """Thread-safe job table; every mutation happens under one lock."""

    def __init__(self) -> None:
        self._jobs: dict[str, JobRecord] = {}
        self._lock = threading.Lock()
        self._ids = itertools.count(1)

    def create(self, shift_id: str) -> JobRecord:
        with self._lock:
            job = JobRecord(job_id=f"job-{next(self._ids):06d}", shift_id=shift_id)
            self._jobs[job.job_id] = job
            return job

    def _get(self, job_id: str) -> JobRecord:
        try:
            return self._jobs[job_id]
        except KeyError:
            raise UnknownJob(job_id) from None

    def transition(self, job_id: str, status: JobStatus, error: str | None = None) -> None:
        with self._lock:
            job = self._get(job_id)
            if (job.status, status) not in LEGAL_TRANSITIONS:
                raise IllegalTransition(f"{job.status.value} -> {status.value}")
            job.status = status
            if status is JobStatus.FAILED:
                job.error = error or "unknown failure"

    def set_progress(self, job_id: str, done: int, total: int) -> None:
        with self._lock:
            job = self._get(job_id)
            job.chunks_done = done
            job.chunks_total = total

    def snapshot(self, job_id: str) -> dict:
        with self._lock:
            return self._get(job_id).snapshot()
