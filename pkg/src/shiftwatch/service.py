"""HTTP service: submit shift jobs, poll them, fetch reports and histories.

Processing runs on a bounded thread pool; job state lives in an in-memory
registry and survives only as long as the process (the store is the durable
artifact). The verifier client connection is prewarmed at startup and the
result is exposed through the health endpoint.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import Depends, FastAPI, Header, HTTPException, Query
from fastapi.responses import PlainTextResponse, Response
from pydantic import BaseModel

from . import __version__
from .config import AppConfig
from .jobs import JobRegistry, JobStatus, UnknownJob
from .pipeline import ShiftInputs, build_client, run_shift, write_audit
from .reporting import (
    ShiftStore,
    StoredEvent,
    UnknownShift,
    UnknownWorker,
    generate_report,
    render_text,
)
from .vlm import VLMClient

__all__ = ["ShiftSubmission", "create_app"]


class ShiftSubmission(BaseModel):
    shift_id: str
    site_id: str
    start_utc: str
    end_utc: str
    site_name: str = ""
    wall_stream: str | None = None
    pov_stream: str | None = None
    wall_video_uri: str | None = None
    pov_video_uri: str | None = None
    roster: str | None = None


def _event_dict(e: StoredEvent) -> dict:
    return {
        "event_id": e.event_id,
        "shift_id": e.shift_id,
        "worker_id": e.worker_id,
        "violation_type": e.violation_type.value,
        "severity": e.severity.value,
        "osha_standard": e.osha_standard,
        "source": e.source.value,
        "first_timestamp_s": e.first_timestamp_s,
        "evidence_frames": [[i, t] for i, t in e.evidence_frames],
        "applied_rule": e.applied_rule,
    }


def create_app(
    cfg: AppConfig,
    client: VLMClient | None = None,
    store: ShiftStore | None = None,
) -> FastAPI:
    store = store if store is not None else ShiftStore(cfg.store_path)
    client = client if client is not None else build_client(cfg.client)
    registry = JobRegistry()
    executor = ThreadPoolExecutor(max_workers=cfg.max_concurrent_jobs)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.vlm_ready = client.prewarm()
        yield
        executor.shutdown(wait=True)

    app = FastAPI(title="shiftwatch", version=__version__, lifespan=lifespan)
    app.state.store = store
    app.state.registry = registry

    def require_token(authorization: str | None = Header(default=None)) -> None:
        if cfg.service_token is None:
            return
        if authorization != f"Bearer {cfg.service_token}":
            raise HTTPException(status_code=401, detail="invalid or missing token")

    def _execute(job_id: str, inputs: ShiftInputs) -> None:
        registry.transition(job_id, JobStatus.RUNNING)
        try:
            result = run_shift(
                inputs,
                cfg,
                store,
                client,
                progress=lambda done, total: registry.set_progress(job_id, done, total),
            )
            if cfg.audit_dir and result.audit_records:
                audit_path = Path(cfg.audit_dir) / f"{inputs.shift_id}.audit.jsonl"
                audit_path.parent.mkdir(parents=True, exist_ok=True)
                with open(audit_path, "a") as sink:
                    write_audit(result.audit_records, sink)
            registry.transition(job_id, JobStatus.DONE)
        except Exception as exc:
            registry.transition(job_id, JobStatus.FAILED, error=f"{type(exc).__name__}: {exc}")

    @app.post("/v1/shifts", status_code=202, dependencies=[Depends(require_token)])
    def submit_shift(submission: ShiftSubmission) -> dict:
        if submission.wall_stream is None and submission.pov_stream is None:
            raise HTTPException(status_code=422, detail="at least one stream is required")
        job = registry.create(submission.shift_id)
        inputs = ShiftInputs(**submission.model_dump())
        executor.submit(_execute, job.job_id, inputs)
        return registry.snapshot(job.job_id)

    @app.get("/v1/jobs/{job_id}", dependencies=[Depends(require_token)])
    def job_status(job_id: str) -> dict:
        try:
            return registry.snapshot(job_id)
        except UnknownJob:
            raise HTTPException(status_code=404, detail="unknown job") from None

    @app.get("/v1/shifts/{shift_id}/report", dependencies=[Depends(require_token)])
    def shift_report(shift_id: str, format: str = Query(default="json")):
        try:
            row = store.shift_row(shift_id)
        except UnknownShift:
            raise HTTPException(status_code=404, detail="unknown shift") from None
        if not row["closed"]:
            raise HTTPException(status_code=409, detail="shift processing incomplete")
        report = generate_report(store, shift_id)
        if format == "text":
            return PlainTextResponse(render_text(report))
        if format == "json":
            return Response(content=report.to_json_bytes(), media_type="application/json")
        raise HTTPException(status_code=422, detail="format must be json or text")

    @app.get("/v1/workers/{worker_id}/events", dependencies=[Depends(require_token)])
    def worker_events(worker_id: int) -> dict:
        try:
            events = store.events_for_worker(worker_id)
        except UnknownWorker:
            raise HTTPException(status_code=404, detail="unknown worker") from None
        return {"worker_id": worker_id, "events": [_event_dict(e) for e in events]}

    @app.get("/v1/health")
    def health() -> dict:
        ready = bool(getattr(app.state, "vlm_ready", False))
        return {"status": "ok" if ready else "degraded", "vlm_ready": ready}

    return app
