"""Interactive diagnosis sessions over HTTP+JSON.

Sessions are in-memory; observations are append-only and each submission
re-runs the full predict/classify/focus/advise pipeline, so the view always
reflects exactly the accumulated measurements.  Per-session mutations are
serialized with a lock; distinct sessions never interfere.  An optional
append-only JSON-lines journal per session supports crash recovery.
"""

from __future__ import annotations

import itertools
import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import engine
from .engine import STATUS_ACTIVE, STATUS_DIAGNOSED, diagnose_once
from .model import ModelError, Observation, SystemModel, parse_model, validate


class CreateSessionRequest(BaseModel):
    model_id: str
    rule: str = "r1"
    mode: str = "nonintermittent"
    strategy: str = "entropy"


class MeasurementRequest(BaseModel):
    component: str
    time: int = 0
    value: Any


@dataclass
class Session:
    id: str
    model_id: str
    model: SystemModel
    rule: str
    mode: str
    strategy: str
    observations: list[Observation] = field(default_factory=list)
    transcript: list[dict] = field(default_factory=list)
    status: str = STATUS_ACTIVE
    view: dict = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)


class ServiceError(Exception):
    def __init__(self, status_code: int, code: str, message: str):
        self.status_code = status_code
        self.code = code
        self.message = message
        super().__init__(message)


def _interactive_diagnose(session: Session):
    """Batch pipeline with interactive status semantics: without any
    conflict the session stays open for further measurements."""
    view = diagnose_once(
        session.model, session.observations, session.rule,
        session.mode, session.strategy,
    )
    if view.status == STATUS_DIAGNOSED and not view.diagnosed:
        view.status = STATUS_ACTIVE
    return view


def _session_view(session: Session, view) -> dict:
    evidence = [engine.evidence_json(e) for e in view.evidence]
    focuses = engine.focuses_json(view.focuses, view.rule_used, session.mode)
    advice = view.advice.to_json() if view.advice else None
    status = view.status
    result = {
        "id": session.id,
        "model_id": session.model_id,
        "status": status,
        "rule": session.rule,
        "mode": session.mode,
        "strategy": session.strategy,
        "observations": [
            {"component": o.component, "time": o.time, "value": o.value}
            for o in session.observations
        ],
        "evidence": evidence,
        "focuses": focuses,
        "advice": advice,
        "diagnosed": list(view.diagnosed),
        "transcript": list(session.transcript),
    }
    return result


class Store:
    def __init__(self, journal_dir: Optional[str] = None):
        self.models: dict[str, tuple[SystemModel, dict]] = {}
        self.sessions: dict[str, Session] = {}
        self.lock = threading.Lock()
        self.counter = itertools.count(1)
        self.journal_dir = Path(journal_dir) if journal_dir else None
        if self.journal_dir:
            self.journal_dir.mkdir(parents=True, exist_ok=True)

    def journal(self, session: Session, entry: dict) -> None:
        if not self.journal_dir:
            return
        path = self.journal_dir / f"{session.id}.jsonl"
        with path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def recover(self) -> int:
        """Rebuild sessions by replaying journal files.

        The created entry carries the model document and configuration;
        measurements replay through the same engine, so the recovered view
        equals the pre-crash one (the pipeline is deterministic).
        """
        if not self.journal_dir:
            return 0
        recovered = 0
        for path in sorted(self.journal_dir.glob("*.jsonl")):
            session_id = path.stem
            if session_id in self.sessions:
                continue
            lines = [
                json.loads(line)
                for line in path.read_text(encoding="utf-8").splitlines()
                if line.strip()
            ]
            if not lines or lines[0].get("event") != "created":
                continue
            created = lines[0]
            try:
                model = parse_model(json.dumps(created["model_document"]))
            except ModelError:
                continue
            config = created.get("config", {})
            model_id = created.get("model_id", "")
            with self.lock:
                if model_id and model_id not in self.models:
                    self.models[model_id] = (model, created["model_document"])
            if model_id.startswith("m") and model_id[1:].isdigit():
                floor = int(model_id[1:])
                self.counter = itertools.count(
                    max(floor + 1, next(self.counter))
                )
            session = Session(
                id=session_id,
                model_id=model_id,
                model=model,
                rule=config.get("rule", "r1"),
                mode=config.get("mode", "nonintermittent"),
                strategy=config.get("strategy", "entropy"),
            )
            view = _interactive_diagnose(session)
            session.status = view.status
            session.view = _session_view(session, view)
            for entry in lines[1:]:
                if entry.get("event") != "measurement":
                    continue
                raw = entry["observation"]
                session.observations.append(
                    Observation(raw["component"], raw["time"], raw["value"])
                )
                view = _interactive_diagnose(session)
                session.status = view.status
                session.transcript.append(
                    {
                        "measurement": raw,
                        "evidence": [engine.evidence_json(e) for e in view.evidence],
                        "focuses": engine.focuses_json(
                            view.focuses, view.rule_used, session.mode
                        ),
                        "advice": view.advice.to_json() if view.advice else None,
                        "status": view.status,
                    }
                )
            session.view = _session_view(session, view)
            with self.lock:
                self.sessions[session_id] = session
            recovered += 1
        return recovered


def create_app(journal_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="mbdiag session service")
    store = Store(journal_dir=journal_dir)
    store.recover()
    app.state.store = store

    @app.exception_handler(ServiceError)
    async def service_error(_request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status_code,
            content={"error": exc.code, "message": exc.message},
        )

    @app.post("/models")
    def post_model(document: dict) -> dict:
        try:
            model = parse_model(json.dumps(document))
        except ModelError as exc:
            raise ServiceError(400, "invalid_model", str(exc))
        report = validate(model)
        if not report.ok:
            raise ServiceError(
                400, "invalid_model", "; ".join(report.violations)
            )
        with store.lock:
            model_id = f"m{next(store.counter)}"
            store.models[model_id] = (model, document)
        return {"model_id": model_id, "loops": [list(l) for l in report.loops]}

    @app.get("/models/{model_id}")
    def get_model(model_id: str) -> dict:
        entry = store.models.get(model_id)
        if entry is None:
            raise ServiceError(404, "unknown_model", f"no model {model_id!r}")
        return entry[1]

    @app.post("/sessions")
    def post_session(request: CreateSessionRequest) -> dict:
        entry = store.models.get(request.model_id)
        if entry is None:
            raise ServiceError(404, "unknown_model", f"no model {request.model_id!r}")
        if request.rule not in ("r1", "r2", "r3", "r4"):
            raise ServiceError(400, "invalid_config", f"unknown rule {request.rule!r}")
        if request.strategy not in ("entropy", "bounds", "halving"):
            raise ServiceError(
                400, "invalid_config", f"unknown strategy {request.strategy!r}"
            )
        if request.mode not in ("nonintermittent", "intermittent"):
            raise ServiceError(400, "invalid_config", f"unknown mode {request.mode!r}")
        session = Session(
            id=uuid.uuid4().hex[:12],
            model_id=request.model_id,
            model=entry[0],
            rule=request.rule,
            mode=request.mode,
            strategy=request.strategy,
        )
        view = _interactive_diagnose(session)
        session.status = view.status
        session.view = _session_view(session, view)
        with store.lock:
            store.sessions[session.id] = session
        store.journal(session, {
            "event": "created",
            "config": request.model_dump(),
            "model_id": request.model_id,
            "model_document": entry[1],
        })
        return session.view

    def _get_session(session_id: str) -> Session:
        session = store.sessions.get(session_id)
        if session is None:
            raise ServiceError(404, "unknown_session", f"no session {session_id!r}")
        return session

    @app.post("/sessions/{session_id}/measurements")
    def post_measurement(session_id: str, request: MeasurementRequest) -> dict:
        session = _get_session(session_id)
        with session.lock:
            if session.status not in (STATUS_ACTIVE,):
                raise ServiceError(
                    409, "terminal_session",
                    f"session is {session.status}; no further measurements",
                )
            comp = session.model.by_id.get(request.component)
            if comp is None:
                raise ServiceError(
                    400, "unknown_component", f"no component {request.component!r}"
                )
            if not comp.is_source and request.component not in session.model.observables:
                raise ServiceError(
                    400, "not_observable",
                    f"{request.component!r} is not an observable output",
                )
            if any(
                o.component == request.component and o.time == request.time
                for o in session.observations
            ):
                raise ServiceError(
                    409, "duplicate_measurement",
                    f"{request.component!r} already measured at t={request.time}",
                )
            if not comp.domain.contains(request.value):
                raise ServiceError(
                    400, "invalid_value",
                    f"{request.value!r} is outside the domain of {request.component!r}",
                )
            observation = Observation(request.component, request.time, request.value)
            session.observations.append(observation)
            view = _interactive_diagnose(session)
            session.status = view.status
            session.transcript.append(
                {
                    "measurement": {
                        "component": observation.component,
                        "time": observation.time,
                        "value": observation.value,
                    },
                    "evidence": [engine.evidence_json(e) for e in view.evidence],
                    "focuses": engine.focuses_json(
                        view.focuses, view.rule_used, session.mode
                    ),
                    "advice": view.advice.to_json() if view.advice else None,
                    "status": view.status,
                }
            )
            session.view = _session_view(session, view)
            store.journal(
                session,
                {"event": "measurement", "observation": session.transcript[-1]["measurement"]},
            )
            return session.view

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        session = _get_session(session_id)
        with session.lock:
            return session.view

    return app


def preload_model(app: FastAPI, document_text: str) -> str:
    """Load a model into a freshly created app (used by `mbdiag serve`)."""
    store: Store = app.state.store
    model = parse_model(document_text)
    with store.lock:
        model_id = f"m{next(store.counter)}"
        store.models[model_id] = (model, json.loads(document_text))
    return model_id
