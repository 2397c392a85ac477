"""HTTP facade: /v1 JSON API over the game engine, plus service
configuration from a key-value file with DCMSG_ environment overrides.

Long-running estimations (mixed logit, latent class) return a ``pending``
status with a poll URL once they exceed a 2-second threshold; jobs run on a
bounded worker pool while actions within one session stay serialized."""

from __future__ import annotations

import os
import threading
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse

from . import postest
from .dataset import load_dataset
from .errors import (
    DcmsgError,
    EmptyReport,
    InvalidConfig,
    InvalidSpec,
    SessionClosed,
    UnknownAction,
    UnknownDataset,
    UnknownModelId,
)
from .estimation import EstimationOptions
from .modelspec import ModelSpecification, validate_spec
from .session import ESTIMATED, GameEngine

PENDING_THRESHOLD = 2.0

CONFIG_FIELDS = {
    "host": str, "port": int, "dataset_path": str, "draws": int,
    "n_starts": int, "time_limit": int, "seed": int, "journal_dir": str,
    "workers": int,
}


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    dataset_path: str = ""
    draws: int = 250
    n_starts: int = 5
    time_limit: int = 2700
    seed: int = 0
    journal_dir: str = ""
    workers: int = field(default_factory=lambda: os.cpu_count() or 2)

    def validate(self) -> None:
        for name in ("port", "draws", "n_starts", "time_limit", "workers"):
            if getattr(self, name) <= 0:
                raise InvalidConfig(f"{name} must be positive")
        if self.seed < 0:
            raise InvalidConfig("seed must be nonnegative")
        if self.journal_dir:
            path = Path(self.journal_dir)
            path.mkdir(parents=True, exist_ok=True)
            if not os.access(path, os.W_OK):
                raise InvalidConfig(f"journal_dir {path} is not writable")


def load_config(path: str | None = None, env: dict | None = None) -> ServiceConfig:
    """Plain ``key = value`` file (blank lines and # comments ignored), then
    DCMSG_<KEY> environment overrides."""
    values: dict = {}
    if path:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InvalidConfig(f"{path}:{lineno}: expected key = value")
            key, _, raw = line.partition("=")
            values[key.strip()] = raw.strip()
    env = os.environ if env is None else env
    for key in CONFIG_FIELDS:
        if f"DCMSG_{key.upper()}" in env:
            values[key] = env[f"DCMSG_{key.upper()}"]
    cfg = ServiceConfig()
    for key, raw in values.items():
        if key not in CONFIG_FIELDS:
            raise InvalidConfig(f"unknown config key {key!r}")
        try:
            setattr(cfg, key, CONFIG_FIELDS[key](raw))
        except ValueError:
            raise InvalidConfig(f"config key {key!r}: cannot parse {raw!r}")
    cfg.validate()
    return cfg


_STATUS = {
    InvalidSpec: 400,
    UnknownAction: 400,
    EmptyReport: 400,
    InvalidConfig: 400,
    UnknownDataset: 404,
    UnknownModelId: 404,
    SessionClosed: 409,
}


def build_engine(config: ServiceConfig) -> GameEngine:
    datasets = {}
    if config.dataset_path:
        datasets["default"] = load_dataset(config.dataset_path)
    opts = EstimationOptions(draws=config.draws, n_starts=config.n_starts,
                             seed=config.seed)
    return GameEngine(datasets, opts=opts,
                      journal_dir=config.journal_dir or None,
                      time_limit=config.time_limit)


def create_app(engine: GameEngine, config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="choice-game service", version="1")
    app.state.engine = engine
    app.state.executor = ThreadPoolExecutor(max_workers=config.workers)
    app.state.locks: dict = {}
    app.state.pending: dict = {}
    app.state.idempotency: dict = {}
    app.state.state_lock = threading.Lock()
    app.state.next_model_id: dict = {}

    def _lock(session_id: str) -> threading.Lock:
        with app.state.state_lock:
            return app.state.locks.setdefault(session_id, threading.Lock())

    def _session(session_id: str):
        session = engine.sessions.get(session_id)
        if session is None:
            raise UnknownDataset(f"unknown session {session_id}")
        return session

    @app.exception_handler(DcmsgError)
    async def _domain_error(request: Request, exc: DcmsgError):
        status = 404 if "unknown session" in str(exc) else \
            _STATUS.get(type(exc), 400)
        return JSONResponse(status_code=status,
                            content={"error": type(exc).__name__,
                                     "detail": str(exc)})

    @app.get("/v1/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/v1/sessions", status_code=201)
    def create_session(body: dict):
        session = engine.create_session(
            body["user_id"], body.get("dataset_ref", "default"),
            time_limit=body.get("time_limit"))
        with app.state.state_lock:
            app.state.next_model_id[session.session_id] = 1
        return {"session_id": session.session_id}

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        session = _session(session_id)
        with app.state.state_lock:
            pending = {mid for (sid, mid), fut in app.state.pending.items()
                       if sid == session_id and not fut.done()}
        models = []
        for entry in sorted(session.registry.values(), key=lambda e: e.model_id):
            models.append({"model_id": entry.model_id,
                           "family": entry.spec.family,
                           "status": entry.status,
                           "cached": entry.cached})
        for mid in sorted(pending):
            models.append({"model_id": mid, "status": "pending"})
        return {"session_id": session.session_id,
                "user_id": session.user_id,
                "dataset_ref": session.dataset_ref,
                "current_phase": session.current_phase,
                "closed": session.closed,
                "time_limit": session.time_limit,
                "n_events": len(session.events),
                "models": models}

    @app.post("/v1/sessions/{session_id}/da/{tool}")
    def da_tool(session_id: str, tool: str, body: dict | None = None):
        session = _session(session_id)
        code = int(tool) if tool.isdigit() else tool
        with _lock(session_id):
            payload, _ = engine.perform_da_tool(session, code, body or {})
        return payload

    @app.post("/v1/sessions/{session_id}/models")
    def request_model(session_id: str, body: dict):
        session = _session(session_id)
        if session.closed:
            raise SessionClosed(session_id)
        idem = body.pop("idempotency_key", None)
        spec = ModelSpecification.from_json(body)
        violations = validate_spec(spec)
        if violations:
            return JSONResponse(status_code=422, content={
                "error": "InvalidSpec",
                "violations": [{"constraint": v.constraint, "detail": v.message}
                               for v in violations]})
        with app.state.state_lock:
            if idem is not None and (session_id, idem) in app.state.idempotency:
                model_id = app.state.idempotency[(session_id, idem)]
                future = app.state.pending.get((session_id, model_id))
            else:
                model_id = app.state.next_model_id.setdefault(session_id, 1)
                app.state.next_model_id[session_id] = model_id + 1
                if idem is not None:
                    app.state.idempotency[(session_id, idem)] = model_id

                def job(mid=model_id):
                    with _lock(session_id):
                        return engine.request_estimation(session, spec,
                                                         model_id=mid)

                future = app.state.executor.submit(job)
                app.state.pending[(session_id, model_id)] = future
        try:
            future.result(timeout=PENDING_THRESHOLD)
        except FutureTimeout:
            return {"model_id": model_id, "status": "pending",
                    "poll": f"/v1/sessions/{session_id}/models/{model_id}"}
        entry = session.registry[model_id]
        return {"model_id": model_id, "status": entry.status,
                "cached": entry.cached}

    @app.get("/v1/sessions/{session_id}/models/{model_id}")
    def get_model(session_id: str, model_id: int):
        session = _session(session_id)
        with app.state.state_lock:
            future = app.state.pending.get((session_id, model_id))
        if future is not None and not future.done():
            return {"model_id": model_id, "status": "pending",
                    "poll": f"/v1/sessions/{session_id}/models/{model_id}"}
        if future is not None:
            future.result()     # re-raise estimation-side domain errors
        entry = session.registry.get(model_id)
        if entry is None:
            raise UnknownModelId(str(model_id))
        res = entry.result
        return {"model_id": model_id, "status": entry.status,
                "cached": entry.cached,
                "spec": entry.spec.to_json(),
                "parameters": [
                    {"name": n, "estimate": float(b), "robust_se": float(s),
                     "t_stat": float(t), "p_value": float(p)}
                    for n, b, s, t, p in zip(res.param_names, res.estimates,
                                             res.robust_se, res.t_stat,
                                             res.p_value)],
                "fit": postest.fit_metrics(res).to_dict()}

    @app.post("/v1/sessions/{session_id}/oi/{tool}")
    def oi_tool(session_id: str, tool: str, body: dict | None = None):
        session = _session(session_id)
        code = int(tool) if tool.isdigit() else tool
        with _lock(session_id):
            payload, _ = engine.perform_oi_tool(session, code, body or {})
        return payload

    @app.post("/v1/sessions/{session_id}/report")
    def report(session_id: str, body: dict):
        session = _session(session_id)
        with _lock(session_id):
            engine.submit_report(session, body.get("model_ids", []),
                                 body.get("text", ""))
        return {"session_id": session_id, "closed": True,
                "r_models": session.report["r_models"]}

    @app.get("/v1/telemetry")
    def telemetry(scope: str = "all", format: str = "csv"):
        if format == "jsonl":
            return PlainTextResponse(engine.export_jsonl(scope),
                                     media_type="application/jsonl")
        if format == "json":
            return {"rows": engine.export_rows(scope)}
        return PlainTextResponse(engine.export_csv(scope),
                                 media_type="text/csv")

    @app.get("/v1/telemetry/models")
    def telemetry_models(scope: str = "all"):
        return {"rows": engine.export_models(scope)}

    return app


def make_app() -> FastAPI:
    """App factory for `uvicorn dcmsg.service:make_app --factory`; reads
    DCMSG_CONFIG for the config file path."""
    config = load_config(os.environ.get("DCMSG_CONFIG") or None)
    return create_app(build_engine(config), config)
