"""HTTP session service for expert-in-the-loop runs.

One session = one discovery run over one dataset.  The service delivers at
most one pending question per session, applies answers (propagating to
fixpoint before the next question is selected), and exposes the trace and
running metrics.  All payloads carry ``schema_version``.

Endpoints (v1):

    GET    /v1/health                      liveness + session count
    POST   /v1/sessions                    create a session (201)
    GET    /v1/sessions                    list sessions
    GET    /v1/sessions/{sid}              session info
    GET    /v1/sessions/{sid}/question     pending question (or DONE)
    POST   /v1/sessions/{sid}/answer       answer the pending question
    GET    /v1/sessions/{sid}/trace        full trace (JSON; ?format=csv)
    GET    /v1/sessions/{sid}/metrics      counts + evaluation when GT known

Error model: 404 unknown session, 409 answer referencing a non-pending
query id (or a session with nothing pending), 422 invalid payloads or
config violations.

Persistence: with a state directory configured, every session mutation
writes ``{sid}/trace.csv`` (single source of truth) plus ``{sid}/meta.json``
(config, dataset path + content hash, question contexts).  On restart the
service resumes each persisted session to exactly the pending question it
was interrupted on; a dataset whose content hash changed is refused.

Sessions are independent; requests within one session serialize on a
per-session lock.  No authentication: the service is a local tool.
"""

from __future__ import annotations

import json
import threading
import uuid
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel, Field

from . import session as sess
from .bench import load_manifest, read_edges
from .model import Config, Dataset, MalformedDataset, Trace
from .oracle import (
    META_HUB,
    NODE_CHILDREN,
    OracleAnswer,
    PER_EDGE,
)
from .model import Answer

__all__ = ["SCHEMA_VERSION", "ServiceSettings", "SessionStore", "create_app"]

SCHEMA_VERSION = "1"

_CONFIG_FIELDS = {f.name for f in Config.__dataclass_fields__.values()}  # type: ignore[attr-defined]


# ---------------------------------------------------------------------------
# request payloads
# ---------------------------------------------------------------------------

class CreateSessionRequest(BaseModel):
    dataset: str | None = Field(
        default=None, description="CSV path or fixture name; server default when omitted")
    gt: str | None = Field(
        default=None, description="reference edge list path (enables metrics)")
    config: dict | None = Field(
        default=None, description="config field overrides")


class AnswerRequest(BaseModel):
    query_id: int
    answer: str | None = Field(
        default=None, description="FWD|BWD|ABSENT|UNKNOWN for edge questions")
    nodes: list[str] | None = Field(
        default=None, description="variable names for hub/children questions")


# ---------------------------------------------------------------------------
# server-side session state
# ---------------------------------------------------------------------------

@dataclass
class ServiceSettings:
    dataset: str | None = None          # default dataset path
    gt: str | None = None               # default reference edges
    config: Config = field(default_factory=Config)
    state_dir: str | None = None
    manifest: str | None = None         # fixture registry for dataset names


@dataclass
class SessionEntry:
    sid: str
    core: sess.SessionCore
    dataset_path: str
    dataset_hash: str
    gt_path: str | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    def __init__(self, settings: ServiceSettings):
        self.settings = settings
        self.sessions: dict[str, SessionEntry] = {}
        self._lock = threading.Lock()
        self._fixtures = None
        if settings.manifest:
            self._fixtures = load_manifest(settings.manifest)
        if settings.state_dir:
            Path(settings.state_dir).mkdir(parents=True, exist_ok=True)
            self._resume_all()

    # -- dataset / config resolution -----------------------------------------

    def _resolve_dataset(self, ref: str | None) -> tuple[str, str | None]:
        """Map a dataset reference to (csv_path, default_gt_path)."""
        if ref is None:
            if self.settings.dataset is None:
                raise HTTPException(422, "no dataset given and no server default")
            return self.settings.dataset, self.settings.gt
        if self._fixtures is not None and ref in self._fixtures:
            fx = self._fixtures[ref]
            return fx.csv_path, fx.gt_path
        return ref, None

    def _build_config(self, overrides: dict | None) -> Config:
        if not overrides:
            return self.settings.config
        unknown = set(overrides) - _CONFIG_FIELDS
        if unknown:
            raise HTTPException(422, f"unknown config fields: {sorted(unknown)}")
        try:
            return self.settings.config.replace(**overrides)
        except (ValueError, TypeError) as exc:
            raise HTTPException(422, f"config violation: {exc}") from exc

    # -- lifecycle -------------------------------------------------------------

    def create(self, req: CreateSessionRequest) -> SessionEntry:
        csv_path, default_gt = self._resolve_dataset(req.dataset)
        gt_path = req.gt if req.gt is not None else default_gt
        config = self._build_config(req.config)
        try:
            dataset = Dataset.from_csv(csv_path, min_n=config.min_n)
        except MalformedDataset as exc:
            raise HTTPException(422, f"malformed dataset: {exc}") from exc
        gt_edges = None
        if gt_path:
            try:
                gt_edges = read_edges(gt_path, dataset.names)
            except (OSError, ValueError) as exc:
                raise HTTPException(422, f"cannot read edge list: {exc}") from exc
        core = sess.SessionCore.fresh(dataset, config, gt_edges=gt_edges)
        entry = SessionEntry(sid=uuid.uuid4().hex, core=core,
                             dataset_path=str(Path(csv_path).resolve()),
                             dataset_hash=sess.dataset_sha256(csv_path),
                             gt_path=str(Path(gt_path).resolve()) if gt_path else None)
        with self._lock:
            self.sessions[entry.sid] = entry
        self.persist(entry)
        return entry

    def get(self, sid: str) -> SessionEntry:
        with self._lock:
            entry = self.sessions.get(sid)
        if entry is None:
            raise HTTPException(404, f"unknown session {sid}")
        return entry

    # -- persistence -----------------------------------------------------------

    def _session_dir(self, sid: str) -> Path | None:
        if not self.settings.state_dir:
            return None
        return Path(self.settings.state_dir) / sid

    def persist(self, entry: SessionEntry) -> None:
        root = self._session_dir(entry.sid)
        if root is None:
            return
        root.mkdir(parents=True, exist_ok=True)
        meta = {
            "schema_version": SCHEMA_VERSION,
            "session": entry.sid,
            "dataset_path": entry.dataset_path,
            "dataset_sha256": entry.dataset_hash,
            "gt_path": entry.gt_path,
            "config": json.loads(entry.core.config.to_json()),
            "contexts": sess.serialize_contexts(entry.core.contexts),
        }
        _atomic_write(root / "meta.json", json.dumps(meta, indent=1, sort_keys=True))
        _atomic_write(root / "trace.csv", entry.core.trace.to_csv())

    def _resume_all(self) -> None:
        for meta_path in sorted(Path(self.settings.state_dir).glob("*/meta.json")):
            try:
                entry = self._resume_one(meta_path)
            except Exception as exc:  # noqa: BLE001 - a broken snapshot must not kill the service
                warnings.warn(f"cannot resume session from {meta_path.parent}: {exc}",
                              stacklevel=2)
                continue
            self.sessions[entry.sid] = entry

    def _resume_one(self, meta_path: Path) -> SessionEntry:
        meta = json.loads(meta_path.read_text())
        sid = meta["session"]
        dataset_path = meta["dataset_path"]
        stored_hash = meta["dataset_sha256"]
        actual = sess.dataset_sha256(dataset_path)
        if actual != stored_hash:
            raise RuntimeError(
                f"dataset {dataset_path} content changed since the session was saved")
        config = Config.from_json(json.dumps(meta["config"]))
        dataset = Dataset.from_csv(dataset_path, min_n=config.min_n)
        gt_edges = None
        if meta.get("gt_path"):
            gt_edges = read_edges(meta["gt_path"], dataset.names)
        trace = Trace.from_csv((meta_path.parent / "trace.csv").read_text())
        contexts = sess.parse_contexts(meta.get("contexts", {})) or None
        core = sess.SessionCore.resume(dataset, config, trace,
                                       gt_edges=gt_edges, contexts=contexts)
        return SessionEntry(sid=sid, core=core, dataset_path=dataset_path,
                            dataset_hash=stored_hash, gt_path=meta.get("gt_path"))


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


# ---------------------------------------------------------------------------
# payload builders
# ---------------------------------------------------------------------------

def _question_payload(entry: SessionEntry) -> dict:
    core = entry.core
    base = {
        "schema_version": SCHEMA_VERSION,
        "session": entry.sid,
        "status": core.status,
        "query_id": None,
        "kind": None,
        "edge": None,
        "edge_names": None,
        "node": None,
        "node_name": None,
        "k": None,
        "certificate": None,
        "question_text": None,
        "info_value": None,
        "queries_so_far": core.trace.query_count,
        "dag": core.dag.snapshot(),
    }
    q = core.pending
    if q is None:
        return base
    names = core.dataset.names
    base.update({
        "query_id": q.query_id,
        "kind": q.kind,
        "question_text": q.question_text,
        "k": q.k,
    })
    if q.kind == PER_EDGE:
        i, j = q.edge
        base.update({"edge": [i, j], "edge_names": [names[i], names[j]],
                     "info_value": q.info_value,
                     "certificate": q.certificate.value if q.certificate else None})
    elif q.kind == NODE_CHILDREN:
        base.update({"node": q.node, "node_name": names[q.node]})
    return base


def _session_info(entry: SessionEntry) -> dict:
    core = entry.core
    ds = core.dataset
    return {
        "schema_version": SCHEMA_VERSION,
        "session": entry.sid,
        "status": core.status,
        "dataset": {
            "path": entry.dataset_path,
            "sha256": entry.dataset_hash,
            "n": ds.n,
            "v": ds.v,
            "names": list(ds.names),
        },
        "has_reference": core.gt_edges is not None,
        "config": json.loads(core.config.to_json()),
        "counts": core.counts(),
    }


def _metrics_payload(entry: SessionEntry) -> dict:
    payload = entry.core.metrics()
    payload.update({"schema_version": SCHEMA_VERSION, "session": entry.sid,
                    "status": entry.core.status})
    return payload


def _event_dict(ev) -> dict:
    return {"round": ev.round, "mechanism": ev.mechanism, "edge_i": ev.edge_i,
            "edge_j": ev.edge_j, "action": ev.action, "detail": ev.detail,
            "bits": ev.bits}


def _parse_answer(entry: SessionEntry, req: AnswerRequest) -> OracleAnswer:
    pending = entry.core.pending
    if pending is None:
        raise HTTPException(409, "session has no pending question")
    kind = pending.kind
    if kind == PER_EDGE:
        if req.answer is None:
            raise HTTPException(422, "edge questions need an 'answer' value")
        try:
            response = Answer(req.answer)
        except ValueError:
            raise HTTPException(
                422, f"answer must be one of FWD/BWD/ABSENT/UNKNOWN, got {req.answer!r}")
        return OracleAnswer(PER_EDGE, response=response)
    if req.nodes is None:
        raise HTTPException(422, f"{kind} questions need a 'nodes' list")
    names = entry.core.dataset.names
    index = {n: k for k, n in enumerate(names)}
    nodes = []
    for name in req.nodes:
        if name not in index:
            raise HTTPException(422, f"unknown variable {name!r}")
        nodes.append(index[name])
    try:
        return OracleAnswer(kind, nodes=tuple(nodes))
    except ValueError as exc:
        raise HTTPException(422, str(exc)) from exc


# ---------------------------------------------------------------------------
# the app
# ---------------------------------------------------------------------------

def create_app(settings: ServiceSettings | None = None) -> FastAPI:
    settings = settings or ServiceSettings()
    app = FastAPI(title="edgecert session service", version=SCHEMA_VERSION)
    store = SessionStore(settings)
    app.state.store = store

    @app.get("/v1/health")
    def health() -> dict:
        return {"schema_version": SCHEMA_VERSION, "status": "ok",
                "sessions": len(store.sessions)}

    @app.post("/v1/sessions", status_code=201)
    def create_session(req: CreateSessionRequest) -> dict:
        entry = store.create(req)
        info = _session_info(entry)
        info["question"] = _question_payload(entry)
        return info

    @app.get("/v1/sessions")
    def list_sessions() -> dict:
        with store._lock:
            entries = list(store.sessions.values())
        return {"schema_version": SCHEMA_VERSION,
                "sessions": [_session_info(e) for e in entries]}

    @app.get("/v1/sessions/{sid}")
    def session_info(sid: str) -> dict:
        return _session_info(store.get(sid))

    @app.get("/v1/sessions/{sid}/question")
    def get_question(sid: str) -> dict:
        entry = store.get(sid)
        with entry.lock:
            return _question_payload(entry)

    @app.post("/v1/sessions/{sid}/answer")
    def post_answer(sid: str, req: AnswerRequest) -> dict:
        entry = store.get(sid)
        with entry.lock:
            answer = _parse_answer(entry, req)
            try:
                result, events = entry.core.submit(req.query_id, answer)
            except sess.StaleQueryError as exc:
                raise HTTPException(409, str(exc)) from exc
            store.persist(entry)
            return {
                "schema_version": SCHEMA_VERSION,
                "session": entry.sid,
                "status": entry.core.status,
                "accepted": result.error is None,
                "error": result.error,
                "propagation": result.report.snapshot(),
                "events": [_event_dict(e) for e in events],
                "metrics": _metrics_payload(entry),
                "question": _question_payload(entry),
                "dag": entry.core.dag.snapshot(),
            }

    @app.get("/v1/sessions/{sid}/trace")
    def get_trace(sid: str, format: str = "json"):
        entry = store.get(sid)
        with entry.lock:
            if format == "csv":
                return PlainTextResponse(entry.core.trace.to_csv(),
                                         media_type="text/csv")
            return {"schema_version": SCHEMA_VERSION, "session": entry.sid,
                    "events": [_event_dict(e) for e in entry.core.trace]}

    @app.get("/v1/sessions/{sid}/metrics")
    def get_metrics(sid: str) -> dict:
        entry = store.get(sid)
        with entry.lock:
            return _metrics_payload(entry)

    return app
