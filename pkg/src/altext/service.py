"""HTTP annotation service wrapping one active-learning loop.

The service owns a single session whose loop state lives in a session
directory; every mutation is persisted before the response is sent, so a
killed and restarted process resumes the exact trajectory. Labels are
submitted against a batch sequence number: a stale or duplicate submission
is rejected with 409 and changes nothing.

Endpoints (JSON bodies, errors shaped as {"error", "detail"}):

* ``POST /api/session`` -> {session_id, classes, mode}
* ``GET /api/session/{id}/batch`` -> {batch: [{doc_id, text}], seq, done}
* ``POST /api/session/{id}/labels`` body {seq, labels: {doc_id: [class, ...]}}
* ``GET /api/session/{id}/status``
* ``GET /api/session/{id}/export?format=csv|jsonl``
* ``GET /`` serves the UI bundle when one is configured.
"""

from __future__ import annotations

import io
import json
import os
import threading
import time
import uuid
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import HTMLResponse, JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from . import loop as loop_mod
from .corpus import CorpusError, Dataset
from .loop import ActiveLearner, LoopConfig, LoopError
from .rng import Rng

_FALLBACK_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>annotation service</title></head>
<body><h1>Annotation service is running</h1>
<p>No UI bundle is configured. Point --ui-dir at a built frontend, or use the
JSON API under <code>/api</code>.</p></body></html>
"""


class ApiError(Exception):
    def __init__(self, status: int, error: str, detail):
        self.status = status
        self.error = error
        self.detail = detail


class AnnotationSession:
    """Single loop plus its service-level bookkeeping, persisted together."""

    def __init__(self, dataset: Dataset, config: LoopConfig, session_dir: str):
        self.dataset = dataset
        self.config = config
        self.session_dir = session_dir
        self.loop_dir = os.path.join(session_dir, "loop")
        self.lock = threading.Lock()
        self.learner: Optional[ActiveLearner] = None
        self.session_id: str = ""
        self.batch_seq = 0
        self.cold_pending: list[int] = []
        self.created = ""
        self.updated = ""

    # -- persistence -----------------------------------------------------

    @property
    def _meta_path(self) -> str:
        return os.path.join(self.session_dir, "service.json")

    def exists_on_disk(self) -> bool:
        return os.path.exists(self._meta_path)

    def persist(self) -> None:
        os.makedirs(self.session_dir, exist_ok=True)
        if self.learner is not None:
            self.learner.save(self.loop_dir)
        self.updated = _now()
        blob = {
            "session_id": self.session_id,
            "batch_seq": self.batch_seq,
            "cold_pending": self.cold_pending,
            "has_loop": self.learner is not None,
            "created": self.created,
            "updated": self.updated,
        }
        tmp = self._meta_path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(blob, fh, indent=2)
        os.replace(tmp, self._meta_path)

    def restore(self) -> None:
        with open(self._meta_path, encoding="utf-8") as fh:
            blob = json.load(fh)
        self.session_id = blob["session_id"]
        self.batch_seq = int(blob["batch_seq"])
        self.cold_pending = [int(i) for i in blob["cold_pending"]]
        self.created = blob.get("created", "")
        self.updated = blob.get("updated", "")
        if blob.get("has_loop"):
            self.learner = loop_mod.load(self.loop_dir, self.dataset)

    def start(self) -> None:
        """Create a fresh session: seed from pre-labeled rows, or cold-start."""
        self.session_id = uuid.uuid4().hex
        self.created = _now()
        pre_labeled = [i for i, lab in enumerate(self.dataset.labels) if lab is not None]
        if pre_labeled:
            self.learner = ActiveLearner(
                self.dataset,
                seed_indices=pre_labeled,
                seed_labels=[self.dataset.labels[i] for i in pre_labeled],
                config=self.config,
            )
        else:
            # no seed labels exist yet: the first batch is a uniform sample,
            # and the loop starts once it comes back labeled
            cold_rng = Rng(Rng(self.config.seed).spawn_seed())
            k = min(self.config.batch_size, self.dataset.n)
            picks = cold_rng.sample_indices(self.dataset.n, k)
            self.cold_pending = sorted(picks)
            self.batch_seq = 1
        self.persist()

    # -- views -------------------------------------------------------------

    def pending_ids(self) -> list[int]:
        if self.learner is None:
            return list(self.cold_pending)
        if self.learner.phase == loop_mod.AWAITING_LABELS:
            return list(self.learner.pending)
        return []

    def counts(self) -> tuple[int, int, int]:
        if self.learner is None:
            return 0, self.dataset.n, 0
        return (
            self.learner.pools.n_labeled,
            self.learner.pools.n_unlabeled,
            self.learner.rounds_completed,
        )

    def stopping_view(self) -> dict:
        if self.learner is None:
            return {"name": "none", "value": None, "should_stop": False}
        return loop_mod._decision_json(self.learner.should_stop())

    def exhausted(self) -> bool:
        return (
            self.learner is not None
            and self.learner.pools.n_unlabeled == 0
            and self.learner.phase == loop_mod.AWAITING_QUERY
        )

    # -- mutations -----------------------------------------------------------

    def next_batch(self) -> dict:
        with self.lock:
            if self.exhausted():
                return {"batch": [], "seq": self.batch_seq, "done": True}
            pending = self.pending_ids()
            if not pending:
                self.learner.query()
                self.batch_seq += 1
                self.persist()
                pending = self.pending_ids()
            docs = [
                {"doc_id": int(i), "text": self.dataset.documents[i].text} for i in pending
            ]
            return {"batch": docs, "seq": self.batch_seq, "done": False}

    def submit_labels(self, seq: int, label_map: dict) -> dict:
        with self.lock:
            pending = self.pending_ids()
            if seq != self.batch_seq or not pending:
                # wrong seq, or a duplicate submit for an already-consumed batch
                raise ApiError(
                    409,
                    "stale_seq",
                    f"seq {seq} does not name the pending batch (current seq {self.batch_seq})",
                )
            try:
                parsed = {
                    int(doc_id): [str(name) for name in names]
                    for doc_id, names in label_map.items()
                }
            except (TypeError, ValueError):
                raise ApiError(422, "bad_labels", "labels must map doc ids to class-name lists")
            missing = sorted(set(pending) - set(parsed))
            extra = sorted(set(parsed) - set(pending))
            if missing or extra:
                raise ApiError(
                    409,
                    "batch_mismatch",
                    {"missing_ids": missing, "extra_ids": extra},
                )
            space = self.dataset.label_space
            try:
                canonical = {i: space.from_names(names) for i, names in parsed.items()}
            except CorpusError as e:
                raise ApiError(422, "invalid_class", str(e))
            if self.learner is None:
                self.learner = ActiveLearner(
                    self.dataset,
                    seed_indices=sorted(canonical),
                    seed_labels=[canonical[i] for i in sorted(canonical)],
                    config=self.config,
                )
                self.cold_pending = []
            else:
                self.learner.update(canonical)
            self.persist()
            labeled, unlabeled, rounds = self.counts()
            return {
                "labeled": labeled,
                "unlabeled": unlabeled,
                "round": rounds,
                "stopping": self.stopping_view(),
            }


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def create_app(
    dataset: Dataset,
    config: LoopConfig,
    session_dir: str,
    ui_dir: Optional[str] = None,
) -> FastAPI:
    app = FastAPI(title="annotation service")
    session = AnnotationSession(dataset, config, session_dir)
    if session.exists_on_disk():
        session.restore()
    app.state.session = session

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"error": exc.error, "detail": exc.detail})

    @app.exception_handler(LoopError)
    async def handle_loop_error(request: Request, exc: LoopError):
        return JSONResponse(status_code=409, content={"error": "loop_error", "detail": str(exc)})

    def _session_or_404(session_id: str) -> AnnotationSession:
        if not session.session_id or session.session_id != session_id:
            raise ApiError(404, "unknown_session", f"no session {session_id!r}")
        return session

    @app.post("/api/session")
    def create_session():
        with session.lock:
            if not session.session_id:
                session.start()
        return {
            "session_id": session.session_id,
            "classes": list(dataset.label_space.class_names),
            "mode": dataset.label_space.mode,
        }

    @app.get("/api/session/{session_id}/batch")
    def get_batch(session_id: str):
        return _session_or_404(session_id).next_batch()

    @app.post("/api/session/{session_id}/labels")
    async def post_labels(session_id: str, request: Request):
        s = _session_or_404(session_id)
        try:
            body = json.loads(await request.body())
        except json.JSONDecodeError:
            raise ApiError(422, "bad_json", "request body must be JSON")
        if not isinstance(body, dict) or "seq" not in body or "labels" not in body:
            raise ApiError(422, "bad_request", "body needs 'seq' and 'labels'")
        if not isinstance(body["labels"], dict):
            raise ApiError(422, "bad_labels", "'labels' must be an object")
        return s.submit_labels(int(body["seq"]), body["labels"])

    @app.get("/api/session/{session_id}/status")
    def status(session_id: str):
        s = _session_or_404(session_id)
        labeled, unlabeled, rounds = s.counts()
        return {
            "session_id": s.session_id,
            "classes": list(dataset.label_space.class_names),
            "mode": dataset.label_space.mode,
            "labeled": labeled,
            "unlabeled": unlabeled,
            "round": rounds,
            "seq": s.batch_seq,
            "pending": s.pending_ids(),
            "done": s.exhausted(),
            "stopping": s.stopping_view(),
            "created": s.created,
            "updated": s.updated,
        }

    @app.get("/api/session/{session_id}/export")
    def export(session_id: str, format: str = "csv"):
        s = _session_or_404(session_id)
        labels = s.learner.labels if s.learner is not None else {}
        if format == "csv":
            out = io.StringIO()
            out.write("id,label\n")
            for i in sorted(labels):
                names = "|".join(dataset.label_space.names_of(labels[i]))
                out.write(f"{i},{names}\n")
            return PlainTextResponse(out.getvalue(), media_type="text/csv")
        if format == "jsonl":
            out = io.StringIO()
            for doc in dataset.documents:
                lab = labels.get(doc.id)
                names = None if lab is None else dataset.label_space.names_of(lab)
                out.write(json.dumps({"id": doc.id, "text": doc.text, "labels": names}, ensure_ascii=False))
                out.write("\n")
            return PlainTextResponse(out.getvalue(), media_type="application/x-ndjson")
        raise ApiError(422, "bad_format", f"unknown export format {format!r}")

    if ui_dir and os.path.isdir(ui_dir):
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    else:

        @app.get("/", response_class=HTMLResponse)
        def index():
            return _FALLBACK_PAGE

    return app
