"""HTTP session service for the interactive tracking workflow.

Sessions are event-sourced: the append-only prompt/propagate log plus the
frozen creation record are the source of truth, and every mask is derived
data that replaying the log reproduces byte-for-byte (the tracker is
deterministic). Mutations take a per-session lock without queueing; a second
writer gets 409. Readers see an atomically-published snapshot, never a
half-propagated state.

Run it with ``python -m scartrack.service --port 8008 --data-dir ./sessions``
(or the LSVT_PORT / LSVT_DATA_DIR / LSVT_BACKEND_URL environment variables).
"""

from __future__ import annotations

import base64
import binascii
import datetime as dt
import io
import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel

from .analysis import AreaEntry, AreaSeries, series_to_csv
from .errors import (
    ArgumentError,
    BackendUnavailableError,
    FormatError,
    InitializationError,
    LoadError,
    PromptPlacementError,
    PropagationError,
    ScartrackError,
    SessionStateError,
)
from .metrics import evaluate_sequence, report_to_json
from .protocol import HttpBackend
from .raster import BinaryMask, mask_from_bytes, mask_to_bytes
from .sequence import load_manifest, ndvi_to_display
from .tracker import NativeBackend, PromptPoint, TrackerParams, TrackSession

__all__ = ["create_service_app", "SessionStore", "main"]

SYNC_PROPAGATION_LIMIT = 64  # frames; longer sequences propagate in the background


# ---------------------------------------------------------------------------
# Request bodies
# ---------------------------------------------------------------------------

class CreateSessionBody(BaseModel):
    manifest_path: str
    params: dict = {}


class PointBody(BaseModel):
    row: int
    col: int
    polarity: str


class PromptsBody(BaseModel):
    frame: int
    points: list[PointBody]


class PropagateBody(BaseModel):
    from_frame: int = 0


class TruthBody(BaseModel):
    masks_b64: list[str]


# ---------------------------------------------------------------------------
# Session runtime
# ---------------------------------------------------------------------------

@dataclass
class Snapshot:
    """What readers see; swapped atomically after each successful mutation."""

    revision: int = 0
    cursor: int = -1
    status: str = "idle"
    masks: tuple[BinaryMask, ...] = ()
    confidences: tuple[float, ...] = ()
    warnings: dict[int, list[str]] = field(default_factory=dict)
    error: str | None = None
    halted_at: int | None = None


class SessionRuntime:
    def __init__(self, session_id: str, store_dir: Path, manifest_path: Path,
                 params: TrackerParams, auto_propagate: bool, backend_url: str | None):
        self.session_id = session_id
        self.store_dir = store_dir
        self.manifest_path = manifest_path
        self.params = params
        self.auto_propagate = auto_propagate
        self.backend_url = backend_url
        self.sequence = load_manifest(manifest_path)
        backend = HttpBackend(base_url=backend_url) if backend_url else NativeBackend()
        self.tracker = TrackSession(self.sequence, params, backend=backend)
        self.lock = threading.Lock()
        self.snapshot = Snapshot()
        self.truth: list[BinaryMask] | None = None

    # -- event log ----------------------------------------------------------

    @property
    def events_path(self) -> Path:
        return self.store_dir / "events.jsonl"

    @property
    def masks_dir(self) -> Path:
        return self.store_dir / "masks"

    def append_event(self, event: dict) -> None:
        event = {"ts": dt.datetime.now(dt.timezone.utc).isoformat(), **event}
        with open(self.events_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event) + "\n")

    def apply_event(self, event: dict) -> None:
        """State transition shared by live handlers and replay."""
        kind = event["type"]
        if kind == "prompts":
            frame = int(event["frame"])
            points = [PromptPoint(frame, int(p["row"]), int(p["col"]), str(p["polarity"]))
                      for p in event["points"]]
            if self.tracker.cursor < 0 and frame == 0:
                self.tracker.init(points)
            elif self.auto_propagate and frame <= self.tracker.cursor + 1:
                self.tracker.refine(points)
            else:
                self.tracker.add_prompts(points)
        elif kind == "propagate":
            self.tracker.propagate_from(int(event["from_frame"]))
        else:
            raise LoadError(f"unknown event type {kind!r} in session log")

    def replay(self) -> None:
        backend = self.tracker.backend
        self.tracker = TrackSession(self.sequence, self.params, backend=backend)
        if self.events_path.exists():
            with open(self.events_path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        self.apply_event(json.loads(line))
                    except (ScartrackError, KeyError, ValueError) as exc:
                        raise LoadError(
                            f"cannot replay session {self.session_id} "
                            f"event at line {lineno}: {exc}"
                        ) from exc

    # -- publishing ---------------------------------------------------------

    def publish(self, status: str = "idle", error: str | None = None,
                halted_at: int | None = None) -> Snapshot:
        snap = Snapshot(
            revision=self.tracker.revision,
            cursor=self.tracker.cursor,
            status=status,
            masks=tuple(self.tracker.masks),
            confidences=tuple(self.tracker.confidences),
            warnings={k: list(v) for k, v in self.tracker.warnings.items()},
            error=error,
            halted_at=halted_at,
        )
        self.write_masks()
        self.snapshot = snap
        return snap

    def write_masks(self) -> None:
        self.masks_dir.mkdir(parents=True, exist_ok=True)
        for stale in self.masks_dir.glob("mask_*.pgm"):
            stale.unlink()
        for i, mask in enumerate(self.tracker.masks):
            (self.masks_dir / f"mask_{i:04d}.pgm").write_bytes(mask_to_bytes(mask))

    def load_truth(self) -> None:
        truth_dir = self.store_dir / "truth"
        self.truth = None
        if not truth_dir.is_dir():
            return
        paths = sorted(truth_dir.glob("truth_*.pgm"))
        if len(paths) == self.sequence.n:
            self.truth = [mask_from_bytes(p.read_bytes()) for p in paths]


# ---------------------------------------------------------------------------
# Store: all sessions under one data directory
# ---------------------------------------------------------------------------

class SessionStore:
    def __init__(self, data_dir: Path, backend_url: str | None = None):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.backend_url = backend_url
        self.sessions: dict[str, SessionRuntime] = {}
        self._registry_lock = threading.Lock()

    def create(self, manifest_path: str, params_doc: dict) -> SessionRuntime:
        params_doc = dict(params_doc or {})
        auto_propagate = bool(params_doc.pop("auto_propagate", False))
        try:
            params = TrackerParams.from_dict(params_doc)
        except (ArgumentError, TypeError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=f"invalid params: {exc}") from None

        manifest = Path(manifest_path).resolve()
        session_id = uuid.uuid4().hex
        store_dir = self.data_dir / session_id
        store_dir.mkdir(parents=True)
        try:
            runtime = SessionRuntime(session_id, store_dir, manifest, params,
                                     auto_propagate, self.backend_url)
        except (LoadError, ScartrackError, OSError) as exc:
            store_dir.rmdir()  # nothing was written yet
            raise HTTPException(status_code=400, detail=f"invalid manifest: {exc}") from None

        record = {
            "session_id": session_id,
            "manifest_path": str(manifest),
            "params": params.to_dict(),
            "auto_propagate": auto_propagate,
            "backend_url": self.backend_url,
            "created_at": dt.datetime.now(dt.timezone.utc).isoformat(),
        }
        (store_dir / "record.json").write_text(json.dumps(record, indent=2) + "\n",
                                               encoding="utf-8")
        runtime.publish()
        with self._registry_lock:
            self.sessions[session_id] = runtime
        return runtime

    def get(self, session_id: str) -> SessionRuntime:
        with self._registry_lock:
            runtime = self.sessions.get(session_id)
        if runtime is not None:
            return runtime
        record_path = self.data_dir / session_id / "record.json"
        if not record_path.exists():
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        try:
            record = json.loads(record_path.read_text(encoding="utf-8"))
            runtime = SessionRuntime(
                session_id=session_id,
                store_dir=self.data_dir / session_id,
                manifest_path=Path(record["manifest_path"]),
                params=TrackerParams.from_dict(record.get("params") or {}),
                auto_propagate=bool(record.get("auto_propagate", False)),
                backend_url=record.get("backend_url"),
            )
            runtime.replay()
            runtime.load_truth()
            runtime.publish()
        except (LoadError, ScartrackError, KeyError, ValueError) as exc:
            raise HTTPException(status_code=500,
                                detail=f"cannot restore session {session_id}: {exc}") from None
        with self._registry_lock:
            self.sessions.setdefault(session_id, runtime)
            return self.sessions[session_id]


# ---------------------------------------------------------------------------
# HTTP surface
# ---------------------------------------------------------------------------

def _error_status(exc: ScartrackError) -> int:
    if isinstance(exc, (PromptPlacementError, InitializationError, ArgumentError)):
        return 422
    if isinstance(exc, SessionStateError):
        return 409
    if isinstance(exc, (PropagationError, BackendUnavailableError)):
        return 502
    return 400


def create_service_app(data_dir, backend_url: str | None = None) -> FastAPI:
    store = SessionStore(Path(data_dir), backend_url=backend_url)
    app = FastAPI(title="scartrack session service", docs_url=None, redoc_url=None)
    app.state.store = store

    def etag_headers(snap: Snapshot) -> dict:
        return {"ETag": f'"{snap.revision}"'}

    def mask_or_404(runtime: SessionRuntime, k: int) -> tuple[BinaryMask, Snapshot]:
        snap = runtime.snapshot
        if not (0 <= k < runtime.sequence.n):
            raise HTTPException(status_code=404, detail=f"unknown frame {k}")
        if k > snap.cursor:
            raise HTTPException(status_code=404, detail=f"no mask yet for frame {k}")
        return snap.masks[k], snap

    @app.post("/api/v1/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        runtime = store.create(body.manifest_path, body.params)
        return {"session_id": runtime.session_id}

    @app.get("/api/v1/sessions/{session_id}")
    def session_status(session_id: str):
        runtime = store.get(session_id)
        snap = runtime.snapshot
        template = runtime.sequence.template
        return {
            "session_id": session_id,
            "status": snap.status,
            "revision": snap.revision,
            "cursor": snap.cursor,
            "n_frames": runtime.sequence.n,
            "width": template.width,
            "height": template.height,
            "cell_size_m": template.cell_size,
            "dates": [f.date.isoformat() for f in runtime.sequence.frames],
            "backend": runtime.backend_url or "native",
            "auto_propagate": runtime.auto_propagate,
            "warnings": {str(k): v for k, v in snap.warnings.items()},
            "confidences": list(snap.confidences),
            "error": snap.error,
            "halted_at": snap.halted_at,
            "has_truth": runtime.truth is not None,
        }

    @app.post("/api/v1/sessions/{session_id}/prompts")
    def post_prompts(session_id: str, body: PromptsBody):
        runtime = store.get(session_id)
        if not body.points:
            raise HTTPException(status_code=422, detail="no prompt points supplied")
        if not runtime.lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="another mutation is in flight")
        try:
            event = {
                "type": "prompts",
                "frame": body.frame,
                "points": [{"row": p.row, "col": p.col, "polarity": p.polarity}
                           for p in body.points],
            }
            try:
                runtime.apply_event(event)
            except PromptPlacementError as exc:
                runtime.replay()  # discard any partial mutation
                raise HTTPException(
                    status_code=422,
                    detail={"message": str(exc), "row": exc.row, "col": exc.col,
                            "frame": exc.frame_index},
                ) from None
            except ScartrackError as exc:
                runtime.replay()
                raise HTTPException(status_code=_error_status(exc), detail=str(exc)) from None
            runtime.append_event(event)
            snap = runtime.publish()
            return {"revision": snap.revision, "cursor": snap.cursor}
        finally:
            runtime.lock.release()

    @app.post("/api/v1/sessions/{session_id}/propagate")
    def post_propagate(session_id: str, body: PropagateBody, response: Response):
        runtime = store.get(session_id)
        if not runtime.lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="another mutation is in flight")

        event = {"type": "propagate", "from_frame": body.from_frame}

        def run_sync():
            try:
                runtime.apply_event(event)
            except PropagationError as exc:
                runtime.replay()  # discard partial progress; log has no new event
                runtime.publish()
                raise HTTPException(status_code=502,
                                    detail={"message": str(exc), "halted_at": exc.halted_at},
                                    ) from None
            except ScartrackError as exc:
                runtime.replay()
                raise HTTPException(status_code=_error_status(exc), detail=str(exc)) from None
            runtime.append_event(event)
            return runtime.publish()

        if runtime.sequence.n <= SYNC_PROPAGATION_LIMIT:
            try:
                snap = run_sync()
            finally:
                runtime.lock.release()
            return {"cursor": snap.cursor, "revision": snap.revision}

        # long sequence: validate the precondition now, work in the background
        if not (0 <= body.from_frame <= runtime.tracker.cursor + 1):
            runtime.lock.release()
            raise HTTPException(
                status_code=409,
                detail=f"cannot propagate from frame {body.from_frame}: "
                       f"cursor is {runtime.tracker.cursor}",
            )
        runtime.snapshot = Snapshot(
            revision=runtime.snapshot.revision,
            cursor=runtime.snapshot.cursor,
            status="propagating",
            masks=runtime.snapshot.masks,
            confidences=runtime.snapshot.confidences,
            warnings=runtime.snapshot.warnings,
        )

        def worker():
            try:
                try:
                    runtime.apply_event(event)
                except PropagationError as exc:
                    runtime.replay()
                    runtime.publish(status="error", error=str(exc), halted_at=exc.halted_at)
                    return
                except ScartrackError as exc:
                    runtime.replay()
                    runtime.publish(status="error", error=str(exc))
                    return
                runtime.append_event(event)
                runtime.publish()
            finally:
                runtime.lock.release()

        threading.Thread(target=worker, name=f"propagate-{session_id}", daemon=True).start()
        response.status_code = 202
        return {"status": "propagating", "status_url": f"/api/v1/sessions/{session_id}"}

    @app.get("/api/v1/sessions/{session_id}/frames/{k}/mask.pgm")
    def get_mask(session_id: str, k: int):
        runtime = store.get(session_id)
        mask, snap = mask_or_404(runtime, k)
        return Response(content=mask_to_bytes(mask), media_type="image/x-portable-graymap",
                        headers=etag_headers(snap))

    @app.get("/api/v1/sessions/{session_id}/frames/{k}/display.png")
    def get_display(session_id: str, k: int):
        runtime = store.get(session_id)
        if not (0 <= k < runtime.sequence.n):
            raise HTTPException(status_code=404, detail=f"unknown frame {k}")
        from PIL import Image

        px = ndvi_to_display(runtime.sequence[k].grid)
        buf = io.BytesIO()
        Image.fromarray(px, mode="L").save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png",
                        headers=etag_headers(runtime.snapshot))

    @app.get("/api/v1/sessions/{session_id}/area.csv")
    def get_area(session_id: str):
        runtime = store.get(session_id)
        snap = runtime.snapshot
        entries = [
            AreaEntry(frame_index=i, date=runtime.sequence[i].date,
                      area_m2=mask.count * mask.cell_size ** 2)
            for i, mask in enumerate(snap.masks)
        ]
        series = AreaSeries(entries=entries, cell_size=runtime.sequence.template.cell_size)
        return Response(content=series_to_csv(series), media_type="text/csv",
                        headers=etag_headers(snap))

    @app.get("/api/v1/sessions/{session_id}/spikes.json")
    def get_spikes(session_id: str, factor: float = 2.0, window: int = 5):
        from .analysis import detect_spikes

        runtime = store.get(session_id)
        snap = runtime.snapshot
        entries = [
            AreaEntry(frame_index=i, date=runtime.sequence[i].date,
                      area_m2=mask.count * mask.cell_size ** 2)
            for i, mask in enumerate(snap.masks)
        ]
        series = AreaSeries(entries=entries, cell_size=runtime.sequence.template.cell_size)
        if not (factor > 1.0) or window < 1:
            raise HTTPException(status_code=422,
                                detail=f"bad spike parameters factor={factor} window={window}")
        # a series shorter than the window simply has no detectable spikes
        events = detect_spikes(series, factor=factor, window=window) if len(series) > window else []
        doc = [
            {
                "frame_index": e.frame_index,
                "date": e.date.isoformat(),
                "area_m2": e.area_m2,
                "baseline_m2": e.baseline_m2,
                "ratio": None if e.baseline_m2 == 0 else e.ratio,
            }
            for e in events
        ]
        return Response(content=json.dumps(doc) + "\n", media_type="application/json",
                        headers=etag_headers(snap))

    @app.put("/api/v1/sessions/{session_id}/truth")
    def put_truth(session_id: str, body: TruthBody):
        runtime = store.get(session_id)
        if len(body.masks_b64) != runtime.sequence.n:
            raise HTTPException(
                status_code=409,
                detail=f"need {runtime.sequence.n} truth masks, got {len(body.masks_b64)}",
            )
        template = runtime.sequence.template
        masks = []
        for i, encoded in enumerate(body.masks_b64):
            try:
                mask = mask_from_bytes(base64.b64decode(encoded, validate=True))
            except (FormatError, binascii.Error, ValueError) as exc:
                raise HTTPException(status_code=422,
                                    detail=f"truth mask {i} is invalid: {exc}") from None
            if mask.width != template.width or mask.height != template.height:
                raise HTTPException(
                    status_code=409,
                    detail=f"truth mask {i} is {mask.width}x{mask.height}, "
                           f"frames are {template.width}x{template.height}",
                )
            masks.append(mask)
        runtime.truth = masks
        truth_dir = runtime.store_dir / "truth"
        truth_dir.mkdir(parents=True, exist_ok=True)
        for i, mask in enumerate(masks):
            (truth_dir / f"truth_{i:04d}.pgm").write_bytes(mask_to_bytes(mask))
        return {"frames": len(masks)}

    @app.get("/api/v1/sessions/{session_id}/metrics.json")
    def get_metrics(session_id: str):
        runtime = store.get(session_id)
        snap = runtime.snapshot
        if runtime.truth is None:
            raise HTTPException(status_code=404,
                                detail="no ground truth uploaded; PUT .../truth first")
        if snap.cursor < 0:
            raise HTTPException(status_code=404, detail="no masks yet")
        upto = snap.cursor + 1
        report = evaluate_sequence(list(snap.masks[:upto]), runtime.truth[:upto],
                                   dates=[f.date for f in runtime.sequence.frames[:upto]])
        return Response(content=report_to_json(report), media_type="application/json",
                        headers=etag_headers(snap))

    return app


def main(argv: list[str] | None = None) -> int:
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(prog="scartrack-service",
                                     description="Interactive scar-tracking session service")
    parser.add_argument("--port", type=int,
                        default=int(os.environ.get("LSVT_PORT", "8008")))
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--data-dir",
                        default=os.environ.get("LSVT_DATA_DIR", "./scartrack-sessions"))
    parser.add_argument("--backend-url",
                        default=os.environ.get("LSVT_BACKEND_URL") or None)
    args = parser.parse_args(argv)

    app = create_service_app(args.data_dir, backend_url=args.backend_url)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
