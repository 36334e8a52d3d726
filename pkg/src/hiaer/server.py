"""HTTP front end for the operator console.

serve mode runs the planner and control loops continuously while inference
is operator-driven: each POST /session/input is one turn of the interaction
session, conditioned on the engine's rolling exchange history.  The console
gets server truth only; every displayed field comes from these payloads.
"""

from __future__ import annotations

import base64
import binascii
import json
import queue
import threading
from importlib import resources
from pathlib import Path

import uvicorn
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse
from pydantic import BaseModel, Field

from .affect import AffectConfig, UnknownPrimitiveError, Vocabulary, classify_quadrant
from .config import AppConfig
from .intent import EmptyInputError, EngineBusyError, ImageFrame, MultimodalInput, select_modality
from .intent.engine import MODALITY_MODES
from .pipeline import EventRecord, LivePipeline, TimedInput, WindowMsg


class SessionInputBody(BaseModel):
    text: str | None = None
    images_base64: list[str] = Field(default_factory=list)
    modality: str = "combined"


class OverrideBody(BaseModel):
    primitive_id: str


class _Broadcaster:
    """Fan-out of pipeline records to any number of stream subscribers.

    Publishing never blocks a loop: a subscriber that falls behind loses
    oldest-first and keeps streaming from there.
    """

    def __init__(self, capacity: int = 512):
        self._lock = threading.Lock()
        self._queues: list[queue.Queue] = []
        self._capacity = capacity

    def register(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=self._capacity)
        with self._lock:
            self._queues.append(q)
        return q

    def drop(self, q: queue.Queue) -> None:
        with self._lock:
            if q in self._queues:
                self._queues.remove(q)

    def publish(self, kind: str, doc: dict) -> None:
        with self._lock:
            targets = tuple(self._queues)
        for q in targets:
            try:
                q.put_nowait((kind, doc))
            except queue.Full:
                try:
                    q.get_nowait()
                    q.put_nowait((kind, doc))
                except queue.Empty:
                    pass


def _output_doc(output, affect_cfg: AffectConfig) -> dict:
    return {
        "description": output.description,
        "intent": output.intent.category.value,
        "intent_text": output.intent.free_text,
        "confidence": output.confidence,
        "valence": output.va.valence,
        "arousal": output.va.arousal,
        "quadrant": classify_quadrant(output.va, affect_cfg).value,
        "primitive_token": output.primitive_token,
    }


def _decision_doc(decision) -> dict:
    return {
        "primitive": decision.primitive.id,
        "display_text": decision.primitive.display_text,
        "fell_back": decision.fell_back,
        "style": {
            "amplitude_scale": decision.style.amplitude_scale,
            "tempo_scale": decision.style.tempo_scale,
            "openness": decision.style.openness,
        },
    }


def _event_doc(record: EventRecord) -> dict:
    return {
        "t": record.timestamp,
        "stage": record.stage,
        "kind": record.kind,
        "payload": dict(record.payload),
        "digest": record.digest,
    }


def _window_doc(msg: WindowMsg) -> dict:
    return {
        "index": msg.index,
        "primitive": msg.primitive,
        "source": msg.source,
        "forced": msg.source == "operator",
        "flagged": msg.flagged,
        "emitted_at": msg.emitted_at,
        "frames": msg.frames.tolist(),
        "angles": msg.angles.tolist(),
    }


def build_app(pipe: LivePipeline, app_cfg: AppConfig | None = None, console_dir=None) -> FastAPI:
    """Wire the operator API over an already-started pipeline."""
    app_cfg = app_cfg if app_cfg is not None else AppConfig()
    affect_cfg = pipe.engine.affect_cfg
    broadcaster = _Broadcaster()
    pipe.log.subscribe(lambda rec: broadcaster.publish("event", _event_doc(rec)))
    pipe.add_window_listener(lambda msg: broadcaster.publish("window", _window_doc(msg)))

    app = FastAPI(title="hiaer operator api")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.post("/session/input")
    def session_input(body: SessionInputBody):
        if body.modality not in MODALITY_MODES:
            raise HTTPException(422, f"modality must be one of {MODALITY_MODES}")
        now = pipe.elapsed()
        frames = []
        for i, blob in enumerate(body.images_base64):
            try:
                data = base64.b64decode(blob, validate=True)
            except (binascii.Error, ValueError):
                raise HTTPException(400, f"images_base64[{i}] is not valid base64")
            frames.append(ImageFrame(data=data, encoding="png", timestamp=now + i * 1e-3))
        try:
            combined = MultimodalInput(frames=tuple(frames), utterance=body.text)
            projected = select_modality(combined, body.modality)
        except EmptyInputError as exc:
            raise HTTPException(422, str(exc))
        item = TimedInput(timestamp=now, frames=projected.frames, utterance=projected.utterance)
        try:
            outcome, decision = pipe.submit_input(item)
        except EngineBusyError:
            raise HTTPException(409, "an inference is already in flight")
        return {
            "outcome": outcome.kind,
            "latency_s": outcome.latency_s,
            "error": outcome.error,
            "output": _output_doc(decision.output, affect_cfg),
            "decision": _decision_doc(decision),
        }

    @app.get("/session/history")
    def session_history():
        history = pipe.engine.history
        return {
            "exchanges": [
                {"summary": summary, "output": _output_doc(output, affect_cfg)}
                for summary, output in history.entries()
            ],
            "total_seen": history.total_seen,
            "capacity": history.capacity,
        }

    @app.get("/stream")
    def stream(limit: int | None = None):
        # limit bounds the stream to that many event frames; without it the
        # stream runs until the client disconnects
        def gen():
            q = broadcaster.register()
            sent = 0
            try:
                yield ": connected\n\n"
                while limit is None or sent < limit:
                    try:
                        kind, doc = q.get(timeout=15.0)
                    except queue.Empty:
                        yield ": keepalive\n\n"
                        continue
                    yield f"event: {kind}\ndata: {json.dumps(doc, separators=(',', ':'))}\n\n"
                    sent += 1
            finally:
                broadcaster.drop(q)

        return StreamingResponse(
            gen(),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    @app.post("/session/override")
    def session_override(body: OverrideBody):
        try:
            command = pipe.force_primitive(body.primitive_id)
        except UnknownPrimitiveError as exc:
            raise HTTPException(404, str(exc))
        return {
            "primitive": command.primitive.id,
            "display_text": command.primitive.display_text,
            "source": command.source,
            "forced": True,
        }

    @app.get("/metrics")
    def metrics():
        return pipe.metrics.summary()

    @app.get("/bootstrap")
    def bootstrap():
        skeleton = json.loads(
            (resources.files("hiaer.data") / "skeleton_smpl.json").read_text()
        )
        return {
            "vocabulary": [
                {
                    "id": p.id,
                    "display_text": p.display_text,
                    "aliases": list(p.aliases),
                    "safety_class": p.safety_class,
                    "quadrant_affinity": sorted(q.value for q in p.quadrant_affinity),
                }
                for p in pipe.vocabulary
            ],
            "affect": {
                "arousal_split": affect_cfg.arousal_split,
                "neutral_valence_band": affect_cfg.neutral_valence_band,
                "confidence_threshold": affect_cfg.confidence_threshold,
                "fallback_primitive_id": affect_cfg.fallback_primitive_id,
            },
            "rates": {
                "video_rate": pipe.cfg.video_rate,
                "planner_fps": pipe.cfg.planner.fps,
                "window_n": pipe.cfg.planner.window_n,
                "window_period": pipe.cfg.window_period,
                "control_rate": pipe.cfg.control_rate,
                "inference_timeout": pipe.cfg.inference_timeout,
            },
            "skeleton": skeleton,
        }

    if console_dir is not None and Path(console_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/app", StaticFiles(directory=str(console_dir), html=True), name="console")

    return app


def make_pipeline(app_cfg: AppConfig, **inject) -> LivePipeline:
    """Serve-mode pipeline: planner and control loops on, inference on demand."""
    vocabulary = (
        Vocabulary.from_file(app_cfg.vocabulary_path) if app_cfg.vocabulary_path else None
    )
    return LivePipeline(
        app_cfg.pipeline,
        intent_autonomous=False,
        vocabulary=vocabulary,
        affect_cfg=app_cfg.affect,
        engine_cfg=app_cfg.engine,
        gains=app_cfg.gains,
        sim_cfg=app_cfg.sim,
        **inject,
    )


def serve(
    app_cfg: AppConfig | None = None,
    *,
    host: str | None = None,
    port: int | None = None,
    pipe: LivePipeline | None = None,
    console_dir=None,
) -> None:
    """Run the operator API until interrupted."""
    app_cfg = app_cfg if app_cfg is not None else AppConfig()
    own_pipe = pipe is None
    if own_pipe:
        pipe = make_pipeline(app_cfg)
    app = build_app(pipe, app_cfg, console_dir=console_dir)
    if own_pipe:
        pipe.start()
    try:
        uvicorn.run(
            app,
            host=host if host is not None else app_cfg.pipeline.serve_host,
            port=port if port is not None else app_cfg.pipeline.serve_port,
            log_level="warning",
        )
    finally:
        if own_pipe:
            pipe.stop()
            pipe.join()
