"""HTTP review service: audio, spectrogram tiles, label tracks, expert edits.

All payloads carry a ``v`` schema version field. Sessions persist as JSON
files under ``<data>/.review-sessions`` after every accepted mutation, so a
crash or SIGTERM never loses acknowledged edits. Optimistic concurrency:
each edit names the revision it was based on; conflicts are rejected with
409, never merged.

Endpoints:
    GET  /health
    GET  /recordings
    POST /sessions                      {recording, quadrant}
    GET  /sessions/{id}
    GET  /sessions/{id}/audio?from&to          (WAV bytes)
    GET  /sessions/{id}/spectrogram?from&to    (JSON tile)
    POST /sessions/{id}/edits           {revision, edit}
    POST /sessions/{id}/finish
"""

from __future__ import annotations

import json
import logging
import os
import threading
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Query, Response

from . import __version__
from .audio import AudioIOError, Recording, load_wav, write_wav_bytes
from .labels import LabelTrackError, parse_label_track, write_label_track, TrackSource
from .mel import MelConfig, band_center_freqs, log_mel_spectrogram
from .pipeline import PipelineConfig, annotate_recording
from .review import EditError, ReviewSession, SessionStateError

logger = logging.getLogger("bowelsound.service")

SESSIONS_DIRNAME = ".review-sessions"


class SessionStore:
    """Disk-backed session registry; one lock guards all mutations."""

    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self.sessions_dir = self.data_dir / SESSIONS_DIRNAME
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.lock = threading.Lock()
        self._cache: dict[str, ReviewSession] = {}
        self._recordings: dict[str, Recording] = {}

    def list_recordings(self) -> list[dict]:
        out = []
        for wav in sorted(self.data_dir.glob("*.wav")):
            try:
                rec = self.load_recording(wav.name)
            except AudioIOError:
                continue
            first = next(iter(rec.channels.values()))
            out.append(
                {
                    "name": wav.name,
                    "channels": sorted(rec.channels),
                    "sample_rate": rec.sample_rate,
                    "duration_s": round(first.duration_s, 3),
                }
            )
        return out

    def load_recording(self, name: str) -> Recording:
        if name not in self._recordings:
            path = self.data_dir / name
            if not path.is_file():
                raise FileNotFoundError(name)
            self._recordings[name] = load_wav(path)
        return self._recordings[name]

    def _session_path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.json"

    def persist(self, session: ReviewSession) -> None:
        path = self._session_path(session.session_id)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(session.to_dict()))
        os.replace(tmp, path)

    def get(self, session_id: str) -> ReviewSession:
        if session_id in self._cache:
            return self._cache[session_id]
        path = self._session_path(session_id)
        if not path.is_file():
            raise KeyError(session_id)
        session = ReviewSession.from_dict(json.loads(path.read_text()))
        self._cache[session_id] = session
        return session

    def create_session(self, recording: str, quadrant: str) -> ReviewSession:
        rec = self.load_recording(recording)
        if quadrant not in rec.channels:
            raise KeyError(f"recording {recording} has no channel {quadrant}")
        clip = rec.channels[quadrant]
        auto_track = self._auto_track(recording, quadrant)
        session = ReviewSession.create(
            recording=recording,
            quadrant=quadrant,
            auto_track=auto_track,
            duration_s=clip.duration_s,
            sample_rate=clip.sample_rate,
        )
        self._cache[session.session_id] = session
        self.persist(session)
        return session

    def _auto_track(self, recording: str, quadrant: str):
        """Load precomputed auto labels if present, otherwise run the pipeline."""
        stem = Path(recording).stem
        label_path = self.data_dir / f"{stem}.{quadrant}.labels.txt"
        if label_path.is_file():
            return parse_label_track(label_path.read_text(), source=TrackSource.AUTO)
        rec = self.load_recording(recording)
        result = annotate_recording(
            Recording({quadrant: rec.channels[quadrant]}), PipelineConfig()
        )
        if quadrant in result.failures:
            raise LabelTrackError(result.failures[quadrant])
        return result.tracks[quadrant]

    def flush_all(self) -> None:
        for session in self._cache.values():
            self.persist(session)


def _session_payload(session: ReviewSession) -> dict:
    return {
        "v": 1,
        "session_id": session.session_id,
        "recording": session.recording,
        "quadrant": session.quadrant,
        "duration_s": session.duration_s,
        "sample_rate": session.sample_rate,
        "revision": session.revision,
        "finished": session.finished,
        "auto_track": [s.to_dict() for s in session.auto_segments],
        "working_track": [s.to_dict() for s in session.working_segments],
        "edit_count": len(session.edit_log),
    }


def create_app(
    data_dir: str | Path,
    mel: MelConfig = MelConfig(),
    ui_dir: Optional[str | Path] = None,
) -> FastAPI:
    from contextlib import asynccontextmanager

    store = SessionStore(Path(data_dir))

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        # graceful shutdown (SIGTERM included): flush sessions to disk
        with store.lock:
            store.flush_all()
        logger.info("sessions flushed")

    app = FastAPI(title="bowelsound review service", version=__version__, lifespan=lifespan)
    app.state.store = store

    def get_session(session_id: str) -> ReviewSession:
        try:
            return store.get(session_id)
        except (KeyError, json.JSONDecodeError):
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")

    def clamp_window(session: ReviewSession, t0: float, t1: Optional[float]) -> tuple[float, float]:
        if t1 is None:
            t1 = session.duration_s
        t0 = max(0.0, min(t0, session.duration_s))
        t1 = max(0.0, min(t1, session.duration_s))
        if not (t1 > t0):
            raise HTTPException(status_code=422, detail=f"empty window [{t0}, {t1}]")
        return t0, t1

    @app.get("/health")
    def health() -> dict:
        return {"v": 1, "status": "ok", "version": __version__}

    @app.get("/recordings")
    def recordings() -> dict:
        return {"v": 1, "recordings": store.list_recordings()}

    @app.post("/sessions")
    def create_session(payload: dict) -> dict:
        recording = payload.get("recording")
        quadrant = payload.get("quadrant")
        if not recording or not quadrant:
            raise HTTPException(status_code=422, detail="need recording and quadrant")
        with store.lock:
            try:
                session = store.create_session(str(recording), str(quadrant))
            except (KeyError, FileNotFoundError) as exc:
                raise HTTPException(status_code=404, detail=str(exc))
            except (AudioIOError, LabelTrackError) as exc:
                raise HTTPException(status_code=422, detail=str(exc))
        return _session_payload(session)

    @app.get("/sessions/{session_id}")
    def get_session_state(session_id: str) -> dict:
        return _session_payload(get_session(session_id))

    @app.get("/sessions/{session_id}/audio")
    def audio(
        session_id: str,
        t_from: float = Query(0.0, alias="from"),
        t_to: Optional[float] = Query(None, alias="to"),
    ) -> Response:
        session = get_session(session_id)
        t0, t1 = clamp_window(session, t_from, t_to)
        clip = store.load_recording(session.recording).channels[session.quadrant]
        return Response(content=write_wav_bytes(clip.slice(t0, t1)), media_type="audio/wav")

    @app.get("/sessions/{session_id}/spectrogram")
    def spectrogram(
        session_id: str,
        t_from: float = Query(0.0, alias="from"),
        t_to: Optional[float] = Query(None, alias="to"),
    ) -> dict:
        session = get_session(session_id)
        t0, t1 = clamp_window(session, t_from, t_to)
        clip = store.load_recording(session.recording).channels[session.quadrant]
        piece = clip.slice(t0, t1)
        if len(piece.samples) < mel.win_samples(clip.sample_rate):
            raise HTTPException(status_code=422, detail="window shorter than one mel frame")
        patch = log_mel_spectrogram(piece, mel)
        db = patch * (10.0 / np.log(10.0))  # natural-log mel power -> dB
        hop_s = mel.hop_ms / 1000.0
        return {
            "v": 1,
            "times": [round(t0 + k * hop_s, 6) for k in range(patch.shape[0])],
            "bands": [round(float(f), 2) for f in band_center_freqs(mel, clip.sample_rate)],
            "values_db": [[round(float(v), 2) for v in row] for row in db],
        }

    @app.post("/sessions/{session_id}/edits")
    def post_edit(session_id: str, payload: dict) -> dict:
        session = get_session(session_id)
        if "revision" not in payload or "edit" not in payload:
            raise HTTPException(status_code=422, detail="need revision and edit")
        with store.lock:
            try:
                session.apply_edit(dict(payload["edit"]), int(payload["revision"]))
            except SessionStateError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            except EditError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            store.persist(session)
        return _session_payload(session)

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    @app.post("/sessions/{session_id}/finish")
    def finish_session(session_id: str, payload: Optional[dict] = None) -> dict:
        session = get_session(session_id)
        baseline = payload.get("manual_baseline_s") if payload else None
        with store.lock:
            try:
                report = session.finish(manual_baseline_s=baseline)
            except SessionStateError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            store.persist(session)
            stem = Path(session.recording).stem
            expert_path = store.data_dir / f"{stem}.{session.quadrant}.expert.labels.txt"
            expert_path.write_text(write_label_track(session.working_track()))
        doc = report.to_dict()
        doc["session_id"] = session.session_id
        doc["expert_labels_file"] = expert_path.name
        return doc

    return app
