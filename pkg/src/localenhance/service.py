"""HTTP service hosting crowd-driven enhancement sessions.

Workers receive microtasks bundling up to five sessions' current sliders
plus one check slider, previews render server-side, and each step advances
on the median of the configured number of accepted responses.  All state
persists under a data directory so a restart resumes mid-session with no
lost responses.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, Form, HTTPException, Request, Response, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .imaging import (
    Image,
    ImagingError,
    apply_param_map,
    encode_png,
    global_map,
    image_from_bytes,
    resize_for_preview,
)
from .orchestrator import (
    EnhanceConfig,
    EnhanceSession,
    aggregate_responses,
    config_from_dict,
    config_to_dict,
    validate_check,
)

DEFAULT_BUNDLE_SIZE = 5
DEFAULT_CHECK_RANGE = (0.25, 0.75)
CHECK_EDGE = 256


@dataclass(frozen=True)
class ServiceConfig:
    data_dir: str = "./sessions"
    check_range: tuple = DEFAULT_CHECK_RANGE
    bundle_size: int = DEFAULT_BUNDLE_SIZE
    seed: int = 0
    static_dir: Optional[str] = None

    def __post_init__(self):
        lo, hi = self.check_range
        if not (0.0 <= lo < hi <= 1.0):
            raise ValueError("check_range must satisfy 0 <= lower < upper <= 1")
        if self.bundle_size < 1:
            raise ValueError("bundle_size must be >= 1")


def make_check_image(width: int = 96, height: int = 64) -> Image:
    """Deterministic mid-exposed test card for the check slider."""
    xs = np.linspace(0.0, 1.0, width)
    ys = np.linspace(0.0, 1.0, height)
    xx, yy = np.meshgrid(xs, ys)
    grid = np.stack(
        [
            0.35 + 0.3 * xx,
            0.35 + 0.3 * yy,
            0.5 + 0.2 * np.sin(6.0 * xx) * np.cos(4.0 * yy),
        ],
        axis=2,
    )
    return Image.from_pixels(np.clip(grid, 0.0, 1.0))


def render_check(image: Image, alpha: float, max_edge: int) -> Image:
    """Check slider sweeps global brightness from -1 (alpha 0) to +1."""
    small = resize_for_preview(image, max_edge)
    pmap = global_map((2.0 * alpha - 1.0, 0.0, 0.0), small.n_pixels)
    return apply_param_map(small, pmap)


def effective_alpha(alpha: float, reversed_flag: bool) -> float:
    return 1.0 - alpha if reversed_flag else alpha


def assignment_layout(
    seed: int, worker: str, microtask_id: str, n_targets: int
) -> tuple[int, list[bool]]:
    """Seeded check-slot position and per-slot reversal flags.

    Deterministic in (seed, worker, microtask id), so an assignment can be
    re-derived instead of stored, and an idempotent re-poll reproduces it.
    """
    digest = hashlib.sha256(
        f"{seed}|{worker}|{microtask_id}".encode()
    ).digest()
    n_slots = n_targets + 1
    check_pos = digest[0] % n_slots
    flags = [bool(digest[1 + i] & 1) for i in range(n_slots)]
    return check_pos, flags


def _merge_config(overlay: Optional[dict]) -> EnhanceConfig:
    """Partial config document merged over defaults, one nesting level."""
    base = config_to_dict(EnhanceConfig())
    for key, value in (overlay or {}).items():
        if key not in base:
            raise ValueError(f"unknown config field: {key}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ValueError(f"config field {key} must be an object")
            unknown = set(value) - set(base[key])
            if unknown:
                raise ValueError(f"unknown config field: {key}.{unknown.pop()}")
            base[key] = {**base[key], **value}
        else:
            base[key] = value
    return config_from_dict(base)


@dataclass
class HostedSession:
    """One enhancement session plus the service-side collection state."""

    session_id: str
    engine: EnhanceSession
    created: int
    status: str = "collecting"  # collecting | done
    responses: list = field(default_factory=list)  # accepted (worker, alpha)

    def progress(self) -> dict:
        total = self.engine.total_steps
        info = {
            "session_id": self.session_id,
            "status": self.status,
            "total_steps": total,
            "n_sliders": self.engine.cfg.n_sliders,
            "n_key_pixels": self.engine.cfg.n_key_pixels,
            "width": self.engine.work.width,
            "height": self.engine.work.height,
            "responses_per_slider": self.engine.cfg.responses_per_slider,
        }
        if self.status == "collecting":
            s, l = self.engine.current_round()
            info.update(
                s=s,
                l=l,
                step=self.engine.step_index + 1,
                accepted_responses=len(self.responses),
            )
        else:
            info.update(s=None, l=None, step=total, accepted_responses=0)
        return info


class ServiceState:
    """All hosted sessions plus worker bookkeeping, persisted in data_dir.

    A single lock serializes every mutation; previews also render under it
    because first use of a preview size fills a per-session cache.
    """

    def __init__(self, cfg: ServiceConfig):
        self.cfg = cfg
        self.lock = threading.RLock()
        self.sessions: dict[str, HostedSession] = {}
        self.assigned: dict[str, dict[str, list]] = {}  # worker -> mt -> slots
        self.submitted: dict[str, list[str]] = {}  # worker -> microtask ids
        self.counter = 0
        self.check_image = make_check_image()
        self.root = Path(cfg.data_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self._load()

    # -- persistence -----------------------------------------------------

    def _service_path(self) -> Path:
        return self.root / "service.json"

    def session_dir(self, session_id: str) -> Path:
        return self.root / session_id

    @staticmethod
    def _atomic_write(path: Path, blob: bytes):
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(blob)
        os.replace(tmp, path)

    def persist_service(self):
        doc = {
            "counter": self.counter,
            "assigned": self.assigned,
            "submitted": self.submitted,
        }
        self._atomic_write(
            self._service_path(), json.dumps(doc, sort_keys=True).encode()
        )

    def persist_session(self, hosted: HostedSession):
        doc = {
            "engine": hosted.engine.to_state_dict(),
            "status": hosted.status,
            "created": hosted.created,
            "responses": [[w, a] for w, a in hosted.responses],
        }
        self._atomic_write(
            self.session_dir(hosted.session_id) / "state.json",
            json.dumps(doc, sort_keys=True).encode(),
        )

    def _load(self):
        if self._service_path().exists():
            doc = json.loads(self._service_path().read_text())
            self.counter = int(doc["counter"])
            self.assigned = {
                w: {m: list(s) for m, s in t.items()}
                for w, t in doc["assigned"].items()
            }
            self.submitted = {w: list(v) for w, v in doc["submitted"].items()}
        for child in sorted(self.root.iterdir()):
            state_path = child / "state.json"
            work_path = child / "work.npy"
            if not (child.is_dir() and state_path.exists() and work_path.exists()):
                continue
            doc = json.loads(state_path.read_text())
            work = Image.from_pixels(np.load(work_path))
            engine = EnhanceSession.from_state_dict(work, doc["engine"])
            self.sessions[child.name] = HostedSession(
                session_id=child.name,
                engine=engine,
                created=int(doc["created"]),
                status=doc["status"],
                responses=[(w, float(a)) for w, a in doc["responses"]],
            )

    # -- session lifecycle -------------------------------------------------

    def create_session(self, image: Image, cfg: EnhanceConfig) -> str:
        with self.lock:
            self.counter += 1
            session_id = f"s{self.counter:06d}"
            sdir = self.session_dir(session_id)
            sdir.mkdir(parents=True, exist_ok=True)
            self._atomic_write(sdir / "input.png", encode_png(image))
            engine = EnhanceSession(image, cfg, session_id)
            # work image persists losslessly: restart re-derives everything
            # else (features, weights) bit-identically from it
            np.save(sdir / "work.npy", engine.work.pixels())
            hosted = HostedSession(session_id, engine, created=self.counter)
            self.sessions[session_id] = hosted
            self.persist_session(hosted)
            self.persist_service()
            return session_id

    def get(self, session_id: str) -> HostedSession:
        hosted = self.sessions.get(session_id)
        if hosted is None:
            raise HTTPException(404, "unknown session")
        return hosted

    def collecting(self) -> list[HostedSession]:
        live = [h for h in self.sessions.values() if h.status == "collecting"]
        return sorted(live, key=lambda h: h.created)

    # -- microtasks ---------------------------------------------------------

    def composition(self) -> list[tuple[str, int]]:
        """Current bundle: oldest collecting sessions, capped at bundle_size."""
        live = self.collecting()[: self.cfg.bundle_size]
        return [(h.session_id, h.engine.step_index) for h in live]

    @staticmethod
    def microtask_id(composition: list) -> str:
        text = "|".join(f"{sid}:{step}" for sid, step in composition)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def microtask_for(self, worker: str) -> dict:
        with self.lock:
            comp = self.composition()
            if not comp:
                raise HTTPException(404, "no work available")
            mt_id = self.microtask_id(comp)
            if mt_id in self.submitted.get(worker, []):
                raise HTTPException(404, "no work available")
            check_pos, flags = assignment_layout(
                self.cfg.seed, worker, mt_id, len(comp)
            )
            slots = []
            targets = iter(comp)
            for pos in range(len(comp) + 1):
                if pos == check_pos:
                    slots.append(
                        {
                            "kind": "check",
                            "reversed": flags[pos],
                            "preview_path": "/check/preview",
                        }
                    )
                    continue
                sid, step = next(targets)
                hosted = self.sessions[sid]
                s, l = hosted.engine.current_round()
                slots.append(
                    {
                        "kind": "target",
                        "session_id": sid,
                        "step": step + 1,
                        "s": s,
                        "l": l,
                        "reversed": flags[pos],
                        "preview_path": f"/sessions/{sid}/preview",
                    }
                )
            # the public slot dicts double as the assignment record: they
            # carry kind, session, 1-based step, and reversal flag
            self.assigned.setdefault(worker, {})[mt_id] = slots
            self.persist_service()
            return {"microtask_id": mt_id, "worker": worker, "slots": slots}

    # -- responses -----------------------------------------------------------

    def submit_response(self, worker: str, mt_id: str, alphas: list) -> str:
        with self.lock:
            tasks = self.assigned.get(worker, {})
            if mt_id not in tasks:
                raise HTTPException(404, "unknown assignment")
            if mt_id in self.submitted.get(worker, []):
                raise HTTPException(409, "duplicate submission")
            slots = tasks[mt_id]
            if len(alphas) != len(slots):
                raise HTTPException(400, "expected one alpha per slot")
            if any(not 0.0 <= float(a) <= 1.0 for a in alphas):
                raise HTTPException(400, "alphas must be in [0,1]")

            effective = [
                effective_alpha(float(a), slot["reversed"])
                for a, slot in zip(alphas, slots)
            ]
            self.submitted.setdefault(worker, []).append(mt_id)

            check_idx = next(
                i for i, slot in enumerate(slots) if slot["kind"] == "check"
            )
            if not validate_check(effective[check_idx], self.cfg.check_range):
                # discarded wholesale: the step keeps collecting until it
                # reaches its accepted count, which redeploys the capacity
                self.persist_service()
                return "rejected"

            for slot, alpha in zip(slots, effective):
                if slot["kind"] != "target":
                    continue
                hosted = self.sessions.get(slot["session_id"])
                if hosted is None or hosted.status != "collecting":
                    continue
                if hosted.engine.step_index != slot["step"] - 1:
                    continue  # stale: the step advanced since assignment
                if any(w == worker for w, _ in hosted.responses):
                    continue  # never double-count one worker on one step
                hosted.responses.append((worker, alpha))
                if len(hosted.responses) >= hosted.engine.cfg.responses_per_slider:
                    self._advance(hosted)
                self.persist_session(hosted)
            self.persist_service()
            return "accepted"

    def _advance(self, hosted: HostedSession):
        alpha_star = aggregate_responses([a for _, a in hosted.responses])
        hosted.engine.submit(alpha_star)
        hosted.responses = []
        if hosted.engine.done:
            self._finalize(hosted)

    def _finalize(self, hosted: HostedSession):
        result, pmap = hosted.engine.result()
        sdir = self.session_dir(hosted.session_id)
        self._atomic_write(sdir / "result.png", encode_png(result))
        rows = ["p_brightness,p_saturation,p_contrast"]
        rows += [f"{repr(r[0])},{repr(r[1])},{repr(r[2])}" for r in pmap]
        self._atomic_write(sdir / "params.csv", ("\n".join(rows) + "\n").encode())
        hosted.status = "done"

    # -- previews --------------------------------------------------------------

    def session_preview(
        self, session_id: str, alpha: float, reversed_flag: bool, max_edge: int
    ) -> bytes:
        with self.lock:
            hosted = self.get(session_id)
            if hosted.status != "collecting":
                raise HTTPException(409, "session is not collecting")
            a = effective_alpha(alpha, reversed_flag)
            return encode_png(hosted.engine.render_at(a, max_edge))

    def check_preview(
        self, alpha: float, reversed_flag: bool, max_edge: int
    ) -> bytes:
        a = effective_alpha(alpha, reversed_flag)
        return encode_png(render_check(self.check_image, a, max_edge))


class ResponseSubmission(BaseModel):
    worker: str
    microtask_id: str
    alphas: list[float]


def _read_file(path: Path, media_type: str) -> Response:
    if not path.exists():
        raise HTTPException(404, "artifact not found")
    return Response(content=path.read_bytes(), media_type=media_type)


def _check_alpha(alpha: float):
    if not 0.0 <= alpha <= 1.0:
        raise HTTPException(400, "alpha must be in [0,1]")


def _check_edge(max_edge: int):
    if max_edge < 1:
        raise HTTPException(400, "max_edge must be >= 1")


def create_app(cfg: ServiceConfig) -> FastAPI:
    state = ServiceState(cfg)
    app = FastAPI(title="localenhance session service")
    app.state.service = state

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.post("/sessions")
    async def create_session(
        image: UploadFile, config: Optional[str] = Form(default=None)
    ):
        blob = await image.read()
        try:
            decoded = image_from_bytes(blob)
            overlay = json.loads(config) if config else None
            session_cfg = _merge_config(overlay)
            session_id = state.create_session(decoded, session_cfg)
        except (ImagingError, ValueError, TypeError, KeyError) as exc:
            raise HTTPException(400, f"invalid image or config: {exc}")
        return {"session_id": session_id}

    @app.get("/sessions")
    def list_sessions():
        with state.lock:
            ordered = sorted(state.sessions.values(), key=lambda h: h.created)
            return {"sessions": [h.progress() for h in ordered]}

    @app.get("/sessions/{session_id}")
    def session_status(session_id: str):
        with state.lock:
            return state.get(session_id).progress()

    @app.get("/sessions/{session_id}/preview")
    def session_preview(
        session_id: str,
        alpha: float,
        reversed: bool = False,
        max_edge: int = 512,
    ):
        _check_alpha(alpha)
        _check_edge(max_edge)
        blob = state.session_preview(session_id, alpha, reversed, max_edge)
        return Response(content=blob, media_type="image/png")

    @app.get("/sessions/{session_id}/input")
    def session_input(session_id: str):
        state.get(session_id)
        return _read_file(
            state.session_dir(session_id) / "input.png", "image/png"
        )

    @app.get("/sessions/{session_id}/result.png")
    def session_result_png(session_id: str):
        state.get(session_id)
        return _read_file(
            state.session_dir(session_id) / "result.png", "image/png"
        )

    @app.get("/sessions/{session_id}/params.csv")
    def session_params_csv(session_id: str):
        state.get(session_id)
        return _read_file(
            state.session_dir(session_id) / "params.csv", "text/csv"
        )

    @app.get("/sessions/{session_id}/result")
    def session_result(session_id: str):
        with state.lock:
            hosted = state.get(session_id)
            info = hosted.progress()
            if hosted.status != "done":
                return info
            info.update(
                result_path=f"/sessions/{session_id}/result.png",
                param_map_path=f"/sessions/{session_id}/params.csv",
                input_path=f"/sessions/{session_id}/input",
                trace=[
                    {"step": r.step, "s": r.s, "l": r.l, "alpha": r.alpha,
                     "score": r.score}
                    for r in hosted.engine.trace
                ],
            )
            return info

    @app.get("/microtask")
    def microtask(worker: str):
        if not worker:
            raise HTTPException(400, "worker token required")
        return state.microtask_for(worker)

    @app.get("/check/preview")
    def check_preview(alpha: float, reversed: bool = False, max_edge: int = 512):
        _check_alpha(alpha)
        _check_edge(max_edge)
        blob = state.check_preview(alpha, reversed, max_edge)
        return Response(content=blob, media_type="image/png")

    @app.post("/responses")
    def responses(body: ResponseSubmission):
        status = state.submit_response(
            body.worker, body.microtask_id, body.alphas
        )
        return {"status": status}

    if cfg.static_dir and Path(cfg.static_dir).is_dir():
        app.mount(
            "/ui", StaticFiles(directory=cfg.static_dir, html=True), name="ui"
        )

    return app
