"""HTTP session service for interactive editing.

Holds image/mask/recipe state per session, runs optimization jobs in a
background thread, and renders interpolated previews.  All pixel math goes
through the same library calls as the CLI, so a render at matching alpha
and resolution is byte-identical to `salshift apply`.
"""

from __future__ import annotations

import hashlib
import json
import secrets
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Form, Request, Response, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import __version__
from .errors import SalshiftError
from .fileio import decode_png, encode_pgm, encode_png
from .imaging import (
    EditRecipe,
    MaskLayer,
    MAX_INTERPOLATION_ALPHA,
    RasterImage,
    fit_max_dimension,
    identity_recipe,
    luminance,
    render_edit,
    resize_bilinear,
)
from .metrics import compute_report
from .optimizer import ObjectiveConfig, OptimizerConfig, multi_style, optimize
from .recipes import parse_recipe, serialize_recipe
from .saliency import compute_proxy_saliency

DEFAULT_UPLOAD_LIMIT = 32 * 1024 * 1024
DEFAULT_SESSION_TTL = 3600.0
DEFAULT_PREVIEW_DIM = 512
_RENDER_CACHE_SIZE = 32


@dataclass
class ServiceConfig:
    upload_limit: int = DEFAULT_UPLOAD_LIMIT
    session_ttl: float = DEFAULT_SESSION_TTL
    static_dir: str | None = None
    persist_dir: str | None = None
    optimizer_workers: int = 1


@dataclass
class Session:
    id: str
    image: RasterImage
    mask: MaskLayer
    recipe: EditRecipe | None = None
    styles: list = field(default_factory=list)
    job_status: str = "idle"  # idle | running | done | failed
    job_message: str = ""
    created: float = field(default_factory=time.monotonic)
    touched: float = field(default_factory=time.monotonic)
    lock: threading.RLock = field(default_factory=threading.RLock)
    render_cache: OrderedDict = field(default_factory=OrderedDict)
    scaled_cache: dict = field(default_factory=dict)

    def params_hash(self) -> str:
        doc = serialize_recipe(self.recipe or identity_recipe())
        canonical = json.dumps(doc, sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()


class SessionStore:
    """In-memory sessions with optional directory-backed persistence.

    With a persist directory, uploads and the current recipe are written
    under <dir>/<session id>/ and sessions survive process restarts; only
    the editing state persists, never job status or caches.
    """

    def __init__(self, ttl: float, persist_dir: str | None = None):
        self._ttl = ttl
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}
        self._persist = Path(persist_dir) if persist_dir else None

    def create(self, image: RasterImage, mask: MaskLayer) -> Session:
        session = Session(id=secrets.token_hex(16), image=image, mask=mask)
        with self._lock:
            self._purge()
            self._sessions[session.id] = session
        if self._persist is not None:
            folder = self._persist / session.id
            folder.mkdir(parents=True, exist_ok=True)
            (folder / "image.png").write_bytes(encode_png(image))
            (folder / "mask.png").write_bytes(
                encode_png(RasterImage(np.repeat(mask.weights[..., None], 3, axis=2)))
            )
        return session

    def persist_recipe(self, session: Session) -> None:
        if self._persist is None:
            return
        folder = self._persist / session.id
        if folder.is_dir() and session.recipe is not None:
            (folder / "params.json").write_text(
                json.dumps(serialize_recipe(session.recipe), indent=2)
            )

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            self._purge()
            session = self._sessions.get(session_id)
            if session is not None:
                session.touched = time.monotonic()
                return session
        return self._revive(session_id)

    def _revive(self, session_id: str) -> Session | None:
        if self._persist is None or not session_id.isalnum():
            return None
        folder = self._persist / session_id
        if not (folder / "image.png").is_file():
            return None
        image = decode_png((folder / "image.png").read_bytes())
        mask = MaskLayer(decode_png((folder / "mask.png").read_bytes()).data[..., 0])
        session = Session(id=session_id, image=image, mask=mask)
        params_file = folder / "params.json"
        if params_file.is_file():
            session.recipe = parse_recipe(params_file.read_text())
            session.job_status = "done"
        with self._lock:
            self._sessions[session_id] = session
        return session

    def _purge(self) -> None:
        now = time.monotonic()
        expired = [
            sid
            for sid, s in self._sessions.items()
            if now - s.touched > self._ttl and s.job_status != "running"
        ]
        for sid in expired:
            del self._sessions[sid]


def _error(status: int, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": detail})


def _deep_merge(base: dict, patch: dict) -> dict:
    merged = dict(base)
    for key, value in patch.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    store = SessionStore(config.session_ttl, config.persist_dir)
    app = FastAPI(title="salshift", version=__version__)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.store = store
    app.state.config = config

    # -- session lifecycle ---------------------------------------------------

    @app.post("/sessions", status_code=201)
    async def create_session(
        image: UploadFile, mask: UploadFile, resize_mask: bool = Form(False)
    ):
        image_bytes = await image.read(config.upload_limit + 1)
        mask_bytes = await mask.read(config.upload_limit + 1)
        if len(image_bytes) > config.upload_limit or len(mask_bytes) > config.upload_limit:
            return _error(413, f"upload exceeds {config.upload_limit} bytes")
        try:
            raster = decode_png(image_bytes)
        except SalshiftError as exc:
            return _error(400, f"image: {exc}")
        try:
            mask_raster = decode_png(mask_bytes)
        except SalshiftError as exc:
            return _error(400, f"mask: {exc}")
        channels = mask_raster.data
        if np.array_equal(channels[..., 0], channels[..., 1]) and np.array_equal(
            channels[..., 0], channels[..., 2]
        ):
            weights = channels[..., 0]
        else:
            weights = luminance(mask_raster)
        if weights.shape != raster.data.shape[:2]:
            if not resize_mask:
                return _error(
                    400,
                    "mask: dimensions do not match the image "
                    f"({weights.shape[1]}x{weights.shape[0]} vs "
                    f"{raster.width}x{raster.height}); pass resize_mask=true",
                )
            weights = np.clip(
                resize_bilinear(weights, raster.height, raster.width), 0.0, 1.0
            )
        session = store.create(raster, MaskLayer(weights))
        return {"id": session.id}

    @app.get("/sessions/{session_id}")
    def session_info(session_id: str):
        session = store.get(session_id)
        if session is None:
            return _error(404, "unknown session")
        with session.lock:
            return {
                "id": session.id,
                "width": session.image.width,
                "height": session.image.height,
                "job": session.job_status,
                "message": session.job_message,
                "has_recipe": session.recipe is not None,
                "styles": len(session.styles),
            }

    # -- optimization jobs ----------------------------------------------------

    @app.post("/sessions/{session_id}/optimize", status_code=202)
    async def start_optimize(session_id: str, request: Request):
        session = store.get(session_id)
        if session is None:
            return _error(404, "unknown session")
        try:
            body = await request.json()
        except Exception:
            body = {}
        mode = body.get("mode", "increase")
        iters = int(body.get("iters", 100))
        seed = int(body.get("seed", 0))
        styles = int(body.get("styles", 1))
        if mode not in ("increase", "decrease"):
            return _error(422, "mode: must be 'increase' or 'decrease'")
        if iters < 1 or styles < 1:
            return _error(422, "iters and styles must be >= 1")
        with session.lock:
            if session.job_status == "running":
                return _error(409, "an optimization job is already running")
            session.job_status = "running"
            session.job_message = ""

        def run_job():
            try:
                obj_cfg = ObjectiveConfig(mode=mode)
                opt_cfg = OptimizerConfig(
                    iterations=iters, seed=seed, workers=config.optimizer_workers
                )
                if styles > 1:
                    recipes = multi_style(
                        session.image, session.mask, styles, seed, obj_cfg, opt_cfg
                    )
                else:
                    recipes = [optimize(session.image, session.mask, obj_cfg, opt_cfg)]
                with session.lock:
                    session.styles = recipes
                    session.recipe = recipes[0]
                    session.render_cache.clear()
                    session.job_status = "done"
                store.persist_recipe(session)
            except Exception as exc:
                with session.lock:
                    session.job_status = "failed"
                    session.job_message = str(exc)

        threading.Thread(target=run_job, daemon=True).start()
        return {"job": "running"}

    # -- parameters -------------------------------------------------------

    @app.get("/sessions/{session_id}/params")
    def get_params(session_id: str):
        session = store.get(session_id)
        if session is None:
            return _error(404, "unknown session")
        with session.lock:
            return serialize_recipe(session.recipe or identity_recipe())

    @app.patch("/sessions/{session_id}/params")
    def patch_params(session_id: str, patch: dict):
        session = store.get(session_id)
        if session is None:
            return _error(404, "unknown session")
        with session.lock:
            current = serialize_recipe(session.recipe or identity_recipe())
            merged = _deep_merge(current, patch)
            try:
                session.recipe = parse_recipe(merged)
            except SalshiftError as exc:
                return _error(422, str(exc))
            session.render_cache.clear()
        store.persist_recipe(session)
        return {"ok": True}

    # -- rendering ----------------------------------------------------------

    def _scaled_inputs(session: Session, max_dim: int):
        cached = session.scaled_cache.get(max_dim)
        if cached is None:
            h, w = fit_max_dimension(session.image.height, session.image.width, max_dim)
            image = RasterImage(resize_bilinear(session.image.data, h, w))
            mask = MaskLayer(np.clip(resize_bilinear(session.mask.weights, h, w), 0.0, 1.0))
            cached = (image, mask)
            session.scaled_cache[max_dim] = cached
        return cached

    @app.get("/sessions/{session_id}/render")
    def render(session_id: str, alpha: float = 1.0, max_dim: int = DEFAULT_PREVIEW_DIM):
        session = store.get(session_id)
        if session is None:
            return _error(404, "unknown session")
        if not 0.0 <= alpha <= MAX_INTERPOLATION_ALPHA:
            return _error(422, f"alpha: must lie in [0, {MAX_INTERPOLATION_ALPHA}]")
        if max_dim < 1:
            return _error(422, "max_dim: must be positive")
        with session.lock:
            if session.recipe is None and alpha != 0.0:
                return _error(409, "no recipe yet; optimize first or render alpha=0")
            recipe = (session.recipe or identity_recipe()).copy()
            key = (alpha, session.params_hash(), max_dim)
            cached = session.render_cache.get(key)
            if cached is not None:
                session.render_cache.move_to_end(key)
                return Response(content=cached, media_type="image/png")
            image, mask = _scaled_inputs(
                session, min(max_dim, max(session.image.height, session.image.width))
            )
        rendered = render_edit(image, mask, recipe, alpha)
        payload = encode_png(rendered)
        with session.lock:
            session.render_cache[key] = payload
            while len(session.render_cache) > _RENDER_CACHE_SIZE:
                session.render_cache.popitem(last=False)
        return Response(content=payload, media_type="image/png")

    # -- saliency / metrics ---------------------------------------------------

    @app.get("/sessions/{session_id}/saliency")
    def saliency(session_id: str, stage: str = "before"):
        session = store.get(session_id)
        if session is None:
            return _error(404, "unknown session")
        if stage not in ("before", "after"):
            return _error(422, "stage: must be 'before' or 'after'")
        with session.lock:
            if stage == "after" and session.recipe is None:
                return _error(409, "no recipe yet")
            image = session.image
            recipe = session.recipe
        if stage == "after":
            image = render_edit(session.image, session.mask, recipe)
        saliency_map = compute_proxy_saliency(image)
        return Response(
            content=encode_pgm(saliency_map.values, maxval=255),
            media_type="image/x-portable-graymap",
        )

    @app.get("/sessions/{session_id}/metrics")
    def metrics(session_id: str):
        session = store.get(session_id)
        if session is None:
            return _error(404, "unknown session")
        with session.lock:
            if session.recipe is None:
                return _error(409, "no recipe yet")
            recipe = session.recipe.copy()
        edited = render_edit(session.image, session.mask, recipe)
        try:
            report = compute_report(
                session.image,
                edited,
                session.mask,
                compute_proxy_saliency(session.image),
                compute_proxy_saliency(edited),
            )
        except SalshiftError as exc:
            return _error(422, str(exc))
        return report.to_row()

    if config.static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="ui")

    return app
