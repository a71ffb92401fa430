"""Local HTTP generation service.

Serves the trained checkpoints over three JSON endpoints so a browser
sketchpad (or plain curl) can request terrain without touching the CLI:

    POST /api/generate        enqueue a job   -> 202 {"job_id": ...}
    GET  /api/generate/{id}   poll a job      -> 200 status, images when done
    GET  /api/health          readiness probe -> 200 {model_loaded, checkpoint_hash}

Generation runs on a single background worker thread draining a bounded
FIFO queue, so inference is serialized and memory stays flat no matter
how many requests arrive at once. Jobs are reproducible: identical
(sketch, seed, steps) requests yield byte-identical PNG payloads.
"""
from __future__ import annotations

import base64
import binascii
import hashlib
import io
import json
import os
import queue
import threading
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from PIL import Image, UnidentifiedImageError

from .checkpoint import read_checkpoint
from .config import rng_stream
from .control import ConditionRaster, ControlAdapter, conditional_sample, decode_pair, load_adapter
from .diffusion import DenoiserModel, NoiseSchedule, make_schedule, strided_sample
from .latent import LatentGrid, VaeModel, load_vae
from .raster import heightmap_png_bytes, texture_png_bytes

__all__ = [
    "GenerationJob",
    "GenerationService",
    "ModelUnavailableError",
    "QueueFullError",
    "create_app",
    "run_service",
]


class QueueFullError(Exception):
    """The job queue is at capacity; the client should retry later."""


class ModelUnavailableError(Exception):
    """A checkpoint the requested generation needs is missing."""


# Legal state moves; anything else is a server bug, not an input error.
_TRANSITIONS = {"queued": ("running",), "running": ("done", "failed")}


@dataclass
class GenerationJob:
    """One queued generation request and, eventually, its outcome."""

    id: str
    state: str  # queued -> running -> done | failed
    steps: int
    seed: int
    sketch: np.ndarray | None  # HxWx3 uint8; None requests unconditional output
    error: str | None = None
    heightmap_png: bytes | None = None
    texture_png: bytes | None = None


@dataclass(frozen=True)
class _Bundle:
    """Everything inference needs, loaded once at service construction."""

    vae_h: VaeModel
    vae_x: VaeModel
    model: DenoiserModel
    schedule: NoiseSchedule
    scales: dict
    adapter: ControlAdapter | None
    checkpoint_hash: str


def _load_bundle(config: dict) -> _Bundle | None:
    """Load both VAEs, the denoiser and (if present) the adapter.

    Returns None when any required checkpoint file is absent; the
    adapter alone is optional since unconditional sampling works
    without it.
    """
    paths = config["paths"]
    required = (paths["vae_heightmap"], paths["vae_texture"], paths["ldm"])
    if not all(os.path.exists(p) for p in required):
        return None
    vae_h = load_vae(paths["vae_heightmap"])
    vae_x = load_vae(paths["vae_texture"])
    base_ckpt = read_checkpoint(paths["ldm"])
    model = DenoiserModel.from_checkpoint(base_ckpt)
    sched = base_ckpt.metadata["schedule"]
    schedule = make_schedule(int(sched["timesteps"]), float(sched["beta_start"]),
                             float(sched["beta_end"]))
    scales = {k: float(v) for k, v in base_ckpt.metadata["latent_scale"].items()}
    adapter = None
    if os.path.exists(paths["adapter"]):
        adapter = load_adapter(paths["adapter"], base_ckpt)
    with open(paths["ldm"], "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    return _Bundle(vae_h=vae_h, vae_x=vae_x, model=model, schedule=schedule,
                   scales=scales, adapter=adapter, checkpoint_hash=digest)


class GenerationService:
    """Job table, bounded FIFO queue and model bundle behind the endpoints.

    ``start_worker=False`` leaves the queue undrained so an embedder (or a
    test) can step jobs explicitly with :meth:`process_next`.
    """

    def __init__(self, config: dict, *, start_worker: bool = True):
        service_cfg = config["service"]
        self.config = config
        self.resolution_px = int(service_cfg["resolution_px"])
        self.default_steps = int(service_cfg["default_steps"])
        self._bundle = _load_bundle(config)
        self._jobs: dict[str, GenerationJob] = {}
        self._lock = threading.Lock()
        self._queue: queue.Queue = queue.Queue(maxsize=int(service_cfg["queue_depth"]))
        self._worker: threading.Thread | None = None
        if start_worker:
            self._worker = threading.Thread(target=self._drain, name="terradiff-sampler",
                                            daemon=True)
            self._worker.start()

    @property
    def model_loaded(self) -> bool:
        return self._bundle is not None

    @property
    def checkpoint_hash(self) -> str | None:
        """Digest of the denoiser checkpoint file, None when not loaded."""
        return self._bundle.checkpoint_hash if self._bundle is not None else None

    # -- intake --------------------------------------------------------------------------

    def submit(self, sketch: np.ndarray | None, steps: int, seed: int) -> str:
        """Enqueue a job, returning its id.

        Raises ModelUnavailableError when the needed checkpoints are not
        loaded and QueueFullError when the FIFO is at capacity.
        """
        if self._bundle is None:
            raise ModelUnavailableError(
                "no trained checkpoints are loaded; train models and restart the service")
        if sketch is not None and self._bundle.adapter is None:
            raise ModelUnavailableError(
                "sketch conditioning requires a trained adapter checkpoint")
        job = GenerationJob(id=str(uuid.uuid4()), state="queued", steps=steps,
                            seed=seed, sketch=sketch)
        with self._lock:
            self._jobs[job.id] = job
        try:
            self._queue.put_nowait(job.id)
        except queue.Full:
            with self._lock:  # never leave an orphaned job that no worker will run
                del self._jobs[job.id]
            raise QueueFullError(
                f"job queue is full ({self._queue.maxsize} pending); retry later") from None
        return job.id

    def snapshot(self, job_id: str) -> dict | None:
        """Consistent copy of a job; a done state always carries its images."""
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                return None
            return {
                "id": job.id,
                "state": job.state,
                "steps": job.steps,
                "seed": job.seed,
                "error": job.error,
                "heightmap_png": job.heightmap_png,
                "texture_png": job.texture_png,
            }

    # -- execution -----------------------------------------------------------------------

    def _transition(self, job_id: str, new_state: str, *, error: str | None = None,
                    result: tuple[bytes, bytes] | None = None) -> None:
        with self._lock:
            job = self._jobs[job_id]
            if new_state not in _TRANSITIONS.get(job.state, ()):
                raise RuntimeError(f"invalid job transition {job.state} -> {new_state}")
            job.state = new_state
            if error is not None:
                job.error = error
            if result is not None:
                # result lands in the same critical section as state=done, so a
                # concurrent poll can never observe a torn half-result
                job.heightmap_png, job.texture_png = result

    def process_next(self, block: bool = False) -> bool:
        """Run the next queued job on the calling thread.

        Returns True after finishing one job (even a failed one), False when
        the queue is empty or the shutdown sentinel arrives.
        """
        try:
            item = self._queue.get(block=block)
        except queue.Empty:
            return False
        if item is None:
            return False
        self._transition(item, "running")
        with self._lock:
            job = self._jobs[item]
            sketch, steps, seed = job.sketch, job.steps, job.seed
        try:
            result = self._generate(sketch, steps, seed)
        except Exception as exc:  # a bad job must not kill the worker
            self._transition(item, "failed", error=f"{type(exc).__name__}: {exc}")
            return True
        self._transition(item, "done", result=result)
        return True

    def _drain(self) -> None:
        while self.process_next(block=True):
            pass

    def shutdown(self) -> None:
        """Stop the worker after it finishes the jobs already queued."""
        if self._worker is not None:
            self._queue.put(None)
            self._worker.join(timeout=60)
            self._worker = None

    def _generate(self, sketch: np.ndarray | None, steps: int, seed: int) -> tuple[bytes, bytes]:
        bundle = self._bundle
        rng = rng_stream(seed, "sample/0")  # same stream as the CLI's first sample
        resolution_m = float(self.config["dataset"]["resolution_m"])
        max_elev = float(self.config["vae"]["max_elevation_m"])
        if sketch is not None:
            cond = ConditionRaster(values=sketch, kind="sketch")
            hm, tex = conditional_sample(bundle.adapter.base, bundle.adapter, cond,
                                         steps=steps, rng=rng,
                                         vae_h=bundle.vae_h, vae_x=bundle.vae_x,
                                         max_elevation_m=max_elev, resolution_m=resolution_m)
        else:
            f, c = bundle.vae_h.f, bundle.vae_h.c
            shape = (self.resolution_px // f, self.resolution_px // f, c)
            zh, zx = strided_sample(bundle.model, bundle.schedule, shape,
                                    steps=steps, rng=rng)
            hm, tex = decode_pair(
                LatentGrid(values=zh.values / bundle.scales["heightmap"],
                           provenance="heightmap"),
                LatentGrid(values=zx.values / bundle.scales["texture"],
                           provenance="texture"),
                bundle.vae_h, bundle.vae_x,
                max_elevation_m=max_elev, resolution_m=resolution_m)
        return heightmap_png_bytes(hm), texture_png_bytes(tex.values)


def _decode_sketch(encoded: str, resolution_px: int) -> np.ndarray:
    """Decode a base64 PNG into HxWx3 uint8, enforcing the canvas size."""
    try:
        raw = base64.b64decode(encoded, validate=True)
    except binascii.Error as exc:
        raise ValueError(f"sketch_png_base64 is not valid base64: {exc}") from None
    try:
        with Image.open(io.BytesIO(raw)) as image:
            fmt = image.format
            arr = np.asarray(image.convert("RGB"))
    except UnidentifiedImageError:
        raise ValueError("sketch bytes do not decode as an image") from None
    if fmt != "PNG":
        raise ValueError(f"sketch must be PNG-encoded, got {fmt}")
    h, w = arr.shape[:2]
    if (h, w) != (resolution_px, resolution_px):
        raise ValueError(
            f"sketch is {w}x{h}, the service canvas is {resolution_px}x{resolution_px}")
    return arr.astype(np.uint8)


def _parse_body(raw: bytes) -> dict:
    """Request body -> dict; empty body means an unconditional default job."""
    if not raw.strip():
        return {}
    try:
        body = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"request body is not valid JSON: {exc}") from None
    if not isinstance(body, dict):
        raise ValueError("request body must be a JSON object")
    return body


def _int_field(body: dict, name: str) -> int | None:
    """Fetch an optional integer field; null counts as omitted."""
    value = body.get(name)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    return value


def create_app(config: dict, *, service: GenerationService | None = None) -> FastAPI:
    """Build the HTTP app; pass ``service`` to reuse a prepared instance."""
    svc = service if service is not None else GenerationService(config)

    @asynccontextmanager
    async def lifespan(app):
        yield
        svc.shutdown()

    app = FastAPI(title="terradiff generation service", lifespan=lifespan)
    app.state.service = svc
    app.add_middleware(CORSMiddleware,
                       allow_origins=list(config["service"]["allowed_origins"]),
                       allow_methods=["*"], allow_headers=["*"])

    @app.post("/api/generate", status_code=202)
    async def submit(request: Request) -> dict:
        try:
            body = _parse_body(await request.body())
            steps = _int_field(body, "steps")
            seed = _int_field(body, "seed")
            if seed is not None and seed < 0:
                raise ValueError(f"seed must be >= 0, got {seed}")
            encoded = body.get("sketch_png_base64")
            if encoded is not None and not isinstance(encoded, str):
                raise ValueError("sketch_png_base64 must be a base64 string")
            sketch = None if encoded is None else _decode_sketch(encoded, svc.resolution_px)
            if steps is None:
                steps = svc.default_steps
            if steps < 1:
                raise ValueError(f"steps must be >= 1, got {steps}")
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        if seed is None:
            # an omitted seed still yields a reproducible job: the drawn seed
            # is stored on the job and echoed by the poll endpoint
            seed = int.from_bytes(os.urandom(4), "big")
        try:
            job_id = svc.submit(sketch, steps, seed)
        except (ModelUnavailableError, QueueFullError) as exc:
            raise HTTPException(status_code=503, detail=str(exc)) from None
        return {"job_id": job_id}

    @app.get("/api/generate/{job_id}")
    def poll(job_id: str) -> dict:
        snap = svc.snapshot(job_id)
        if snap is None:
            raise HTTPException(status_code=404, detail=f"unknown job id {job_id}")
        payload = {
            "id": snap["id"],
            "state": snap["state"],
            "steps": snap["steps"],
            "seed": snap["seed"],
            "error": snap["error"],
            "result": None,
        }
        if snap["state"] == "done":
            payload["result"] = {
                "heightmap_png_base64": base64.b64encode(snap["heightmap_png"]).decode("ascii"),
                "texture_png_base64": base64.b64encode(snap["texture_png"]).decode("ascii"),
            }
        return payload

    @app.get("/api/health")
    def health() -> dict:
        return {"model_loaded": svc.model_loaded, "checkpoint_hash": svc.checkpoint_hash}

    return app


def run_service(config: dict) -> None:
    """Blocking entry point behind `terradiff serve`."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=str(config["service"]["host"]),
                port=int(config["service"]["port"]), log_level="info")
