"""The HTTP scoring service.

Wire protocol:

* ``POST /score``        — body is PNG bytes; 200 answers
  ``{"fake_probability": p}`` with p clamped into [0, 1].
* ``POST /batch_score``  — multipart/form-data with one or more ``images``
  parts; 200 answers a JSON array of clamped numbers in part order.

Errors: 400 undecodable image, 401 bad/missing bearer token (when configured),
413 oversize body, 500 opaque on any model failure — the wire never carries
exception details. One request is always isolated from the next: a failing
model call leaves the service serving.
"""

from __future__ import annotations

import io
import logging
import math
import time
from email.parser import BytesParser

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from PIL import Image
from starlette.concurrency import run_in_threadpool

from .config import AdapterConfig
from .model import ModelEntry, load_model

logger = logging.getLogger(__name__)


def _decodes_as_image(data: bytes) -> bool:
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
        return True
    except Exception:
        return False


def _clamp(value) -> float:
    v = float(value)
    if not math.isfinite(v):
        raise ValueError("model produced a non-finite score")
    return min(1.0, max(0.0, v))


def _multipart_images(content_type: str, body: bytes) -> list[bytes]:
    """All parts named ``images`` from a multipart/form-data body, in order."""
    msg = BytesParser().parsebytes(
        b"Content-Type: " + content_type.encode("latin-1") + b"\r\n\r\n" + body
    )
    if not msg.is_multipart():
        raise ValueError("expected multipart/form-data")
    images = []
    for part in msg.get_payload():
        if part.get_param("name", header="content-disposition") == "images":
            payload = part.get_payload(decode=True)
            if payload is None:
                raise ValueError("empty multipart part")
            images.append(payload)
    if not images:
        raise ValueError("no 'images' parts in request")
    return images


def build_app(cfg: AdapterConfig, model: ModelEntry | None = None) -> FastAPI:
    model = model if model is not None else load_model(cfg.model_path)
    app = FastAPI(title="scorebridge", docs_url=None, redoc_url=None)

    @app.middleware("http")
    async def log_requests(request: Request, call_next):
        start = time.perf_counter()
        response = await call_next(request)
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        logger.info(
            "%s %s -> %d in %.1fms",
            request.method, request.url.path, response.status_code, elapsed_ms,
        )
        return response

    def unauthorized(request: Request) -> JSONResponse | None:
        if cfg.token is None:
            return None
        header = request.headers.get("authorization", "")
        if header == f"Bearer {cfg.token}":
            return None
        return JSONResponse({"error": "unauthorized"}, status_code=401)

    def oversize(request: Request, body: bytes) -> JSONResponse | None:
        declared = request.headers.get("content-length")
        if declared is not None and declared.isdigit() and int(declared) > cfg.max_request_bytes:
            return JSONResponse({"error": "request too large"}, status_code=413)
        if len(body) > cfg.max_request_bytes:
            return JSONResponse({"error": "request too large"}, status_code=413)
        return None

    async def score_or_500(image_bytes: bytes):
        """Run one model call off the event loop; None signals a 500."""
        try:
            raw = await run_in_threadpool(model.score, image_bytes)
            return _clamp(raw)
        except Exception:
            logger.exception("model call failed")
            return None

    @app.post("/score")
    async def score(request: Request):
        denied = unauthorized(request)
        if denied is not None:
            return denied
        body = await request.body()
        too_big = oversize(request, body)
        if too_big is not None:
            return too_big
        if not body or not _decodes_as_image(body):
            return JSONResponse({"error": "unreadable image"}, status_code=400)
        value = await score_or_500(body)
        if value is None:
            return JSONResponse({"error": "scoring failed"}, status_code=500)
        return JSONResponse({"fake_probability": value})

    @app.post("/batch_score")
    async def batch_score(request: Request):
        denied = unauthorized(request)
        if denied is not None:
            return denied
        body = await request.body()
        too_big = oversize(request, body)
        if too_big is not None:
            return too_big
        try:
            images = _multipart_images(request.headers.get("content-type", ""), body)
        except Exception:
            return JSONResponse({"error": "unreadable batch"}, status_code=400)
        if not all(_decodes_as_image(img) for img in images):
            return JSONResponse({"error": "unreadable image in batch"}, status_code=400)
        values = []
        for img in images:
            value = await score_or_500(img)
            if value is None:
                return JSONResponse({"error": "scoring failed"}, status_code=500)
            values.append(value)
        return JSONResponse(values)

    return app
