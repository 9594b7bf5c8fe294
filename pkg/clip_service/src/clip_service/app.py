"""HTTP surface: POST /v1/score and GET /v1/health.

Request body for /v1/score:

    {"image": "<base64>" | {"path": "<string>"},
     "candidates": ["<phrase>", ...],
     "prompt": "a photo of {}"}

Response: {"scores": [<float>, ...]}, order-aligned with the candidates,
cosine similarities in [-1, 1]. Bad input gets HTTP 400 with
{"error": "<msg>"}; HTTP 503 while the model is still loading. The service
is stateless; clients do their own caching.
"""

from __future__ import annotations

import base64
import binascii
import os
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .palette import MODEL_ID, load_model

DEFAULT_PROMPT = "a photo of {}"


class ScoreRequest(BaseModel):
    image: str | dict
    candidates: list[str]
    prompt: str = DEFAULT_PROMPT


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def _image_bytes(image: str | dict) -> bytes:
    if isinstance(image, dict):
        path = image.get("path")
        if not isinstance(path, str) or not path:
            raise ValueError("image object needs a 'path' string")
        if not os.path.isfile(path):
            raise ValueError(f"image path not found: {path}")
        with open(path, "rb") as fh:
            return fh.read()
    try:
        return base64.b64decode(image, validate=True)
    except (binascii.Error, ValueError):
        raise ValueError("image is not valid base64") from None


def create_app(model_id: str = MODEL_ID) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        app.state.model = load_model(app.state.model_id)
        yield

    app = FastAPI(title="clip-service", version="0.1.0", lifespan=lifespan)
    app.state.model = None
    app.state.model_id = model_id

    @app.get("/v1/health")
    def health():
        if app.state.model is None:
            return _error(503, "model loading")
        return {"status": "ok", "model": app.state.model.model_id}

    @app.post("/v1/score")
    def score(request: ScoreRequest):
        model = app.state.model
        if model is None:
            return _error(503, "model loading")
        if not request.candidates:
            return _error(400, "empty candidates")
        if "{}" not in request.prompt:
            return _error(400, "prompt must contain a {} placeholder")
        try:
            data = _image_bytes(request.image)
        except ValueError as e:
            return _error(400, str(e))
        sentences = [request.prompt.format(c) for c in request.candidates]
        try:
            scores = model.score(data, sentences)
        except Exception:
            return _error(400, "undecodable image")
        return {"scores": scores}

    @app.exception_handler(Exception)
    async def _unhandled(request: Request, exc: Exception):
        return _error(500, "internal error")

    return app
