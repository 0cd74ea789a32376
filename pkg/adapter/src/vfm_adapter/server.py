"""HTTP server translating the backend protocol into model calls.

Request handling: decode the NDVI frame, render it to the image space the
model expects (grayscale replication by default), map positive/negative
prompt points at the current frame to model point prompts, run the model,
and guard the response invariant: the mask always matches the frame's
dimensions and the payload is always well-formed JSON, even on model
failure.
"""

from __future__ import annotations

import base64
import binascii

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .codecs import CodecError, decode_ascii_grid, decode_pgm_mask, encode_pgm_mask
from .models import SegmentationModel


class RequestError(ValueError):
    """Client request violates the protocol; maps to HTTP 422."""


def render_grayscale(values: np.ndarray, nodata: np.ndarray) -> np.ndarray:
    """NDVI in [-1, 1] to 3-channel 8-bit grayscale; nodata renders black."""
    px = np.floor(255.0 * (values + 1.0) / 2.0 + 0.5)
    px = np.clip(px, 0, 255).astype(np.uint8)
    px[nodata] = 0
    return np.repeat(px[:, :, None], 3, axis=2)


RENDERERS = {"grayscale": render_grayscale}


def _unb64(text: str, what: str) -> bytes:
    try:
        return base64.b64decode(text, validate=True)
    except (binascii.Error, ValueError):
        raise RequestError(f"{what} is not valid base64") from None


def _decode_request(body: dict) -> tuple[np.ndarray, np.ndarray, float, int,
                                         np.ndarray, np.ndarray, np.ndarray | None]:
    if not isinstance(body, dict):
        raise RequestError("request body must be a JSON object")
    frame_obj = body.get("frame")
    if not isinstance(frame_obj, dict):
        raise RequestError("request is missing the 'frame' object")

    if frame_obj.get("ndvi_b64"):
        raw = _unb64(frame_obj["ndvi_b64"], "frame.ndvi_b64")
    elif frame_obj.get("path"):
        try:
            with open(frame_obj["path"], "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise RequestError(f"cannot read frame path: {exc}") from None
    else:
        raise RequestError("frame payload needs 'ndvi_b64' or 'path'")
    try:
        values, nodata, cell_size = decode_ascii_grid(raw)
    except CodecError as exc:
        raise RequestError(f"frame payload is not a valid ASCII grid: {exc}") from None

    h, w = values.shape
    for key, actual in (("width", w), ("height", h)):
        declared = frame_obj.get(key)
        if declared is not None and int(declared) != actual:
            raise RequestError(f"declared frame {key} {declared} != payload {actual}")

    frame_index = int(frame_obj.get("index", 0))

    points = []
    labels = []
    for p in body.get("prompts", []):
        try:
            row, col = int(p["row"]), int(p["col"])
            polarity = p["polarity"]
            at_frame = int(p["frame"])
        except (KeyError, TypeError, ValueError):
            raise RequestError(f"malformed prompt entry {p!r}") from None
        if polarity not in ("positive", "negative"):
            raise RequestError(f"bad prompt polarity {polarity!r}")
        if not (0 <= row < h and 0 <= col < w):
            raise RequestError(f"prompt ({row}, {col}) lies outside the {w}x{h} frame")
        if at_frame == frame_index:
            points.append((row, col))
            labels.append(1 if polarity == "positive" else 0)

    prev = None
    if body.get("prev_mask_b64"):
        try:
            prev, _ = decode_pgm_mask(_unb64(body["prev_mask_b64"], "prev_mask_b64"))
        except CodecError as exc:
            raise RequestError(f"previous mask is not a valid PGM: {exc}") from None
        if prev.shape != (h, w):
            raise RequestError(
                f"previous mask {prev.shape[1]}x{prev.shape[0]} does not match "
                f"frame {w}x{h}"
            )

    return (values, nodata, cell_size, frame_index,
            np.array(points, dtype=np.int64).reshape(-1, 2),
            np.array(labels, dtype=np.int64), prev)


def create_adapter_app(model: SegmentationModel, render: str = "grayscale") -> FastAPI:
    if render not in RENDERERS:
        raise ValueError(f"unknown rendering rule {render!r}; have {sorted(RENDERERS)}")
    renderer = RENDERERS[render]
    app = FastAPI(title="vfm adapter", docs_url=None, redoc_url=None)

    @app.post("/segment")
    async def segment(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse(status_code=400, content={"detail": "body is not valid JSON"})
        try:
            values, nodata, cell_size, frame_index, points, labels, prev = \
                _decode_request(body)
        except RequestError as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})

        image = renderer(values, nodata)
        try:
            mask, score = model.predict(image, points, labels, prev)
        except Exception as exc:  # the model is a black box; never crash the wire
            return JSONResponse(status_code=500,
                                content={"detail": f"model failure: {exc}"})

        mask = np.asarray(mask, dtype=bool)
        if mask.shape != values.shape:
            # reject before sending rather than emit a malformed response
            return JSONResponse(
                status_code=500,
                content={"detail": f"model produced a {mask.shape[1]}x{mask.shape[0]} mask "
                                   f"for a {values.shape[1]}x{values.shape[0]} frame"},
            )
        return {
            "mask_b64": base64.b64encode(encode_pgm_mask(mask, cell_size)).decode("ascii"),
            "confidence": float(min(max(score, 0.0), 1.0)),
            "warnings": [],
            "render": render,
            "model": model.name,
        }

    @app.get("/health")
    async def health():
        return {"status": "ok", "model": model.name, "render": render}

    return app
