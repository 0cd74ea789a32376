"""Wire protocol for pluggable segmentation backends.

A backend is any HTTP server exposing ``POST /segment``. The request carries
one frame (inline base64 of its ASCII-grid byte stream, or a path the server
can read), the full prompt history up to that frame, the previous mask as
base64 PGM when one exists, and the tracker parameters. The response carries
the frame's mask as base64 PGM, a confidence in [0, 1], and warnings. Payload
encodings reuse the exact byte formats of the raster module, so a mask that
crosses the wire is byte-identical to one produced in process.
"""

from __future__ import annotations

import base64
import binascii
import datetime as dt

import httpx
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .errors import (
    ArgumentError,
    BackendUnavailableError,
    FormatError,
    ProtocolError,
    ScartrackError,
)
from .raster import (
    BinaryMask,
    NdviFrame,
    grid_from_bytes,
    grid_to_bytes,
    mask_from_bytes,
    mask_to_bytes,
)
from .tracker import (
    NativeBackend,
    PromptPoint,
    SegmentResult,
    SegmentationBackend,
    TrackerParams,
)

__all__ = [
    "encode_segment_request",
    "decode_segment_request",
    "HttpBackend",
    "create_backend_app",
    "run_compliance_checks",
]

# Dates are not part of the wire format; the rule never reads them.
_EPOCH = dt.date(1970, 1, 1)


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(text: str, what: str) -> bytes:
    try:
        return base64.b64decode(text, validate=True)
    except (binascii.Error, ValueError):
        raise ProtocolError(f"{what} is not valid base64") from None


def encode_segment_request(frame: NdviFrame, frame_index: int,
                           prompt_history: list[PromptPoint],
                           prev_mask: BinaryMask | None,
                           params: TrackerParams) -> dict:
    g = frame.grid
    body = {
        "frame": {
            "index": frame_index,
            "width": g.width,
            "height": g.height,
            "cell_size": g.cell_size,
            "ndvi_b64": _b64(grid_to_bytes(g)),
        },
        "prompts": [p.to_dict() for p in prompt_history],
        "params": params.to_dict(),
    }
    if prev_mask is not None:
        body["prev_mask_b64"] = _b64(mask_to_bytes(prev_mask))
    return body


def decode_segment_request(body: dict) -> tuple[NdviFrame, int, list[PromptPoint],
                                                BinaryMask | None, TrackerParams]:
    """Server-side decode; raises ProtocolError on any contract violation."""
    if not isinstance(body, dict):
        raise ProtocolError("request body must be a JSON object")
    frame_obj = body.get("frame")
    if not isinstance(frame_obj, dict):
        raise ProtocolError("request is missing the 'frame' object")

    ndvi_b64 = frame_obj.get("ndvi_b64")
    path = frame_obj.get("path")
    if ndvi_b64:
        raw = _unb64(ndvi_b64, "frame.ndvi_b64")
    elif path:
        try:
            with open(path, "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise ProtocolError(f"cannot read frame path {path!r}: {exc}") from None
    else:
        raise ProtocolError("frame payload needs 'ndvi_b64' or 'path'")
    try:
        grid = grid_from_bytes(raw)
    except FormatError as exc:
        raise ProtocolError(f"frame payload is not a valid ASCII grid: {exc}") from None

    for key in ("width", "height"):
        declared = frame_obj.get(key)
        actual = getattr(grid, key)
        if declared is not None and int(declared) != actual:
            raise ProtocolError(f"declared frame {key} {declared} != payload {actual}")

    frame_index = int(frame_obj.get("index", 0))

    prev = None
    prev_b64 = body.get("prev_mask_b64")
    if prev_b64:
        try:
            prev = mask_from_bytes(_unb64(prev_b64, "prev_mask_b64"))
        except FormatError as exc:
            raise ProtocolError(f"previous mask is not a valid PGM: {exc}") from None
        if prev.width != grid.width or prev.height != grid.height:
            raise ProtocolError(
                f"previous mask {prev.width}x{prev.height} does not match "
                f"frame {grid.width}x{grid.height}"
            )

    try:
        prompts = [PromptPoint.from_dict(p) for p in body.get("prompts", [])]
        params = TrackerParams.from_dict(body.get("params") or {})
    except (ArgumentError, KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"bad prompts or params: {exc}") from None

    frame = NdviFrame(grid=grid, date=_EPOCH, frame_index=frame_index)
    return frame, frame_index, prompts, prev, params


class HttpBackend:
    """Client half of the protocol: a SegmentationBackend over HTTP.

    Pass either a base URL (a real socket client is built) or a preconstructed
    httpx-compatible client such as FastAPI's TestClient.
    """

    name = "external"

    def __init__(self, base_url: str | None = None, client: httpx.Client | None = None,
                 timeout: float = 60.0):
        if client is None:
            if not base_url:
                raise ArgumentError("HttpBackend needs a base_url or a client")
            client = httpx.Client(base_url=base_url, timeout=timeout)
        self._client = client

    def segment(self, frame: NdviFrame, frame_index: int, prompt_history: list[PromptPoint],
                prev_mask: BinaryMask | None, params: TrackerParams) -> SegmentResult:
        body = encode_segment_request(frame, frame_index, prompt_history, prev_mask, params)
        try:
            response = self._client.post("/segment", json=body)
        except httpx.TimeoutException as exc:
            raise BackendUnavailableError(f"backend timed out: {exc}") from None
        except httpx.HTTPError as exc:
            raise BackendUnavailableError(f"backend unreachable: {exc}") from None
        if response.status_code != 200:
            raise BackendUnavailableError(
                f"backend returned HTTP {response.status_code}: {response.text[:200]}"
            )
        try:
            payload = response.json()
        except ValueError:
            raise ProtocolError("backend response is not JSON") from None

        mask_b64 = payload.get("mask_b64")
        if not mask_b64:
            raise ProtocolError("backend response lacks 'mask_b64'")
        try:
            mask = mask_from_bytes(_unb64(mask_b64, "mask_b64"))
        except FormatError as exc:
            raise ProtocolError(f"backend mask is not a valid PGM: {exc}") from None
        if mask.width != frame.grid.width or mask.height != frame.grid.height:
            raise ProtocolError(
                f"backend mask {mask.width}x{mask.height} does not match "
                f"frame {frame.grid.width}x{frame.grid.height}"
            )
        confidence = float(payload.get("confidence", 1.0))
        if not (0.0 <= confidence <= 1.0):
            raise ProtocolError(f"backend confidence {confidence} outside [0, 1]")
        warnings = payload.get("warnings") or []
        if not isinstance(warnings, list):
            raise ProtocolError("backend warnings must be a list")
        return SegmentResult(mask=mask, confidence=confidence,
                             warnings=[str(w) for w in warnings])


def create_backend_app(backend: SegmentationBackend | None = None) -> FastAPI:
    """FastAPI app serving the native backend (or any other) over the protocol."""
    impl = backend if backend is not None else NativeBackend()
    app = FastAPI(title="scartrack segmentation backend", docs_url=None, redoc_url=None)

    @app.post("/segment")
    async def segment(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse(status_code=400, content={"detail": "body is not valid JSON"})
        try:
            frame, frame_index, prompts, prev, params = decode_segment_request(body)
            result = impl.segment(frame, frame_index, prompts, prev, params)
        except ProtocolError as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        except ScartrackError as exc:
            return JSONResponse(status_code=422, content={"detail": str(exc)})
        return {
            "mask_b64": _b64(mask_to_bytes(result.mask)),
            "confidence": result.confidence,
            "warnings": result.warnings,
        }

    @app.get("/health")
    async def health():
        return {"status": "ok", "backend": impl.name}

    return app


# ---------------------------------------------------------------------------
# Black-box compliance checks, shared by every backend implementation
# ---------------------------------------------------------------------------

def _tiny_request(with_prev: bool = False) -> dict:
    import numpy as np

    from .raster import GeoGrid

    values = np.full((6, 8), 0.8)
    values[2:5, 2:6] = 0.0
    grid = GeoGrid.create(values, cell_size=2.0)
    frame = NdviFrame(grid=grid, date=_EPOCH, frame_index=0)
    prev = None
    if with_prev:
        bits = np.zeros((6, 8), dtype=bool)
        bits[2:5, 2:6] = True
        prev = BinaryMask.from_bits(bits, cell_size=2.0)
    prompts = [PromptPoint(0, 3, 3, "positive")]
    return encode_segment_request(frame, 0, prompts, prev, TrackerParams())


def run_compliance_checks(client) -> list[str]:
    """Exercise the protocol contract against ``client`` (httpx-style .post).

    Checks dimensions, payload validity, and error mapping; determinism is
    deliberately not required here. Returns the list of passed check names,
    raising AssertionError on the first violation.
    """
    passed: list[str] = []

    def check(name: str, condition: bool, detail: str = ""):
        assert condition, f"protocol check failed: {name} {detail}"
        passed.append(name)

    # well-formed request, no previous mask
    r = client.post("/segment", json=_tiny_request())
    check("accepts-valid-request", r.status_code == 200, f"(got {r.status_code}: {r.text[:200]})")
    payload = r.json()
    check("response-has-mask", isinstance(payload.get("mask_b64"), str))
    mask = mask_from_bytes(base64.b64decode(payload["mask_b64"]))
    check("mask-dimensions", (mask.width, mask.height) == (8, 6),
          f"(got {mask.width}x{mask.height})")
    check("confidence-range", 0.0 <= float(payload.get("confidence", -1)) <= 1.0)
    check("warnings-list", isinstance(payload.get("warnings", []), list))

    # well-formed request with previous mask
    r = client.post("/segment", json=_tiny_request(with_prev=True))
    check("accepts-prev-mask", r.status_code == 200, f"(got {r.status_code})")
    mask = mask_from_bytes(base64.b64decode(r.json()["mask_b64"]))
    check("prev-mask-dimensions", (mask.width, mask.height) == (8, 6))

    # declared dimensions contradict the embedded grid
    bad = _tiny_request()
    bad["frame"]["width"] = 99
    r = client.post("/segment", json=bad)
    check("rejects-dimension-lie", 400 <= r.status_code < 500, f"(got {r.status_code})")

    # previous mask of the wrong shape
    bad = _tiny_request()
    import numpy as np
    wrong = BinaryMask.from_bits(np.zeros((3, 3), dtype=bool), cell_size=2.0)
    bad["prev_mask_b64"] = _b64(mask_to_bytes(wrong))
    r = client.post("/segment", json=bad)
    check("rejects-prev-mask-mismatch", 400 <= r.status_code < 500, f"(got {r.status_code})")

    # garbage payloads
    bad = _tiny_request()
    bad["frame"]["ndvi_b64"] = "!!not-base64!!"
    r = client.post("/segment", json=bad)
    check("rejects-bad-base64", 400 <= r.status_code < 500, f"(got {r.status_code})")

    bad = _tiny_request()
    del bad["frame"]["ndvi_b64"]
    r = client.post("/segment", json=bad)
    check("rejects-missing-payload", 400 <= r.status_code < 500, f"(got {r.status_code})")

    bad = _tiny_request()
    bad["prompts"] = [{"frame": 0, "row": 1, "col": 1, "polarity": "sideways"}]
    r = client.post("/segment", json=bad)
    check("rejects-bad-polarity", 400 <= r.status_code < 500, f"(got {r.status_code})")

    return passed


def main(argv: list[str] | None = None) -> int:
    """Serve the native backend over HTTP: ``python -m scartrack.protocol``."""
    import argparse
    import os

    import uvicorn

    parser = argparse.ArgumentParser(prog="scartrack-backend",
                                     description="Native segmentation backend server")
    parser.add_argument("--port", type=int,
                        default=int(os.environ.get("LSVT_BACKEND_PORT", "8009")))
    parser.add_argument("--host", default="127.0.0.1")
    args = parser.parse_args(argv)
    uvicorn.run(create_backend_app(), host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
