"""Assemble dated NDVI frames into an ordered sequence and persist it.

A "video" here is a directory of per-frame files plus a JSON manifest, not an
encoded stream: frames keep their acquisition dates, index 0..n-1 follows
chronological order, and spacing may be irregular.
"""

from __future__ import annotations

import datetime as dt
import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ArgumentError, LoadError, OrderingError, TemplateError
from .raster import GeoGrid, GridTemplate, NdviFrame, grid_from_bytes, grid_to_bytes

__all__ = [
    "FrameGapWarning",
    "VideoSequence",
    "build_sequence",
    "export_sequence",
    "load_manifest",
    "ndvi_to_display",
]

MANIFEST_VERSION = 1
DEFAULT_GAP_WARN_DAYS = 180


class FrameGapWarning(UserWarning):
    """Adjacent frames are further apart than the configured gap threshold."""


@dataclass
class VideoSequence:
    """Chronologically ordered NDVI frames sharing one grid template."""

    frames: list[NdviFrame]
    template: GridTemplate = field(init=False)

    def __post_init__(self):
        if not self.frames:
            raise ArgumentError("a sequence needs at least one frame")
        self.template = self.frames[0].grid.template
        for i, frame in enumerate(self.frames):
            if frame.frame_index != i:
                raise OrderingError(f"frame {i} carries index {frame.frame_index}")
            if not frame.grid.template.matches(self.template):
                raise TemplateError(f"frame {i} ({frame.date}) does not match the common template")
        for a, b in zip(self.frames, self.frames[1:]):
            if a.date >= b.date:
                raise OrderingError(f"dates not strictly increasing: {a.date} then {b.date}")

    @property
    def n(self) -> int:
        return len(self.frames)

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, index: int) -> NdviFrame:
        return self.frames[index]


def build_sequence(frames: list[NdviFrame],
                   gap_warn_days: int = DEFAULT_GAP_WARN_DAYS) -> VideoSequence:
    """Sort frames by date and assign indices 0..n-1.

    Duplicate dates are rejected; any geometric mismatch names the offending
    frame. Long gaps only warn (propagation may degrade across them, but
    irregular cadence is expected).
    """
    if not frames:
        raise ArgumentError("a sequence needs at least one frame")
    for f in frames:
        if f.date is None:
            raise ArgumentError("every frame must carry a date")
    ordered = sorted(frames, key=lambda f: f.date)
    for a, b in zip(ordered, ordered[1:]):
        if a.date == b.date:
            raise OrderingError(f"duplicate frame date {a.date}")
    template = ordered[0].grid.template
    for f in ordered:
        if not f.grid.template.matches(template):
            raise TemplateError(
                f"frame dated {f.date} ({f.grid.width}x{f.grid.height}, "
                f"cell {f.grid.cell_size}) does not match the common template"
            )
    for a, b in zip(ordered, ordered[1:]):
        gap = (b.date - a.date).days
        if gap > gap_warn_days:
            warnings.warn(
                f"{gap}-day gap between {a.date} and {b.date} may break mask propagation",
                FrameGapWarning,
                stacklevel=2,
            )
    indexed = [replace(f, frame_index=i) for i, f in enumerate(ordered)]
    return VideoSequence(indexed)


def ndvi_to_display(grid: GeoGrid) -> np.ndarray:
    """8-bit grayscale rendering: pixel = round(255 * (ndvi + 1) / 2), nodata -> 0.

    The affine map is fixed on [-1, 1] so equal NDVI renders equally across
    frames; per-frame contrast stretching would break temporal comparability.
    """
    px = np.floor(255.0 * (grid.values + 1.0) / 2.0 + 0.5)
    px = np.clip(px, 0, 255).astype(np.uint8)
    px[grid.nodata] = 0
    return px


def _write_display(px: np.ndarray, path: Path, fmt: str) -> None:
    if fmt == "pgm":
        h, w = px.shape
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fh.write(px.tobytes())
    elif fmt == "png":
        from PIL import Image

        Image.fromarray(px, mode="L").save(path, format="PNG")
    else:
        raise ArgumentError(f"display format must be 'pgm' or 'png', got {fmt!r}")


def export_sequence(seq: VideoSequence, directory, display_format: str = "pgm") -> dict:
    """Write per-frame NDVI grids and display images plus the manifest.

    Returns the manifest dictionary; the JSON file lands at
    ``directory/manifest.json`` with frame paths relative to it.
    """
    if display_format not in ("pgm", "png"):
        raise ArgumentError(f"display format must be 'pgm' or 'png', got {display_format!r}")
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    t = seq.template
    entries = []
    for frame in seq.frames:
        idx = frame.frame_index
        ndvi_name = f"ndvi_{idx:04d}.asc"
        display_name = f"display_{idx:04d}.{display_format}"
        (out / ndvi_name).write_bytes(grid_to_bytes(frame.grid))
        _write_display(ndvi_to_display(frame.grid), out / display_name, display_format)
        entries.append({
            "index": idx,
            "date": frame.date.isoformat(),
            "ndvi_path": ndvi_name,
            "display_path": display_name,
        })
    manifest = {
        "version": MANIFEST_VERSION,
        "cell_size_m": t.cell_size,
        "width": t.width,
        "height": t.height,
        "origin_x": t.origin_x,
        "origin_y": t.origin_y,
        "display_format": display_format,
        "frames": entries,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest


def load_manifest(path) -> VideoSequence:
    """Reconstruct a sequence from a manifest, re-validating every invariant."""
    manifest_path = Path(path)
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise LoadError(f"manifest not found: {manifest_path}") from None
    except json.JSONDecodeError as exc:
        raise LoadError(f"manifest is not valid JSON: {exc}") from None

    if doc.get("version") != MANIFEST_VERSION:
        raise LoadError(f"unsupported manifest version {doc.get('version')!r}")
    entries = doc.get("frames")
    if not isinstance(entries, list) or not entries:
        raise LoadError("manifest has no frames")

    base = manifest_path.parent
    frames: list[NdviFrame] = []
    prev_date: dt.date | None = None
    for pos, entry in enumerate(entries):
        idx = entry.get("index")
        if idx != pos:
            raise LoadError(f"frame index gap at position {pos}: found index {idx!r}")
        try:
            date = dt.date.fromisoformat(entry["date"])
        except (KeyError, ValueError):
            raise LoadError(f"frame {pos}: bad or missing date {entry.get('date')!r}") from None
        if prev_date is not None and date <= prev_date:
            raise OrderingError(f"frame {pos}: date {date} not after {prev_date}")
        prev_date = date
        ndvi_path = base / entry["ndvi_path"]
        try:
            grid = grid_from_bytes(ndvi_path.read_bytes())
        except FileNotFoundError:
            raise LoadError(f"frame {pos}: missing NDVI file {ndvi_path}") from None
        frames.append(NdviFrame(grid=grid, date=date, frame_index=pos))

    seq = VideoSequence(frames)
    declared = GridTemplate(doc["width"], doc["height"], doc["cell_size_m"],
                            doc.get("origin_x", seq.template.origin_x),
                            doc.get("origin_y", seq.template.origin_y))
    if not seq.template.matches(declared):
        raise LoadError("manifest geometry does not match the frame files")
    return seq
