"""Knowledge-guided, auto-propagating, interactively-refinable scar tracking.

The native backend segments one frame with a deterministic rule. Let C be the
connected components of the thresholded NDVI (bare-ground) mask, at the
configured connectivity, with at least ``min_component_area`` cells. A
component is kept when it contains a positive prompt, or when the previous
frame's mask covers at least ``memory_overlap`` of its area; it is dropped
when it contains a negative prompt and no positive one. A component holding
both polarities stays in, with a recorded warning. Prompts act only on the
frame they are registered at: their influence on later frames flows through
the previous-mask overlap, which plays the role of temporal memory.

Propagation walks frames forward, feeding each frame's result to the next;
refinement appends prompts at one frame and re-propagates from there, never
touching earlier masks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np
from scipy import ndimage

from .errors import (
    ArgumentError,
    InitializationError,
    PromptPlacementError,
    PropagationError,
    ProtocolError,
    ScartrackError,
    SessionStateError,
)
from .raster import BinaryMask, NdviFrame, threshold_mask
from .sequence import VideoSequence

__all__ = [
    "PromptPoint",
    "TrackerParams",
    "SegmentResult",
    "SegmentationBackend",
    "NativeBackend",
    "TrackSession",
    "init_session",
    "propagate",
    "refine",
    "segment_frame",
    "label_components",
    "load_prompts",
    "save_prompts",
]

POSITIVE = "positive"
NEGATIVE = "negative"

_STRUCTURE_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCTURE_8 = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class PromptPoint:
    """One click: a cell pinned to a frame, inside (positive) or outside (negative)."""

    frame_index: int
    row: int
    col: int
    polarity: str

    def __post_init__(self):
        if self.polarity not in (POSITIVE, NEGATIVE):
            raise ArgumentError(f"polarity must be 'positive' or 'negative', got {self.polarity!r}")

    def to_dict(self) -> dict:
        return {"frame": self.frame_index, "row": self.row, "col": self.col,
                "polarity": self.polarity}

    @classmethod
    def from_dict(cls, d: dict) -> "PromptPoint":
        return cls(int(d["frame"]), int(d["row"]), int(d["col"]), str(d["polarity"]))


@dataclass
class TrackerParams:
    threshold: float = 0.1
    connectivity: int = 8
    memory_overlap: float = 0.05
    min_component_area: int = 0
    threshold_overrides: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if not (-1.0 <= self.threshold <= 1.0):
            raise ArgumentError(f"threshold must lie in [-1, 1], got {self.threshold}")
        if self.connectivity not in (4, 8):
            raise ArgumentError(f"connectivity must be 4 or 8, got {self.connectivity}")
        if not (0.0 < self.memory_overlap <= 1.0):
            raise ArgumentError(f"memory_overlap must lie in (0, 1], got {self.memory_overlap}")
        if self.min_component_area < 0:
            raise ArgumentError(f"min_component_area must be >= 0, got {self.min_component_area}")
        for k, v in self.threshold_overrides.items():
            if not (-1.0 <= v <= 1.0):
                raise ArgumentError(f"threshold override for frame {k} out of [-1, 1]: {v}")

    def threshold_for(self, frame_index: int | None) -> float:
        if frame_index is not None and frame_index in self.threshold_overrides:
            return self.threshold_overrides[frame_index]
        return self.threshold

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "connectivity": self.connectivity,
            "memory_overlap": self.memory_overlap,
            "min_component_area": self.min_component_area,
            "threshold_overrides": {str(k): v for k, v in self.threshold_overrides.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrackerParams":
        overrides = {int(k): float(v) for k, v in (d.get("threshold_overrides") or {}).items()}
        return cls(
            threshold=float(d.get("threshold", 0.1)),
            connectivity=int(d.get("connectivity", 8)),
            memory_overlap=float(d.get("memory_overlap", 0.05)),
            min_component_area=int(d.get("min_component_area", 0)),
            threshold_overrides=overrides,
        )


@dataclass
class SegmentResult:
    mask: BinaryMask
    confidence: float
    warnings: list[str] = field(default_factory=list)


def label_components(bits: np.ndarray, connectivity: int) -> tuple[np.ndarray, int]:
    """Label connected true cells; returns (labels, count) with labels 1..count."""
    structure = _STRUCTURE_8 if connectivity == 8 else _STRUCTURE_4
    labels, count = ndimage.label(bits, structure=structure)
    return labels, int(count)


def _check_in_frame(frame: NdviFrame, points: list[PromptPoint]) -> None:
    h, w = frame.grid.height, frame.grid.width
    for p in points:
        if not (0 <= p.row < h and 0 <= p.col < w):
            raise ArgumentError(f"prompt at ({p.row}, {p.col}) lies outside the {w}x{h} frame")


def segment_frame(ndvi: NdviFrame, prompts_at_frame: list[PromptPoint],
                  prev_mask: BinaryMask | None, params: TrackerParams,
                  frame_index: int | None = None) -> BinaryMask:
    """Native single-frame segmentation; see the module docstring for the rule."""
    mask, _ = segment_frame_with_warnings(ndvi, prompts_at_frame, prev_mask, params, frame_index)
    return mask


def segment_frame_with_warnings(
    ndvi: NdviFrame,
    prompts_at_frame: list[PromptPoint],
    prev_mask: BinaryMask | None,
    params: TrackerParams,
    frame_index: int | None = None,
) -> tuple[BinaryMask, list[str]]:
    _check_in_frame(ndvi, prompts_at_frame)
    if frame_index is None:
        frame_index = ndvi.frame_index
    if prev_mask is not None and (prev_mask.width != ndvi.grid.width
                                  or prev_mask.height != ndvi.grid.height):
        raise ArgumentError(
            f"previous mask {prev_mask.width}x{prev_mask.height} does not match "
            f"frame {ndvi.grid.width}x{ndvi.grid.height}"
        )

    bare = threshold_mask(ndvi, params.threshold_for(frame_index))
    labels, count = label_components(bare.bits, params.connectivity)
    out = np.zeros_like(bare.bits)
    warnings: list[str] = []
    if count == 0:
        return BinaryMask(bare.width, bare.height, bare.cell_size, out), warnings

    areas = np.bincount(labels.ravel(), minlength=count + 1)
    eligible = areas >= params.min_component_area
    eligible[0] = False

    positive_labels: set[int] = set()
    negative_labels: set[int] = set()
    for p in prompts_at_frame:
        lab = int(labels[p.row, p.col])
        if lab == 0 or not eligible[lab]:
            continue
        (positive_labels if p.polarity == POSITIVE else negative_labels).add(lab)

    if prev_mask is not None:
        overlap = np.bincount(labels[prev_mask.bits].ravel(), minlength=count + 1)
    else:
        overlap = np.zeros(count + 1, dtype=np.int64)

    keep = np.zeros(count + 1, dtype=bool)
    for lab in range(1, count + 1):
        if not eligible[lab]:
            continue
        admitted = lab in positive_labels
        if not admitted and prev_mask is not None:
            admitted = overlap[lab] / areas[lab] >= params.memory_overlap
        if admitted and lab in negative_labels and lab not in positive_labels:
            admitted = False
        if lab in positive_labels and lab in negative_labels:
            warnings.append(
                f"component {lab} holds both positive and negative prompts; keeping it"
            )
        keep[lab] = admitted

    out = keep[labels]
    return BinaryMask(bare.width, bare.height, bare.cell_size, out), warnings


class SegmentationBackend(Protocol):
    """Anything that can segment one frame given prompts and the previous mask."""

    name: str

    def segment(self, frame: NdviFrame, frame_index: int, prompt_history: list[PromptPoint],
                prev_mask: BinaryMask | None, params: TrackerParams) -> SegmentResult:
        ...


class NativeBackend:
    """In-process deterministic backend implementing the component rule."""

    name = "native"

    def segment(self, frame: NdviFrame, frame_index: int, prompt_history: list[PromptPoint],
                prev_mask: BinaryMask | None, params: TrackerParams) -> SegmentResult:
        at_frame = [p for p in prompt_history if p.frame_index == frame_index]
        mask, warnings = segment_frame_with_warnings(frame, at_frame, prev_mask, params,
                                                     frame_index)
        return SegmentResult(mask=mask, confidence=1.0, warnings=warnings)


class TrackSession:
    """Single-writer tracking state: sequence + prompts + masks + cursor.

    Masks exist exactly for frames 0..cursor; every mutation bumps
    ``revision``. Callers serialize mutations themselves (the HTTP service
    holds one lock per session).
    """

    def __init__(self, sequence: VideoSequence, params: TrackerParams,
                 backend: SegmentationBackend | None = None):
        self.sequence = sequence
        self.params = params
        self.backend: SegmentationBackend = backend if backend is not None else NativeBackend()
        self.prompt_log: list[PromptPoint] = []
        self.masks: list[BinaryMask] = []
        self.confidences: list[float] = []
        self.warnings: dict[int, list[str]] = {}
        self.revision = 0

    @property
    def cursor(self) -> int:
        return len(self.masks) - 1

    @property
    def n(self) -> int:
        return self.sequence.n

    def prompts_at(self, frame_index: int) -> list[PromptPoint]:
        return [p for p in self.prompt_log if p.frame_index == frame_index]

    def prompt_history(self, frame_index: int) -> list[PromptPoint]:
        return [p for p in self.prompt_log if p.frame_index <= frame_index]

    def _validate_prompts(self, points: list[PromptPoint]) -> int:
        if not points:
            raise ArgumentError("no prompt points given")
        k = points[0].frame_index
        if any(p.frame_index != k for p in points):
            raise ArgumentError("all prompts in one batch must target the same frame")
        if not (0 <= k < self.n):
            raise ArgumentError(f"frame index {k} outside [0, {self.n - 1}]")
        frame = self.sequence[k]
        _check_in_frame(frame, points)
        thresh = self.params.threshold_for(k)
        for p in points:
            if p.polarity != POSITIVE:
                continue
            if frame.grid.nodata[p.row, p.col]:
                raise PromptPlacementError(
                    f"positive prompt at frame {k} ({p.row}, {p.col}) sits on a nodata cell",
                    row=p.row, col=p.col, frame_index=k,
                )
            if frame.grid.values[p.row, p.col] > thresh:
                raise PromptPlacementError(
                    f"positive prompt at frame {k} ({p.row}, {p.col}) sits on a cell with "
                    f"NDVI {frame.grid.values[p.row, p.col]:.4f} above threshold {thresh}",
                    row=p.row, col=p.col, frame_index=k,
                )
        return k

    def add_prompts(self, points: list[PromptPoint]) -> int:
        """Validate and append one batch of same-frame prompts; returns the frame."""
        k = self._validate_prompts(points)
        self.prompt_log.extend(points)
        self.revision += 1
        return k

    def _segment(self, t: int, prev: BinaryMask | None) -> tuple[BinaryMask, float]:
        result = self.backend.segment(self.sequence[t], t, self.prompt_history(t),
                                      prev, self.params)
        mask = result.mask
        if mask.width != self.sequence.template.width or mask.height != self.sequence.template.height:
            raise ProtocolError(
                f"backend returned a {mask.width}x{mask.height} mask for frame {t}; "
                f"expected {self.sequence.template.width}x{self.sequence.template.height}"
            )
        if result.warnings:
            self.warnings[t] = list(result.warnings)
        else:
            self.warnings.pop(t, None)
        return mask, result.confidence

    def init(self, frame0_prompts: list[PromptPoint]) -> None:
        """Produce the frame-0 mask from domain-knowledge prompts; cursor = 0."""
        if self.masks:
            raise SessionStateError("session is already initialized")
        if not frame0_prompts or any(p.frame_index != 0 for p in frame0_prompts):
            raise ArgumentError("initialization prompts must all target frame 0")
        if not any(p.polarity == POSITIVE for p in frame0_prompts):
            raise InitializationError("initialization needs at least one positive prompt")
        self.add_prompts(frame0_prompts)
        mask, conf = self._segment(0, None)
        self.masks = [mask]
        self.confidences = [conf]
        self.revision += 1

    def propagate_from(self, from_frame: int) -> None:
        """Recompute masks from ``from_frame`` to the end, chaining memory."""
        if not (0 <= from_frame <= self.cursor + 1):
            raise SessionStateError(
                f"cannot propagate from frame {from_frame}: cursor is {self.cursor} "
                f"(need from_frame <= cursor + 1)"
            )
        masks = self.masks[:from_frame]
        confidences = self.confidences[:from_frame]
        for t in range(from_frame, self.n):
            prev = masks[t - 1] if t > 0 else None
            try:
                mask, conf = self._segment(t, prev)
            except ScartrackError as exc:
                self.masks = masks
                self.confidences = confidences
                self.revision += 1
                raise PropagationError(f"backend failed at frame {t}: {exc}", halted_at=t) from exc
            masks.append(mask)
            confidences.append(conf)
        self.masks = masks
        self.confidences = confidences
        self.revision += 1

    def refine(self, frame_k_prompts: list[PromptPoint]) -> None:
        """Append prompts at one frame and re-propagate forward from it."""
        k = self._validate_prompts(frame_k_prompts)
        if k > self.cursor + 1:
            raise SessionStateError(
                f"cannot refine at frame {k}: cursor is {self.cursor} "
                f"(need frame <= cursor + 1)"
            )
        self.prompt_log.extend(frame_k_prompts)
        self.revision += 1
        self.propagate_from(k)


def init_session(seq: VideoSequence, params: TrackerParams,
                 frame0_prompts: list[PromptPoint],
                 backend: SegmentationBackend | None = None) -> TrackSession:
    session = TrackSession(seq, params, backend=backend)
    session.init(frame0_prompts)
    return session


def propagate(session: TrackSession, from_frame: int = 0) -> TrackSession:
    session.propagate_from(from_frame)
    return session


def refine(session: TrackSession, frame_k_prompts: list[PromptPoint]) -> TrackSession:
    session.refine(frame_k_prompts)
    return session


def load_prompts(path) -> list[PromptPoint]:
    """Read a prompt file: JSON {"prompts": [{frame, row, col, polarity}, ...]}."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = doc.get("prompts")
    if not isinstance(entries, list):
        raise ArgumentError(f"prompt file {path} has no 'prompts' list")
    return [PromptPoint.from_dict(e) for e in entries]


def save_prompts(points: list[PromptPoint], path) -> None:
    doc = {"prompts": [p.to_dict() for p in points]}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
