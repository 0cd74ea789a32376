"""Per-frame and sequence-level segmentation accuracy against ground truth.

IoU, precision, and recall come from the pixel confusion counts of each
predicted/reference mask pair. Frames where a denominator collapses (an empty
mask on either side) are never dropped: they score 1.0 when both masks are
empty and 0.0 when only one is, and carry flags either way, so sequence means
stay unbiased and auditable.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DimensionError
from .raster import BinaryMask

__all__ = [
    "ConfusionCounts",
    "FrameMetrics",
    "MetricsReport",
    "confusion",
    "iou",
    "precision",
    "recall",
    "evaluate_pair",
    "evaluate_sequence",
    "report_to_json",
    "report_to_csv",
]

FLAG_PRED_EMPTY = "pred_empty"
FLAG_TRUTH_EMPTY = "truth_empty"


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class FrameMetrics:
    frame_index: int
    iou: float
    precision: float
    recall: float
    flags: tuple[str, ...] = ()
    date: dt.date | None = None

    @property
    def degenerate(self) -> bool:
        return bool(self.flags)


@dataclass
class MetricsReport:
    frames: list[FrameMetrics]
    mean_iou: float
    mean_precision: float
    mean_recall: float
    degenerate_frames: int = field(default=0)


def confusion(pred: BinaryMask, truth: BinaryMask) -> ConfusionCounts:
    if not pred.same_shape(truth):
        raise DimensionError(
            f"mask shapes differ: pred {pred.width}x{pred.height}, "
            f"truth {truth.width}x{truth.height}"
        )
    p, t = pred.bits, truth.bits
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    tn = p.size - tp - fp - fn
    return ConfusionCounts(tp, fp, fn, tn)


def iou(c: ConfusionCounts) -> float:
    union = c.tp + c.fp + c.fn
    if union == 0:
        return 1.0
    return c.tp / union


def precision(c: ConfusionCounts) -> float:
    if c.tp + c.fp == 0:
        return 1.0 if c.fn == 0 else 0.0
    return c.tp / (c.tp + c.fp)


def recall(c: ConfusionCounts) -> float:
    if c.tp + c.fn == 0:
        return 1.0 if c.fp == 0 else 0.0
    return c.tp / (c.tp + c.fn)


def _flags(c: ConfusionCounts) -> tuple[str, ...]:
    flags = []
    if c.tp + c.fp == 0:
        flags.append(FLAG_PRED_EMPTY)
    if c.tp + c.fn == 0:
        flags.append(FLAG_TRUTH_EMPTY)
    return tuple(flags)


def evaluate_pair(pred: BinaryMask, truth: BinaryMask, frame_index: int = 0,
                  date: dt.date | None = None) -> FrameMetrics:
    c = confusion(pred, truth)
    return FrameMetrics(
        frame_index=frame_index,
        iou=iou(c),
        precision=precision(c),
        recall=recall(c),
        flags=_flags(c),
        date=date,
    )


def evaluate_sequence(pred_masks: list[BinaryMask], truth_masks: list[BinaryMask],
                      dates: list[dt.date] | None = None) -> MetricsReport:
    """Per-frame metrics plus unweighted means over all frames.

    Degenerate frames stay in the means; their flags are preserved per frame.
    """
    if len(pred_masks) != len(truth_masks):
        raise ArgumentError(
            f"frame count mismatch: {len(pred_masks)} predictions, "
            f"{len(truth_masks)} ground-truth masks"
        )
    if not pred_masks:
        raise ArgumentError("nothing to evaluate: no mask pairs")
    if dates is not None and len(dates) != len(pred_masks):
        raise ArgumentError(f"got {len(dates)} dates for {len(pred_masks)} frames")
    frames = [
        evaluate_pair(p, t, frame_index=i, date=dates[i] if dates else None)
        for i, (p, t) in enumerate(zip(pred_masks, truth_masks))
    ]
    n = len(frames)
    return MetricsReport(
        frames=frames,
        mean_iou=sum(f.iou for f in frames) / n,
        mean_precision=sum(f.precision for f in frames) / n,
        mean_recall=sum(f.recall for f in frames) / n,
        degenerate_frames=sum(1 for f in frames if f.degenerate),
    )


def report_to_json(report: MetricsReport) -> str:
    doc = {
        "frames": [
            {
                "index": f.frame_index,
                "date": f.date.isoformat() if f.date else None,
                "iou": f.iou,
                "precision": f.precision,
                "recall": f.recall,
                "flags": list(f.flags),
            }
            for f in report.frames
        ],
        "mean_iou": report.mean_iou,
        "mean_precision": report.mean_precision,
        "mean_recall": report.mean_recall,
        "degenerate_frames": report.degenerate_frames,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def report_to_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "date", "iou", "precision", "recall", "flags"])
    for f in report.frames:
        writer.writerow([
            f.frame_index,
            f.date.isoformat() if f.date else "",
            repr(f.iou),
            repr(f.precision),
            repr(f.recall),
            ";".join(f.flags),
        ])
    return buf.getvalue()
