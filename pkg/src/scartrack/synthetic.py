"""Synthetic NDVI scenarios with exact ground truth.

Scars are rasterized ellipses: growing the semi-axes only ever adds cells,
so truth masks are nested frame over frame and area series are monotone by
construction. Background and scar NDVI get bounded uniform noise that never
crosses the detection threshold, which keeps the generator's truth usable as
an exact oracle for end-to-end tracking tests.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from pathlib import Path

import numpy as np

from .raster import BinaryMask, GeoGrid, NdviFrame, write_grid, write_mask
from .sequence import VideoSequence, build_sequence
from .tracker import PromptPoint

__all__ = [
    "growing_scar_sequence",
    "two_patch_sequence",
    "default_prompts",
    "two_patch_refine_prompt",
    "write_scenario",
]

BACKGROUND_NDVI = 0.6
SCAR_NDVI = 0.0
NOISE_AMPLITUDE = 0.05
ASPECT = 1.5  # ellipse width / height


def _ellipse_bits(size: int, center: tuple[float, float], target_cells: float) -> np.ndarray:
    # pi * a * b = target with a = ASPECT * b
    b = math.sqrt(target_cells / (math.pi * ASPECT))
    a = ASPECT * b
    rows = np.arange(size)[:, None]
    cols = np.arange(size)[None, :]
    cy, cx = center
    return ((rows - cy) / b) ** 2 + ((cols - cx) / a) ** 2 <= 1.0


def _frames_from_truth(truths: list[np.ndarray], size: int, cell_size: float,
                       start_date: dt.date, step_days: int, seed: int) -> list[NdviFrame]:
    rng = np.random.default_rng(seed)
    frames = []
    for i, bits in enumerate(truths):
        noise = rng.uniform(-NOISE_AMPLITUDE, NOISE_AMPLITUDE, size=(size, size))
        values = np.where(bits, SCAR_NDVI, BACKGROUND_NDVI) + noise
        grid = GeoGrid.create(values, cell_size=cell_size)
        frames.append(NdviFrame(grid=grid, date=start_date + dt.timedelta(days=step_days * i)))
    return frames


def growing_scar_sequence(
    n_frames: int = 24,
    size: int = 256,
    start_cells: int = 500,
    end_cells: int = 5000,
    cell_size: float = 10.0,
    start_date: dt.date = dt.date(2017, 1, 15),
    step_days: int = 15,
    seed: int = 7,
) -> tuple[VideoSequence, list[BinaryMask]]:
    """One elliptical scar growing linearly from ~start_cells to ~end_cells."""
    center = (size / 2.0, size / 2.0)
    truths = []
    for i in range(n_frames):
        frac = i / (n_frames - 1) if n_frames > 1 else 1.0
        target = start_cells + (end_cells - start_cells) * frac
        truths.append(_ellipse_bits(size, center, target))
    frames = _frames_from_truth(truths, size, cell_size, start_date, step_days, seed)
    seq = build_sequence(frames)
    masks = [BinaryMask.from_bits(t, cell_size=cell_size) for t in truths]
    return seq, masks


def two_patch_sequence(
    n_frames: int = 16,
    size: int = 128,
    appear_at: int = 8,
    cell_size: float = 10.0,
    start_date: dt.date = dt.date(2018, 3, 1),
    step_days: int = 20,
    seed: int = 11,
) -> tuple[VideoSequence, list[BinaryMask]]:
    """A growing primary scar plus a second patch appearing at ``appear_at``.

    The second patch never overlaps the first and has no mask-memory lineage,
    so pure propagation must miss it until a prompt admits it.
    """
    primary_center = (size / 2.0, size / 4.0)
    second_center = (size / 2.0, 3 * size / 4.0)
    # areas scale with the grid so the two patches never touch
    primary_start = 0.018 * size * size
    primary_end = 0.092 * size * size
    second_area = 0.024 * size * size
    truths = []
    for i in range(n_frames):
        frac = i / (n_frames - 1) if n_frames > 1 else 1.0
        bits = _ellipse_bits(size, primary_center,
                             primary_start + (primary_end - primary_start) * frac)
        if i >= appear_at:
            bits = bits | _ellipse_bits(size, second_center, second_area)
        truths.append(bits)
    frames = _frames_from_truth(truths, size, cell_size, start_date, step_days, seed)
    seq = build_sequence(frames)
    masks = [BinaryMask.from_bits(t, cell_size=cell_size) for t in truths]
    return seq, masks


def default_prompts(size: int = 256) -> list[PromptPoint]:
    """One positive click in the scar center, two negatives on stable ground."""
    mid = size // 2
    return [
        PromptPoint(0, mid, mid, "positive"),
        PromptPoint(0, size // 10, size // 10, "negative"),
        PromptPoint(0, size - size // 10, size - size // 10, "negative"),
    ]


def two_patch_prompts(size: int = 128) -> list[PromptPoint]:
    return [
        PromptPoint(0, size // 2, size // 4, "positive"),
        PromptPoint(0, size // 10, size // 10, "negative"),
        PromptPoint(0, size - size // 10, size - size // 10, "negative"),
    ]


def two_patch_refine_prompt(appear_at: int = 8, size: int = 128) -> PromptPoint:
    return PromptPoint(appear_at, size // 2, 3 * size // 4, "positive")


def write_scenario(directory, kind: str = "growing", **kwargs) -> dict:
    """Materialize a scenario for the CLI pipeline: frames, dates, truth, prompts.

    Layout under ``directory``: frames/*.asc, dates.csv, truth/truth_####.pgm,
    prompts.json, params.json. Returns a summary dict with the paths.
    """
    if kind == "growing":
        seq, truths = growing_scar_sequence(**kwargs)
        prompts = default_prompts(size=seq.template.width)
    elif kind == "two_patch":
        seq, truths = two_patch_sequence(**kwargs)
        prompts = two_patch_prompts(size=seq.template.width)
    else:
        raise ValueError(f"unknown scenario kind {kind!r}")

    root = Path(directory)
    frames_dir = root / "frames"
    truth_dir = root / "truth"
    frames_dir.mkdir(parents=True, exist_ok=True)
    truth_dir.mkdir(parents=True, exist_ok=True)

    with open(root / "dates.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["filename", "date"])
        for frame in seq.frames:
            name = f"frame_{frame.frame_index:04d}.asc"
            write_grid(frame.grid, frames_dir / name)
            writer.writerow([name, frame.date.isoformat()])

    for i, mask in enumerate(truths):
        write_mask(mask, truth_dir / f"truth_{i:04d}.pgm")

    prompts_doc = {"prompts": [p.to_dict() for p in prompts]}
    (root / "prompts.json").write_text(json.dumps(prompts_doc, indent=2) + "\n", encoding="utf-8")
    (root / "params.json").write_text(json.dumps({"threshold": 0.1}, indent=2) + "\n",
                                      encoding="utf-8")
    return {
        "frames_dir": str(frames_dir),
        "dates_csv": str(root / "dates.csv"),
        "truth_dir": str(truth_dir),
        "prompts": str(root / "prompts.json"),
        "params": str(root / "params.json"),
        "n_frames": seq.n,
    }
