"""Model hooks: anything that maps (image, point prompts, prev mask) to a mask.

The adapter ships two weightless stubs so the protocol surface is testable
without checkpoints, plus a loader for a SAM 2-class predictor when the
``sam2`` package and weights are available.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np


class SegmentationModel(Protocol):
    name: str

    def predict(self, image: np.ndarray, points: np.ndarray, labels: np.ndarray,
                prev_mask: np.ndarray | None) -> tuple[np.ndarray, float]:
        """image: (H, W, 3) uint8; points: (N, 2) row/col; labels: (N,) 1=pos 0=neg.

        Returns (mask bool (H, W), score in [0, 1]).
        """
        ...


class EchoModel:
    """Returns the previous mask unchanged (empty when there is none).

    Exists for protocol contract tests: masks stay constant over a sequence.
    """

    name = "stub"

    def predict(self, image, points, labels, prev_mask):
        h, w = image.shape[:2]
        if prev_mask is None:
            return np.zeros((h, w), dtype=bool), 1.0
        return prev_mask.astype(bool), 1.0


class BrightnessModel:
    """Segments dark pixels of the rendered image; crude but mask-shaped.

    Under the standard grayscale rendering, bare ground (low NDVI) is dark
    and vegetation bright, so thresholding mid-gray yields plausible scar
    masks for end-to-end runs without any weights.
    """

    name = "brightness"

    def __init__(self, cutoff: int = 160):
        self.cutoff = cutoff

    def predict(self, image, points, labels, prev_mask):
        gray = image[:, :, 0].astype(np.int32)
        mask = gray < self.cutoff
        score = 0.9 if points is not None and len(points) else 0.6
        return mask, score


def load_sam2(checkpoint: str, device: str = "cpu",
              model_cfg: str = "sam2_hiera_l.yaml") -> SegmentationModel:
    """Wrap a SAM 2 image predictor; requires the ``sam2`` package and weights."""
    try:
        import torch  # noqa: F401
        from sam2.build_sam import build_sam2
        from sam2.sam2_image_predictor import SAM2ImagePredictor
    except ImportError as exc:
        raise ImportError(
            "SAM 2 support needs the 'sam2' package (pip install sam2) and a "
            f"checkpoint file; import failed with: {exc}"
        ) from exc

    predictor = SAM2ImagePredictor(build_sam2(model_cfg, checkpoint, device=device))

    class Sam2Model:
        name = "sam2"

        def predict(self, image, points, labels, prev_mask):
            predictor.set_image(image)
            kwargs = {}
            if points is not None and len(points):
                # model expects x/y order
                kwargs["point_coords"] = points[:, ::-1].astype(np.float32)
                kwargs["point_labels"] = labels.astype(np.int32)
            if prev_mask is not None:
                kwargs["mask_input"] = prev_mask[None].astype(np.float32)
            masks, scores, _ = predictor.predict(multimask_output=False, **kwargs)
            best = int(np.argmax(scores))
            return masks[best].astype(bool), float(np.clip(scores[best], 0.0, 1.0))

    return Sam2Model()


def build_model(kind: str, checkpoint: str | None = None,
                device: str = "cpu") -> SegmentationModel:
    if kind == "stub":
        return EchoModel()
    if kind == "brightness":
        return BrightnessModel()
    if kind == "sam2":
        if not checkpoint:
            raise ValueError("--checkpoint is required for the sam2 model")
        return load_sam2(checkpoint, device=device)
    raise ValueError(f"unknown model kind {kind!r}")
