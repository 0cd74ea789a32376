"""scartrack: landslide scar evolution tracking over NDVI time series.

The pipeline turns multi-temporal NDVI rasters into an ordered frame
sequence, tracks a scar region across it with prompt points and mask memory
(native rule-based backend, or any segmentation model behind the HTTP
protocol), and derives accuracy metrics and spatiotemporal analytics.
"""

from .analysis import (
    AreaSeries,
    SpikeEvent,
    area,
    area_series,
    boundary,
    detect_spikes,
    expansion_diff,
    interannual_pairs,
    percent_change,
    relative_error,
    seasonal_split,
)
from .errors import ScartrackError
from .metrics import confusion, evaluate_sequence, iou, precision, recall
from .raster import (
    BinaryMask,
    GeoGrid,
    GridTemplate,
    NdviFrame,
    SpectralFrame,
    compute_ndvi,
    crop_register,
    read_grid,
    read_mask,
    resample_bilinear,
    threshold_mask,
    write_grid,
    write_mask,
)
from .sequence import VideoSequence, build_sequence, export_sequence, load_manifest
from .tracker import (
    NativeBackend,
    PromptPoint,
    TrackerParams,
    TrackSession,
    init_session,
    propagate,
    refine,
    segment_frame,
)

__version__ = "0.1.0"

__all__ = [
    "ScartrackError",
    "GeoGrid",
    "GridTemplate",
    "SpectralFrame",
    "NdviFrame",
    "BinaryMask",
    "compute_ndvi",
    "resample_bilinear",
    "threshold_mask",
    "crop_register",
    "read_grid",
    "write_grid",
    "read_mask",
    "write_mask",
    "VideoSequence",
    "build_sequence",
    "export_sequence",
    "load_manifest",
    "PromptPoint",
    "TrackerParams",
    "TrackSession",
    "NativeBackend",
    "init_session",
    "propagate",
    "refine",
    "segment_frame",
    "confusion",
    "iou",
    "precision",
    "recall",
    "evaluate_sequence",
    "AreaSeries",
    "SpikeEvent",
    "area",
    "area_series",
    "relative_error",
    "percent_change",
    "seasonal_split",
    "detect_spikes",
    "boundary",
    "expansion_diff",
    "interannual_pairs",
    "__version__",
]
