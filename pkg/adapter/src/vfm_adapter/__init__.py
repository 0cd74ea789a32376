"""Adapter exposing a segmentation foundation model behind the scartrack
backend protocol (POST /segment with base64 grid/mask payloads)."""

from .models import BrightnessModel, EchoModel, build_model, load_sam2
from .server import create_adapter_app, render_grayscale

__version__ = "0.1.0"

__all__ = [
    "create_adapter_app",
    "render_grayscale",
    "build_model",
    "EchoModel",
    "BrightnessModel",
    "load_sam2",
    "__version__",
]
