"""Offline sentence-embedding exporter for the screensum corpus format."""

from .encoders import (
    EncoderError,
    HashEncoder,
    available_encoders,
    load_encoder,
    register_encoder,
)
from .exporter import ExportError, ExportManifest, export, manifest_path

__version__ = "0.1.0"

__all__ = [
    "EncoderError",
    "ExportError",
    "ExportManifest",
    "HashEncoder",
    "available_encoders",
    "export",
    "load_encoder",
    "manifest_path",
    "register_encoder",
]
