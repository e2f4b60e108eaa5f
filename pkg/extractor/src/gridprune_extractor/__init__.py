"""Adapter that runs a CLIP-style vision/text encoder and exports token
fields in the gridprune interchange format."""

from .backends import extract, extract_field
from .jobs import (
    BACKENDS,
    ExtractionJob,
    ExtractorError,
    ImageDecodeFailure,
    ModelLoadFailure,
)

__version__ = "0.1.0"

__all__ = [
    "BACKENDS",
    "ExtractionJob",
    "ExtractorError",
    "ImageDecodeFailure",
    "ModelLoadFailure",
    "extract",
    "extract_field",
]
