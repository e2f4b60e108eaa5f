"""Extraction job description and extractor-specific errors."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

BACKENDS = ("clip_penultimate", "qwen_lastlayer")


class ExtractorError(Exception):
    """Base class for extraction failures."""


class ModelLoadFailure(ExtractorError):
    """The checkpoint could not be loaded or is structurally unsuitable."""


class ImageDecodeFailure(ExtractorError):
    """An input image could not be opened or decoded."""


@dataclass(frozen=True)
class ExtractionJob:
    """One extraction run: a model, one or more images, one prompt.

    ``backend`` picks the tensor recipe:

    clip_penultimate
        embeddings: penultimate-layer patch hidden states, post-layernormed
        and pushed through the model's own visual projection; saliency: raw
        per-head CLS-to-patch attention from the penultimate layer
        (heads x N); text embedding: projected [EOS] pooled output.
    qwen_lastlayer
        embeddings: as above; saliency: per-token attention received,
        averaged over heads and query positions in the last encoder layer
        (a pre-pooled vector, num_heads = 0 in the manifest); text
        embedding: mean-pooled word-embedding rows of the prompt tokens.
    """

    model: str
    images: tuple[str, ...]
    prompt: str
    backend: str = "clip_penultimate"
    out_dir: str = "."

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        images = tuple(str(p) for p in self.images)
        if not images:
            raise ValueError("need at least one image")
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "out_dir", str(self.out_dir))

    def output_dir_for(self, image_path: str) -> Path:
        """Single image goes directly into out_dir; several get subdirs."""
        out = Path(self.out_dir)
        if len(self.images) == 1:
            return out
        return out / Path(image_path).stem
