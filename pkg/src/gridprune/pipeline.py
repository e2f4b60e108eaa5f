"""End-to-end orchestration: score -> partition -> allocate -> select for a
single field, and the independent per-sub-image flow for high-resolution
tilings (S sub-images sharing one text embedding, pruned separately and
concatenated in order).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import BudgetExceedsCapacity, GridPruneError
from .field import TokenField, load_field
from .scoring import relevance_scores, saliency_scores, fuse
from .zones import (
    Selection,
    allocate,
    partition,
    select,
    selection_to_dict,
    zone_relevance,
)

# Tuned fusion weights, keyed "<model>-<retention tag>". Retention tags name
# the kept-token fraction: 33 ~ 33.3%, 22 ~ 22.2%, 11 ~ 11.1%, 5.6 ~ 5.6%.
ALPHA_PRESETS: dict[str, float] = {
    "llava15-33": 0.8,
    "llava15-22": 0.7,
    "llava15-11": 0.7,
    "llava-next-22": 0.8,
    "llava-next-11": 0.7,
    "llava-next-5.6": 0.7,
    "qwen25vl-33": 0.7,
    "qwen25vl-22": 0.7,
    "qwen25vl-11": 0.7,
}

DEFAULT_BLOCK_SIZE = 2


def preset_alpha(name: str) -> float:
    try:
        return ALPHA_PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(ALPHA_PRESETS))
        raise GridPruneError(f"unknown preset {name!r} (known: {known})") from None


@dataclass(frozen=True)
class PruneConfig:
    """Knobs for one pruning run: kept tokens, zone size, fusion weight."""

    k: int
    block_size: int = DEFAULT_BLOCK_SIZE
    alpha: float = 0.8
    preset: str | None = None

    def __post_init__(self):
        if self.preset is not None:
            object.__setattr__(self, "alpha", preset_alpha(self.preset))
        if int(self.k) < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if int(self.block_size) < 1:
            raise ValueError(f"block_size must be >= 1, got {self.block_size}")
        if not (0.0 <= float(self.alpha) <= 1.0):
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "block_size", int(self.block_size))
        object.__setattr__(self, "alpha", float(self.alpha))


def grid_prune(field: TokenField, cfg: PruneConfig) -> Selection:
    """Two-stage pruning of one field.

    Exactly the composition of the module operations: fuse the dual-source
    scores, partition the grid, allocate zone budgets from raw relevance,
    select locally by fused score. k == N keeps everything (budgets fill to
    capacity); k > N is an error.
    """
    n = field.num_tokens
    if cfg.k > n:
        raise BudgetExceedsCapacity(f"k ({cfg.k}) exceeds token count ({n})")
    scores = fuse(relevance_scores(field), saliency_scores(field), cfg.alpha)
    zmap = partition(field.grid_h, field.grid_w, cfg.block_size)
    budget = allocate(zone_relevance(scores.relevance, zmap), zmap.capacities, cfg.k)
    return select(scores, zmap, budget)


def gather_embeddings(field: TokenField, selection: Selection) -> np.ndarray:
    """Rows of the field's embeddings at the kept indices, in kept order.

    Index emission is the engine's job; any downstream projection happens
    on these gathered rows in the host model.
    """
    return field.embeddings[selection.kept_indices]


@dataclass(frozen=True)
class HighResInput:
    """Ordered sub-images (e.g. 4 tiles + 1 global view) sharing one prompt."""

    sub_images: tuple[TokenField, ...]
    text_embedding: np.ndarray

    def __post_init__(self):
        if len(self.sub_images) < 1:
            raise ValueError("need at least one sub-image")
        d = self.sub_images[0].embed_dim
        for i, f in enumerate(self.sub_images):
            if f.embed_dim != d:
                raise ValueError(
                    f"sub-image {i} embed_dim {f.embed_dim} != {d} of sub-image 0"
                )
        text = np.ascontiguousarray(self.text_embedding, dtype=np.float32)
        if text.shape != (d,):
            raise ValueError(f"text_embedding: expected ({d},), got {text.shape}")
        object.__setattr__(self, "sub_images", tuple(self.sub_images))
        object.__setattr__(self, "text_embedding", text)

    @classmethod
    def from_fields(cls, fields) -> "HighResInput":
        fields = tuple(fields)
        if not fields:
            raise ValueError("need at least one sub-image")
        shared = fields[0].text_embedding
        for i, f in enumerate(fields):
            if f.text_embedding.shape != shared.shape or not np.array_equal(
                f.text_embedding, shared
            ):
                raise ValueError(
                    f"sub-image {i} text embedding differs from sub-image 0; "
                    "high-res pruning requires one shared prompt embedding"
                )
        return cls(sub_images=fields, text_embedding=shared)


@dataclass(frozen=True)
class HighResSelection:
    """Per-sub-image selections plus the concatenated kept sequence.

    ``concatenated`` holds indices into the S sub-images' tokens laid out
    back to back; ``offsets[i]`` is where sub-image i's tokens start.
    Sub-image order is preserved, raster order within each.
    """

    selections: tuple[Selection, ...]
    offsets: tuple[int, ...]
    concatenated: np.ndarray


def prune_high_res(inp: HighResInput, cfg: PruneConfig) -> HighResSelection:
    """Prune each sub-image independently with the same config and shared
    text embedding, then concatenate kept indices in sub-image order.

    Total kept = S * k; block boundaries in the concatenated sequence fall
    at multiples of k.
    """
    selections = []
    offsets = []
    pieces = []
    offset = 0
    for f in inp.sub_images:
        shared = replace(f, text_embedding=inp.text_embedding)
        sel = grid_prune(shared, cfg)
        selections.append(sel)
        offsets.append(offset)
        pieces.append(sel.kept_indices + offset)
        offset += f.num_tokens
    return HighResSelection(
        selections=tuple(selections),
        offsets=tuple(offsets),
        concatenated=np.concatenate(pieces),
    )


_ORDER_NAME = "order.json"


def load_high_res(directory) -> tuple[HighResInput, list[str]]:
    """Load a high-res input: a directory of field subdirectories plus an
    ``order.json`` array naming them in sub-image order."""
    directory = Path(directory)
    order_path = directory / _ORDER_NAME
    if not order_path.is_file():
        raise GridPruneError(f"missing {_ORDER_NAME} in {directory}")
    try:
        names = json.loads(order_path.read_text())
    except json.JSONDecodeError as e:
        raise GridPruneError(f"{order_path}: invalid JSON ({e})") from e
    if not isinstance(names, list) or not all(isinstance(x, str) for x in names) or not names:
        raise GridPruneError(f"{order_path}: expected a non-empty JSON array of names")
    fields = [load_field(directory / name) for name in names]
    return HighResInput.from_fields(fields), names


def save_high_res(fields, names, directory) -> None:
    from .field import save_field

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = list(names)
    for f, name in zip(fields, names):
        save_field(f, directory / name)
    (directory / _ORDER_NAME).write_text(json.dumps(names) + "\n")


def high_res_to_dict(result: HighResSelection, names, cfg: PruneConfig) -> dict:
    """JSON-ready view of a high-res result, one entry per sub-image."""
    return {
        "config": {"k": cfg.k, "block_size": cfg.block_size, "alpha": cfg.alpha},
        "sub_images": [
            {
                "sub_image": name,
                "offset": offset,
                **selection_to_dict(sel, block_size=cfg.block_size, alpha=cfg.alpha),
            }
            for name, offset, sel in zip(names, result.offsets, result.selections)
        ],
        "concatenated": result.concatenated.tolist(),
        "total_kept": int(result.concatenated.size),
    }
