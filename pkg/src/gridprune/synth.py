"""Reproducible synthetic token fields with planted structure.

Scenes are generated from a single PCG64 stream (numpy's documented,
seedable generator) with a fixed draw order, so a spec reproduces the same
field bit for bit on any platform running the same numpy build.

Patterns:

``uniform_noise``    isotropic embeddings, random attention; no plant.
``centered_object``  planted rectangle(s) whose embeddings point near the
                     text embedding; attention is unaligned noise, so the
                     planted signal lives in relevance only.
``multi_object``     same construction with several rectangles.
``sink_tail``        embeddings are pure noise (flat relevance); saliency
                     ramps up along raster order with a large bump on the
                     final decile, modeling attention sinks at the end of
                     the token sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diagnostics import tail_start
from .errors import InvalidRect
from .field import TokenField

PATTERNS = ("sink_tail", "centered_object", "multi_object", "uniform_noise")

ATTN_HEADS = 8
_SINK_BOOST = 10.0


@dataclass(frozen=True)
class SceneSpec:
    """Everything that determines one synthetic scene, seed included."""

    grid_h: int
    grid_w: int
    embed_dim: int
    pattern: str
    planted_rects: tuple[tuple[int, int, int, int], ...] = ()
    signal_strength: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"pattern must be one of {PATTERNS}, got {self.pattern!r}")
        if self.signal_strength <= 0:
            raise ValueError(f"signal_strength must be > 0, got {self.signal_strength}")
        rects = tuple(tuple(int(v) for v in r) for r in self.planted_rects)
        for r0, c0, h, w in rects:
            if h < 1 or w < 1 or r0 < 0 or c0 < 0 or r0 + h > self.grid_h or c0 + w > self.grid_w:
                raise InvalidRect(
                    f"rect (r0={r0}, c0={c0}, h={h}, w={w}) outside "
                    f"{self.grid_h}x{self.grid_w} grid"
                )
        object.__setattr__(self, "planted_rects", rects)

    @property
    def num_tokens(self) -> int:
        return self.grid_h * self.grid_w


def _default_rects(spec: SceneSpec) -> tuple[tuple[int, int, int, int], ...]:
    gh, gw = spec.grid_h, spec.grid_w
    if spec.pattern == "centered_object":
        h, w = max(1, gh // 3), max(1, gw // 3)
        return (((gh - h) // 2, (gw - w) // 2, h, w),)
    if spec.pattern == "multi_object":
        h, w = max(1, gh // 4), max(1, gw // 4)
        first = (gh // 8, gw // 8, h, w)
        second = (gh - gh // 8 - h, gw - gw // 8 - w, h, w)
        return (first, second)
    return ()


def _rect_mask(spec: SceneSpec, rects) -> np.ndarray:
    mask = np.zeros(spec.num_tokens, dtype=bool)
    grid = mask.reshape(spec.grid_h, spec.grid_w)
    for r0, c0, h, w in rects:
        grid[r0 : r0 + h, c0 : c0 + w] = True
    return mask


def _unit_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def planted_cosine_floor(strength: float) -> float:
    """Lower bound on a planted token's relevance, for strength > 1.

    A planted embedding is unit(text + unit_noise / strength); minimizing
    the cosine against the text over all noise directions gives
    sqrt(1 - 1/strength^2). The returned floor backs off slightly for
    float arithmetic.
    """
    s = float(strength)
    if s <= 1.0:
        return -1.0
    return float(np.sqrt(1.0 - 1.0 / (s * s))) - 1e-6


def generate(spec: SceneSpec) -> tuple[TokenField, np.ndarray]:
    """Build the scene's token field and its ground-truth planted mask.

    The mask flags planted-rectangle tokens for the object patterns and the
    final-decile sink region for ``sink_tail``; it is all-False for
    ``uniform_noise``.
    """
    n, d = spec.num_tokens, spec.embed_dim
    rng = np.random.Generator(np.random.PCG64(spec.seed))

    # Draw order is part of the format: text, embeddings, planted noise,
    # saliency. Changing it would silently break stored fixtures.
    text = _unit_rows(rng.standard_normal(d))
    embeddings = rng.standard_normal((n, d))

    rects = spec.planted_rects or _default_rects(spec)
    if spec.pattern in ("centered_object", "multi_object"):
        mask = _rect_mask(spec, rects)
        planted = np.flatnonzero(mask)
        noise = _unit_rows(rng.standard_normal((planted.size, d)))
        embeddings[planted] = _unit_rows(text + noise / spec.signal_strength)
        saliency = rng.random((ATTN_HEADS, n))
    elif spec.pattern == "sink_tail":
        mask = np.zeros(n, dtype=bool)
        mask[tail_start(n) :] = True
        saliency = np.linspace(0.0, 1.0, n)
        saliency = saliency + _SINK_BOOST * mask
    else:  # uniform_noise
        mask = np.zeros(n, dtype=bool)
        saliency = rng.random((ATTN_HEADS, n))

    field = TokenField(
        grid_h=spec.grid_h,
        grid_w=spec.grid_w,
        embeddings=embeddings,
        saliency=saliency,
        text_embedding=text,
        meta={"pattern": spec.pattern, "seed": str(spec.seed)},
    )
    return field, mask
