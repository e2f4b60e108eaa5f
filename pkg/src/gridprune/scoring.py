"""Dual-source token importance: text-conditional relevance, intrinsic
visual saliency, and their alpha-weighted fusion.

Relevance is the exact cosine similarity between each projected token
embedding and the text embedding. Saliency is the head-averaged raw
attention a token receives, min-max normalized to [0, 1]. The fused score
``s = (1 - alpha) * (r + 1) / 2 + alpha * a`` drives local selection, while
raw relevance drives zone budgeting.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import AlphaOutOfRange, ZeroNormText, ZeroNormTokenWarning
from .field import TokenField


@dataclass(frozen=True)
class ScoreSet:
    """Per-token scores for one field.

    relevance      r in [-1, 1]  (cosine)
    relevance_norm (r + 1) / 2 in [0, 1]
    saliency       a in [0, 1]   (min-max normalized)
    fused          (1 - alpha) * relevance_norm + alpha * saliency
    """

    relevance: np.ndarray
    relevance_norm: np.ndarray
    saliency: np.ndarray
    fused: np.ndarray
    alpha: float

    def __post_init__(self):
        n = self.relevance.shape[0]
        for name in ("relevance_norm", "saliency", "fused"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name}: expected shape ({n},)")

    @property
    def num_tokens(self) -> int:
        return int(self.relevance.shape[0])


def relevance_scores(field: TokenField) -> np.ndarray:
    """Cosine similarity of every token embedding against the text embedding.

    A zero-norm token row carries no signal and scores 0 (with a
    :class:`ZeroNormTokenWarning`); an all-zero text embedding is an error
    because it would make every score undefined.
    """
    text = field.text_embedding.astype(np.float64)
    text_norm = np.linalg.norm(text)
    if text_norm == 0.0:
        raise ZeroNormText("text embedding has zero norm; cosine relevance undefined")
    emb = field.embeddings.astype(np.float64)
    norms = np.linalg.norm(emb, axis=1)
    dead = norms == 0.0
    scores = np.zeros(field.num_tokens, dtype=np.float64)
    live = ~dead
    scores[live] = (emb[live] @ text) / (norms[live] * text_norm)
    if dead.any():
        warnings.warn(
            f"{int(dead.sum())} token embedding(s) have zero norm "
            f"(first at index {int(np.flatnonzero(dead)[0])}); relevance set to 0",
            ZeroNormTokenWarning,
            stacklevel=2,
        )
    return scores


def minmax_normalize(values: np.ndarray) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant vector maps to all 0.5.

    The 0.5 convention keeps degenerate saliency centered so fusion
    ordering falls back entirely to relevance (any constant would preserve
    ordering; 0.5 keeps the fused score mid-range).
    """
    values = np.asarray(values, dtype=np.float64)
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return np.full(values.shape, 0.5)
    return (values - lo) / (hi - lo)


def saliency_scores(field: TokenField) -> np.ndarray:
    """Per-token saliency in [0, 1].

    CLS-attention input (heads x N) is averaged over heads and min-max
    normalized; a precomputed per-token vector is only min-max normalized.
    """
    sal = field.saliency.astype(np.float64)
    if sal.ndim == 2:
        sal = sal.mean(axis=0)
    return minmax_normalize(sal)


def fuse(relevance: np.ndarray, saliency: np.ndarray, alpha: float) -> ScoreSet:
    """Combine relevance and saliency into a :class:`ScoreSet`.

    alpha = 0 keeps only (normalized) relevance; alpha = 1 keeps only
    saliency.
    """
    alpha = float(alpha)
    if not (0.0 <= alpha <= 1.0):
        raise AlphaOutOfRange(f"alpha must be in [0, 1], got {alpha}")
    relevance = np.asarray(relevance, dtype=np.float64)
    saliency = np.asarray(saliency, dtype=np.float64)
    if relevance.shape != saliency.shape or relevance.ndim != 1:
        raise ValueError(
            f"relevance {relevance.shape} and saliency {saliency.shape} "
            "must be 1-D vectors of equal length"
        )
    relevance_norm = (relevance + 1.0) / 2.0
    fused = (1.0 - alpha) * relevance_norm + alpha * saliency
    return ScoreSet(
        relevance=relevance,
        relevance_norm=relevance_norm,
        saliency=saliency,
        fused=fused,
        alpha=alpha,
    )


def score_field(field: TokenField, alpha: float) -> ScoreSet:
    """Full scoring pass for one field: relevance, saliency, fusion."""
    return fuse(relevance_scores(field), saliency_scores(field), alpha)
