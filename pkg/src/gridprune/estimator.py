"""Scikit-learn style wrappers so the pruners compose with the wider
ecosystem: ``get_params`` / ``set_params``, ``fit`` validating parameters,
``transform`` returning the gathered (pruned) embedding rows, and a
``select`` method exposing the index-level result.

Inputs are :class:`TokenField` objects (a single field or any sequence of
them); the transformers are stateless beyond validated parameters.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .field import TokenField
from .pipeline import PruneConfig, gather_embeddings, grid_prune
from .scoring import relevance_scores, saliency_scores, fuse
from .zones import Selection, global_topk, tail_k_baseline


def _as_fields(X) -> tuple[list[TokenField], bool]:
    if isinstance(X, TokenField):
        return [X], True
    fields = list(X)
    if not all(isinstance(f, TokenField) for f in fields):
        raise TypeError("X must be a TokenField or a sequence of TokenField")
    return fields, False


class _PrunerBase(BaseEstimator, TransformerMixin):
    def fit(self, X=None, y=None):
        """Validate parameters; no statistics are learned from X."""
        self._check_params()
        self.fitted_ = True
        return self

    def _check_params(self):  # pragma: no cover - overridden
        raise NotImplementedError

    def _select_one(self, field: TokenField) -> Selection:  # pragma: no cover
        raise NotImplementedError

    def _require_fitted(self):
        if not getattr(self, "fitted_", False):
            raise NotFittedError(
                f"This {type(self).__name__} instance is not fitted yet; "
                "call 'fit' before using this estimator."
            )

    def select(self, X):
        """Selection for a single field, or a list of them for a sequence."""
        self._require_fitted()
        fields, single = _as_fields(X)
        out = [self._select_one(f) for f in fields]
        return out[0] if single else out

    def transform(self, X):
        """Pruned embedding rows per field: arrays of shape (k, embed_dim)."""
        self._require_fitted()
        fields, single = _as_fields(X)
        out = [gather_embeddings(f, self._select_one(f)) for f in fields]
        return out[0] if single else out


class GridPruner(_PrunerBase):
    """Two-stage pruner: zonal budget allocation, then local top-k.

    Parameters
    ----------
    k : int
        Tokens to retain per field.
    block_size : int
        Zone side length on the patch grid.
    alpha : float
        Fusion weight in [0, 1]; 0 = relevance only, 1 = saliency only.
    preset : str, optional
        Named alpha preset (overrides ``alpha`` when given).
    """

    def __init__(self, k=192, block_size=2, alpha=0.8, preset=None):
        self.k = k
        self.block_size = block_size
        self.alpha = alpha
        self.preset = preset

    def _check_params(self):
        self.config_ = PruneConfig(
            k=self.k, block_size=self.block_size, alpha=self.alpha, preset=self.preset
        )

    def _select_one(self, field: TokenField) -> Selection:
        return grid_prune(field, self.config_)


class GlobalTopKPruner(_PrunerBase):
    """Baseline: global top-k over the fused importance scores."""

    def __init__(self, k=192, alpha=0.8):
        self.k = k
        self.alpha = alpha

    def _check_params(self):
        self.config_ = PruneConfig(k=self.k, block_size=1, alpha=self.alpha)

    def _select_one(self, field: TokenField) -> Selection:
        scores = fuse(relevance_scores(field), saliency_scores(field), self.config_.alpha)
        return global_topk(scores, self.config_.k)


class TailKPruner(_PrunerBase):
    """Positional-bias reference: keep the last k raster positions."""

    def __init__(self, k=192):
        self.k = k

    def _check_params(self):
        if int(self.k) < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        self.k_ = int(self.k)

    def _select_one(self, field: TokenField) -> Selection:
        return tail_k_baseline(field.num_tokens, self.k_)
