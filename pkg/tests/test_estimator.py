import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import Pipeline

from gridprune import (
    GlobalTopKPruner,
    GridPruner,
    PruneConfig,
    TailKPruner,
    fuse,
    global_topk,
    grid_prune,
    relevance_scores,
    saliency_scores,
    tail_k_baseline,
)

from conftest import make_field


def test_get_set_params_round_trip():
    est = GridPruner(k=64, block_size=4, alpha=0.5)
    params = est.get_params()
    assert params == {"k": 64, "block_size": 4, "alpha": 0.5, "preset": None}
    est.set_params(k=32, alpha=0.9)
    assert est.k == 32 and est.alpha == 0.9


def test_clone_preserves_params():
    est = GridPruner(k=10, block_size=3, alpha=0.2, preset=None)
    cloned = clone(est)
    assert cloned.get_params() == est.get_params()


def test_requires_fit_before_use(rng):
    field = make_field(rng)
    with pytest.raises(NotFittedError):
        GridPruner(k=4).select(field)
    with pytest.raises(NotFittedError):
        GridPruner(k=4).transform(field)


def test_fit_validates_params():
    with pytest.raises(ValueError):
        GridPruner(k=0).fit()
    with pytest.raises(ValueError):
        GridPruner(k=4, alpha=2.0).fit()


def test_preset_resolution_on_fit():
    est = GridPruner(k=64, preset="qwen25vl-11").fit()
    assert est.config_.alpha == 0.7


def test_select_matches_functional_api(rng):
    field = make_field(rng, grid_h=6, grid_w=6, embed_dim=8)
    est = GridPruner(k=9, block_size=2, alpha=0.6).fit()
    sel = est.select(field)
    want = grid_prune(field, PruneConfig(k=9, block_size=2, alpha=0.6))
    np.testing.assert_array_equal(sel.kept_indices, want.kept_indices)


def test_transform_returns_gathered_rows(rng):
    field = make_field(rng, grid_h=4, grid_w=4, embed_dim=5)
    est = GridPruner(k=6, block_size=2, alpha=0.5).fit()
    rows = est.transform(field)
    sel = est.select(field)
    assert rows.shape == (6, 5)
    np.testing.assert_array_equal(rows, field.embeddings[sel.kept_indices])


def test_sequence_input_returns_list(rng):
    fields = [make_field(rng) for _ in range(3)]
    est = GridPruner(k=4, block_size=2, alpha=0.5).fit()
    sels = est.select(fields)
    rows = est.transform(fields)
    assert len(sels) == len(rows) == 3
    for f, s, r in zip(fields, sels, rows):
        np.testing.assert_array_equal(r, f.embeddings[s.kept_indices])


def test_global_topk_pruner(rng):
    field = make_field(rng, grid_h=5, grid_w=5)
    est = GlobalTopKPruner(k=7, alpha=0.3).fit()
    sel = est.select(field)
    scores = fuse(relevance_scores(field), saliency_scores(field), 0.3)
    np.testing.assert_array_equal(sel.kept_indices, global_topk(scores, 7).kept_indices)


def test_tail_k_pruner(rng):
    field = make_field(rng, grid_h=5, grid_w=5)
    sel = TailKPruner(k=5).fit().select(field)
    np.testing.assert_array_equal(sel.kept_indices, tail_k_baseline(25, 5).kept_indices)


def test_composes_in_sklearn_pipeline(rng):
    fields = [make_field(rng, embed_dim=6) for _ in range(2)]
    pipe = Pipeline([("prune", GridPruner(k=4, block_size=2, alpha=0.5))])
    out = pipe.fit_transform(fields)
    assert len(out) == 2
    assert all(r.shape == (4, 6) for r in out)


def test_rejects_non_field_input(rng):
    est = GridPruner(k=4).fit()
    with pytest.raises(TypeError):
        est.select([np.zeros((4, 4))])
