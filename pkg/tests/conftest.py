import numpy as np
import pytest

from gridprune import TokenField


def make_field(
    rng: np.random.Generator,
    grid_h: int = 4,
    grid_w: int = 4,
    embed_dim: int = 8,
    heads: int | None = 2,
    meta: dict | None = None,
) -> TokenField:
    """Random valid field; heads=None uses a precomputed saliency vector."""
    n = grid_h * grid_w
    saliency = rng.random(n) if heads is None else rng.random((heads, n))
    return TokenField(
        grid_h=grid_h,
        grid_w=grid_w,
        embeddings=rng.standard_normal((n, embed_dim)),
        saliency=saliency,
        text_embedding=rng.standard_normal(embed_dim),
        meta=meta or {},
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(1234))
