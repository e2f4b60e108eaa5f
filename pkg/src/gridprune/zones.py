"""Zonal selection: grid partitioning, softmax budget allocation with
capped largest-remainder rounding, intra-zone top-k, and the global
top-k / tail-k baselines.

The two-stage flow replaces one global argmax with "guide globally,
select locally": zone budgets come from a softmax over per-zone mean
relevance, then each zone keeps its own highest fused-score tokens.
All tie-breaks are by lower index so outputs are bitwise reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceedsCapacity, InvalidBlockSize
from .scoring import ScoreSet


@dataclass(frozen=True)
class Zone:
    """One rectangular block of grid positions."""

    id: int
    member_indices: np.ndarray  # raster order, ascending
    capacity: int


@dataclass(frozen=True)
class ZoneMap:
    """Partition of a grid_h x grid_w token grid into square zones.

    Zones are raster-ordered by their top-left token. Grids that do not
    divide evenly get truncated edge zones whose capacity is their actual
    member count.
    """

    grid_h: int
    grid_w: int
    block_size: int
    zones: tuple[Zone, ...]
    token_to_zone: np.ndarray

    @property
    def num_tokens(self) -> int:
        return self.grid_h * self.grid_w

    @property
    def num_zones(self) -> int:
        return len(self.zones)

    @property
    def capacities(self) -> np.ndarray:
        return np.array([z.capacity for z in self.zones], dtype=np.int64)


@dataclass(frozen=True)
class BudgetAllocation:
    """Integer per-zone budgets summing exactly to k.

    probs         softmax of zone relevance (sums to 1)
    float_budgets probs * k, before rounding
    budgets       integer budgets, 0 <= budgets[j] <= capacity[j]
    """

    probs: np.ndarray
    float_budgets: np.ndarray
    budgets: np.ndarray
    k: int


@dataclass(frozen=True)
class Selection:
    """Kept token indices plus per-zone provenance.

    ``kept_indices`` is strictly increasing (original raster order).
    ``per_zone`` maps zone id -> kept indices inside that zone; it is empty
    for the global baselines, which have no zone structure.
    """

    kept_indices: np.ndarray
    per_zone: dict[int, np.ndarray]
    budgets: BudgetAllocation | None
    num_tokens: int

    @property
    def k(self) -> int:
        return int(self.kept_indices.shape[0])


def partition(grid_h: int, grid_w: int, block_size: int) -> ZoneMap:
    """Split the grid into non-overlapping square zones of ``block_size``.

    M = ceil(grid_h / block_size) * ceil(grid_w / block_size). Every token
    belongs to exactly one zone.
    """
    grid_h, grid_w, block_size = int(grid_h), int(grid_w), int(block_size)
    if grid_h < 1 or grid_w < 1:
        raise ValueError("grid_h and grid_w must be >= 1")
    if not (1 <= block_size <= max(grid_h, grid_w)):
        raise InvalidBlockSize(
            f"block_size must be in [1, {max(grid_h, grid_w)}], got {block_size}"
        )
    blocks_h = -(-grid_h // block_size)
    blocks_w = -(-grid_w // block_size)
    token_to_zone = np.empty(grid_h * grid_w, dtype=np.int64)
    zones = []
    for br in range(blocks_h):
        r0, r1 = br * block_size, min((br + 1) * block_size, grid_h)
        for bc in range(blocks_w):
            c0, c1 = bc * block_size, min((bc + 1) * block_size, grid_w)
            zid = br * blocks_w + bc
            rows = np.arange(r0, r1)[:, None] * grid_w
            cols = np.arange(c0, c1)[None, :]
            members = (rows + cols).ravel()
            token_to_zone[members] = zid
            zones.append(Zone(id=zid, member_indices=members, capacity=members.size))
    return ZoneMap(
        grid_h=grid_h,
        grid_w=grid_w,
        block_size=block_size,
        zones=tuple(zones),
        token_to_zone=token_to_zone,
    )


def zone_relevance(relevance: np.ndarray, zmap: ZoneMap) -> np.ndarray:
    """Arithmetic mean of raw relevance over each zone's members."""
    relevance = np.asarray(relevance, dtype=np.float64)
    if relevance.shape != (zmap.num_tokens,):
        raise ValueError(
            f"relevance: expected ({zmap.num_tokens},), got {relevance.shape}"
        )
    sums = np.bincount(zmap.token_to_zone, weights=relevance, minlength=zmap.num_zones)
    counts = np.bincount(zmap.token_to_zone, minlength=zmap.num_zones)
    return sums / counts


def softmax(values: np.ndarray) -> np.ndarray:
    """Numerically stable softmax (max-subtracted), temperature 1."""
    values = np.asarray(values, dtype=np.float64)
    ex = np.exp(values - values.max())
    return ex / ex.sum()


def round_budgets(
    float_budgets: np.ndarray,
    probs: np.ndarray,
    capacities: np.ndarray,
    k: int,
) -> np.ndarray:
    """Capped largest-remainder rounding of float budgets to integers.

    Floors are capped at each zone's capacity; the remaining tokens go to
    zones still below capacity, ranked by (fractional part desc, prob desc,
    index asc). A ranking pass grants at most one token per zone; passes
    repeat until the residual is exhausted, which k <= sum(capacities)
    guarantees.
    """
    float_budgets = np.asarray(float_budgets, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    caps = np.asarray(capacities, dtype=np.int64)
    floors = np.floor(float_budgets)
    budgets = np.minimum(floors, caps).astype(np.int64)
    fractions = float_budgets - floors

    remaining = k - int(budgets.sum())
    while remaining > 0:
        eligible = np.flatnonzero(budgets < caps)
        order = eligible[np.lexsort((eligible, -probs[eligible], -fractions[eligible]))]
        grant = order[:remaining]
        budgets[grant] += 1
        remaining -= grant.size
    return budgets


def allocate(zone_rel: np.ndarray, capacities: np.ndarray, k: int) -> BudgetAllocation:
    """Distribute k tokens over zones: softmax share, then capped
    largest-remainder rounding (:func:`round_budgets`)."""
    caps = np.asarray(capacities, dtype=np.int64)
    if caps.ndim != 1 or (caps < 0).any():
        raise ValueError("capacities must be a 1-D vector of non-negative ints")
    k = int(k)
    total = int(caps.sum())
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if k > total:
        raise BudgetExceedsCapacity(f"k ({k}) exceeds total zone capacity ({total})")
    zone_rel = np.asarray(zone_rel, dtype=np.float64)
    if zone_rel.shape != caps.shape:
        raise ValueError(f"zone_rel {zone_rel.shape} and capacities {caps.shape} differ")

    probs = softmax(zone_rel)
    float_budgets = probs * k
    budgets = round_budgets(float_budgets, probs, caps, k)
    return BudgetAllocation(probs=probs, float_budgets=float_budgets, budgets=budgets, k=k)


def select(scores: ScoreSet, zmap: ZoneMap, budget: BudgetAllocation) -> Selection:
    """Keep each zone's top-budget tokens by fused score (ties: lower index)."""
    if scores.num_tokens != zmap.num_tokens:
        raise ValueError(
            f"scores cover {scores.num_tokens} tokens, zone map {zmap.num_tokens}"
        )
    if budget.budgets.shape != (zmap.num_zones,):
        raise ValueError("budget does not match the zone map")
    fused = scores.fused
    per_zone: dict[int, np.ndarray] = {}
    for zone in zmap.zones:
        kj = int(budget.budgets[zone.id])
        members = zone.member_indices
        order = np.lexsort((members, -fused[members]))
        kept = np.sort(members[order[:kj]])
        per_zone[zone.id] = kept
    kept_indices = np.sort(np.concatenate([v for v in per_zone.values()]))
    return Selection(
        kept_indices=kept_indices,
        per_zone=per_zone,
        budgets=budget,
        num_tokens=zmap.num_tokens,
    )


def global_topk(scores: ScoreSet, k: int) -> Selection:
    """Baseline: the k largest fused scores over the whole field.

    Ties break toward the lower index; output indices are ascending.
    """
    n = scores.num_tokens
    k = int(k)
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if k > n:
        raise BudgetExceedsCapacity(f"k ({k}) exceeds token count ({n})")
    order = np.lexsort((np.arange(n), -scores.fused))
    kept = np.sort(order[:k])
    return Selection(kept_indices=kept, per_zone={}, budgets=None, num_tokens=n)


def tail_k_baseline(n: int, k: int) -> Selection:
    """Positional-bias reference: keep the last k raster indices."""
    n, k = int(n), int(k)
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if k > n:
        raise BudgetExceedsCapacity(f"k ({k}) exceeds token count ({n})")
    kept = np.arange(n - k, n, dtype=np.int64)
    return Selection(kept_indices=kept, per_zone={}, budgets=None, num_tokens=n)


def selection_to_dict(
    selection: Selection,
    block_size: int | None = None,
    alpha: float | None = None,
) -> dict:
    """JSON-ready view of a selection (consumed by diagnostics and the CLI)."""
    budgets = selection.budgets
    return {
        "kept_indices": selection.kept_indices.tolist(),
        "budgets": budgets.budgets.tolist() if budgets is not None else None,
        "probs": budgets.probs.tolist() if budgets is not None else None,
        "per_zone": {str(zid): kept.tolist() for zid, kept in selection.per_zone.items()},
        "num_tokens": selection.num_tokens,
        "config": {"k": selection.k, "block_size": block_size, "alpha": alpha},
    }


def selection_from_dict(doc: dict) -> Selection:
    """Rebuild a selection from its JSON form (inverse of selection_to_dict)."""
    kept = np.asarray(doc["kept_indices"], dtype=np.int64)
    per_zone = {
        int(zid): np.asarray(v, dtype=np.int64)
        for zid, v in (doc.get("per_zone") or {}).items()
    }
    budgets = None
    if doc.get("budgets") is not None:
        b = np.asarray(doc["budgets"], dtype=np.int64)
        p = np.asarray(doc["probs"], dtype=np.float64)
        budgets = BudgetAllocation(
            probs=p, float_budgets=p * kept.size, budgets=b, k=int(kept.size)
        )
    return Selection(
        kept_indices=kept,
        per_zone=per_zone,
        budgets=budgets,
        num_tokens=int(doc["num_tokens"]),
    )


def selection_to_json(
    selection: Selection,
    block_size: int | None = None,
    alpha: float | None = None,
) -> str:
    return json.dumps(
        selection_to_dict(selection, block_size=block_size, alpha=alpha),
        sort_keys=True,
        separators=(",", ":"),
    )
