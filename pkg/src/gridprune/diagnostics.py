"""Quantitative analysis tools: an analytical decoder FLOPs model, a
positional-bias report over streams of selections, and side-by-side method
comparison with optional planted-token recall.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import MixedN
from .field import TokenField
from .pipeline import PruneConfig, grid_prune
from .scoring import relevance_scores, saliency_scores, fuse, minmax_normalize
from .zones import Selection, global_topk, tail_k_baseline

HIST_BINS = 64
TAIL_FRACTION = 0.1


@dataclass(frozen=True)
class FlopsModel:
    """Decoder dimensions for the visual-component cost model."""

    layers: int
    hidden: int
    ffn: int

    def __post_init__(self):
        for name in ("layers", "hidden", "ffn"):
            v = getattr(self, name)
            if int(v) != v or int(v) <= 0:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")


def flops(n_tokens: int, model: FlopsModel) -> float:
    """Visual-component decoder cost in TFLOPs for n visual tokens.

    layers * (2*n^2*d + 4*n*d^2 + 3*n*d*m) / 1e12: quadratic attention
    term plus attention projections plus the gated FFN.
    """
    n = int(n_tokens)
    if n < 0:
        raise ValueError(f"n_tokens must be >= 0, got {n}")
    n = float(n)
    d = float(model.hidden)
    m = float(model.ffn)
    return model.layers * (2.0 * n * n * d + 4.0 * n * d * d + 3.0 * n * d * m) / 1e12


def tail_start(n_tokens: int, fraction: float = TAIL_FRACTION) -> int:
    """First index of the final ``fraction`` of raster order: ceil((1-f)*N).

    The product is nudged down by 1e-9 before the ceil so boundaries that
    are exact in rational arithmetic (e.g. one third of 576) are not pushed
    up by float round-off.
    """
    return int(np.ceil((1.0 - fraction) * n_tokens - 1e-9))


def _bin_edges(n_tokens: int, bins: int = HIST_BINS) -> np.ndarray:
    return (np.arange(bins + 1, dtype=np.int64) * n_tokens) // bins


@dataclass(frozen=True)
class BiasReport:
    """Where kept tokens land in raster order, aggregated over selections.

    The exact per-index counts are the stored statistic, which makes the
    merge associative to the bit; the fixed-width histogram, tail mass and
    spatial entropy are derived views.
    """

    index_counts: np.ndarray
    sample_count: int
    n_tokens: int

    @property
    def total_kept(self) -> int:
        return int(self.index_counts.sum())

    @property
    def histogram(self) -> np.ndarray:
        """Kept-index counts over HIST_BINS equal slices of raster order."""
        edges = _bin_edges(self.n_tokens)
        return np.add.reduceat(self.index_counts, edges[:-1])

    def mass_in_final(self, fraction: float) -> float:
        """Fraction of kept indices at or beyond ceil((1-fraction)*N)."""
        total = self.total_kept
        if total == 0:
            return 0.0
        start = tail_start(self.n_tokens, fraction)
        return float(self.index_counts[start:].sum() / total)

    @property
    def tail_mass(self) -> float:
        """Kept-index mass in the final decile of raster order."""
        return self.mass_in_final(TAIL_FRACTION)

    @property
    def spatial_entropy(self) -> float:
        """Shannon entropy of the histogram-bin distribution, in [0, 1].

        1 means kept tokens spread evenly across raster-order bins; a
        positional spike drives it toward 0.
        """
        counts = self.histogram.astype(np.float64)
        total = counts.sum()
        if total == 0:
            return 0.0
        p = counts / total
        nz = p > 0
        h = -np.sum(p[nz] * np.log(p[nz]))
        return float(h / np.log(HIST_BINS))

    def to_dict(self) -> dict:
        return {
            "n_tokens": self.n_tokens,
            "sample_count": self.sample_count,
            "total_kept": self.total_kept,
            "histogram": self.histogram.tolist(),
            "tail_mass": self.tail_mass,
            "final_third_mass": self.mass_in_final(1.0 / 3.0),
            "spatial_entropy": self.spatial_entropy,
            "index_counts": self.index_counts.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BiasReport":
        return cls(
            index_counts=np.asarray(doc["index_counts"], dtype=np.int64),
            sample_count=int(doc["sample_count"]),
            n_tokens=int(doc["n_tokens"]),
        )

    def to_tsv(self) -> str:
        """Gnuplot-friendly histogram: bin_start <TAB> count, one per line."""
        edges = _bin_edges(self.n_tokens)
        lines = [
            f"{int(start)}\t{int(count)}"
            for start, count in zip(edges[:-1], self.histogram)
        ]
        return "\n".join(lines) + "\n"


def empty_report(n_tokens: int) -> BiasReport:
    return BiasReport(
        index_counts=np.zeros(int(n_tokens), dtype=np.int64),
        sample_count=0,
        n_tokens=int(n_tokens),
    )


def bias_report(selections: Iterable[Selection], n_tokens: int) -> BiasReport:
    """Aggregate kept-index statistics over a stream of selections.

    All selections must come from fields with the same token count;
    disagreement raises :class:`MixedN`.
    """
    n = int(n_tokens)
    counts = np.zeros(n, dtype=np.int64)
    samples = 0
    for sel in selections:
        if sel.num_tokens != n:
            raise MixedN(
                f"selection has num_tokens={sel.num_tokens}, report expects {n}"
            )
        counts += np.bincount(sel.kept_indices, minlength=n)
        samples += 1
    return BiasReport(index_counts=counts, sample_count=samples, n_tokens=n)


def merge_reports(a: BiasReport, b: BiasReport) -> BiasReport:
    """Exact associative merge: report(A) + report(B) = report(A u B)."""
    if a.n_tokens != b.n_tokens:
        raise MixedN(f"cannot merge reports over N={a.n_tokens} and N={b.n_tokens}")
    return BiasReport(
        index_counts=a.index_counts + b.index_counts,
        sample_count=a.sample_count + b.sample_count,
        n_tokens=a.n_tokens,
    )


# --- method comparison -------------------------------------------------

MethodFn = Callable[[TokenField, PruneConfig], Selection]


def _method_gridprune(field: TokenField, cfg: PruneConfig) -> Selection:
    return grid_prune(field, cfg)


def _method_global_topk(field: TokenField, cfg: PruneConfig) -> Selection:
    scores = fuse(relevance_scores(field), saliency_scores(field), cfg.alpha)
    return global_topk(scores, cfg.k)


def _method_saliency_topk(field: TokenField, cfg: PruneConfig) -> Selection:
    """Global top-k on saliency alone (the alpha=1 endpoint, made explicit)."""
    rel = np.zeros(field.num_tokens)
    return global_topk(fuse(rel, saliency_scores(field), 1.0), cfg.k)


def _method_relevance_topk(field: TokenField, cfg: PruneConfig) -> Selection:
    sal = minmax_normalize(np.zeros(field.num_tokens))
    return global_topk(fuse(relevance_scores(field), sal, 0.0), cfg.k)


def _method_tail_k(field: TokenField, cfg: PruneConfig) -> Selection:
    return tail_k_baseline(field.num_tokens, cfg.k)


METHODS: dict[str, MethodFn] = {
    "gridprune": _method_gridprune,
    "global_topk": _method_global_topk,
    "saliency_topk": _method_saliency_topk,
    "relevance_topk": _method_relevance_topk,
    "tail_k": _method_tail_k,
}


@dataclass(frozen=True)
class MethodRow:
    name: str
    report: BiasReport
    mean_recall: float | None


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[MethodRow, ...]

    @property
    def has_recall(self) -> bool:
        return any(r.mean_recall is not None for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "methods": [
                {
                    "name": r.name,
                    "tail_mass": r.report.tail_mass,
                    "final_third_mass": r.report.mass_in_final(1.0 / 3.0),
                    "spatial_entropy": r.report.spatial_entropy,
                    "sample_count": r.report.sample_count,
                    **({"mean_recall": r.mean_recall} if r.mean_recall is not None else {}),
                }
                for r in self.rows
            ]
        }

    def to_markdown(self) -> str:
        headers = ["method", "tail_mass", "final_third_mass", "spatial_entropy"]
        if self.has_recall:
            headers.append("mean_recall")
        lines = [
            "| " + " | ".join(headers) + " |",
            "|" + "|".join("---" for _ in headers) + "|",
        ]
        for r in self.rows:
            cells = [
                r.name,
                f"{r.report.tail_mass:.4f}",
                f"{r.report.mass_in_final(1.0 / 3.0):.4f}",
                f"{r.report.spatial_entropy:.4f}",
            ]
            if self.has_recall:
                cells.append("" if r.mean_recall is None else f"{r.mean_recall:.4f}")
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"


def recall(selection: Selection, planted: np.ndarray) -> float:
    """|kept and planted| / |planted| for one scene."""
    planted = np.asarray(planted)
    if planted.dtype == bool:
        planted = np.flatnonzero(planted)
    if planted.size == 0:
        raise ValueError("planted mask is empty")
    hits = np.intersect1d(selection.kept_indices, planted, assume_unique=True)
    return float(hits.size / planted.size)


def compare(
    methods: Sequence[tuple[str, MethodFn]],
    corpus: Iterable[tuple[TokenField, np.ndarray | None]],
    cfg: PruneConfig,
) -> ComparisonTable:
    """Run every named method over the corpus and tabulate bias statistics.

    Corpus items are (field, planted_mask_or_None); when every scene
    carries a non-empty mask, a mean planted-token recall column is added.
    """
    corpus = list(corpus)
    if not corpus:
        raise ValueError("corpus is empty")
    rows = []
    for name, fn in methods:
        report = None
        recalls: list[float] = []
        masks_everywhere = True
        for field, mask in corpus:
            sel = fn(field, cfg)
            r = bias_report([sel], field.num_tokens)
            report = r if report is None else merge_reports(report, r)
            if mask is not None and np.asarray(mask).any():
                recalls.append(recall(sel, mask))
            else:
                masks_everywhere = False
        mean_recall = float(np.mean(recalls)) if (masks_everywhere and recalls) else None
        rows.append(MethodRow(name=name, report=report, mean_recall=mean_recall))
    return ComparisonTable(rows=tuple(rows))
