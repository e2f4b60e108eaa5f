"""Command-line surface: prune, prune-hr, allocate, flops, bias, synth,
compare.

Conventions shared by every subcommand:

* a ``--config FILE`` overlay (JSON or TOML, flat keys named like the
  long flags with underscores) supplies defaults; explicit flags win;
* the resolved configuration is printed to stderr as one JSON line;
* outputs are deterministic given inputs and seeds (sorted JSON keys,
  sorted file orders, seeded generators);
* exit 0 on success, 1 on validation/usage errors, 2 on I/O errors;
* corpus-level subcommands use a bounded worker pool capped by the
  ``GRIDPRUNE_THREADS`` environment variable, merging in input order.
"""

from __future__ import annotations

import argparse
import glob as globmod
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .diagnostics import (
    METHODS,
    BiasReport,
    FlopsModel,
    bias_report,
    compare,
    flops,
    merge_reports,
)
from .errors import GridPruneError
from .field import load_field, save_field
from .pipeline import (
    PruneConfig,
    grid_prune,
    high_res_to_dict,
    load_high_res,
    prune_high_res,
)
from .synth import PATTERNS, SceneSpec, generate
from .zones import allocate, selection_from_dict, selection_to_dict

_REQUIRED = object()


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _worker_count() -> int:
    env = os.environ.get("GRIDPRUNE_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def _parallel_map(fn, items):
    """Apply fn over items with a bounded pool; results keep input order."""
    items = list(items)
    workers = _worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _load_config_file(path: str) -> dict:
    p = Path(path)
    if p.suffix.lower() == ".toml":
        import tomli

        doc = tomli.loads(p.read_text())
    else:
        doc = json.loads(p.read_text())
    if not isinstance(doc, dict):
        raise GridPruneError(f"config file {path}: expected a flat key-value table")
    return doc


def _resolve(args: argparse.Namespace, spec: dict[str, object]) -> dict:
    """Merge flag values over config-file values over defaults; flags win."""
    overlay = _load_config_file(args.config) if getattr(args, "config", None) else {}
    unknown = set(overlay) - set(spec)
    if unknown:
        raise GridPruneError(f"config file: unknown key(s) {sorted(unknown)}")
    resolved = {}
    for dest, default in spec.items():
        value = getattr(args, dest, None)
        if value is None:
            value = overlay.get(dest, default)
        if value is _REQUIRED:
            raise GridPruneError(f"missing required option --{dest.replace('_', '-')}")
        resolved[dest] = value
    print("config: " + json.dumps(resolved, sort_keys=True, default=str), file=sys.stderr)
    return resolved


def _write_json(path: str, doc) -> None:
    Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def _prune_config(res: dict) -> PruneConfig:
    return PruneConfig(
        k=int(res["keep"]),
        block_size=int(res["block_size"]),
        alpha=float(res["alpha"]),
        preset=res["preset"],
    )


# --- subcommands ---------------------------------------------------------

def _cmd_prune(args) -> int:
    res = _resolve(
        args,
        {
            "input": _REQUIRED,
            "keep": _REQUIRED,
            "block_size": 2,
            "alpha": 0.8,
            "preset": None,
            "out": _REQUIRED,
        },
    )
    cfg = _prune_config(res)
    field = load_field(res["input"])
    if cfg.k > field.num_tokens:
        raise GridPruneError("keep exceeds token count")
    start = time.perf_counter()
    sel = grid_prune(field, cfg)
    elapsed_ms = (time.perf_counter() - start) * 1e3
    _write_json(res["out"], selection_to_dict(sel, block_size=cfg.block_size, alpha=cfg.alpha))
    print(f"selection time: {elapsed_ms:.3f} ms", file=sys.stderr)
    print(f"kept {sel.k} of {field.num_tokens} tokens -> {res['out']}")
    return 0


def _cmd_prune_hr(args) -> int:
    res = _resolve(
        args,
        {
            "input": _REQUIRED,
            "keep": _REQUIRED,
            "block_size": 2,
            "alpha": 0.8,
            "preset": None,
            "out": _REQUIRED,
        },
    )
    cfg = _prune_config(res)
    inp, names = load_high_res(res["input"])
    smallest = min(f.num_tokens for f in inp.sub_images)
    if cfg.k > smallest:
        raise GridPruneError("keep exceeds token count")
    result = prune_high_res(inp, cfg)
    _write_json(res["out"], high_res_to_dict(result, names, cfg))
    total = int(result.concatenated.size)
    print(f"kept {total} tokens over {len(names)} sub-images -> {res['out']}")
    return 0


def _cmd_allocate(args) -> int:
    res = _resolve(
        args,
        {"zone_rel": _REQUIRED, "capacities": _REQUIRED, "keep": _REQUIRED, "out": None},
    )
    zone_rel = np.asarray(json.loads(Path(res["zone_rel"]).read_text()), dtype=np.float64)
    caps = np.asarray(json.loads(Path(res["capacities"]).read_text()), dtype=np.int64)
    alloc = allocate(zone_rel, caps, int(res["keep"]))
    doc = {
        "k": alloc.k,
        "probs": alloc.probs.tolist(),
        "float_budgets": alloc.float_budgets.tolist(),
        "budgets": alloc.budgets.tolist(),
    }
    if res["out"]:
        _write_json(res["out"], doc)
    print(json.dumps(doc, sort_keys=True, separators=(",", ":")))
    return 0


def _cmd_flops(args) -> int:
    res = _resolve(
        args,
        {"tokens": _REQUIRED, "layers": _REQUIRED, "hidden": _REQUIRED, "ffn": _REQUIRED},
    )
    model = FlopsModel(layers=int(res["layers"]), hidden=int(res["hidden"]), ffn=int(res["ffn"]))
    print(f"{flops(int(res['tokens']), model):.2f}")
    return 0


def _cmd_bias(args) -> int:
    res = _resolve(
        args,
        {"selections": _REQUIRED, "tokens": _REQUIRED, "out": _REQUIRED, "tsv": None},
    )
    paths = sorted(globmod.glob(res["selections"]))
    if not paths:
        raise GridPruneError(f"no selection files match {res['selections']!r}")
    n = int(res["tokens"])

    def one(path: str) -> BiasReport:
        sel = selection_from_dict(json.loads(Path(path).read_text()))
        return bias_report([sel], n)

    reports = _parallel_map(one, paths)
    total = reports[0]
    for r in reports[1:]:
        total = merge_reports(total, r)
    _write_json(res["out"], total.to_dict())
    if res["tsv"]:
        Path(res["tsv"]).write_text(total.to_tsv())
    print(
        f"aggregated {total.sample_count} selections: "
        f"tail_mass={total.tail_mass:.4f} entropy={total.spatial_entropy:.4f}"
    )
    return 0


def _parse_rects(values) -> tuple[tuple[int, int, int, int], ...]:
    rects = []
    for value in values or ():
        parts = str(value).split(",")
        if len(parts) != 4:
            raise GridPruneError(f"--rect expects 'r0,c0,h,w', got {value!r}")
        rects.append(tuple(int(p) for p in parts))
    return tuple(rects)


def _cmd_synth(args) -> int:
    res = _resolve(
        args,
        {
            "pattern": _REQUIRED,
            "count": _REQUIRED,
            "seed": _REQUIRED,
            "out": _REQUIRED,
            "grid_h": 24,
            "grid_w": 24,
            "embed_dim": 64,
            "strength": 3.0,
            "rect": None,
        },
    )
    if res["pattern"] not in PATTERNS:
        raise GridPruneError(f"--pattern must be one of {', '.join(PATTERNS)}")
    rects = _parse_rects(res["rect"])
    out = Path(res["out"])
    out.mkdir(parents=True, exist_ok=True)
    base_seed = int(res["seed"])
    count = int(res["count"])

    def one(i: int) -> str:
        spec = SceneSpec(
            grid_h=int(res["grid_h"]),
            grid_w=int(res["grid_w"]),
            embed_dim=int(res["embed_dim"]),
            pattern=res["pattern"],
            planted_rects=rects,
            signal_strength=float(res["strength"]),
            seed=base_seed + i,
        )
        name = f"scene_{i:05d}"
        scene_dir = out / name
        field, mask = generate(spec)
        save_field(field, scene_dir)
        _write_json(
            scene_dir / "planted.json",
            {
                "pattern": spec.pattern,
                "seed": spec.seed,
                "signal_strength": spec.signal_strength,
                "planted_indices": np.flatnonzero(mask).tolist(),
            },
        )
        return name

    names = _parallel_map(one, range(count))
    print(f"wrote {len(names)} scene(s) to {out}")
    return 0


def _load_corpus(directory: str):
    root = Path(directory)
    scene_dirs = sorted(p for p in root.iterdir() if (p / "manifest.json").is_file())
    if not scene_dirs:
        raise GridPruneError(f"no field directories under {directory}")

    def one(scene: Path):
        field = load_field(scene)
        planted_path = scene / "planted.json"
        mask = None
        if planted_path.is_file():
            doc = json.loads(planted_path.read_text())
            idx = np.asarray(doc.get("planted_indices", []), dtype=np.int64)
            mask = np.zeros(field.num_tokens, dtype=bool)
            mask[idx] = True
        return field, mask

    return _parallel_map(one, scene_dirs)


def _cmd_compare(args) -> int:
    res = _resolve(
        args,
        {
            "methods": _REQUIRED,
            "corpus": _REQUIRED,
            "keep": _REQUIRED,
            "block_size": 2,
            "alpha": 0.8,
            "preset": None,
            "out": None,
        },
    )
    names = [m.strip() for m in str(res["methods"]).split(",") if m.strip()]
    unknown = [m for m in names if m not in METHODS]
    if unknown:
        raise GridPruneError(
            f"unknown method(s) {unknown}; known: {', '.join(sorted(METHODS))}"
        )
    cfg = _prune_config(res)
    corpus = _load_corpus(res["corpus"])
    table = compare([(m, METHODS[m]) for m in names], corpus, cfg)
    if res["out"]:
        _write_json(res["out"], table.to_dict())
    print(table.to_markdown(), end="")
    return 0


# --- parser --------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="gridprune", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler, help_: str):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(handler=handler)
        p.add_argument("--config", help="JSON/TOML config overlay; flags win")
        return p

    p = add("prune", _cmd_prune, "prune one token-field directory")
    p.add_argument("--input", help="field directory")
    p.add_argument("--keep", type=int, help="tokens to retain")
    p.add_argument("--block-size", type=int, dest="block_size")
    p.add_argument("--alpha", type=float)
    p.add_argument("--preset", help="named alpha preset, e.g. llava15-11")
    p.add_argument("--out", help="selection JSON output path")

    p = add("prune-hr", _cmd_prune_hr, "prune a multi-sub-image directory")
    p.add_argument("--input", help="directory with order.json + field subdirs")
    p.add_argument("--keep", type=int, help="tokens to retain per sub-image")
    p.add_argument("--block-size", type=int, dest="block_size")
    p.add_argument("--alpha", type=float)
    p.add_argument("--preset")
    p.add_argument("--out")

    p = add("allocate", _cmd_allocate, "integer zone budgets from relevance")
    p.add_argument("--zone-rel", dest="zone_rel", help="JSON array of zone relevances")
    p.add_argument("--capacities", help="JSON array of zone capacities")
    p.add_argument("--keep", type=int)
    p.add_argument("--out")

    p = add("flops", _cmd_flops, "decoder TFLOPs for a token count")
    p.add_argument("--tokens", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--ffn", type=int)

    p = add("bias", _cmd_bias, "aggregate positional-bias report")
    p.add_argument("--selections", help="glob of selection JSON files")
    p.add_argument("--tokens", type=int)
    p.add_argument("--out")
    p.add_argument("--tsv", help="also write a gnuplot-style histogram")

    p = add("synth", _cmd_synth, "generate a synthetic corpus")
    p.add_argument("--pattern", choices=PATTERNS)
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--grid-h", type=int, dest="grid_h")
    p.add_argument("--grid-w", type=int, dest="grid_w")
    p.add_argument("--embed-dim", type=int, dest="embed_dim")
    p.add_argument("--strength", type=float)
    p.add_argument("--rect", action="append", help="r0,c0,h,w (repeatable)")

    p = add("compare", _cmd_compare, "compare methods over a corpus")
    p.add_argument("--methods", help="comma list, e.g. gridprune,global_topk,tail_k")
    p.add_argument("--corpus", help="directory of scene field dirs")
    p.add_argument("--keep", type=int)
    p.add_argument("--block-size", type=int, dest="block_size")
    p.add_argument("--alpha", type=float)
    p.add_argument("--preset")
    p.add_argument("--out")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (GridPruneError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
