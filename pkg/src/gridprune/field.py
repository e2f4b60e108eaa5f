"""Token-field data model and the on-disk tensor interchange format.

A token field is one image's worth of patch-token tensors: the projected
visual embeddings, a saliency source (raw CLS-to-patch attention per head,
or an already-averaged per-token vector), and the text/instruction
embedding the relevance scores are conditioned on.

The directory format decouples this engine from any ML framework: a
``manifest.json`` plus one raw little-endian float32 blob per tensor,
row-major, no header. Anything that can write bytes can produce fields.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .errors import ManifestError, MissingBlob, ShapeMismatch, VersionUnsupported
from .validation import as_f32, check_finite, check_positive_int, freeze

FORMAT_VERSION = "1"
DTYPE_TAG = "f32le"

_MANIFEST_NAME = "manifest.json"
_MANIFEST_REQUIRED = {"version", "grid_h", "grid_w", "embed_dim", "num_heads", "dtype", "files"}
_MANIFEST_OPTIONAL = {"meta"}
_BLOB_KEYS = ("embeddings", "saliency", "text_embedding")


@dataclass(frozen=True)
class TokenField:
    """Immutable bundle of one image's patch-token tensors.

    ``saliency`` is either ``(heads, N)`` raw CLS-attention weights (averaged
    over heads downstream) or an already-pooled ``(N,)`` vector for backends
    that export per-token saliency directly. Embeddings are stored
    post-projection, i.e. in the same space as ``text_embedding``, because
    that is the space cosine relevance is defined in.
    """

    grid_h: int
    grid_w: int
    embeddings: np.ndarray
    saliency: np.ndarray
    text_embedding: np.ndarray
    meta: dict[str, str] = dc_field(default_factory=dict)

    def __post_init__(self):
        gh = check_positive_int("grid_h", self.grid_h)
        gw = check_positive_int("grid_w", self.grid_w)
        n = gh * gw
        emb = as_f32("embeddings", self.embeddings)
        if emb.ndim != 2 or emb.shape[0] != n:
            raise ValueError(
                f"embeddings: expected shape ({n}, embed_dim) for a "
                f"{gh}x{gw} grid, got {emb.shape}"
            )
        d = emb.shape[1]
        if d < 1:
            raise ValueError("embeddings: embed_dim must be >= 1")
        sal = as_f32("saliency", self.saliency)
        if sal.ndim == 1:
            if sal.shape != (n,):
                raise ValueError(f"saliency: expected ({n},), got {sal.shape}")
        elif sal.ndim == 2:
            if sal.shape[1] != n or sal.shape[0] < 1:
                raise ValueError(f"saliency: expected (heads, {n}), got {sal.shape}")
        else:
            raise ValueError(f"saliency: expected 1-D or 2-D, got ndim={sal.ndim}")
        txt = as_f32("text_embedding", self.text_embedding, (d,))
        for name, arr in (("embeddings", emb), ("saliency", sal), ("text_embedding", txt)):
            check_finite(name, arr)
        meta = {str(k): str(v) for k, v in dict(self.meta).items()}
        object.__setattr__(self, "grid_h", gh)
        object.__setattr__(self, "grid_w", gw)
        object.__setattr__(self, "embeddings", freeze(emb))
        object.__setattr__(self, "saliency", freeze(sal))
        object.__setattr__(self, "text_embedding", freeze(txt))
        object.__setattr__(self, "meta", meta)

    @property
    def num_tokens(self) -> int:
        return self.grid_h * self.grid_w

    @property
    def embed_dim(self) -> int:
        return int(self.embeddings.shape[1])

    @property
    def num_heads(self) -> int:
        """Attention head count, or 0 when saliency arrived pre-pooled."""
        return int(self.saliency.shape[0]) if self.saliency.ndim == 2 else 0


@dataclass(frozen=True)
class Manifest:
    """Parsed, structurally validated ``manifest.json`` contents."""

    version: str
    grid_h: int
    grid_w: int
    embed_dim: int
    num_heads: int
    dtype: str
    files: dict[str, str]
    meta: dict[str, str]

    @classmethod
    def from_json(cls, text: str, where: str = _MANIFEST_NAME) -> "Manifest":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ManifestError(f"{where}: invalid JSON ({e})") from e
        if not isinstance(raw, dict):
            raise ManifestError(f"{where}: top level must be an object")
        unknown = set(raw) - _MANIFEST_REQUIRED - _MANIFEST_OPTIONAL
        if unknown:
            raise ManifestError(f"{where}: unknown field(s) {sorted(unknown)}")
        missing = _MANIFEST_REQUIRED - set(raw)
        if missing:
            raise ManifestError(f"{where}: missing field(s) {sorted(missing)}")
        version = str(raw["version"])
        if version != FORMAT_VERSION:
            raise VersionUnsupported(
                f"{where}: version {version!r} unsupported (expected {FORMAT_VERSION!r})"
            )
        if raw["dtype"] != DTYPE_TAG:
            raise ManifestError(f"{where}: dtype {raw['dtype']!r} unsupported (expected {DTYPE_TAG!r})")
        files = raw["files"]
        if not isinstance(files, dict) or set(files) != set(_BLOB_KEYS):
            raise ManifestError(f"{where}: 'files' must map exactly {list(_BLOB_KEYS)}")
        try:
            gh = check_positive_int("grid_h", raw["grid_h"])
            gw = check_positive_int("grid_w", raw["grid_w"])
            d = check_positive_int("embed_dim", raw["embed_dim"])
        except ValueError as e:
            raise ManifestError(f"{where}: {e}") from e
        heads = int(raw["num_heads"])
        if heads < 0:
            raise ManifestError(f"{where}: num_heads must be >= 0")
        meta = raw.get("meta", {})
        if not isinstance(meta, dict):
            raise ManifestError(f"{where}: 'meta' must be an object")
        return cls(
            version=version,
            grid_h=gh,
            grid_w=gw,
            embed_dim=d,
            num_heads=heads,
            dtype=DTYPE_TAG,
            files={k: str(v) for k, v in files.items()},
            meta={str(k): str(v) for k, v in meta.items()},
        )

    def blob_shape(self, key: str) -> tuple[int, ...]:
        n = self.grid_h * self.grid_w
        if key == "embeddings":
            return (n, self.embed_dim)
        if key == "saliency":
            return (self.num_heads, n) if self.num_heads > 0 else (n,)
        if key == "text_embedding":
            return (self.embed_dim,)
        raise KeyError(key)


def _read_blob(path: Path, name: str, shape: tuple[int, ...]) -> np.ndarray:
    if not path.is_file():
        raise MissingBlob(f"missing blob '{name}' at {path}")
    expected = int(np.prod(shape)) * 4
    actual = path.stat().st_size
    if actual != expected:
        raise ShapeMismatch(
            f"blob '{name}' at {path}: {actual} bytes, expected {expected} "
            f"({int(np.prod(shape))} f32 values for shape {shape})"
        )
    arr = np.fromfile(path, dtype="<f4").reshape(shape)
    check_finite(name, arr, where=str(path))
    return arr


def load_field(directory) -> TokenField:
    """Load and fully validate a token field from ``directory``.

    Either returns a field satisfying every :class:`TokenField` invariant
    or raises a diagnostic error naming the offending file/field; no
    partially constructed field escapes.
    """
    directory = Path(directory)
    manifest_path = directory / _MANIFEST_NAME
    if not manifest_path.is_file():
        raise MissingBlob(f"missing {_MANIFEST_NAME} in {directory}")
    manifest = Manifest.from_json(manifest_path.read_text(), where=str(manifest_path))
    tensors = {
        key: _read_blob(directory / manifest.files[key], key, manifest.blob_shape(key))
        for key in _BLOB_KEYS
    }
    return TokenField(
        grid_h=manifest.grid_h,
        grid_w=manifest.grid_w,
        embeddings=tensors["embeddings"],
        saliency=tensors["saliency"],
        text_embedding=tensors["text_embedding"],
        meta=manifest.meta,
    )


def save_field(field: TokenField, directory) -> None:
    """Write ``field`` to ``directory`` in the interchange format.

    Round-trip guarantee: ``load_field`` on the result reproduces the
    field's tensors bit-exactly (everything is stored as f32le, which is
    also the in-memory representation).
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {
        "embeddings": "embeddings.bin",
        "saliency": "saliency.bin",
        "text_embedding": "text_embedding.bin",
    }
    doc: dict = {
        "version": FORMAT_VERSION,
        "grid_h": field.grid_h,
        "grid_w": field.grid_w,
        "embed_dim": field.embed_dim,
        "num_heads": field.num_heads,
        "dtype": DTYPE_TAG,
        "files": files,
    }
    if field.meta:
        doc["meta"] = field.meta
    for key, fname in files.items():
        arr = getattr(field, key)
        (directory / fname).write_bytes(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    (directory / _MANIFEST_NAME).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
