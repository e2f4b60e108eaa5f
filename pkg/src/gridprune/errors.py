"""Exception hierarchy for the pruning engine.

Every engine-raised validation failure derives from :class:`GridPruneError`
so callers (and the CLI) can distinguish bad inputs (exit 1) from I/O
failures (plain ``OSError``, exit 2).
"""


class GridPruneError(Exception):
    """Base class for all validation errors raised by this package."""


class ManifestError(GridPruneError):
    """Manifest file is malformed: bad JSON, missing or unknown fields."""


class VersionUnsupported(ManifestError):
    """Manifest declares a format version this build cannot read."""


class MissingBlob(GridPruneError):
    """A tensor blob referenced by the manifest does not exist."""


class ShapeMismatch(GridPruneError):
    """A tensor blob's byte length disagrees with the declared shape."""


class NonFiniteValue(GridPruneError):
    """A tensor contains NaN or Inf.

    Carries the tensor name and the flat index of the first offending value.
    """

    def __init__(self, tensor: str, flat_index: int, where: str = ""):
        self.tensor = tensor
        self.flat_index = int(flat_index)
        loc = f" in {where}" if where else ""
        super().__init__(
            f"non-finite value in tensor '{tensor}'{loc} at flat index {flat_index}"
        )


class ZeroNormText(GridPruneError):
    """The text embedding is all-zero, so cosine relevance is undefined."""


class ZeroNormTokenWarning(UserWarning):
    """A token embedding row has zero norm; its relevance is reported as 0."""


class AlphaOutOfRange(GridPruneError):
    """Fusion weight alpha must lie in [0, 1]."""


class InvalidBlockSize(GridPruneError):
    """Zone block size must satisfy 1 <= block_size <= max(grid_h, grid_w)."""


class BudgetExceedsCapacity(GridPruneError):
    """Requested token budget k exceeds the total capacity of the zones."""


class MixedN(GridPruneError):
    """Selections aggregated into one report disagree on the token count N."""


class InvalidRect(GridPruneError):
    """A planted rectangle falls outside the patch grid."""
