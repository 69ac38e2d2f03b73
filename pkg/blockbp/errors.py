"""
Exception types for blockbp.

Every error raised by the library derives from BlockBPError so callers
(the CLI in particular) can separate numerical failures from bugs.
"""
from __future__ import annotations

from typing import Any, Optional, Sequence, Tuple


class BlockBPError(Exception):
    """Base class for all blockbp errors."""


class ShapeMismatchError(BlockBPError):
    """Two legs or two objects that must agree in shape do not.

    Attributes:
        left: Description of the first leg/object (e.g. ``('t1', 2, 3)``)
        right: Description of the second leg/object
    """

    def __init__(self, message: str, left: Any = None, right: Any = None) -> None:
        super().__init__(message)
        self.left = left
        self.right = right


class DecompositionError(BlockBPError):
    """A matrix factorization failed to converge."""

    def __init__(self, message: str, shape: Sequence[int] = ()) -> None:
        super().__init__(message)
        self.shape: Tuple[int, ...] = tuple(shape)


class PartitionError(BlockBPError):
    """A lattice cannot be split into the requested blocks."""

    def __init__(self, message: str, axis: Optional[str] = None) -> None:
        super().__init__(message)
        self.axis = axis


class ConfigError(BlockBPError):
    """Invalid model, evolution or run configuration."""


class SizeLimitError(BlockBPError):
    """An exact oracle was asked for a problem above its size cap."""

    def __init__(self, message: str, limit: int = 0, requested: int = 0) -> None:
        super().__init__(message)
        self.limit = limit
        self.requested = requested


class EnvironmentRegionError(BlockBPError):
    """A bond outside the center of a block environment was requested."""

    def __init__(self, message: str, bond: Any = None, center: Any = None) -> None:
        super().__init__(message)
        self.bond = bond
        self.center = center


class ZeroNormError(BlockBPError):
    """An MPS or tensor that must be normalizable has zero norm."""


class PepsFormatError(BlockBPError):
    """A stored PEPS file or its sidecar is malformed or does not match."""

    def __init__(self, message: str, path: Any = None) -> None:
        super().__init__(message)
        self.path = path
