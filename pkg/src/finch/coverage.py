"""AFL-style edge coverage.

Edges are keyed by ``((prev >> 1) ^ cur) % map_size``.  Hit counts are not
tracked; an edge is either covered or not.
"""

from __future__ import annotations

from typing import Iterable, Set

import numpy as np

DEFAULT_MAP_SIZE = 1 << 16

#: ``last_block`` value of a fresh bitmap (AFL starts with prev_loc = 0).
ENTRY_BLOCK = 0


class CoverageConfigError(ValueError):
    pass


def edge_id(x: int, y: int, map_size: int = DEFAULT_MAP_SIZE) -> int:
    return ((x >> 1) ^ y) & (map_size - 1)


def _check_map_size(map_size: int) -> None:
    if map_size <= 0 or map_size & (map_size - 1):
        raise CoverageConfigError(f"map_size must be a power of two, got {map_size}")


class CoverageBitmap:
    """Set of edge keys in ``[0, map_size)`` plus the last block entered.

    Stored sparsely; :meth:`to_bits` gives the dense bit-array view.
    """

    __slots__ = ("map_size", "keys", "last_block")

    def __init__(self, map_size: int = DEFAULT_MAP_SIZE, keys: Iterable[int] = ()):
        _check_map_size(map_size)
        self.map_size = map_size
        self.keys: Set[int] = set(keys)
        self.last_block = ENTRY_BLOCK

    def record_transition(self, y: int) -> "CoverageBitmap":
        self.keys.add(((self.last_block >> 1) ^ y) & (self.map_size - 1))
        self.last_block = y
        return self

    def merge(self, other: "CoverageBitmap") -> Set[int]:
        """Merge ``other`` into this bitmap; return the keys that were new."""
        fresh = new_edges(self, other)
        self.keys |= fresh
        return fresh

    def popcount(self) -> int:
        return len(self.keys)

    def to_bits(self) -> np.ndarray:
        bits = np.zeros(self.map_size, dtype=bool)
        if self.keys:
            bits[np.fromiter(self.keys, dtype=np.int64)] = True
        return bits

    def __contains__(self, key: int) -> bool:
        return key in self.keys

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CoverageBitmap):
            return NotImplemented
        return self.map_size == other.map_size and self.keys == other.keys

    def __repr__(self) -> str:
        return f"CoverageBitmap(map_size={self.map_size}, edges={len(self.keys)})"


def record_transition(cov: CoverageBitmap, y: int) -> CoverageBitmap:
    return cov.record_transition(y)


def new_edges(global_cov: CoverageBitmap, run: CoverageBitmap) -> Set[int]:
    """Edge keys set in ``run`` but not yet in ``global_cov``."""
    if global_cov.map_size != run.map_size:
        raise CoverageConfigError(
            f"map_size mismatch: {global_cov.map_size} != {run.map_size}"
        )
    return run.keys - global_cov.keys
