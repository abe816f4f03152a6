"""Branch distances and per-execution distance bitmaps.

A branch distance measures how far a comparison ``a <rel> b`` is from
flipping.  Every conditional site visited during an execution records the
smallest distance it saw; sites that were never visited implicitly carry the
maximum distance ``K``.
"""

from __future__ import annotations

import enum
import math
from typing import Dict, Iterable, List, Mapping, Sequence

U64_MASK = (1 << 64) - 1

#: Default maximum distance (32-bit comparisons).
DEFAULT_K = (1 << 32) - 1


class Relation(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    GT = ">"
    GE = ">="
    LE = "<="
    LT = "<"
    EQ = "=="
    NE = "!="

    def holds(self, a: int, b: int) -> bool:
        return _EVAL[self](a, b)


_EVAL = {
    Relation.TRUE: lambda a, b: True,
    Relation.FALSE: lambda a, b: False,
    Relation.GT: lambda a, b: a > b,
    Relation.GE: lambda a, b: a >= b,
    Relation.LE: lambda a, b: a <= b,
    Relation.LT: lambda a, b: a < b,
    Relation.EQ: lambda a, b: a == b,
    Relation.NE: lambda a, b: a != b,
}


class DistanceMode(str, enum.Enum):
    ABS = "abs"
    XOR = "xor"


class Normalization(str, enum.Enum):
    LINEAR = "linear"
    LOG = "log"


def branch_distance(rel: Relation, a: int, b: int, mode: DistanceMode = DistanceMode.ABS) -> int:
    """Distance between operands ``a`` and ``b`` of a comparison.

    Operands are unsigned 64-bit values.  ``TRUE``/``FALSE`` conditions carry
    no operands and always yield 0.  The result is not capped; callers cap
    it at ``K`` when storing.
    """
    if rel is Relation.TRUE or rel is Relation.FALSE:
        return 0
    a &= U64_MASK
    b &= U64_MASK
    if mode == DistanceMode.XOR:
        return a ^ b
    return a - b if a >= b else b - a


def to_unsigned(value: int, bits: int = 64) -> int:
    """Map a signed integer to an order-preserving unsigned 64-bit value.

    Signed operands are offset by 2**(bits-1) so that ``x < y`` as signed
    integers iff ``to_unsigned(x) < to_unsigned(y)``.
    """
    half = 1 << (bits - 1)
    if not -half <= value < half:
        raise ValueError(f"{value} does not fit in a signed {bits}-bit integer")
    return value + half


class DistanceBitmap:
    """Sparse map from branch-site id to the minimum distance observed.

    Absent sites denote distance ``k`` (site not visited).
    """

    __slots__ = ("entries", "k")

    def __init__(self, entries: Mapping[int, int] | None = None, k: int = DEFAULT_K):
        self.k = k
        self.entries: Dict[int, int] = {}
        if entries:
            for site, d in entries.items():
                self.record(site, d)

    def record(self, site: int, d: int) -> "DistanceBitmap":
        if d > self.k:
            d = self.k
        prev = self.entries.get(site)
        if prev is None or d < prev:
            self.entries[site] = d
        return self

    def get(self, site: int) -> int:
        return self.entries.get(site, self.k)

    def project(self, objectives: Sequence[int]) -> List[int]:
        """Distances aligned to ``objectives`` (the vector f(t))."""
        get = self.entries.get
        k = self.k
        return [get(s, k) for s in objectives]

    def visited(self) -> Iterable[int]:
        return self.entries.keys()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DistanceBitmap):
            return NotImplemented
        return self.k == other.k and self.entries == other.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __repr__(self) -> str:
        return f"DistanceBitmap({self.entries!r}, k={self.k})"


def record(bitmap: DistanceBitmap, site: int, d: int) -> DistanceBitmap:
    """Min-merge ``d`` into ``bitmap`` at ``site``."""
    return bitmap.record(site, d)


def normalize(
    bitmap: DistanceBitmap,
    objectives: Sequence[int],
    mode: Normalization | str = Normalization.LINEAR,
) -> List[float]:
    """Scale distances for ``objectives`` into [0, 1]; unvisited sites map to 1.0."""
    k = bitmap.k
    out = []
    log_mode = Normalization(mode) is Normalization.LOG
    denom = math.log2(1 + k) if log_mode else float(k)
    for site in objectives:
        d = bitmap.entries.get(site)
        if d is None:
            out.append(1.0)
            continue
        d = min(d, k)
        out.append(math.log2(1 + d) / denom if log_mode else d / denom)
    return out
