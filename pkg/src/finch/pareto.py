"""Multi-objective seed scheduling.

Each objective is a just-missed branch site; a seed's score on it is its
branch distance (smaller is better).  The seed pool kept between
generations is a greedy minimum cover of the Pareto boundary: one
representative per objective minimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, FrozenSet, Iterable, List, Optional, Sequence

import numpy as np


class AlignmentError(ValueError):
    pass


@dataclass
class ScoredSeed:
    input: bytes
    fvec: tuple
    J: FrozenSet[int] = field(default_factory=frozenset)
    payload: Any = field(default=None, repr=False, compare=False)


def _vec(s) -> Sequence[int]:
    return s.fvec if isinstance(s, ScoredSeed) else s


def dominates(t1, t2) -> bool:
    """True iff ``t1`` is nowhere worse than ``t2`` and strictly better somewhere."""
    f1, f2 = _vec(t1), _vec(t2)
    if len(f1) != len(f2):
        raise AlignmentError(f"fvec lengths differ: {len(f1)} != {len(f2)}")
    strict = False
    for a, b in zip(f1, f2):
        if a > b:
            return False
        if a < b:
            strict = True
    return strict


def just_missed(pool: Iterable, covered) -> List[int]:
    """Sites visited by some pool member that still have an uncovered outcome.

    ``pool`` members expose ``distances`` (a :class:`DistanceBitmap`) or are
    bitmaps themselves; ``covered`` is the set of covered branch keys
    ``2*site + taken``.
    """
    covered = getattr(covered, "branches", covered)
    visited = set()
    for member in pool:
        bitmap = getattr(member, "distances", member)
        visited.update(bitmap.entries)
    return sorted(s for s in visited if 2 * s not in covered or 2 * s + 1 not in covered)


def _matrix(seeds: Sequence) -> np.ndarray:
    rows = [tuple(_vec(s)) for s in seeds]
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise AlignmentError(f"fvecs of differing lengths: {sorted(widths)}")
    width = widths.pop() if widths else 0
    return np.array(rows, dtype=np.uint64).reshape(len(rows), width)


def dominated_mask(F: np.ndarray) -> np.ndarray:
    """``mask[i]`` is True iff some row of ``F`` dominates row ``i``."""
    if len(F) == 0:
        return np.zeros(0, dtype=bool)
    le = (F[:, None, :] <= F[None, :, :]).all(axis=2)
    lt = (F[:, None, :] < F[None, :, :]).any(axis=2)
    return (le & lt).any(axis=0)


def pareto_boundary(pool: Sequence[ScoredSeed]) -> List[ScoredSeed]:
    """Members of ``pool`` not dominated by any other member (duplicates kept)."""
    if not pool:
        return []
    dom = dominated_mask(_matrix(pool))
    return [s for s, d in zip(pool, dom) if not d]


def minimizer_sets(seeds: Sequence) -> List[FrozenSet[int]]:
    """J_t for every seed: objectives where it attains the minimum over ``seeds``."""
    if not seeds:
        return []
    F = _matrix(seeds)
    if F.shape[1] == 0:
        return [frozenset() for _ in seeds]
    is_min = F == F.min(axis=0)
    return [frozenset(np.flatnonzero(row).tolist()) for row in is_min]


def min_pareto_set(
    O: Sequence[ScoredSeed],
    assign_J: bool = True,
    counter: Optional[List[int]] = None,
) -> List[ScoredSeed]:
    """Greedy minimum-cover approximation of the Pareto set ``O``.

    Seeds are visited in descending order of ``|J|`` (ties keep the order of
    ``O``); a seed is kept iff its residual J is nonempty, and its J is then
    removed from every later seed.  Kept seeds are returned in their
    original order.  With ``assign_J`` the J sets are recomputed from the
    fvecs first; otherwise the seeds' own ``J`` fields are used.

    ``counter``, if given, accumulates the number of set-difference steps.
    """
    if not O:
        return []
    J = minimizer_sets(O) if assign_J else [frozenset(s.J) for s in O]
    if assign_J:
        for s, j in zip(O, J):
            s.J = j
    order = sorted(range(len(O)), key=lambda i: -len(J[i]))
    residual = [set(J[i]) for i in order]
    kept = []
    for pos, i in enumerate(order):
        r = residual[pos]
        if not r:
            continue
        kept.append(i)
        for later in range(pos + 1, len(order)):
            residual[later] -= r
            if counter is not None:
                counter[0] += 1
    kept.sort()
    return [O[i] for i in kept]


def brute_force_min_cover(O: Sequence) -> int:
    """Size of the smallest subset of ``O`` containing a minimizer for every objective."""
    from itertools import combinations

    J = minimizer_sets(O)
    width = len(_vec(O[0])) if O else 0
    need = set(range(width))
    if not need:
        return 0
    for size in range(1, len(O) + 1):
        for combo in combinations(range(len(O)), size):
            if set().union(*(J[i] for i in combo)) >= need:
                return size
    return len(O)
