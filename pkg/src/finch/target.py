"""In-process target harness and the built-in synthetic targets.

A target is a plain function ``fn(data: bytes, h: Harness) -> None`` that
reports what it does through the harness:

* ``h.report_block(i)`` when it enters basic block ``i`` (``0 <= i < block_count``),
* ``h.report_cmp(site, rel, a, b)`` for every conditional it evaluates; the
  call returns the truth value, so targets branch on it directly,
* ``h.report_bug(bug_id)`` to signal an injected bug (aborts the run).

Example::

    def parse(data, h):
        h.report_block(0)
        magic = int.from_bytes(data[:2].ljust(2, b"\\0"), "big")
        if h.report_cmp(0, Relation.EQ, magic, 0x4d5a):
            h.report_block(1)
            h.report_bug(0)

    tgt = Target("mz", parse, max_input_len=64, site_count=1, block_count=2)
    result = run(tgt, b"MZ")       # result.outcome is Outcome.CRASH, bug_id 0

Operands passed to ``report_cmp`` must be unsigned; map signed values with
:func:`finch.distance.to_unsigned` first.  Operands that are not integers
(floats, strings, ...) are compared as given and record distance 0.
"""

from __future__ import annotations

import enum
import operator
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, FrozenSet, Hashable, List, Optional, Sequence

from .coverage import DEFAULT_MAP_SIZE, CoverageBitmap
from .distance import DEFAULT_K, DistanceBitmap, DistanceMode, Relation

DEFAULT_EVENT_BUDGET = 10**6


class TargetConfigError(ValueError):
    pass


class Outcome(enum.Enum):
    OK = "ok"
    CRASH = "crash"
    HANG = "hang"


class _BugTriggered(Exception):
    def __init__(self, bug_id):
        super().__init__(bug_id)
        self.bug_id = bug_id


class _Hang(Exception):
    pass


_OPS = {
    Relation.GT: operator.gt,
    Relation.GE: operator.ge,
    Relation.LE: operator.le,
    Relation.LT: operator.lt,
    Relation.EQ: operator.eq,
    Relation.NE: operator.ne,
}


def _mix32(x: int) -> int:
    # murmur3 finalizer
    x &= 0xFFFFFFFF
    x ^= x >> 16
    x = (x * 0x85EBCA6B) & 0xFFFFFFFF
    x ^= x >> 13
    x = (x * 0xC2B2AE35) & 0xFFFFFFFF
    x ^= x >> 16
    return x


@lru_cache(maxsize=256)
def _block_table(name: str, count: int, salt: int, map_size: int) -> tuple:
    base = _mix32(sum(name.encode()) * 0x9E3779B1 + len(name) + salt)
    return tuple(_mix32(base + i * 0x61C88647) & (map_size - 1) for i in range(count))


@dataclass(frozen=True)
class Target:
    """A registered target program.

    Block and site ids are dense, sequential integers chosen by the target
    author.  Internally each block id is mapped through a fixed hash to its
    AFL-style identifier so that small sequential ids do not collide under
    the shift-xor edge key.
    """

    name: str
    fn: Callable[[bytes, "Harness"], None] = field(repr=False)
    max_input_len: int
    site_count: int
    block_count: int
    description: str = ""

    def block_ids(self, map_size: int) -> tuple:
        return _block_table(self.name, self.block_count, 0, map_size)

    def branch_block_ids(self, map_size: int) -> tuple:
        # one synthetic block per (site, outcome), entered by report_cmp
        return _block_table(self.name, 2 * self.site_count, 1, map_size)


@dataclass
class ExecutionResult:
    coverage: CoverageBitmap
    distances: DistanceBitmap
    branches: FrozenSet[int]
    outcome: Outcome = Outcome.OK
    bug_id: Optional[Hashable] = None
    truncated: bool = False
    events: int = 0
    exec_count_delta: int = 1

    @property
    def crashed(self) -> bool:
        return self.outcome is Outcome.CRASH

    def same_as(self, other: "ExecutionResult") -> bool:
        return (
            self.coverage == other.coverage
            and self.distances == other.distances
            and self.branches == other.branches
            and self.outcome is other.outcome
            and self.bug_id == other.bug_id
        )


def branch_key(site: int, taken: bool) -> int:
    """Key of one outcome of a conditional site."""
    return 2 * site + (1 if taken else 0)


class Harness:
    """Per-run recorder handed to target functions."""

    __slots__ = (
        "coverage", "distances", "branches", "events",
        "_keys", "_mask", "_blocks", "_branch_blocks", "_k", "_xor", "_budget",
    )

    def __init__(
        self,
        target: Target,
        k: int = DEFAULT_K,
        distance_mode: DistanceMode = DistanceMode.ABS,
        map_size: int = DEFAULT_MAP_SIZE,
        event_budget: int = DEFAULT_EVENT_BUDGET,
    ):
        self.coverage = CoverageBitmap(map_size)
        self.distances = DistanceBitmap(k=k)
        self.branches: set = set()
        self.events = 0
        self._keys = self.coverage.keys
        self._mask = map_size - 1
        self._blocks = target.block_ids(map_size)
        self._branch_blocks = target.branch_block_ids(map_size)
        self._k = k
        self._xor = DistanceMode(distance_mode) is DistanceMode.XOR
        self._budget = event_budget

    def _enter(self, y: int) -> None:
        self.events += 1
        if self.events > self._budget:
            raise _Hang()
        cov = self.coverage
        self._keys.add(((cov.last_block >> 1) ^ y) & self._mask)
        cov.last_block = y

    def report_block(self, block: int) -> None:
        self._enter(self._blocks[block])

    def report_cmp(self, site: int, rel: Relation, a=0, b=0) -> bool:
        if rel is Relation.TRUE:
            taken, d = True, 0
        elif rel is Relation.FALSE:
            taken, d = False, 0
        else:
            taken = bool(_OPS[rel](a, b))
            if type(a) is int and type(b) is int:
                if self._xor:
                    d = (a ^ b) & 0xFFFFFFFFFFFFFFFF
                else:
                    d = a - b if a >= b else b - a
                if d > self._k:
                    d = self._k
            else:
                d = 0
        entries = self.distances.entries
        prev = entries.get(site)
        if prev is None or d < prev:
            entries[site] = d
        key = 2 * site + taken
        self.branches.add(key)
        self._enter(self._branch_blocks[key])
        return taken

    def report_bool(self, site: int, value: bool) -> bool:
        """Report a condition without comparable operands (distance 0)."""
        return self.report_cmp(site, Relation.TRUE if value else Relation.FALSE)

    def report_bug(self, bug_id: Hashable) -> None:
        raise _BugTriggered(bug_id)


def run(
    target: Target,
    data: bytes,
    k: int = DEFAULT_K,
    distance_mode: DistanceMode = DistanceMode.ABS,
    map_size: int = DEFAULT_MAP_SIZE,
    event_budget: int = DEFAULT_EVENT_BUDGET,
) -> ExecutionResult:
    """Execute ``target`` on ``data`` and collect coverage, distances and outcome."""
    data = bytes(data)
    truncated = len(data) > target.max_input_len
    if truncated:
        data = data[: target.max_input_len]
    h = Harness(target, k, distance_mode, map_size, event_budget)
    outcome, bug_id = Outcome.OK, None
    try:
        target.fn(data, h)
    except _BugTriggered as exc:
        outcome, bug_id = Outcome.CRASH, exc.bug_id
    except _Hang:
        outcome = Outcome.HANG
    except Exception as exc:  # an unplanned target fault is still a crash
        outcome, bug_id = Outcome.CRASH, f"exception:{type(exc).__name__}"
    return ExecutionResult(
        coverage=h.coverage,
        distances=h.distances,
        branches=frozenset(h.branches),
        outcome=outcome,
        bug_id=bug_id,
        truncated=truncated,
        events=h.events,
    )


class Executor:
    """``run`` with the campaign's execution settings bound."""

    def __init__(
        self,
        target: Target,
        k: int = DEFAULT_K,
        distance_mode: DistanceMode = DistanceMode.ABS,
        map_size: int = DEFAULT_MAP_SIZE,
        event_budget: int = DEFAULT_EVENT_BUDGET,
    ):
        self.target = target
        self.k = k
        self.distance_mode = DistanceMode(distance_mode)
        self.map_size = map_size
        self.event_budget = event_budget
        self.execs = 0
        self.truncations = 0

    def __call__(self, data: bytes) -> ExecutionResult:
        self.execs += 1
        res = run(self.target, data, self.k, self.distance_mode, self.map_size, self.event_budget)
        if res.truncated:
            self.truncations += 1
        return res


def _u32(data: bytes, pos: int) -> int:
    return int.from_bytes(data[pos : pos + 4].ljust(4, b"\0"), "big")


# --- built-in targets -------------------------------------------------------


def _fig1(data: bytes, h: Harness) -> None:
    # Sites are numbered after the four branch labels of the motivating
    # example (1..4); site 0 is reserved and never reported.
    h.report_block(0)
    checksum = sum(data[:4])
    if h.report_cmp(1, Relation.EQ, checksum, 8):
        h.report_block(1)
        flag = data[4] if len(data) > 4 else 0
        if h.report_cmp(2, Relation.GT, flag, 0x7F):
            h.report_block(2)
            a = data[5] if len(data) > 5 else 0
            b = data[6] if len(data) > 6 else 0
            if h.report_cmp(3, Relation.EQ, a, b ^ 0x5A):
                h.report_block(3)
                h.report_bug(1)
    h.report_block(4)
    if h.report_cmp(4, Relation.EQ, (_u32(data, 0) * 2) & 0xFFFFFFFF, 0xDEADBEEE):
        h.report_block(5)
        h.report_bug(2)
    h.report_block(6)


FIG1 = Target(
    "fig1",
    _fig1,
    max_input_len=64,
    site_count=5,
    block_count=7,
    description="checksum-guarded bug 1 and magic-guarded bug 2 (u32_be(input)*2 == 0xdeadbeee)",
)


def make_lava_target(
    bug_magics: Sequence[int],
    positions: Sequence[int],
    max_input_len: int = 64,
    name: str = "lava",
) -> Target:
    """Target where bug ``i`` fires iff the big-endian u32 at ``positions[i]`` equals ``bug_magics[i]``.

    Each bug is guarded by its own site ``i``; bugs are checked in list order
    and the first match aborts the run.  A check whose 4 bytes lie beyond the
    end of the input is not evaluated.
    """
    magics = [int(m) for m in bug_magics]
    pos = [int(p) for p in positions]
    if len(magics) != len(pos):
        raise TargetConfigError("bug_magics and positions differ in length")
    if len(set(magics)) != len(magics):
        raise TargetConfigError("bug magics must be distinct")
    if any(not 0 <= m <= 0xFFFFFFFF for m in magics):
        raise TargetConfigError("bug magics must be 32-bit constants")
    if any(p < 0 or p + 4 > max_input_len for p in pos):
        raise TargetConfigError("every position + 4 must fit within max_input_len")
    spans = sorted(pos)
    if any(b < a + 4 for a, b in zip(spans, spans[1:])):
        raise TargetConfigError("bug positions overlap")

    checks = list(enumerate(zip(pos, magics)))

    def fn(data: bytes, h: Harness) -> None:
        h.report_block(0)
        n = len(data)
        for i, (p, magic) in checks:
            if p + 4 > n:
                continue
            h.report_block(1 + 2 * i)
            if h.report_cmp(i, Relation.EQ, int.from_bytes(data[p : p + 4], "big"), magic):
                h.report_block(2 + 2 * i)
                h.report_bug(i)
        h.report_block(1 + 2 * len(checks))

    return Target(
        name,
        fn,
        max_input_len=max_input_len,
        site_count=len(checks),
        block_count=2 + 2 * len(checks),
        description=f"{len(checks)} magic-guarded bugs, one site per bug",
    )


LAVA8_MAGICS = (
    0x6C617661, 0x1BADB002, 0xCAFEF00D, 0x0DEFACED,
    0x8BADF00D, 0xFEEDC0DE, 0x2B992DDF, 0x5EED1E55,
)
LAVA8_POSITIONS = (2, 9, 17, 24, 33, 41, 48, 58)

LAVA8 = make_lava_target(LAVA8_MAGICS, LAVA8_POSITIONS, max_input_len=64, name="lava8")


def _nested(data: bytes, h: Harness) -> None:
    d = data.ljust(16, b"\0")
    h.report_block(0)
    if h.report_cmp(0, Relation.GT, int.from_bytes(d[0:2], "big"), 0x4000):
        h.report_block(1)
        if h.report_cmp(1, Relation.GE, d[2], 0xF0):
            h.report_block(2)
            if h.report_cmp(2, Relation.GT, _u32(d, 4), 0xABCD0000):
                h.report_block(3)
                if h.report_cmp(3, Relation.LT, int.from_bytes(d[8:10], "big"), 0x0100):
                    h.report_block(4)
                    h.report_bug(0)
    h.report_block(5)


NESTED = Target(
    "nested",
    _nested,
    max_input_len=16,
    site_count=4,
    block_count=6,
    description="four nested range conditions guarding one bug",
)


def _lenfield(data: bytes, h: Harness) -> None:
    # "LF" <count:u8> then <tag:u8><len:u8><payload> records
    h.report_block(0)
    n = len(data)
    if not h.report_cmp(0, Relation.EQ, int.from_bytes(data[:2].ljust(2, b"\0"), "big"), 0x4C46):
        h.report_block(1)
        return
    count = data[2] if n > 2 else 0
    if not h.report_cmp(1, Relation.LE, count, 8):
        h.report_block(2)
        return
    off = 3
    for _ in range(count):
        h.report_block(3)
        if h.report_cmp(2, Relation.GT, off + 2, n):
            h.report_block(4)
            return
        tag, length = data[off], data[off + 1]
        off += 2
        if h.report_cmp(3, Relation.EQ, tag, 0x01):
            h.report_block(5)
            # the parser trusts the length byte: reading past the end is the bug
            if h.report_cmp(4, Relation.GT, off + length, n):
                h.report_block(6)
                h.report_bug(0)
        elif h.report_cmp(5, Relation.EQ, tag, 0x02):
            h.report_block(7)
            total = sum(data[off : off + length])
            if h.report_cmp(6, Relation.EQ, total, 0x0539):
                h.report_block(8)
                h.report_bug(1)
        else:
            h.report_block(9)
        off += length
    h.report_block(10)


LENFIELD = Target(
    "lenfield",
    _lenfield,
    max_input_len=256,
    site_count=7,
    block_count=11,
    description="length-prefixed record parser with an out-of-bounds read",
)


_BUILTINS: Dict[str, Target] = {t.name: t for t in (FIG1, LAVA8, NESTED, LENFIELD)}


def builtin_targets() -> List[Target]:
    return list(_BUILTINS.values())


def get_target(name: str) -> Target:
    try:
        return _BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown target {name!r}; known: {', '.join(_BUILTINS)}") from None
