"""Gradient-guided hot-byte mutation and AFL-style havoc."""

from __future__ import annotations

import random
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

DEFAULT_MUTANT_BUDGET = 1 << 16

INTERESTING_8 = (0x00, 0x01, 0x7F, 0x80, 0xFF)
INTERESTING_16 = (0x0000, 0x0001, 0x7FFF, 0x8000, 0xFFFF)
INTERESTING_32 = (0x00000000, 0x00000001, 0x7FFFFFFF, 0x80000000, 0xFFFFFFFF)
ARITH_MAX = 35
HAVOC_STACK_POW2 = 7  # stacks of 1..64 operators


def rank(g: Sequence[float]) -> List[int]:
    """Byte indices by descending ``|g|``, ties by ascending index."""
    mag = np.abs(np.asarray(g, dtype=float))
    # lexsort sorts by the last key first
    return np.lexsort((np.arange(len(mag)), -mag)).tolist()


def top(g: Sequence[float], lo: int, hi: int) -> List[int]:
    """Positions ``lo..hi-1`` of :func:`rank` (``hi`` clipped to ``len(g)``)."""
    return rank(g)[lo : min(hi, len(g))]


def group_ranges(n: int) -> List[Tuple[int, int]]:
    """Rank slices (0,2), (2,4), (4,8), (8,16), ... until ``n`` bytes are grouped."""
    out = []
    lo, hi = 0, 2
    while lo < n:
        out.append((lo, hi))
        lo, hi = hi, hi * 2
    return out


def signs(g: Sequence[float]) -> np.ndarray:
    return np.sign(np.asarray(g, dtype=float)).astype(np.int16)


def hot_byte_walk(
    t: bytes, locs: Sequence[int], sign: Sequence[int], direction: int
) -> Iterator[bytes]:
    """Step every byte in ``locs`` by ``direction * sign`` until all moving bytes saturate.

    Yields the input after every step.  Bytes with sign 0 never move and do
    not hold up termination; arithmetic saturates at 0 and 255.
    """
    cur = np.frombuffer(bytes(t), dtype=np.uint8).astype(np.int16)
    locs = np.asarray(locs, dtype=np.int64)
    step = direction * np.asarray(sign, dtype=np.int16)
    moving = step != 0
    locs, step = locs[moving], step[moving]
    if len(locs) == 0:
        return
    bound = np.where(step > 0, 255, 0)
    while (cur[locs] != bound).any():
        cur[locs] = np.clip(cur[locs] + step, 0, 255)
        yield cur.astype(np.uint8).tobytes()


def hot_byte_trajectories(t: bytes, g: Sequence[float]) -> List[Iterator[bytes]]:
    """One walk per (group, direction), in the order the groups are ranked."""
    n = len(t)
    if n == 0:
        return []
    g = np.asarray(g, dtype=float)[:n]
    s = signs(g)
    order = rank(g)
    walks = []
    for lo, hi in group_ranges(n):
        locs = order[lo:hi]
        for direction in (-1, 1):
            walks.append(hot_byte_walk(t, locs, s[locs], direction))
    return walks


def mutate_hot_bytes(
    t: bytes, g: Sequence[float], budget: int = DEFAULT_MUTANT_BUDGET
) -> List[bytes]:
    """Hot-byte mutants of ``t`` for gradient ``g`` (positions past ``len(t)`` ignored).

    Walks are interleaved round-robin so that the hottest groups are
    represented even when ``budget`` cuts the output short.
    """
    if len(g) < len(t):
        raise ValueError("gradient shorter than input")
    active = hot_byte_trajectories(t, g)
    out: List[bytes] = []
    while active and len(out) < budget:
        still = []
        for walk in active:
            nxt = next(walk, None)
            if nxt is None:
                continue
            out.append(nxt)
            still.append(walk)
            if len(out) >= budget:
                break
        active = still
    return out


def _put(buf: bytearray, pos: int, value: int, width: int, big: bool) -> None:
    buf[pos : pos + width] = value.to_bytes(width, "big" if big else "little")


def havoc_one(t: bytes, rng: random.Random, max_input_len: int) -> bytes:
    buf = bytearray(t) if t else bytearray([rng.randrange(256)])
    for _ in range(1 << rng.randrange(HAVOC_STACK_POW2)):
        n = len(buf)
        op = rng.randrange(9)
        if op == 0:  # flip a bit
            bit = rng.randrange(n * 8)
            buf[bit >> 3] ^= 0x80 >> (bit & 7)
        elif op == 1:  # random byte
            buf[rng.randrange(n)] = rng.randrange(256)
        elif op == 2:  # byte arithmetic
            pos = rng.randrange(n)
            delta = rng.randint(1, ARITH_MAX)
            buf[pos] = (buf[pos] + (delta if rng.random() < 0.5 else -delta)) & 0xFF
        elif op == 3:
            buf[rng.randrange(n)] = rng.choice(INTERESTING_8)
        elif op == 4 and n >= 2:
            _put(buf, rng.randrange(n - 1), rng.choice(INTERESTING_16), 2, rng.random() < 0.5)
        elif op == 5 and n >= 4:
            _put(buf, rng.randrange(n - 3), rng.choice(INTERESTING_32), 4, rng.random() < 0.5)
        elif op == 6 and n >= 2:  # delete a block
            size = rng.randint(1, n - 1)
            pos = rng.randrange(n - size + 1)
            del buf[pos : pos + size]
        elif op == 7 and n < max_input_len:  # duplicate a block (or insert a constant run)
            size = rng.randint(1, min(n, max_input_len - n))
            at = rng.randrange(n + 1)
            if rng.random() < 0.75:
                src = rng.randrange(n - size + 1)
                chunk = bytes(buf[src : src + size])
            else:
                chunk = bytes([rng.randrange(256)]) * size
            buf[at:at] = chunk
        elif op == 8 and n >= 2:  # overwrite a block
            size = rng.randint(1, n - 1)
            dst = rng.randrange(n - size + 1)
            if rng.random() < 0.75:
                src = rng.randrange(n - size + 1)
                buf[dst : dst + size] = bytes(buf[src : src + size])
            else:
                buf[dst : dst + size] = bytes([rng.randrange(256)]) * size
    if len(buf) > max_input_len:
        del buf[max_input_len:]
    return bytes(buf)


def havoc(
    t: bytes, rng_seed, count: int, max_input_len: Optional[int] = None
) -> List[bytes]:
    """``count`` havoc mutants of ``t``; deterministic in ``rng_seed``.

    ``rng_seed`` may be an int or a sequence of ints (hashed into one seed).
    """
    if count <= 0:
        return []
    if max_input_len is None:
        max_input_len = max(len(t), 1)
    rng = random.Random(derive_seed(rng_seed))
    return [havoc_one(t, rng, max_input_len) for _ in range(count)]


def derive_seed(parts) -> int:
    if isinstance(parts, int):
        return parts
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(2, np.uint64)[0])
