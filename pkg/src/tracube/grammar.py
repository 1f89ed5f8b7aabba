"""Re-Pair over movement logs, with rules carrying span, displacement and MBB.

Terminals are packed movement codes (< 2**32, see :mod:`tracube.movement`);
non-terminal ``i`` is the symbol ``NT_BASE + i``. Codewords are terminals
too but never take part in a pair, and no pair spans two input streams.
"""
from __future__ import annotations

import heapq
from typing import Iterable, Sequence

from ._io import ByteReader, ByteWriter, unzigzag, zigzag
from .errors import CorruptStoreError
from .movement import CODEWORDS, unpack_movement
from .succinct import DacSequence

NT_BASE = 1 << 32
_DELETED = -1
_N_COLUMNS = 12
_COLUMN_WIDTHS = range(1, 9)

Vec = tuple[int, int, int]
MBB = tuple[int, int, int, int, int, int]  # x1, y1, z1, x2, y2, z2 relative to the rule start


def is_nonterminal(sym: int) -> bool:
    return sym >= NT_BASE


def terminal_meta(code: int) -> tuple[int, Vec, MBB]:
    dx, dy, dz = unpack_movement(code)
    return 1, (dx, dy, dz), (min(0, dx), min(0, dy), min(0, dz), max(0, dx), max(0, dy), max(0, dz))


def rule_metadata(left: tuple[int, Vec, MBB], right: tuple[int, Vec, MBB]) -> tuple[int, Vec, MBB]:
    """Combine (span, displacement, mbb) of two consecutive pieces."""
    ls, (lx, ly, lz), lm = left
    rs, (rx, ry, rz), rm = right
    mbb = (
        min(lm[0], rm[0] + lx),
        min(lm[1], rm[1] + ly),
        min(lm[2], rm[2] + lz),
        max(lm[3], rm[3] + lx),
        max(lm[4], rm[4] + ly),
        max(lm[5], rm[5] + lz),
    )
    return ls + rs, (lx + rx, ly + ry, lz + rz), mbb


class RuleTable:
    """Enriched Re-Pair dictionary, stored column-wise for fast traversal."""

    def __init__(self) -> None:
        self.left: list[int] = []
        self.right: list[int] = []
        self.span: list[int] = []
        self.disp: list[Vec] = []
        self.mbb: list[MBB] = []
        self._term_cache: dict[int, tuple[int, Vec, MBB]] = {}

    def __len__(self) -> int:
        return len(self.left)

    def add(self, left: int, right: int) -> int:
        span, disp, mbb = rule_metadata(self.meta(left), self.meta(right))
        self.left.append(left)
        self.right.append(right)
        self.span.append(span)
        self.disp.append(disp)
        self.mbb.append(mbb)
        return NT_BASE + len(self.left) - 1

    def meta(self, sym: int) -> tuple[int, Vec, MBB]:
        if sym >= NT_BASE:
            i = sym - NT_BASE
            if i >= len(self.left):
                raise CorruptStoreError(f"unknown non-terminal {i}")
            return self.span[i], self.disp[i], self.mbb[i]
        cached = self._term_cache.get(sym)
        if cached is None:
            if sym in CODEWORDS:
                raise ValueError("codewords carry no movement metadata")
            try:
                cached = terminal_meta(sym)
            except ValueError as exc:
                raise CorruptStoreError(str(exc)) from exc
            self._term_cache[sym] = cached
        return cached

    def expand(self, sym: int) -> list[int]:
        """Terminal expansion of a symbol, left to right."""
        out: list[int] = []
        stack = [sym]
        left, right, n = self.left, self.right, len(self.left)
        while stack:
            s = stack.pop()
            if s >= NT_BASE:
                i = s - NT_BASE
                if i >= n:
                    raise CorruptStoreError(f"unknown non-terminal {i}")
                stack.append(right[i])
                stack.append(left[i])
            else:
                out.append(s)
        return out

    def expand_stream(self, stream: Iterable[int]) -> list[int]:
        out: list[int] = []
        for s in stream:
            if s >= NT_BASE:
                out.extend(self.expand(s))
            else:
                out.append(s)
        return out

    def check_acyclic(self) -> None:
        for i, (a, b) in enumerate(zip(self.left, self.right)):
            for s in (a, b):
                if s >= NT_BASE and s - NT_BASE >= i:
                    raise CorruptStoreError(f"rule {i} refers to a later rule")
                if s in CODEWORDS:
                    raise CorruptStoreError(f"rule {i} contains a codeword")

    def columns(self, encode) -> list[list[int]]:
        """The twelve per-rule fields as non-negative integer columns.

        left, right: compact symbol codes; span; zigzagged disp; mbb as its
        excess over the box spanned by the origin and disp (zero for monotone
        runs), low corner first.
        """
        cols = [[encode(s) for s in self.left], [encode(s) for s in self.right], list(self.span)]
        cols += [[zigzag(d[a]) for d in self.disp] for a in range(3)]
        cols += [[min(0, d[a]) - m[a] for d, m in zip(self.disp, self.mbb)] for a in range(3)]
        cols += [[m[a + 3] - max(0, d[a]) for d, m in zip(self.disp, self.mbb)] for a in range(3)]
        return cols

    def write(self, w: ByteWriter, encode) -> None:
        """Each column as a DAC sequence, at whichever chunk width serializes smallest."""
        w.varint(len(self))
        for col in self.columns(encode):
            best = None
            for width in _COLUMN_WIDTHS:
                tmp = ByteWriter()
                DacSequence(col, width).write(tmp)
                data = tmp.getvalue()
                if best is None or len(data) < len(best):
                    best = data
            w.raw(best)

    @classmethod
    def read(cls, r: ByteReader, decode) -> "RuleTable":
        n = r.count(min_bits=12)
        cols = []
        for _ in range(_N_COLUMNS):
            col = DacSequence.read(r)
            if len(col) != n:
                raise CorruptStoreError("rule column length disagrees with the rule count")
            cols.append(col.to_list())
        table = cls()
        table.left = [decode(c) for c in cols[0]]
        table.right = [decode(c) for c in cols[1]]
        table.span = cols[2]
        table.disp = [tuple(unzigzag(v) for v in row) for row in zip(*cols[3:6])]
        table.mbb = [
            (min(0, d[0]) - lo[0], min(0, d[1]) - lo[1], min(0, d[2]) - lo[2],
             max(0, d[0]) + hi[0], max(0, d[1]) + hi[1], max(0, d[2]) + hi[2])
            for d, lo, hi in zip(table.disp, zip(*cols[6:9]), zip(*cols[9:12]))
        ]
        table.check_acyclic()
        table.check_metadata()
        return table

    def check_metadata(self) -> None:
        """Stored metadata must agree with the children (rules reference earlier rules only)."""
        for i, (a, b) in enumerate(zip(self.left, self.right)):
            try:
                want = rule_metadata(self.meta(a), self.meta(b))
            except ValueError as exc:
                raise CorruptStoreError(f"rule {i}: {exc}") from exc
            if want != (self.span[i], self.disp[i], self.mbb[i]):
                raise CorruptStoreError(f"rule {i} metadata does not match its children")


def repair_compress(
    streams: Sequence[Sequence[int]], table: RuleTable | None = None
) -> tuple[list[list[int]], RuleTable]:
    """Re-Pair the streams jointly; returns the compressed streams and the rules.

    The most frequent pair is replaced first (ties: smallest ``(left, right)``),
    counting only non-overlapping occurrences, until every pair occurs once.
    """
    table = RuleTable() if table is None else table
    seq: list[int] = []
    stop: list[bool] = []  # True: no pair may start here (last symbol of a stream)
    starts: list[int] = []
    for stream in streams:
        starts.append(len(seq) if len(stream) else -1)
        seq.extend(stream)
        stop.extend([False] * len(stream))
        if len(stream):
            stop[-1] = True
    n = len(seq)
    nxt = list(range(1, n + 1))
    prv = list(range(-1, n - 1))

    occ: dict[tuple[int, int], set[int]] = {}
    for i in range(n - 1):
        if not stop[i]:
            a, b = seq[i], seq[i + 1]
            if a not in CODEWORDS and b not in CODEWORDS:
                pair = (a, b)
                s = occ.get(pair)
                if s is None:
                    occ[pair] = {i}
                else:
                    s.add(i)

    def effective(pair: tuple[int, int], s: set[int]) -> int:
        if pair[0] != pair[1]:
            return len(s)
        count, last = 0, -2
        for i in sorted(s):
            if last >= 0 and nxt[last] == i:
                last = -2  # overlaps the occurrence just taken
                continue
            count += 1
            last = i
        return count

    heap = [(-len(s), a, b) for (a, b), s in occ.items() if len(s) >= 2]
    heapq.heapify(heap)

    while heap:
        negc, a, b = heapq.heappop(heap)
        pair = (a, b)
        s = occ.get(pair)
        if not s:
            continue
        cur = effective(pair, s)
        if cur != -negc:
            if cur >= 2:
                heapq.heappush(heap, (-cur, a, b))
            continue
        if cur < 2:
            continue
        w = table.add(a, b)
        touched: set[tuple[int, int]] = set()
        for i in sorted(s):
            if i not in s:
                continue
            s.discard(i)
            j = nxt[i]
            p = prv[i]
            if p >= 0 and not stop[p]:
                sp = seq[p]
                if sp not in CODEWORDS:
                    occ[(sp, a)].discard(p)
                    key = (sp, w)
                    occ.setdefault(key, set()).add(p)
                    touched.add(key)
            if not stop[j]:
                q = nxt[j]
                sq = seq[q]
                if sq not in CODEWORDS:
                    occ[(b, sq)].discard(j)
                    key = (w, sq)
                    occ.setdefault(key, set()).add(i)
                    touched.add(key)
            seq[i] = w
            stop[i] = stop[j]
            q = nxt[j]
            nxt[i] = q
            if q < n:
                prv[q] = i
            seq[j] = _DELETED
        del occ[pair]
        for key in touched:
            s2 = occ.get(key)
            if s2 is not None and len(s2) >= 2:
                heapq.heappush(heap, (-len(s2), key[0], key[1]))
            elif s2 is not None and not s2:
                del occ[key]

    out: list[list[int]] = []
    for st in starts:
        if st < 0:
            out.append([])
            continue
        res = [seq[st]]
        i = st
        while not stop[i]:
            i = nxt[i]
            res.append(seq[i])
        out.append(res)
    return out, table
