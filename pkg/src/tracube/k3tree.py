"""k³-tree: a level-ordered, bitmap-encoded region octree over a cubic grid.

``T`` holds every level but the last, ``L`` holds the last one. Children of
a node are listed with x varying fastest, then y, then z. The children of
the node whose bit sits at position ``p`` of T (or the root, for the first
block) start at ``rank1(T, p + 1) * k**3`` of the concatenation T·L.
"""
from __future__ import annotations

from typing import Iterable

from ._io import ByteReader, ByteWriter
from .errors import BuildError, CorruptStoreError
from .succinct import BitVector

Cell = tuple[int, int, int]
Box = tuple[int, int, int, int, int, int]  # x1, y1, z1, x2, y2, z2 (inclusive)


def height_for(side: int, k: int) -> int:
    """Number of levels below the root, or raise if side is not a power of k."""
    if k < 2:
        raise BuildError("k must be >= 2")
    h, s = 0, 1
    while s < side:
        s *= k
        h += 1
    if s != side or h == 0:
        raise BuildError(f"side {side} is not a positive power of k={k}")
    return h


def padded_side(extent: int, k: int = 2) -> int:
    """Smallest power of k (>= k) that holds ``extent`` cells per axis."""
    s = k
    while s < extent:
        s *= k
    return s


def morton_key(cell: Cell, side: int, k: int) -> tuple[int, ...]:
    """k-ary Morton digits of a cell, most significant first (L order)."""
    x, y, z = cell
    digits = []
    s = side // k
    while s >= 1:
        digits.append((x // s) % k + k * ((y // s) % k) + k * k * ((z // s) % k))
        s //= k
    return tuple(digits)


class K3Tree:
    __slots__ = ("k", "side", "height", "T", "L", "_kk", "_kkk")

    def __init__(self, k: int, side: int, T: BitVector, L: BitVector) -> None:
        self.k = k
        self.side = side
        self.height = height_for(side, k)
        self.T = T
        self.L = L
        self._kk = k * k
        self._kkk = k * k * k

    @classmethod
    def build(cls, cells: Iterable[Cell], side: int, k: int = 2) -> "K3Tree":
        height = height_for(side, k)
        kkk = k ** 3
        cells = set(cells)
        for c in cells:
            if len(c) != 3 or not all(0 <= v < side for v in c):
                raise BuildError(f"cell {c} outside the [0, {side}) cube")
        if not cells:
            return cls(k, side, BitVector([0] * kkk), BitVector())

        levels: list[list[int]] = []
        nodes: list[list[Cell]] = [sorted(cells)]
        size = side
        for _ in range(height):
            size //= k
            bits: list[int] = []
            next_nodes: list[list[Cell]] = []
            for members in nodes:
                groups: dict[int, list[Cell]] = {}
                for c in members:
                    child = (c[0] // size) % k + k * ((c[1] // size) % k) + k * k * ((c[2] // size) % k)
                    groups.setdefault(child, []).append(c)
                block = [0] * kkk
                for child in sorted(groups):
                    block[child] = 1
                    next_nodes.append(groups[child])
                bits.extend(block)
            levels.append(bits)
            nodes = next_nodes
        t_bits = [b for lvl in levels[:-1] for b in lvl]
        return cls(k, side, BitVector(t_bits), BitVector(levels[-1]))

    @property
    def empty(self) -> bool:
        return len(self.L) == 0

    def __len__(self) -> int:
        return self.L.ones

    def leaves_in_box(self, box: Box) -> list[tuple[int, Cell]]:
        """All occupied cells in the inclusive box as (position in L, cell), in L order."""
        x1, y1, z1, x2, y2, z2 = box
        side = self.side
        x1, y1, z1 = max(x1, 0), max(y1, 0), max(z1, 0)
        x2, y2, z2 = min(x2, side - 1), min(y2, side - 1), min(z2, side - 1)
        out: list[tuple[int, Cell]] = []
        if self.empty or x1 > x2 or y1 > y2 or z1 > z2:
            return out
        k, kk = self.k, self._kk
        nt = len(self.T)
        t_words, l_words = self.T._words, self.L._words
        rank_t = self.T.rank1

        def visit(base: int, ox: int, oy: int, oz: int, size: int) -> None:
            # base: position in T·L of this node's first child
            size //= k
            last = base >= nt
            for cz in range(k):
                lz = oz + cz * size
                if lz > z2 or lz + size - 1 < z1:
                    continue
                for cy in range(k):
                    ly = oy + cy * size
                    if ly > y2 or ly + size - 1 < y1:
                        continue
                    row = base + cy * k + cz * kk
                    for cx in range(k):
                        lx = ox + cx * size
                        if lx > x2 or lx + size - 1 < x1:
                            continue
                        p = row + cx
                        if last:
                            q = p - nt
                            if (l_words[q >> 6] >> (q & 63)) & 1:
                                out.append((q, (lx, ly, lz)))
                        elif (t_words[p >> 6] >> (p & 63)) & 1:
                            visit(rank_t(p + 1) * self._kkk, lx, ly, lz, size)

        visit(0, 0, 0, 0, side)
        return out

    def leaf_to_cell(self, leaf_pos: int) -> Cell:
        """Climb from a 1 in L back to the root and return its cell."""
        if not 0 <= leaf_pos < len(self.L) or not self.L[leaf_pos]:
            raise IndexError(f"L[{leaf_pos}] is not an occupied leaf")
        k, kk, kkk = self.k, self._kk, self._kkk
        pos = len(self.T) + leaf_pos
        x = y = z = 0
        size = 1
        for _ in range(self.height):
            child = pos % kkk
            x += (child % k) * size
            y += ((child // k) % k) * size
            z += (child // kk) * size
            size *= k
            block = pos // kkk
            if block:
                pos = self.T.select1(block)
        return x, y, z

    def cells(self) -> list[Cell]:
        """Every occupied cell in L order."""
        return [c for _, c in self.leaves_in_box((0, 0, 0, self.side - 1, self.side - 1, self.side - 1))]

    def nbytes(self) -> int:
        return self.T.nbytes() + self.L.nbytes()

    def write(self, w: ByteWriter) -> None:
        w.u8(self.k)
        w.varint(self.side)
        self.T.write(w)
        self.L.write(w)

    @classmethod
    def read(cls, r: ByteReader) -> "K3Tree":
        k = r.u8()
        side = r.varint()
        T = BitVector.read(r)
        L = BitVector.read(r)
        try:
            tree = cls(k, side, T, L)
        except BuildError as exc:
            raise CorruptStoreError(str(exc)) from exc
        kkk = k ** 3
        if (len(T) + len(L)) % kkk or (len(L) and len(L) != T.ones * kkk - (len(T) - kkk)):
            raise CorruptStoreError("k3-tree bitmap sizes are inconsistent")
        return tree
