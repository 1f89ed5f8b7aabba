"""Snapshots: absolute positions of every present object at one instant.

A snapshot couples a k³-tree of occupied cells with ``perm``, the object
identifiers listed leaf by leaf in L order, and ``Q``, whose 0 bits close
each leaf's group. Finding an object's slot in ``perm`` uses the classic
cycle-shortcut inverse: perm is viewed as a permutation of ranks among the
present ids and every ``shortcut_step``-th element of a cycle keeps a
back-pointer ``shortcut_step`` places behind it.
"""
from __future__ import annotations

from typing import Mapping

import numpy as np

from ._io import ByteReader, ByteWriter
from .errors import BuildError, CorruptStoreError
from .k3tree import Box, Cell, K3Tree, morton_key
from .succinct import BitVector, _pack_fixed, _unpack_fixed

DEFAULT_SHORTCUT_STEP = 16


class Snapshot:
    __slots__ = ("instant", "tree", "perm", "Q", "present", "shortcut_step", "_marked", "_back")

    def __init__(
        self,
        instant: int,
        tree: K3Tree,
        perm: list[int],
        Q: BitVector,
        present: BitVector,
        shortcut_step: int,
        marked: BitVector,
        back: list[int],
    ) -> None:
        self.instant = instant
        self.tree = tree
        self.perm = perm
        self.Q = Q
        self.present = present  # bit o set iff object o is in this snapshot
        self.shortcut_step = shortcut_step
        self._marked = marked  # slots carrying a back-pointer
        self._back = back

    @classmethod
    def build(
        cls,
        positions: Mapping[int, Cell],
        instant: int,
        side: int,
        k: int = 2,
        shortcut_step: int = DEFAULT_SHORTCUT_STEP,
        universe: int | None = None,
    ) -> "Snapshot":
        if shortcut_step < 1:
            raise BuildError("shortcut_step must be >= 1")
        if not isinstance(positions, Mapping):
            seen: dict[int, Cell] = {}
            for obj, cell in positions:
                if obj in seen:
                    raise BuildError(f"object {obj} listed twice in snapshot {instant}")
                seen[obj] = cell
            positions = seen
        if any(o < 0 for o in positions):
            raise BuildError("object identifiers must be non-negative")
        tree = K3Tree.build(positions.values(), side, k)
        groups: dict[Cell, list[int]] = {}
        for obj, cell in positions.items():
            groups.setdefault(tuple(cell), []).append(obj)
        perm: list[int] = []
        q: list[int] = []
        for cell in sorted(groups, key=lambda c: morton_key(c, side, k)):
            members = sorted(groups[cell])
            perm.extend(members)
            q.extend([1] * (len(members) - 1) + [0])
        if universe is None:
            universe = max(positions, default=-1) + 1
        present_bits = np.zeros(universe, dtype=np.uint8)
        present_bits[list(positions)] = 1
        present = BitVector(present_bits)
        marked, back = _shortcuts(perm, present, shortcut_step)
        return cls(instant, tree, perm, BitVector(q), present, shortcut_step, marked, back)

    def __len__(self) -> int:
        return len(self.perm)

    def __contains__(self, obj: int) -> bool:
        return 0 <= obj < len(self.present) and bool(self.present[obj])

    def objects_in_box(self, box: Box) -> list[tuple[int, Cell]]:
        out: list[tuple[int, Cell]] = []
        perm, Q = self.perm, self.Q
        q_words = Q._words
        L = self.tree.L
        for leaf, cell in self.tree.leaves_in_box(box):
            x = L.rank1(leaf + 1)  # leaves up to and including this one
            p = Q.select0(x - 1) + 1 if x > 1 else 0
            while True:
                out.append((perm[p], cell))
                if not (q_words[p >> 6] >> (p & 63)) & 1:
                    break
                p += 1
        return out

    def slot_of(self, obj: int) -> int | None:
        """Index of ``obj`` in perm, or None when it is not in this snapshot."""
        if obj not in self:
            return None
        present, perm = self.present, self.perm
        target = present.rank1(obj)
        marked, back = self._marked, self._back
        j = target
        jumped = False
        for _ in range(2 * self.shortcut_step + len(perm) + 1):
            nxt = present.rank1(perm[j])
            if nxt == target:
                return j
            if not jumped and marked[j]:
                j = back[marked.rank1(j)]
                jumped = True
            else:
                j = nxt
        raise CorruptStoreError(f"perm cycle for object {obj} does not close")

    def slot_of_scan(self, obj: int) -> int | None:
        try:
            return self.perm.index(obj)
        except ValueError:
            return None

    def find_object(self, obj: int) -> Cell | None:
        slot = self.slot_of(obj)
        if slot is None:
            return None
        y = self.Q.rank0(slot)  # leaves closed strictly before this slot
        return self.tree.leaf_to_cell(self.tree.L.select1(y + 1))

    def positions(self) -> dict[int, Cell]:
        side = self.tree.side
        return dict(self.objects_in_box((0, 0, 0, side - 1, side - 1, side - 1)))

    def nbytes(self) -> int:
        id_bits = max(1, (len(self.present) - 1).bit_length())
        return (
            self.tree.nbytes()
            + (len(self.perm) * id_bits + 7) // 8
            + self.Q.nbytes()
            + self.present.nbytes()
            + self._marked.nbytes()
            + (len(self._back) * max(1, len(self.perm).bit_length()) + 7) // 8
        )

    def write(self, w: ByteWriter) -> None:
        w.varint(self.instant)
        self.tree.write(w)
        id_bits = max(1, (len(self.present) - 1).bit_length())
        w.varint(len(self.perm))
        _write_fixed(w, self.perm, id_bits)
        self.Q.write(w)
        self.present.write(w)
        w.varint(self.shortcut_step)
        self._marked.write(w)
        _write_fixed(w, self._back, max(1, len(self.perm).bit_length()))

    @classmethod
    def read(cls, r: ByteReader) -> "Snapshot":
        instant = r.varint()
        tree = K3Tree.read(r)
        n = r.count(min_bits=1)
        perm = _read_fixed(r, n)
        Q = BitVector.read(r)
        present = BitVector.read(r)
        step = r.varint()
        marked = BitVector.read(r)
        back = _read_fixed(r, marked.ones, max(1, n.bit_length()))
        if len(Q) != n or present.ones != n or Q.count(0) != tree.L.ones:
            raise CorruptStoreError("snapshot perm/Q/L sizes disagree")
        if len(marked) != n or step < 1:
            raise CorruptStoreError("snapshot shortcut table is malformed")
        if any(p >= len(present) for p in perm):
            raise CorruptStoreError("snapshot perm refers to unknown objects")
        return cls(instant, tree, perm, Q, present, step, marked, back)


def _shortcuts(perm: list[int], present: BitVector, step: int) -> tuple[BitVector, list[int]]:
    n = len(perm)
    pi = [present.rank1(o) for o in perm]
    marks = [0] * n
    backs: dict[int, int] = {}
    seen = [False] * n
    for start in range(n):
        if seen[start]:
            continue
        cycle = []
        j = start
        while not seen[j]:
            seen[j] = True
            cycle.append(j)
            j = pi[j]
        if len(cycle) <= step:
            continue
        m = len(cycle)
        for idx in range(0, m, step):
            marks[cycle[idx]] = 1
            backs[cycle[idx]] = cycle[(idx - step) % m]
    marked = BitVector(marks)
    return marked, [backs[j] for j in sorted(backs)]


def _write_fixed(w: ByteWriter, values: list[int], width: int) -> None:
    w.u8(width)
    w.raw(_pack_fixed(np.asarray(values, dtype=np.uint64), width))


def _read_fixed(r: ByteReader, count: int, width: int | None = None) -> list[int]:
    stored = r.u8()
    if stored == 0 or stored > 64:
        raise CorruptStoreError(f"bad fixed-width field size {stored}")
    if width is not None and stored != width:
        raise CorruptStoreError("fixed-width field size mismatch")
    return _unpack_fixed(r.raw((count * stored + 7) // 8), count, stored).tolist()
