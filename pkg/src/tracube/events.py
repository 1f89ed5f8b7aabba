"""Normalized cell events and the per-object track container built from them."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, TextIO

import numpy as np

from .errors import BuildError

Cell = tuple[int, int, int]


class CellEvent(NamedTuple):
    obj: object  # external id on input; dense int once inside a Tracks
    t: int
    x: int
    y: int
    z: int


@dataclass
class Tracks:
    """Known cell of every object at every regular instant.

    Object ``o`` covers instants ``start[o] .. start[o] + len(known[o]) - 1``;
    ``cells[o][i]`` is meaningful only where ``known[o][i]`` is true.
    """

    ids: list[str]
    n_instants: int
    start: list[int]
    cells: list[np.ndarray]
    known: list[np.ndarray]
    side: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_objects(self) -> int:
        return len(self.ids)

    def __len__(self) -> int:
        return self.n_objects

    @classmethod
    def from_events(
        cls,
        events: Iterable[CellEvent | tuple],
        n_instants: int | None = None,
        side: int | None = None,
    ) -> "Tracks":
        dense: dict[str, int] = {}
        per_obj: list[list[tuple[int, int, int, int]]] = []
        for ev in events:
            ext, t, x, y, z = ev
            ext = str(ext)
            o = dense.get(ext)
            if o is None:
                o = dense[ext] = len(per_obj)
                per_obj.append([])
            rows = per_obj[o]
            t = int(t)
            if t < 0:
                raise BuildError(f"negative instant {t} for object {ext}")
            if rows and t <= rows[-1][0]:
                kind = "duplicate" if t == rows[-1][0] else "unsorted"
                raise BuildError(f"{kind} event for object {ext} at instant {t}")
            rows.append((t, int(x), int(y), int(z)))
        last = max((rows[-1][0] for rows in per_obj), default=-1)
        if n_instants is None:
            n_instants = last + 1
        elif last >= n_instants:
            raise BuildError(f"event at instant {last} beyond n_instants={n_instants}")
        starts, cells, known = [], [], []
        for rows in per_obj:
            arr = np.asarray(rows, dtype=np.int64)
            t0 = int(arr[0, 0])
            n = int(arr[-1, 0]) - t0 + 1
            c = np.zeros((n, 3), dtype=np.int32)
            k = np.zeros(n, dtype=bool)
            c[arr[:, 0] - t0] = arr[:, 1:]
            k[arr[:, 0] - t0] = True
            starts.append(t0)
            cells.append(c)
            known.append(k)
        tracks = cls(list(dense), n_instants, starts, cells, known, side)
        tracks.check_bounds()
        return tracks

    def check_bounds(self) -> None:
        for o in range(self.n_objects):
            c = self.cells[o][self.known[o]]
            if c.size and c.min() < 0:
                raise BuildError(f"object {self.ids[o]} has a negative cell coordinate")
            if self.side is not None and c.size and c.max() >= self.side:
                raise BuildError(f"object {self.ids[o]} leaves the {self.side}^3 grid")

    def extent(self) -> int:
        """1 + largest coordinate used on any axis."""
        top = 0
        for o in range(self.n_objects):
            c = self.cells[o][self.known[o]]
            if c.size:
                top = max(top, int(c.max()) + 1)
        return top

    def dense(self, o: int) -> tuple[np.ndarray, np.ndarray]:
        """(cells, known) of object o over the full instant range."""
        pos = np.zeros((self.n_instants, 3), dtype=np.int32)
        known = np.zeros(self.n_instants, dtype=bool)
        s = self.start[o]
        n = len(self.known[o])
        pos[s:s + n] = self.cells[o]
        known[s:s + n] = self.known[o]
        return pos, known

    def position(self, o: int, t: int) -> Cell | None:
        i = t - self.start[o]
        if 0 <= i < len(self.known[o]) and self.known[o][i]:
            x, y, z = self.cells[o][i]
            return int(x), int(y), int(z)
        return None

    def n_records(self) -> int:
        return int(sum(int(k.sum()) for k in self.known))

    def events(self) -> Iterator[CellEvent]:
        """Events ordered by object then instant, with dense ids."""
        for o in range(self.n_objects):
            idx = np.flatnonzero(self.known[o])
            for i, (x, y, z) in zip(idx.tolist(), self.cells[o][idx].tolist()):
                yield CellEvent(o, self.start[o] + i, x, y, z)

    def write_csv(self, out: TextIO) -> None:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["id", "instant", "cx", "cy", "cz"])
        for ev in self.events():
            w.writerow([self.ids[ev.obj], ev.t, ev.x, ev.y, ev.z])

    @classmethod
    def read_csv(cls, src: TextIO, n_instants: int | None = None, side: int | None = None) -> "Tracks":
        reader = csv.reader(src)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["id", "instant", "cx", "cy", "cz"]:
            raise BuildError("cell event CSV must start with the header id,instant,cx,cy,cz")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append((row[0], int(row[1]), int(row[2]), int(row[3]), int(row[4])))
            except (IndexError, ValueError) as exc:
                raise BuildError(f"line {lineno}: malformed cell event {row!r}") from exc
        return cls.from_events(rows, n_instants=n_instants, side=side)

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    def equals(self, other: "Tracks") -> bool:
        """Same objects (by external id and order) with identical known cells."""
        if self.ids != other.ids or self.n_instants != other.n_instants:
            return False
        for o in range(self.n_objects):
            a_pos, a_known = self.dense(o)
            b_pos, b_known = other.dense(o)
            if not np.array_equal(a_known, b_known):
                return False
            if not np.array_equal(a_pos[a_known], b_pos[b_known]):
                return False
        return True
