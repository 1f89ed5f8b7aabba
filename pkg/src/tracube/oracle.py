"""Brute-force reference answers from an uncompressed (object, instant) table."""
from __future__ import annotations

from typing import TextIO

import numpy as np

from .events import Cell, Tracks
from .k3tree import Box


class OracleStore:
    """Dense ``objects x instants`` table; every query is a plain scan."""

    def __init__(self, tracks: Tracks) -> None:
        self.tracks = tracks
        n, T = tracks.n_objects, tracks.n_instants
        self.cells = np.zeros((n, T, 3), dtype=np.int32)
        self.known = np.zeros((n, T), dtype=bool)
        for o in range(n):
            self.cells[o], self.known[o] = tracks.dense(o)

    @classmethod
    def from_csv(cls, src: TextIO) -> "OracleStore":
        return cls(Tracks.read_csv(src))

    @property
    def n_objects(self) -> int:
        return self.known.shape[0]

    @property
    def n_instants(self) -> int:
        return self.known.shape[1]

    def position(self, o: int, t: int) -> Cell | None:
        if not 0 <= o < self.n_objects or not self.known[o, t]:
            return None
        x, y, z = self.cells[o, t].tolist()
        return x, y, z

    def trajectory(self, o: int, t_s: int, t_e: int) -> list[tuple[int, Cell | None]]:
        return [(t, self.position(o, t)) for t in range(t_s, t_e + 1)]

    def _inside(self, cells: np.ndarray, box: Box) -> np.ndarray:
        x1, y1, z1, x2, y2, z2 = box
        return (
            (cells[..., 0] >= x1) & (cells[..., 0] <= x2)
            & (cells[..., 1] >= y1) & (cells[..., 1] <= y2)
            & (cells[..., 2] >= z1) & (cells[..., 2] <= z2)
        )

    def time_slice(self, box: Box, t: int) -> set[int]:
        hit = self.known[:, t] & self._inside(self.cells[:, t], box)
        return set(np.flatnonzero(hit).tolist())

    def time_slice_cells(self, box: Box, t: int) -> set[tuple[int, Cell]]:
        return {(o, self.position(o, t)) for o in self.time_slice(box, t)}

    def time_interval(self, box: Box, t_s: int, t_e: int) -> set[int]:
        window = slice(t_s, t_e + 1)
        hit = self.known[:, window] & self._inside(self.cells[:, window], box)
        return set(np.flatnonzero(hit.any(axis=1)).tolist())
