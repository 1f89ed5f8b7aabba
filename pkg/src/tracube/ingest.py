"""From raw position reports to normalized cell tracks.

Raw x/y are expected to be projected planar coordinates (metres); no
geodesy happens here. Timestamps are snapped to regular instants, short
holes are interpolated on the fly, and holes of ``gap_threshold`` instants
or more stay absent unless :func:`interpolate_gaps` is applied afterwards.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, TextIO

import numpy as np

from .errors import BuildError
from .events import Tracks
from .k3tree import padded_side

log = logging.getLogger(__name__)

DEFAULT_GAP_THRESHOLD = 60  # instants: 15 minutes at 15 s per instant


class RawRecord(NamedTuple):
    id: str
    t: float
    x: float
    y: float
    z: float


@dataclass
class GridConfig:
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    cell_size: tuple[float, float, float] = (5000.0, 5000.0, 100.0)
    step: float = 15.0
    side: int | None = None
    t0: float | None = None
    k: int = 2

    def __post_init__(self) -> None:
        if any(c <= 0 for c in self.cell_size):
            raise ValueError("cell sizes must be positive")
        if self.step <= 0:
            raise ValueError("instant step must be positive")


def parse_csv(stream: TextIO) -> tuple[list[RawRecord], int]:
    """Read ``id,t,x,y,z`` rows; returns (records, number of rejected lines)."""
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise BuildError("empty input: missing id,t,x,y,z header") from None
    if [h.strip().lower() for h in header] != ["id", "t", "x", "y", "z"]:
        raise BuildError(f"unexpected header {header!r}; want id,t,x,y,z")
    records: list[RawRecord] = []
    rejected = 0
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            if len(row) != 5 or not row[0].strip():
                raise ValueError("wrong field count")
            t, x, y, z = (float(v) for v in row[1:])
            if not all(math.isfinite(v) for v in (t, x, y, z)):
                raise ValueError("non-finite value")
        except ValueError as exc:
            rejected += 1
            log.warning("line %d skipped: %s", lineno, exc)
            continue
        records.append(RawRecord(row[0].strip(), t, x, y, z))
    return records, rejected


def _snap(records: list[RawRecord], t0: float, step: float) -> dict[int, RawRecord]:
    """Map each record to its nearest instant; nearest record wins, ties to the earlier."""
    best: dict[int, tuple[float, RawRecord]] = {}
    for rec in sorted(records, key=lambda r: r.t):
        rel = (rec.t - t0) / step
        inst = math.floor(rel + 0.5)
        dist = abs(rel - inst)
        held = best.get(inst)
        if held is None or dist < held[0]:
            best[inst] = (dist, rec)
    return {i: rec for i, (_, rec) in best.items()}


def normalize(
    records: Iterable[RawRecord],
    grid: GridConfig | None = None,
    gap_threshold: int = DEFAULT_GAP_THRESHOLD,
) -> Tracks:
    grid = grid or GridConfig()
    by_id: dict[str, list[RawRecord]] = {}
    for rec in records:
        by_id.setdefault(rec.id, []).append(rec)
    if not by_id:
        return Tracks([], 0, [], [], [], grid.side)
    t0 = grid.t0 if grid.t0 is not None else min(r.t for recs in by_id.values() for r in recs)
    origin = np.asarray(grid.origin, dtype=float)
    size = np.asarray(grid.cell_size, dtype=float)

    starts, raw_cells, knowns = [], [], []
    for recs in by_id.values():
        snapped = _snap(recs, t0, grid.step)
        if min(snapped) < 0:
            raise BuildError("record earlier than the configured t0")
        inst = sorted(snapped)
        first, last = inst[0], inst[-1]
        n = last - first + 1
        pos = np.zeros((n, 3), dtype=float)
        known = np.zeros(n, dtype=bool)
        for i in inst:
            r = snapped[i]
            pos[i - first] = (r.x, r.y, r.z)
            known[i - first] = True
        for a, b in zip(inst, inst[1:]):
            missing = b - a - 1
            if 0 < missing < gap_threshold:
                frac = (np.arange(1, missing + 1) / (b - a))[:, None]
                pos[a - first + 1:b - first] = pos[a - first] + frac * (pos[b - first] - pos[a - first])
                known[a - first + 1:b - first] = True
        cells = np.floor((pos - origin) / size).astype(np.int64)
        starts.append(first)
        raw_cells.append(cells)
        knowns.append(known)

    top = max((int(c[k].max()) for c, k in zip(raw_cells, knowns) if k.any()), default=0)
    side = grid.side or padded_side(top + 1, grid.k)
    cells = [np.clip(c, 0, side - 1).astype(np.int32) for c in raw_cells]
    n_instants = max(s + len(k) for s, k in zip(starts, knowns))
    tracks = Tracks(list(by_id), n_instants, starts, cells, knowns, side)
    tracks.meta.update(step_seconds=grid.step, cell_size=tuple(grid.cell_size), origin=tuple(grid.origin))
    return tracks


def interpolate_gaps(tracks: Tracks, threshold: int = DEFAULT_GAP_THRESHOLD) -> Tracks:
    """Fill every interior absence run of ``threshold`` or more instants linearly.

    Known cells are never touched; leading and trailing absences cannot occur
    inside a track (it starts and ends on known instants).
    """
    cells_out, known_out = [], []
    for cells, known in zip(tracks.cells, tracks.known):
        cells = cells.copy()
        known = known.copy()
        idx = np.flatnonzero(known)
        for a, b in zip(idx[:-1].tolist(), idx[1:].tolist()):
            missing = b - a - 1
            if missing >= threshold:
                frac = (np.arange(1, missing + 1) / (b - a))[:, None]
                fill = cells[a] + frac * (cells[b].astype(float) - cells[a])
                cells[a + 1:b] = np.floor(fill + 0.5).astype(np.int32)
                known[a + 1:b] = True
        cells_out.append(cells)
        known_out.append(known)
    out = Tracks(list(tracks.ids), tracks.n_instants, list(tracks.start), cells_out, known_out, tracks.side)
    out.meta.update(tracks.meta)
    return out


@dataclass
class SynthParams:
    objects: int = 100
    instants: int = 5000
    side: int = 256
    segment_min: int = 60
    segment_max: int = 600
    speed: tuple[float, float, float] = (1.0, 1.0, 0.5)
    gap_prob: float = 0.002
    gap_min: int = 2
    gap_max: int = 90
    min_lifespan: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        if self.objects < 0 or self.instants < 1 or self.side < 2:
            raise ValueError("need objects >= 0, instants >= 1 and side >= 2")
        if not 1 <= self.segment_min <= self.segment_max:
            raise ValueError("need 1 <= segment_min <= segment_max")
        if any(s < 0 for s in self.speed):
            raise ValueError("speed bounds must be non-negative")
        if not 0 <= self.gap_prob <= 1:
            raise ValueError("gap_prob must be a probability")
        if not 1 <= self.gap_min <= self.gap_max:
            raise ValueError("need 1 <= gap_min <= gap_max")
        if not 0 < self.min_lifespan <= 1:
            raise ValueError("min_lifespan must be within (0, 1]")


def _reflect(v: float, side: int) -> float:
    period = 2 * side
    v = v % period
    return period - v - 1e-9 if v >= side else v


def gen_synthetic(params: SynthParams | None = None, **overrides) -> Tracks:
    """Piecewise constant-velocity 3D tracks with injected reporting gaps.

    Each object lives for a random window of at least ``min_lifespan`` of the
    time range, flies straight at a random velocity for ``segment_min`` to
    ``segment_max`` instants, then turns. Walls reflect. Gaps start with
    probability ``gap_prob`` per instant and never cover the first or last
    instant of a track. Deterministic for a given seed.
    """
    params = params or SynthParams()
    if overrides:
        params = SynthParams(**{**params.__dict__, **overrides})
    params.validate()
    rng = np.random.default_rng(params.seed)
    T, side = params.instants, params.side
    speed = np.asarray(params.speed, dtype=float)
    ids, starts, cells_out, known_out = [], [], [], []
    for o in range(params.objects):
        life = int(rng.integers(max(1, int(params.min_lifespan * T)), T + 1))
        start = int(rng.integers(0, T - life + 1))
        pos = rng.uniform(0, side, size=3)
        cells = np.zeros((life, 3), dtype=np.int32)
        known = np.ones(life, dtype=bool)
        seg_left = 0
        vel = np.zeros(3)
        gap_left = 0
        for i in range(life):
            if seg_left == 0:
                vel = rng.uniform(-speed, speed)
                seg_left = int(rng.integers(params.segment_min, params.segment_max + 1))
            if i:
                pos = pos + vel
                for a in range(3):
                    if not 0 <= pos[a] < side:
                        pos[a] = _reflect(pos[a], side)
                        vel[a] = -vel[a]
            seg_left -= 1
            cells[i] = np.floor(pos)
            if gap_left:
                known[i] = False
                gap_left -= 1
            elif 0 < i < life - 1 and params.gap_prob and rng.random() < params.gap_prob:
                gap_left = int(rng.integers(params.gap_min, params.gap_max + 1)) - 1
                known[i] = False
        known[-1] = True
        ids.append(f"obj{o:05d}")
        starts.append(start)
        cells_out.append(np.clip(cells, 0, side - 1))
        known_out.append(known)
    tracks = Tracks(ids, T, starts, cells_out, known_out, side)
    tracks.meta.update(step_seconds=15.0, cell_size=(5000.0, 5000.0, 100.0), origin=(0.0, 0.0, 0.0))
    return tracks
