"""Randomized query suites shaped like the usual evaluation workloads.

Region queries use 20^3 (small) or 160^3 (large) boxes; interval queries
span 50 (small) or 400 (large) instants; trajectories span 2000 instants.
All sizes are clipped to the grid and time range of the store.
"""
from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from .events import Cell
from .k3tree import Box
from .oracle import OracleStore
from .query import QueryEngine

SMALL_REGION, LARGE_REGION = 20, 160
SMALL_INTERVAL, LARGE_INTERVAL = 50, 400
TRAJECTORY_LENGTH = 2000

# suite -> (kind, region side, time span)
SUITES: dict[str, tuple[str, int, int]] = {
    "position": ("position", 0, 1),
    "trajectory": ("trajectory", 0, TRAJECTORY_LENGTH),
    "slice-small": ("slice", SMALL_REGION, 1),
    "slice-large": ("slice", LARGE_REGION, 1),
    "interval-small": ("interval", SMALL_REGION, SMALL_INTERVAL),
    "interval-large": ("interval", LARGE_REGION, LARGE_INTERVAL),
}


class Query(NamedTuple):
    kind: str
    obj: int
    box: Box | None
    t_s: int
    t_e: int


Anchor = Callable[[np.random.Generator, int], "Cell | None"]


def oracle_anchor(oracle: OracleStore) -> Anchor:
    """Pick the cell of a random object known at ``t`` (None if nobody is)."""

    def pick(rng: np.random.Generator, t: int) -> Cell | None:
        live = np.flatnonzero(oracle.known[:, t])
        if live.size == 0:
            return None
        x, y, z = oracle.cells[int(rng.choice(live)), t].tolist()
        return x, y, z

    return pick


def _box(rng: np.random.Generator, size: int, side: int, centre: Cell | None) -> Box:
    size = min(size, side)
    if centre is None:
        lo = rng.integers(0, side - size + 1, size=3)
    else:
        lo = np.clip(np.asarray(centre) - size // 2 + rng.integers(-size // 4, size // 4 + 1, size=3), 0, side - size)
    x, y, z = (int(v) for v in lo)
    return x, y, z, x + size - 1, y + size - 1, z + size - 1


def make_queries(
    suite: str,
    n: int,
    rng: np.random.Generator,
    n_objects: int,
    n_instants: int,
    side: int,
    anchor: Anchor | None = None,
) -> list[Query]:
    """``n`` random queries of a suite. With ``anchor``, half of the region
    queries are centred near a live object so that results are rarely empty."""
    kind, region, span = SUITES[suite]
    span = max(1, min(span, n_instants))
    out = []
    for i in range(n):
        t_s = int(rng.integers(0, n_instants - span + 1))
        t_e = t_s + span - 1
        obj = int(rng.integers(0, n_objects)) if n_objects else 0
        box = None
        if kind in ("slice", "interval"):
            centre = anchor(rng, t_s) if anchor is not None and i % 2 == 0 else None
            box = _box(rng, region, side, centre)
        out.append(Query(kind, obj, box, t_s, t_e))
    return out


def run_engine(engine: QueryEngine, q: Query):
    if q.kind == "position":
        return engine.position(q.obj, q.t_s)
    if q.kind == "trajectory":
        return engine.trajectory(q.obj, q.t_s, q.t_e)
    if q.kind == "slice":
        return engine.time_slice(q.box, q.t_s, with_positions=True)
    return engine.time_interval(q.box, q.t_s, q.t_e)


def run_oracle(oracle: OracleStore, q: Query):
    if q.kind == "position":
        return oracle.position(q.obj, q.t_s)
    if q.kind == "trajectory":
        return oracle.trajectory(q.obj, q.t_s, q.t_e)
    if q.kind == "slice":
        return oracle.time_slice_cells(q.box, q.t_s)
    return oracle.time_interval(q.box, q.t_s, q.t_e)
