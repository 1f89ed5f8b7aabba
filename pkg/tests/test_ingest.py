from __future__ import annotations

import io
import math

import numpy as np
import pytest

from tracube.errors import BuildError
from tracube.ingest import (
    DEFAULT_GAP_THRESHOLD,
    GridConfig,
    RawRecord,
    SynthParams,
    gen_synthetic,
    interpolate_gaps,
    normalize,
    parse_csv,
)

GRID = GridConfig(cell_size=(5000.0, 5000.0, 100.0), step=15.0)


def rec(t, x, y=0.0, z=0.0, i="a"):
    return RawRecord(i, t, x, y, z)


def test_short_hole_is_interpolated():
    tr = normalize([rec(0, 0), rec(30, 10000, 0, 250)], GRID)
    assert tr.n_instants == 3
    assert tr.known[0].all()
    assert tr.cells[0].tolist() == [[0, 0, 0], [1, 0, 1], [2, 0, 2]]


def test_long_hole_stays_absent():
    tr = normalize([rec(0, 0), rec(20 * 60, 10000)], GRID)
    assert tr.n_instants == 81
    assert tr.known[0].tolist() == [True] + [False] * 79 + [True]
    assert DEFAULT_GAP_THRESHOLD == 60  # 15 minutes of 15 s instants


def test_cell_boundaries_floor():
    tr = normalize([rec(0, 5000.0, 4999.999, 100.0)], GRID)
    assert tr.cells[0].tolist() == [[1, 0, 1]]


def test_snapping_prefers_nearest_then_earlier():
    g = GridConfig(step=16.0)
    recs = [rec(0, 0), rec(18, 10000), rec(14, 5000), rec(44, 15000), rec(52, 20000), rec(50, 25000)]
    tr = normalize(recs, g)
    # instant 1: 14 s and 18 s tie, the earlier wins; instant 3: 50 s is nearest
    assert tr.cells[0][:, 0].tolist() == [0, 1, 3, 5]


def test_grid_origin_side_and_meta():
    g = GridConfig(origin=(1000.0, 1000.0, 0.0), cell_size=(1000.0, 1000.0, 10.0), side=16, t0=-15.0)
    tr = normalize([rec(0, 1500, 99999, 5)], g)
    assert tr.start == [1]
    assert tr.cells[0].tolist() == [[0, 15, 0]]  # clipped to the grid
    assert tr.side == 16
    assert tr.meta["cell_size"] == (1000.0, 1000.0, 10.0)
    with pytest.raises(ValueError):
        GridConfig(cell_size=(0.0, 1.0, 1.0))
    with pytest.raises(BuildError):
        normalize([rec(-100, 0)], g)


def test_parse_csv_counts_rejects():
    text = "id,t,x,y,z\na,0,1,2,3\nb,1,2\n\nc,x,1,1,1\nd,2,nan,1,1\ne,3,1,1,1\n"
    recs, bad = parse_csv(io.StringIO(text))
    assert [r.id for r in recs] == ["a", "e"]
    assert bad == 3
    with pytest.raises(BuildError):
        parse_csv(io.StringIO(""))
    with pytest.raises(BuildError):
        parse_csv(io.StringIO("a,b,c\n"))


def test_single_record_and_empty():
    tr = normalize([rec(100, 0)], GRID)
    assert tr.n_objects == 1 and tr.n_instants == 1
    assert normalize([], GRID).n_objects == 0


def test_interpolate_gaps():
    tr = normalize([rec(0, 0), rec(61 * 15, 61 * 5000), rec(62 * 15, 0, i="b")], GRID)
    assert not tr.known[0][1:61].any()
    filled = interpolate_gaps(tr)
    assert filled.known[0].all()
    assert filled.cells[0][:, 0].tolist() == list(range(62))
    assert filled.n_records() == tr.n_records() + 60
    same = interpolate_gaps(tr, threshold=10**6)
    assert all((a == b).all() for a, b in zip(same.known, tr.known))


def test_normalize_regular_input_is_identity():
    t = gen_synthetic(objects=5, instants=200, side=64, seed=3, gap_prob=0.0)
    recs = []
    for o in range(t.n_objects):
        for i, c in enumerate(t.cells[o]):
            x, y, z = (c + 0.5) * np.array(GRID.cell_size)
            recs.append(RawRecord(t.ids[o], (t.start[o] + i) * 15.0, x, y, z))
    back = normalize(recs, GridConfig(t0=0.0, side=64))
    assert back.n_instants == max(s + len(k) for s, k in zip(t.start, t.known))
    back.n_instants = t.n_instants  # trailing instants without records are not inferred
    assert back.equals(t)


def test_generator_properties():
    a = gen_synthetic(objects=20, instants=500, side=32, seed=9)
    b = gen_synthetic(SynthParams(objects=20, instants=500, side=32, seed=9))
    assert a.equals(b)
    assert not a.equals(gen_synthetic(objects=20, instants=500, side=32, seed=10))
    t = gen_synthetic(objects=20, instants=500, side=64, seed=1, gap_prob=0.0, speed=(1, 1, 1))
    for o in range(t.n_objects):
        assert t.known[o].all()
        assert len(t.known[o]) >= 250
        assert np.abs(np.diff(t.cells[o].astype(int), axis=0)).max() <= 2
        assert t.cells[o].min() >= 0 and t.cells[o].max() < 64
    g = gen_synthetic(objects=20, instants=2000, side=64, seed=1, gap_prob=0.01)
    assert all(k[0] and k[-1] for k in g.known)
    assert sum((~k).sum() for k in g.known) > 0
    with pytest.raises(ValueError):
        gen_synthetic(gap_prob=2.0)


def test_defaults():
    p = SynthParams()
    assert (p.objects, p.instants, p.side) == (100, 5000, 256)
    assert math.isclose(GRID.step, 15.0)
