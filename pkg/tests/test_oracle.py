import io

import numpy as np

from tracube.events import Tracks
from tracube.oracle import OracleStore


def test_single_object():
    tracks = Tracks.from_events([("x", 0, 1, 2, 3), ("x", 2, 2, 2, 3)], n_instants=4)
    o = OracleStore(tracks)
    assert o.trajectory(0, 0, 3) == [(0, (1, 2, 3)), (1, None), (2, (2, 2, 3)), (3, None)]
    assert o.time_slice((0, 0, 0, 1, 9, 9), 0) == {0}
    assert o.time_slice((0, 0, 0, 1, 9, 9), 2) == set()
    assert o.time_interval((2, 2, 3, 2, 2, 3), 0, 1) == set()
    assert o.time_interval((2, 2, 3, 2, 2, 3), 0, 3) == {0}
    assert o.position(5, 0) is None


def test_interval_is_union_of_slices(small_oracle):
    rng = np.random.default_rng(1)
    for _ in range(30):
        lo = rng.integers(0, 50, 3)
        box = (*lo.tolist(), *(lo + 14).tolist())
        t_s = int(rng.integers(0, 850))
        t_e = t_s + int(rng.integers(0, 49))
        union = set().union(*(small_oracle.time_slice(box, t) for t in range(t_s, t_e + 1)))
        assert small_oracle.time_interval(box, t_s, t_e) == union
        assert small_oracle.time_interval(box, t_s, t_e + 1) >= union


def test_csv_roundtrip(small_tracks):
    # without an explicit count, the last instant holding an event ends the range
    text = small_tracks.to_csv_string()
    assert OracleStore.from_csv(io.StringIO(text)).n_instants <= small_tracks.n_instants
    o = OracleStore(Tracks.read_csv(io.StringIO(text), n_instants=small_tracks.n_instants))
    ref = OracleStore(small_tracks)
    assert (o.known == ref.known).all()
    assert (o.cells[o.known] == ref.cells[ref.known]).all()
