"""The compressed trajectory store: snapshots every ``period`` instants plus logs.

Log ``p`` of an object covers the instants ``(p*d, min(p*d + d, T - 1)]``
relative to snapshot ``p``. It is a sequence of packed movements, grammar
non-terminals and three codewords:

* ``AA`` (absolute appearance): unknown from the log start up to instant
  ``p*d + D``, where the object shows up at absolute cell ``P``.
* ``RD`` (relative disappearance): ``D`` instants elapse between the last
  known position and the reappearance, which is ``P`` cells away.
* ``D`` (disappearance): unknown from instant ``p*d + D`` to the log end;
  ``P`` keeps the last known absolute cell.

Per object, the ``D`` values form one DAC sequence and the ``P`` triples
another (three entries per codeword), consumed in log order.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._io import unzigzag, zigzag
from .errors import BuildError, CorruptStoreError
from .events import Cell, Tracks
from .grammar import NT_BASE, RuleTable, repair_compress
from .k3tree import height_for, padded_side
from .movement import ABS_APPEAR, DISAPPEAR, REL_DISAPPEAR, pack_movements
from .snapshot import DEFAULT_SHORTCUT_STEP, Snapshot
from .succinct import DacSequence

log = logging.getLogger(__name__)


@dataclass
class StoreConfig:
    period: int = 120
    k: int = 2
    side: int | None = None
    shortcut_step: int = DEFAULT_SHORTCUT_STEP
    chunk_width: int = 8

    def validate(self) -> None:
        if self.period < 2:
            raise BuildError("snapshot period must be >= 2")
        if self.k < 2:
            raise BuildError("k must be >= 2")
        if self.shortcut_step < 1:
            raise BuildError("shortcut_step must be >= 1")
        if not 1 <= self.chunk_width <= 32:
            raise BuildError("chunk_width must be within [1, 32]")


@dataclass
class StoreHeader:
    side: int
    k: int
    period: int
    n_instants: int
    ids: list[str]
    max_speed: tuple[int, int, int]
    n_records: int
    step_seconds: float = 15.0
    cell_size: tuple[float, float, float] = (5000.0, 5000.0, 100.0)
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    shortcut_step: int = DEFAULT_SHORTCUT_STEP
    chunk_width: int = 8

    @property
    def n_objects(self) -> int:
        return len(self.ids)

    @property
    def n_snapshots(self) -> int:
        return (self.n_instants - 1) // self.period + 1 if self.n_instants > 0 else 0


@dataclass
class Store:
    header: StoreHeader
    snapshots: list[Snapshot]
    streams: list[list[list[int]]]  # [object][period] -> compressed symbols
    D: list[DacSequence]
    P: list[DacSequence]
    rules: RuleTable
    # derived on construction, never serialized
    cw_start: list[list[int]] = field(default_factory=list, repr=False)
    appear: list[list[tuple[int, int, int]]] = field(default_factory=list, repr=False)
    disappear: list[list[tuple[int, int]]] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        self._derive()

    def _derive(self) -> None:
        h = self.header
        d = h.period
        n_snap = h.n_snapshots
        if len(self.snapshots) != n_snap:
            raise CorruptStoreError(f"expected {n_snap} snapshots, found {len(self.snapshots)}")
        if not (len(self.streams) == len(self.D) == len(self.P) == h.n_objects):
            raise CorruptStoreError("per-object log tables disagree with the object count")
        self.cw_start = []
        self.appear = [[] for _ in range(n_snap)]
        self.disappear = [[] for _ in range(n_snap)]
        for o, periods in enumerate(self.streams):
            if len(periods) != n_snap:
                raise CorruptStoreError(f"object {o} has {len(periods)} logs, expected {n_snap}")
            starts = []
            ci = 0
            for p, stream in enumerate(periods):
                starts.append(ci)
                if not stream:
                    continue
                if stream[0] == ABS_APPEAR:
                    if ci >= len(self.D[o]):
                        raise CorruptStoreError(f"object {o}: D array too short")
                    self.appear[p].append((p * d + self.D[o][ci], o, ci))
                n_cw = sum(1 for s in stream if REL_DISAPPEAR <= s < NT_BASE)
                if stream[-1] == DISAPPEAR:
                    last = ci + n_cw - 1
                    if last >= len(self.D[o]):
                        raise CorruptStoreError(f"object {o}: D array too short")
                    self.disappear[p].append((p * d + self.D[o][last], o))
                ci += n_cw
            if ci != len(self.D[o]) or 3 * ci != len(self.P[o]):
                raise CorruptStoreError(f"object {o}: codeword count does not match D/P sizes")
            starts.append(ci)
            self.cw_start.append(starts)
        for lst in self.appear:
            lst.sort()
        for lst in self.disappear:
            lst.sort()

    # -- small accessors -------------------------------------------------

    @property
    def n_objects(self) -> int:
        return self.header.n_objects

    @property
    def n_instants(self) -> int:
        return self.header.n_instants

    @property
    def period(self) -> int:
        return self.header.period

    @property
    def side(self) -> int:
        return self.header.side

    def period_end(self, p: int) -> int:
        return min(p * self.header.period + self.header.period, self.header.n_instants - 1)

    def p_abs(self, o: int, ci: int) -> Cell:
        P = self.P[o]
        return P[3 * ci], P[3 * ci + 1], P[3 * ci + 2]

    def p_rel(self, o: int, ci: int) -> Cell:
        P = self.P[o]
        return unzigzag(P[3 * ci]), unzigzag(P[3 * ci + 1]), unzigzag(P[3 * ci + 2])

    def object_index(self, ext_id: str) -> int | None:
        idx = getattr(self, "_id_index", None)
        if idx is None:
            idx = self._id_index = {e: i for i, e in enumerate(self.header.ids)}
        return idx.get(str(ext_id))

    def codeword_count(self) -> int:
        return sum(len(d) for d in self.D)

    def symbol_count(self) -> int:
        return sum(len(s) for periods in self.streams for s in periods)

    # -- decoding --------------------------------------------------------

    def decode_range(self, o: int, p: int, lo: int, hi: int) -> list[Cell | None]:
        """Cells of object o for instants lo..hi, all inside [p*d, p*d + d].

        Symbols that end before ``lo`` are applied through their metadata
        without expansion; the rest are expanded instant by instant.
        """
        d = self.header.period
        k = p * d
        out: list[Cell | None] = [None] * (hi - lo + 1)
        if hi < lo:
            return out
        pos = self.snapshots[p].find_object(o)
        if lo == k:
            out[0] = pos
        rules = self.rules
        span, disp = rules.span, rules.disp
        cur = k
        ci = self.cw_start[o][p]
        end_of_log = self.period_end(p)
        for sym in self.streams[o][p]:
            if cur >= hi:
                break
            if sym >= NT_BASE:
                i = sym - NT_BASE
                end = cur + span[i]
                if end < lo:
                    dx, dy, dz = disp[i]
                    pos = (pos[0] + dx, pos[1] + dy, pos[2] + dz)
                else:
                    x, y, z = pos
                    t = cur
                    for term in rules.expand(sym):
                        dx, dy, dz = rules.meta(term)[1]
                        x += dx
                        y += dy
                        z += dz
                        t += 1
                        if lo <= t <= hi:
                            out[t - lo] = (x, y, z)
                    pos = (x, y, z)
                cur = end
            elif sym == ABS_APPEAR:
                cur = k + self.D[o][ci]
                pos = self.p_abs(o, ci)
                ci += 1
                if lo <= cur <= hi:
                    out[cur - lo] = pos
            elif sym == REL_DISAPPEAR:
                dx, dy, dz = self.p_rel(o, ci)
                cur += self.D[o][ci]
                ci += 1
                pos = (pos[0] + dx, pos[1] + dy, pos[2] + dz)
                if lo <= cur <= hi:
                    out[cur - lo] = pos
            elif sym == DISAPPEAR:
                cur = end_of_log
                ci += 1
            else:
                dx, dy, dz = rules.meta(sym)[1]
                pos = (pos[0] + dx, pos[1] + dy, pos[2] + dz)
                cur += 1
                if lo <= cur <= hi:
                    out[cur - lo] = pos
        return out

    def decode_object(self, o: int) -> tuple[np.ndarray, np.ndarray]:
        """Full decode of one object: (cells T x 3, known mask)."""
        T = self.header.n_instants
        d = self.header.period
        pos = np.zeros((T, 3), dtype=np.int32)
        known = np.zeros(T, dtype=bool)
        for p in range(self.header.n_snapshots):
            k = p * d
            hi = min(k + d - 1, T - 1)
            for t, c in enumerate(self.decode_range(o, p, k, hi), start=k):
                if c is not None:
                    pos[t] = c
                    known[t] = True
        return pos, known

    def to_tracks(self) -> Tracks:
        """Decode everything back into a :class:`Tracks` container."""
        starts, cells, knowns = [], [], []
        for o in range(self.n_objects):
            pos, known = self.decode_object(o)
            idx = np.flatnonzero(known)
            if idx.size == 0:
                starts.append(0)
                cells.append(np.zeros((0, 3), dtype=np.int32))
                knowns.append(np.zeros(0, dtype=bool))
                continue
            a, b = int(idx[0]), int(idx[-1]) + 1
            starts.append(a)
            cells.append(pos[a:b].copy())
            knowns.append(known[a:b].copy())
        return Tracks(list(self.header.ids), self.n_instants, starts, cells, knowns, self.side)


def _encode_period(
    posl: list[list[int]],
    knl: list[bool],
    k: int,
    end: int,
    dvals: list[int],
    pvals: list[int],
    speed: list[int],
    codes: list[int],
) -> list[int]:
    syms: list[int] = []
    t = k + 1
    if knl[k]:
        last = posl[k]
    else:
        ta = t
        while ta <= end and not knl[ta]:
            ta += 1
        if ta > end:
            return syms
        syms.append(ABS_APPEAR)
        dvals.append(ta - k)
        pvals.extend(posl[ta])
        last = posl[ta]
        t = ta + 1
    while t <= end:
        if knl[t]:
            c = posl[t]
            code = codes[t]  # t-1 is always the last known instant here
            delta = (c[0] - last[0], c[1] - last[1], c[2] - last[2])
            if code >= 0:
                syms.append(code)
                for a in range(3):
                    if abs(delta[a]) > speed[a]:
                        speed[a] = abs(delta[a])
            else:
                _relative(syms, dvals, pvals, speed, delta, 1)
            last = c
            t += 1
        else:
            t2 = t + 1
            while t2 <= end and not knl[t2]:
                t2 += 1
            if t2 > end:
                syms.append(DISAPPEAR)
                dvals.append(t - k)
                pvals.extend(last)
                break
            c = posl[t2]
            delta = (c[0] - last[0], c[1] - last[1], c[2] - last[2])
            _relative(syms, dvals, pvals, speed, delta, t2 - t + 1)
            last = c
            t = t2 + 1
    return syms


def _relative(syms, dvals, pvals, speed, delta, duration) -> None:
    syms.append(REL_DISAPPEAR)
    dvals.append(duration)
    pvals.extend(zigzag(v) for v in delta)
    for a in range(3):
        need = -(-abs(delta[a]) // duration)
        if need > speed[a]:
            speed[a] = need


def build_store(tracks: Tracks, config: StoreConfig | None = None, **grid_meta) -> Store:
    """Encode normalized tracks into a :class:`Store`.

    ``grid_meta`` may carry ``step_seconds``, ``cell_size`` and ``origin``;
    they are recorded in the header but play no part in the encoding.
    """
    config = config or StoreConfig()
    config.validate()
    T = tracks.n_instants
    d, k = config.period, config.k
    extent = max(tracks.extent(), tracks.side or 1, 1)
    side = config.side or padded_side(extent, k)
    height_for(side, k)
    if extent > side:
        raise BuildError(f"cells reach {extent - 1} but the grid side is {side}")

    n_snap = (T - 1) // d + 1 if T > 0 else 0
    snap_pos: list[dict[int, Cell]] = [{} for _ in range(n_snap)]
    raw: list[list[int]] = []
    dvals_all, pvals_all = [], []
    speed = [0, 0, 0]
    for o in range(tracks.n_objects):
        pos, known = tracks.dense(o)
        posl = pos.tolist()
        knl = known.tolist()
        step = np.diff(pos.astype(np.int64), axis=0, prepend=pos[:1].astype(np.int64))
        codes = pack_movements(step[:, 0], step[:, 1], step[:, 2]).tolist()
        first = tracks.start[o]
        last = first + len(tracks.known[o]) - 1
        dvals: list[int] = []
        pvals: list[int] = []
        for p in range(n_snap):
            kp = p * d
            end = min(kp + d, T - 1)
            if knl[kp]:
                snap_pos[p][o] = tuple(posl[kp])
            if end < first or kp > last:
                raw.append([])
                continue
            raw.append(_encode_period(posl, knl, kp, end, dvals, pvals, speed, codes))
        dvals_all.append(dvals)
        pvals_all.append(pvals)

    log.debug("encoding %d raw symbols with Re-Pair", sum(len(s) for s in raw))
    compressed, rules = repair_compress(raw)
    streams = [compressed[o * n_snap:(o + 1) * n_snap] for o in range(tracks.n_objects)]
    snapshots = [
        Snapshot.build(snap_pos[p], p * d, side, k, config.shortcut_step, universe=tracks.n_objects)
        for p in range(n_snap)
    ]
    header = StoreHeader(
        side=side,
        k=k,
        period=d,
        n_instants=T,
        ids=list(tracks.ids),
        max_speed=(speed[0], speed[1], speed[2]),
        n_records=tracks.n_records(),
        shortcut_step=config.shortcut_step,
        chunk_width=config.chunk_width,
        **grid_meta,
    )
    D = [DacSequence(v, config.chunk_width) for v in dvals_all]
    P = [DacSequence(v, config.chunk_width) for v in pvals_all]
    return Store(header, snapshots, streams, D, P, rules)
