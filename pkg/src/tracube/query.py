"""Position, trajectory, time-slice and time-interval queries on a built store.

Nothing is decompressed ahead of time. Region queries take candidates from
the nearest snapshot inside the expanded region (the query box widened by
the maximum per-axis speed times the elapsed instants), then follow each
candidate's log, dropping it as soon as it leaves the shrinking expanded
region, and using rule MBBs to accept or reject whole non-terminals.

Objects absent at the snapshot but appearing inside the log portion (``AA``)
are admitted from the per-period appearance index. For a backward time
slice, objects that vanish (``D``) before the later snapshot are tracked
forward from the earlier one.
"""
from __future__ import annotations

from typing import Iterable, Literal

from .errors import CorruptStoreError
from .events import Cell
from .grammar import NT_BASE
from .k3tree import Box
from .movement import ABS_APPEAR, DISAPPEAR, REL_DISAPPEAR
from .store import Store

Direction = Literal["auto", "forward", "backward"]


def expanded_region(box: Box, speed: tuple[int, int, int], dt: int, side: int) -> Box:
    """``box`` widened by ``speed * dt`` per axis, clamped to ``[0, side)``."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    x1, y1, z1, x2, y2, z2 = box
    sx, sy, sz = speed
    top = side - 1
    return (
        max(0, x1 - sx * dt),
        max(0, y1 - sy * dt),
        max(0, z1 - sz * dt),
        min(top, x2 + sx * dt),
        min(top, y2 + sy * dt),
        min(top, z2 + sz * dt),
    )


def clamp_box(box: Box, side: int) -> Box | None:
    """Intersect a box with the grid; None when nothing is left."""
    x1, y1, z1, x2, y2, z2 = box
    top = side - 1
    b = (max(0, x1), max(0, y1), max(0, z1), min(top, x2), min(top, y2), min(top, z2))
    if b[0] > b[3] or b[1] > b[4] or b[2] > b[5]:
        return None
    return b


class QueryEngine:
    """Read-only query front end; all scratch state is local to each call."""

    def __init__(self, store: Store, prune: bool = True) -> None:
        self.store = store
        self.prune = prune
        h = store.header
        self.d = h.period
        self.T = h.n_instants
        self.side = h.side
        self.speed = h.max_speed
        self.n_snap = h.n_snapshots
        r = store.rules
        self._left, self._right, self._span = r.left, r.right, r.span
        self._disp, self._mbb = r.disp, r.mbb
        self._term = {}

    # -- helpers ---------------------------------------------------------

    def _delta(self, code: int) -> tuple[int, int, int]:
        v = self._term.get(code)
        if v is None:
            v = self._term[code] = self.store.rules.meta(code)[1]
        return v

    def _sym_span(self, sym: int) -> int:
        return self._span[sym - NT_BASE] if sym >= NT_BASE else 1

    def _check_t(self, t: int) -> None:
        if not 0 <= t < self.T:
            raise ValueError(f"instant {t} outside [0, {self.T})")

    def _check_obj(self, o: int) -> bool:
        return 0 <= o < self.store.n_objects

    def _plan(self, t: int, direction: Direction) -> tuple[int, bool]:
        """(period, backward?) for the snapshot nearest to t."""
        p = t // self.d
        k0 = p * self.d
        has_next = p + 1 < self.n_snap
        if t == k0 or not has_next or direction == "forward":
            return p, False
        if direction == "backward":
            return p, True
        k1 = k0 + self.d
        return p, (k1 - t) < (t - k0)  # ties go to the earlier snapshot

    def _prefix_disp(self, sym: int, off: int) -> tuple[int, int, int]:
        """Displacement after the first ``off`` instants of ``sym``."""
        x = y = z = 0
        left, right, span, disp = self._left, self._right, self._span, self._disp
        while off > 0:
            if sym < NT_BASE:
                dx, dy, dz = self._delta(sym)
                return x + dx, y + dy, z + dz
            i = sym - NT_BASE
            if off == span[i]:
                dx, dy, dz = disp[i]
                return x + dx, y + dy, z + dz
            lsym = left[i]
            ls = self._sym_span(lsym)
            if off <= ls:
                sym = lsym
            else:
                dx, dy, dz = disp[lsym - NT_BASE] if lsym >= NT_BASE else self._delta(lsym)
                x += dx
                y += dy
                z += dz
                off -= ls
                sym = right[i]
        return x, y, z

    # -- object queries --------------------------------------------------

    def position(self, o: int, t: int, direction: Direction = "auto") -> Cell | None:
        self._check_t(t)
        if not self._check_obj(o):
            return None
        p, backward = self._plan(t, direction)
        if backward:
            found, pos = self._position_backward(o, p, t)
            if found:
                return pos
        return self._position_forward(o, p, t)

    def _position_forward(self, o: int, p: int, t: int) -> Cell | None:
        st = self.store
        k = p * self.d
        pos = st.snapshots[p].find_object(o)
        if t == k:
            return pos
        span, disp = self._span, self._disp
        cur = k
        ci = st.cw_start[o][p]
        for sym in st.streams[o][p]:
            if sym >= NT_BASE:
                i = sym - NT_BASE
                end = cur + span[i]
                if end <= t:
                    dx, dy, dz = disp[i]
                    pos = (pos[0] + dx, pos[1] + dy, pos[2] + dz)
                    cur = end
                    if cur == t:
                        return pos
                else:
                    dx, dy, dz = self._prefix_disp(sym, t - cur)
                    return pos[0] + dx, pos[1] + dy, pos[2] + dz
            elif sym == ABS_APPEAR:
                cur = k + st.D[o][ci]
                if cur > t:
                    return None
                pos = st.p_abs(o, ci)
                ci += 1
                if cur == t:
                    return pos
            elif sym == REL_DISAPPEAR:
                cur += st.D[o][ci]
                if cur > t:
                    return None
                dx, dy, dz = st.p_rel(o, ci)
                ci += 1
                pos = (pos[0] + dx, pos[1] + dy, pos[2] + dz)
                if cur == t:
                    return pos
            elif sym == DISAPPEAR:
                return None
            else:
                dx, dy, dz = self._delta(sym)
                pos = (pos[0] + dx, pos[1] + dy, pos[2] + dz)
                cur += 1
                if cur == t:
                    return pos
        return None

    def _position_backward(self, o: int, p: int, t: int) -> tuple[bool, Cell | None]:
        """(handled, cell); not handled when the object misses the later snapshot."""
        st = self.store
        pos = st.snapshots[p + 1].find_object(o)
        if pos is None:
            return False, None
        span, disp = self._span, self._disp
        cur = (p + 1) * self.d
        ci = st.cw_start[o][p + 1]
        for sym in reversed(st.streams[o][p]):
            if sym >= NT_BASE:
                i = sym - NT_BASE
                start = cur - span[i]
                dx, dy, dz = disp[i]
                if start >= t:
                    pos = (pos[0] - dx, pos[1] - dy, pos[2] - dz)
                    cur = start
                    if cur == t:
                        return True, pos
                else:
                    ox, oy, oz = self._prefix_disp(sym, t - start)
                    return True, (pos[0] - dx + ox, pos[1] - dy + oy, pos[2] - dz + oz)
            elif sym == REL_DISAPPEAR:
                ci -= 1
                start = cur - st.D[o][ci]
                if start < t:
                    return True, None
                dx, dy, dz = st.p_rel(o, ci)
                pos = (pos[0] - dx, pos[1] - dy, pos[2] - dz)
                cur = start
                if cur == t:
                    return True, pos
            elif sym == ABS_APPEAR:
                return True, None  # t precedes the appearance
            elif sym == DISAPPEAR:
                raise CorruptStoreError(f"object {o} ends period {p} absent yet sits in the next snapshot")
            else:
                dx, dy, dz = self._delta(sym)
                pos = (pos[0] - dx, pos[1] - dy, pos[2] - dz)
                cur -= 1
                if cur == t:
                    return True, pos
        raise CorruptStoreError(f"log {p} of object {o} is shorter than its period")

    def trajectory(self, o: int, t_s: int, t_e: int) -> list[tuple[int, Cell | None]]:
        if t_s > t_e:
            raise ValueError("trajectory needs t_s <= t_e")
        self._check_t(t_s)
        self._check_t(t_e)
        if not self._check_obj(o):
            return [(t, None) for t in range(t_s, t_e + 1)]
        out: list[tuple[int, Cell | None]] = []
        d = self.d
        for p in range(t_s // d, t_e // d + 1):
            k = p * d
            lo, hi = max(t_s, k), min(t_e, k + d - 1)
            cells = self.store.decode_range(o, p, lo, hi)
            out.extend(zip(range(lo, hi + 1), cells))
        return out

    # -- region queries --------------------------------------------------

    def _inside(self, pos, box) -> bool:
        return (
            box[0] <= pos[0] <= box[3]
            and box[1] <= pos[1] <= box[4]
            and box[2] <= pos[2] <= box[5]
        )

    def _rule_hits(self, sym: int, pos, cur: int, a: int, b: int, box: Box) -> bool:
        """Does ``sym``, applied from ``pos`` at instant ``cur``, visit ``box`` during [a, b]?"""
        if sym < NT_BASE:
            t = cur + 1
            if t < a or t > b:
                return False
            dx, dy, dz = self._delta(sym)
            return (
                box[0] <= pos[0] + dx <= box[3]
                and box[1] <= pos[1] + dy <= box[4]
                and box[2] <= pos[2] + dz <= box[5]
            )
        i = sym - NT_BASE
        if cur + self._span[i] < a or cur >= b:
            return False
        if self.prune:
            m = self._mbb[i]
            px, py, pz = pos
            mx1, my1, mz1 = px + m[0], py + m[1], pz + m[2]
            mx2, my2, mz2 = px + m[3], py + m[4], pz + m[5]
            if (
                mx2 < box[0] or mx1 > box[3]
                or my2 < box[1] or my1 > box[4]
                or mz2 < box[2] or mz1 > box[5]
            ):
                return False
            if (
                box[0] <= mx1 and mx2 <= box[3]
                and box[1] <= my1 and my2 <= box[4]
                and box[2] <= mz1 and mz2 <= box[5]
            ):
                return True
        lsym = self._left[i]
        if self._rule_hits(lsym, pos, cur, a, b, box):
            return True
        dx, dy, dz = self._disp[lsym - NT_BASE] if lsym >= NT_BASE else self._delta(lsym)
        return self._rule_hits(
            self._right[i], (pos[0] + dx, pos[1] + dy, pos[2] + dz), cur + self._sym_span(lsym), a, b, box
        )

    def _track_forward(
        self, o: int, p: int, idx: int, cur: int, pos, ci: int, a: int, b: int, box: Box
    ) -> bool:
        """Follow log p of o from symbol ``idx`` (state: ``pos`` at ``cur``).

        True as soon as the object is inside ``box`` at some instant of [a, b].
        """
        prune = self.prune
        sx, sy, sz = self.speed
        bx1, by1, bz1, bx2, by2, bz2 = box
        if cur >= a and bx1 <= pos[0] <= bx2 and by1 <= pos[1] <= by2 and bz1 <= pos[2] <= bz2:
            return True
        x, y, z = pos
        if prune:
            r = b - cur
            if not (
                bx1 - sx * r <= x <= bx2 + sx * r
                and by1 - sy * r <= y <= by2 + sy * r
                and bz1 - sz * r <= z <= bz2 + sz * r
            ):
                return False
        st = self.store
        span, disp, mbb = self._span, self._disp, self._mbb
        stream = st.streams[o][p]
        for n in range(idx, len(stream)):
            if cur >= b:
                return False
            sym = stream[n]
            if sym >= NT_BASE:
                i = sym - NT_BASE
                end = cur + span[i]
                if end >= a:
                    if prune:
                        m = mbb[i]
                        mx1, my1, mz1 = x + m[0], y + m[1], z + m[2]
                        mx2, my2, mz2 = x + m[3], y + m[4], z + m[5]
                        if (
                            bx1 <= mx1 and mx2 <= bx2
                            and by1 <= my1 and my2 <= by2
                            and bz1 <= mz1 and mz2 <= bz2
                        ):
                            return True
                        disjoint = (
                            mx2 < bx1 or mx1 > bx2
                            or my2 < by1 or my1 > by2
                            or mz2 < bz1 or mz1 > bz2
                        )
                    else:
                        disjoint = False
                    if not disjoint and self._rule_hits(sym, (x, y, z), cur, a, b, box):
                        return True
                    if end >= b:
                        return False
                dx, dy, dz = disp[i]
                x += dx
                y += dy
                z += dz
                cur = end
            elif sym == REL_DISAPPEAR:
                cur += st.D[o][ci]
                if cur > b:
                    return False
                dx, dy, dz = st.p_rel(o, ci)
                ci += 1
                x += dx
                y += dy
                z += dz
                if cur >= a and bx1 <= x <= bx2 and by1 <= y <= by2 and bz1 <= z <= bz2:
                    return True
            elif sym == DISAPPEAR:
                return False
            elif sym == ABS_APPEAR:
                raise CorruptStoreError(f"appearance codeword in the middle of log {p} of object {o}")
            else:
                dx, dy, dz = self._delta(sym)
                x += dx
                y += dy
                z += dz
                cur += 1
                if cur >= a and bx1 <= x <= bx2 and by1 <= y <= by2 and bz1 <= z <= bz2:
                    return True
            if prune:
                r = b - cur
                if not (
                    bx1 - sx * r <= x <= bx2 + sx * r
                    and by1 - sy * r <= y <= by2 + sy * r
                    and bz1 - sz * r <= z <= bz2 + sz * r
                ):
                    return False
        return False

    def _track_backward(self, o: int, p: int, pos, t: int, box: Box) -> bool:
        """Walk log p of o backwards from the later snapshot; is o in box at t?"""
        st = self.store
        prune = self.prune
        sx, sy, sz = self.speed
        bx1, by1, bz1, bx2, by2, bz2 = box
        span, disp = self._span, self._disp
        cur = (p + 1) * self.d
        ci = st.cw_start[o][p + 1]
        x, y, z = pos
        for sym in reversed(st.streams[o][p]):
            if sym >= NT_BASE:
                i = sym - NT_BASE
                start = cur - span[i]
                dx, dy, dz = disp[i]
                if start < t:
                    return self._rule_hits(sym, (x - dx, y - dy, z - dz), start, t, t, box)
                x -= dx
                y -= dy
                z -= dz
                cur = start
            elif sym == REL_DISAPPEAR:
                ci -= 1
                start = cur - st.D[o][ci]
                if start < t:
                    return False
                dx, dy, dz = st.p_rel(o, ci)
                x -= dx
                y -= dy
                z -= dz
                cur = start
            elif sym == ABS_APPEAR:
                return False
            elif sym == DISAPPEAR:
                raise CorruptStoreError(f"object {o} ends period {p} absent yet sits in the next snapshot")
            else:
                dx, dy, dz = self._delta(sym)
                x -= dx
                y -= dy
                z -= dz
                cur -= 1
            if cur == t:
                return bx1 <= x <= bx2 and by1 <= y <= by2 and bz1 <= z <= bz2
            if prune:
                r = cur - t
                if not (
                    bx1 - sx * r <= x <= bx2 + sx * r
                    and by1 - sy * r <= y <= by2 + sy * r
                    and bz1 - sz * r <= z <= bz2 + sz * r
                ):
                    return False
        return False

    def _snapshot_candidates(self, p: int, box: Box, dt: int):
        side = self.side
        region = expanded_region(box, self.speed, dt, side) if self.prune else (
            0, 0, 0, side - 1, side - 1, side - 1
        )
        return self.store.snapshots[p].objects_in_box(region)

    def _forward_portion(self, p: int, box: Box, a: int, b: int, found: set[int]) -> None:
        """Add to ``found`` every object inside box at some instant of [a, b] ⊆ period p."""
        st = self.store
        k = p * self.d
        cw_start = st.cw_start
        for o, cell in self._snapshot_candidates(p, box, b - k):
            if o not in found and self._track_forward(o, p, 0, k, cell, cw_start[o][p], a, b, box):
                found.add(o)
        self._admit_appearances(p, box, a, b, found)

    def _admit_appearances(self, p: int, box: Box, a: int, b: int, found: set[int], only=None) -> None:
        st = self.store
        for ta, o, ci in st.appear[p]:
            if ta > b:
                break
            if o in found or (only is not None and o not in only):
                continue
            pos = st.p_abs(o, ci)
            if self.prune:
                e = expanded_region(box, self.speed, b - ta, self.side)
                if not self._inside(pos, e):
                    continue
            if self._track_forward(o, p, 1, ta, pos, ci + 1, a, b, box):
                found.add(o)

    def time_slice(
        self, box: Box, t: int, direction: Direction = "auto", with_positions: bool = False
    ):
        """Objects inside ``box`` at instant ``t`` (a set of dense ids).

        With ``with_positions`` the result is a set of (object, cell) pairs;
        cells are resolved exactly for the accepted objects only.
        """
        self._check_t(t)
        found: set[int] = set()
        b = clamp_box(box, self.side)
        if b is not None and self.store.n_objects:
            p, backward = self._plan(t, direction)
            k0 = p * self.d
            if t == k0:
                found.update(o for o, _ in self.store.snapshots[p].objects_in_box(b))
            elif not backward:
                self._forward_portion(p, b, t, t, found)
            else:
                self._backward_slice(p, b, t, found)
        if with_positions:
            return {(o, self.position(o, t)) for o in found}
        return found

    def _backward_slice(self, p: int, box: Box, t: int, found: set[int]) -> None:
        st = self.store
        k0, k1 = p * self.d, (p + 1) * self.d
        for o, cell in self._snapshot_candidates(p + 1, box, k1 - t):
            if self._track_backward(o, p, cell, t, box):
                found.add(o)
        # objects that vanish between t and the later snapshot
        leaving = {o for first_absent, o in st.disappear[p] if first_absent > t}
        if not leaving:
            return
        snap = st.snapshots[p]
        for o in sorted(leaving):
            cell = snap.find_object(o)
            if cell is None:
                continue
            if self.prune and not self._inside(cell, expanded_region(box, self.speed, t - k0, self.side)):
                continue
            if self._track_forward(o, p, 0, k0, cell, st.cw_start[o][p], t, t, box):
                found.add(o)
        self._admit_appearances(p, box, t, t, found, only=leaving)

    def time_interval(self, box: Box, t_s: int, t_e: int) -> set[int]:
        """Objects inside ``box`` at any instant of [t_s, t_e], one portion per log."""
        if t_s > t_e:
            raise ValueError("time_interval needs t_s <= t_e")
        self._check_t(t_s)
        self._check_t(t_e)
        found: set[int] = set()
        b = clamp_box(box, self.side)
        if b is None or not self.store.n_objects:
            return found
        d = self.d
        for p in range(t_s // d, t_e // d + 1):
            k = p * d
            lo, hi = max(t_s, k), min(t_e, k + d - 1)
            self._forward_portion(p, b, lo, hi, found)
        return found


def ids_for(store: Store, objects: Iterable[int]) -> list[str]:
    return [store.header.ids[o] for o in sorted(objects)]
