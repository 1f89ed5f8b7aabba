"""Binary container for :class:`~tracube.store.Store`.

Layout (all integers little-endian)::

    "3DGR"  u16 version
    header | snapshots | alphabet | rules | logs | D/P blocks
    u32 CRC32 of everything before it

Symbols are written through a compact code: terminals (codewords included)
are numbered by their rank in the sorted alphabet, non-terminal ``i`` gets
``len(alphabet) + i``. Log symbols are varints; rule fields are stored column-wise as DAC sequences.
"""
from __future__ import annotations

import os
import struct
import zlib
from pathlib import Path

from ._io import ByteReader, ByteWriter
from .errors import CorruptStoreError, TracubeError
from .grammar import NT_BASE, RuleTable
from .snapshot import Snapshot
from .store import Store, StoreHeader
from .succinct import DacSequence

MAGIC = b"3DGR"
VERSION = 1
SECTIONS = ("header", "snapshots", "alphabet", "rules", "logs", "dp")


def _alphabet(store: Store) -> list[int]:
    terms = set()
    for periods in store.streams:
        for stream in periods:
            terms.update(s for s in stream if s < NT_BASE)
    for side in (store.rules.left, store.rules.right):
        terms.update(s for s in side if s < NT_BASE)
    return sorted(terms)


def _write_header(w: ByteWriter, h: StoreHeader) -> None:
    w.varint(h.side)
    w.u8(h.k)
    w.varint(h.period)
    w.varint(h.n_instants)
    w.varint(h.n_records)
    w.f64(h.step_seconds)
    for v in h.cell_size:
        w.f64(v)
    for v in h.origin:
        w.f64(v)
    for v in h.max_speed:
        w.varint(v)
    w.varint(h.shortcut_step)
    w.u8(h.chunk_width)
    w.varint(len(h.ids))
    for ext in h.ids:
        w.text(ext)


def _read_header(r: ByteReader) -> StoreHeader:
    side = r.varint()
    k = r.u8()
    period = r.varint()
    n_instants = r.varint()
    n_records = r.varint()
    step = r.f64()
    cell = (r.f64(), r.f64(), r.f64())
    origin = (r.f64(), r.f64(), r.f64())
    speed = (r.varint(), r.varint(), r.varint())
    shortcut = r.varint()
    chunk = r.u8()
    n_ids = r.count(min_bits=8)
    ids = [r.text() for _ in range(n_ids)]
    if period < 2 or k < 2 or side < k:
        raise CorruptStoreError("header carries impossible grid parameters")
    return StoreHeader(
        side=side,
        k=k,
        period=period,
        n_instants=n_instants,
        ids=ids,
        max_speed=speed,
        n_records=n_records,
        step_seconds=step,
        cell_size=cell,
        origin=origin,
        shortcut_step=shortcut,
        chunk_width=chunk,
    )


def dump_sections(store: Store) -> dict[str, bytes]:
    """Serialize each container section separately (used for size accounting)."""
    out: dict[str, bytes] = {}

    w = ByteWriter()
    _write_header(w, store.header)
    out["header"] = w.getvalue()

    w = ByteWriter()
    w.varint(len(store.snapshots))
    for snap in store.snapshots:
        snap.write(w)
    out["snapshots"] = w.getvalue()

    alphabet = _alphabet(store)
    code = {s: i for i, s in enumerate(alphabet)}
    base = len(alphabet)

    def encode(sym: int) -> int:
        return base + sym - NT_BASE if sym >= NT_BASE else code[sym]

    w = ByteWriter()
    w.varint(len(alphabet))
    for s in alphabet:
        w.u32(s)
    out["alphabet"] = w.getvalue()

    w = ByteWriter()
    store.rules.write(w, encode)
    out["rules"] = w.getvalue()

    w = ByteWriter()
    for periods in store.streams:
        for stream in periods:
            w.varint(len(stream))
            for s in stream:
                w.varint(encode(s))
    out["logs"] = w.getvalue()

    w = ByteWriter()
    for dseq, pseq in zip(store.D, store.P):
        dseq.write(w)
        pseq.write(w)
    out["dp"] = w.getvalue()
    return out


def dumps(store: Store) -> bytes:
    w = ByteWriter()
    w.raw(MAGIC)
    w.u16(VERSION)
    for data in dump_sections(store).values():
        w.raw(data)
    body = w.getvalue()
    return body + struct.pack("<I", zlib.crc32(body))


def loads(data: bytes) -> Store:
    if len(data) < len(MAGIC) + 2 + 4:
        raise CorruptStoreError("file too short to be a store")
    if data[:4] != MAGIC:
        raise CorruptStoreError("bad magic: not a store file")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != VERSION:
        raise CorruptStoreError(f"unsupported store format version {version}")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise CorruptStoreError("checksum mismatch: store file is corrupted")
    try:
        return _parse(body)
    except TracubeError:
        raise
    except (ValueError, IndexError, KeyError, TypeError, OverflowError, struct.error, MemoryError) as exc:
        raise CorruptStoreError(f"malformed store: {exc}") from exc


def _parse(body: bytes) -> Store:
    r = ByteReader(body, pos=6)
    header = _read_header(r)
    n_snap = r.count(min_bits=8)
    snapshots = [Snapshot.read(r) for _ in range(n_snap)]
    n_alpha = r.count(min_bits=32)
    alphabet = [r.u32() for _ in range(n_alpha)]
    base = len(alphabet)

    def decode(c: int) -> int:
        if c < base:
            return alphabet[c]
        return NT_BASE + c - base

    rules = RuleTable.read(r, decode)
    n_rules = len(rules)
    streams = []
    for _ in range(header.n_objects):
        periods = []
        for _ in range(header.n_snapshots):
            n = r.count(min_bits=8)
            stream = []
            for _ in range(n):
                c = r.varint()
                if c >= base + n_rules:
                    raise CorruptStoreError(f"log symbol {c} outside the grammar")
                stream.append(decode(c))
            periods.append(stream)
        streams.append(periods)
    D, P = [], []
    for _ in range(header.n_objects):
        D.append(DacSequence.read(r))
        P.append(DacSequence.read(r))
    if r.remaining():
        raise CorruptStoreError(f"{r.remaining()} trailing bytes after the last section")
    return Store(header, snapshots, streams, D, P, rules)


def save(store: Store, path: str | os.PathLike) -> int:
    data = dumps(store)
    Path(path).write_bytes(data)
    return len(data)


def load(path: str | os.PathLike) -> Store:
    return loads(Path(path).read_bytes())


def stats(store: Store) -> dict:
    """Component sizes in bytes and the ratio against the 4-byte-per-record baseline."""
    sections = {name: len(data) for name, data in dump_sections(store).items()}
    total = len(MAGIC) + 2 + sum(sections.values()) + 4
    baseline = 4 * store.header.n_records
    return {
        "sections": sections,
        "total_bytes": total,
        "baseline_bytes": baseline,
        "ratio": total / baseline if baseline else float("nan"),
        "objects": store.n_objects,
        "instants": store.n_instants,
        "records": store.header.n_records,
        "period": store.period,
        "side": store.side,
        "snapshots": len(store.snapshots),
        "rules": len(store.rules),
        "log_symbols": store.symbol_count(),
        "codewords": store.codeword_count(),
        "max_speed": list(store.header.max_speed),
    }
