"""Bit-level building blocks: a static rank/select bitvector and DAC sequences.

Both structures are immutable once built. Positions are 0-based and
``rank_b(i)`` counts occurrences of ``b`` in ``[0, i)``.
"""
from __future__ import annotations

from bisect import bisect_left
from typing import Iterable, Sequence

import numpy as np

from ._io import ByteReader, ByteWriter
from .errors import CorruptStoreError, NotFoundError

WORD = 64
SUPER = 512  # bits per superblock
WORDS_PER_SUPER = SUPER // WORD


def _select_in_word(word: int, j: int) -> int:
    # position of the j-th (1-based) set bit of word
    for _ in range(j - 1):
        word &= word - 1
    return (word & -word).bit_length() - 1


class BitVector:
    """Plain bitvector with a two-level (512/64 bit) rank directory."""

    __slots__ = ("_n", "_words", "_super", "_block", "_ones")

    def __init__(self, bits: Iterable[int] | np.ndarray = ()) -> None:
        arr = np.asarray(bits if isinstance(bits, np.ndarray) else list(bits), dtype=np.uint8)
        if arr.ndim != 1:
            raise ValueError("bits must be one-dimensional")
        if arr.size and arr.max() > 1:
            raise ValueError("bits must be 0 or 1")
        self._init_words(_pack_words(arr), int(arr.size))

    @classmethod
    def from_words(cls, words: np.ndarray, length: int) -> "BitVector":
        bv = cls.__new__(cls)
        bv._init_words(np.asarray(words, dtype=np.uint64), length)
        return bv

    def _init_words(self, words: np.ndarray, n: int) -> None:
        nwords = n // WORD + 1  # always one spare word so rank(n) needs no branch
        if words.size < nwords:
            words = np.concatenate([words, np.zeros(nwords - words.size, dtype=np.uint64)])
        words = words[:nwords].copy()
        if n % WORD:
            words[-1] &= np.uint64((1 << (n % WORD)) - 1)
        elif nwords:
            words[-1] = 0
        counts = np.bitwise_count(words).astype(np.int64)
        cum = np.concatenate([[0], np.cumsum(counts)])
        starts = np.arange(0, nwords, WORDS_PER_SUPER)
        self._n = n
        self._words = words.tolist()
        self._super = cum[starts].tolist()
        self._block = (cum[:nwords] - np.repeat(cum[starts], WORDS_PER_SUPER)[:nwords]).tolist()
        self._ones = int(cum[-1])

    def __len__(self) -> int:
        return self._n

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self._n:
            raise IndexError(f"bit index {i} out of range [0, {self._n})")
        return (self._words[i >> 6] >> (i & 63)) & 1

    def __iter__(self):
        return iter(self.to_numpy().tolist())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitVector):
            return NotImplemented
        return self._n == other._n and self._words == other._words

    def __repr__(self) -> str:
        if self._n <= 64:
            return f"BitVector('{''.join(map(str, self))}')"
        return f"BitVector(<{self._n} bits, {self._ones} ones>)"

    @property
    def ones(self) -> int:
        return self._ones

    def count(self, b: int) -> int:
        return self._ones if b else self._n - self._ones

    def to_numpy(self) -> np.ndarray:
        raw = np.asarray(self._words, dtype=np.uint64).view(np.uint8)
        return np.unpackbits(raw, bitorder="little")[: self._n]

    def rank1(self, i: int) -> int:
        if not 0 <= i <= self._n:
            raise IndexError(f"rank position {i} out of range [0, {self._n}]")
        w = i >> 6
        return (
            self._super[w >> 3]
            + self._block[w]
            + (self._words[w] & ((1 << (i & 63)) - 1)).bit_count()
        )

    def rank0(self, i: int) -> int:
        return i - self.rank1(i)

    def rank(self, b: int, i: int) -> int:
        return self.rank1(i) if b else self.rank0(i)

    def select1(self, j: int) -> int:
        """Position of the j-th 1 (j is 1-based)."""
        if not 1 <= j <= self._ones:
            raise NotFoundError(f"select1({j}) with only {self._ones} ones")
        s = bisect_left(self._super, j) - 1
        w = s * WORDS_PER_SUPER
        base = self._super[s]
        block, words = self._block, self._words
        last = min(w + WORDS_PER_SUPER, len(words)) - 1
        while w < last and base + block[w + 1] < j:
            w += 1
        return w * WORD + _select_in_word(words[w], j - base - block[w])

    def select0(self, j: int) -> int:
        """Position of the j-th 0 (j is 1-based)."""
        zeros = self._n - self._ones
        if not 1 <= j <= zeros:
            raise NotFoundError(f"select0({j}) with only {zeros} zeros")
        sup = self._super
        lo, hi = 0, len(sup) - 1
        while lo < hi:  # last superblock whose preceding zero count is < j
            mid = (lo + hi + 1) >> 1
            if mid * SUPER - sup[mid] < j:
                lo = mid
            else:
                hi = mid - 1
        w = lo * WORDS_PER_SUPER
        base = lo * SUPER - sup[lo]
        block, words = self._block, self._words
        last = min(w + WORDS_PER_SUPER, len(words)) - 1
        while w < last and base + ((w + 1 - lo * WORDS_PER_SUPER) * WORD - block[w + 1]) < j:
            w += 1
        local = j - base - ((w - lo * WORDS_PER_SUPER) * WORD - block[w])
        return w * WORD + _select_in_word(~words[w] & 0xFFFFFFFFFFFFFFFF, local)

    def select(self, b: int, j: int) -> int:
        return self.select1(j) if b else self.select0(j)

    def nbytes(self) -> int:
        return (self._n + 7) // 8

    def write(self, w: ByteWriter) -> None:
        w.varint(self._n)
        nbytes = (self._n + 7) // 8
        w.raw(np.asarray(self._words, dtype="<u8").tobytes()[:nbytes])

    @classmethod
    def read(cls, r: ByteReader) -> "BitVector":
        n = r.count(min_bits=1)
        raw = r.raw((n + 7) // 8)
        padded = raw + bytes(-len(raw) % 8)
        words = np.frombuffer(padded, dtype="<u8").astype(np.uint64) if padded else np.zeros(0, np.uint64)
        return cls.from_words(words, n)


def _pack_words(arr: np.ndarray) -> np.ndarray:
    packed = np.packbits(arr, bitorder="little")
    packed = np.concatenate([packed, np.zeros(-packed.size % 8, dtype=np.uint8)])
    return packed.view("<u8").astype(np.uint64)


def _pack_fixed(values: np.ndarray, width: int) -> bytes:
    if values.size == 0:
        return b""
    bits = ((values[:, None] >> np.arange(width, dtype=np.uint64)) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits.ravel(), bitorder="little").tobytes()


def _unpack_fixed(data: bytes, count: int, width: int) -> np.ndarray:
    if count == 0:
        return np.zeros(0, dtype=np.uint64)
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
    bits = bits[: count * width].reshape(count, width).astype(np.uint64)
    return (bits << np.arange(width, dtype=np.uint64)).sum(axis=1, dtype=np.uint64)


class DacSequence:
    """Direct-access codes: each value is split into ``chunk_width``-bit chunks.

    Level ``l`` stores the l-th chunk of every value that needs more than
    ``l`` chunks; a bitvector per level marks which entries continue, and
    rank on it gives the entry's index on the next level.
    """

    __slots__ = ("chunk_width", "_n", "_chunks", "_cont")

    def __init__(self, values: Sequence[int] | np.ndarray = (), chunk_width: int = 8) -> None:
        if not 1 <= chunk_width <= 32:
            raise ValueError("chunk_width must be within [1, 32]")
        arr = np.asarray(values, dtype=object if _needs_object(values) else np.int64)
        if arr.size and (arr < 0).any():
            raise ValueError("DAC values must be non-negative")
        if arr.dtype == object and arr.size and max(arr) >= 1 << 64:
            raise ValueError("DAC values must fit in 64 bits")
        arr = arr.astype(np.uint64)
        self.chunk_width = chunk_width
        self._n = int(arr.size)
        mask = np.uint64((1 << chunk_width) - 1)
        top = int(arr.max()).bit_length() if arr.size else 0
        levels = max(1, -(-top // chunk_width))
        chunks, cont = [], []
        cur = arr
        for lvl in range(levels):
            chunks.append((cur & mask).tolist())
            if lvl == levels - 1:
                break
            rest = cur >> np.uint64(chunk_width)
            more = rest > 0
            cont.append(BitVector(more.astype(np.uint8)))
            cur = rest[more]
        self._chunks = chunks
        self._cont = cont

    @property
    def levels(self) -> int:
        return len(self._chunks)

    def __len__(self) -> int:
        return self._n

    def __getitem__(self, i: int) -> int:
        return self.access(i)

    def __iter__(self):
        return iter(self.to_list())

    def access(self, i: int) -> int:
        if not 0 <= i < self._n:
            raise IndexError(f"DAC index {i} out of range [0, {self._n})")
        chunks, cont, w = self._chunks, self._cont, self.chunk_width
        value = chunks[0][i]
        shift = w
        for lvl, bv in enumerate(cont):
            if not (bv._words[i >> 6] >> (i & 63)) & 1:
                break
            i = bv.rank1(i)
            value |= chunks[lvl + 1][i] << shift
            shift += w
        return value

    def to_list(self) -> list[int]:
        if not self._n:
            return []
        out = np.asarray(self._chunks[0], dtype=np.uint64)
        idx = np.arange(self._n)
        for lvl, bv in enumerate(self._cont):
            more = bv.to_numpy().astype(bool)
            idx = idx[more]
            out[idx] |= np.asarray(self._chunks[lvl + 1], dtype=np.uint64) << np.uint64(
                self.chunk_width * (lvl + 1)
            )
        return out.tolist()

    def nbytes(self) -> int:
        chunk_bits = sum(len(c) for c in self._chunks) * self.chunk_width
        return (chunk_bits + 7) // 8 + sum(bv.nbytes() for bv in self._cont)

    def write(self, w: ByteWriter) -> None:
        w.u8(self.chunk_width)
        w.varint(self._n)
        w.u8(len(self._chunks))
        for lvl, chunk in enumerate(self._chunks):
            w.varint(len(chunk))
            w.raw(_pack_fixed(np.asarray(chunk, dtype=np.uint64), self.chunk_width))
            if lvl < len(self._cont):
                self._cont[lvl].write(w)

    @classmethod
    def read(cls, r: ByteReader) -> "DacSequence":
        width = r.u8()
        if not 1 <= width <= 32:
            raise CorruptStoreError(f"bad DAC chunk width {width}")
        seq = cls.__new__(cls)
        seq.chunk_width = width
        seq._n = r.count(min_bits=width)
        levels = r.u8()
        if levels < 1 or levels * width > 64:
            raise CorruptStoreError(f"bad DAC level count {levels}")
        chunks, cont = [], []
        for lvl in range(levels):
            count = r.count(min_bits=width)
            data = r.raw((count * width + 7) // 8)
            chunks.append(_unpack_fixed(data, count, width).tolist())
            if lvl < levels - 1:
                bv = BitVector.read(r)
                if len(bv) != count:
                    raise CorruptStoreError("DAC continuation bitmap length mismatch")
                cont.append(bv)
        if len(chunks[0]) != seq._n:
            raise CorruptStoreError("DAC first level length mismatch")
        for lvl, bv in enumerate(cont):
            if bv.ones != len(chunks[lvl + 1]):
                raise CorruptStoreError("DAC level size does not match continuation bits")
        seq._chunks = chunks
        seq._cont = cont
        return seq


def _needs_object(values) -> bool:
    if isinstance(values, np.ndarray):
        return values.dtype == object
    return any(v >= 1 << 63 for v in values) if len(values) else False
