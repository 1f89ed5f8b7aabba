from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tracube._io import ByteReader, ByteWriter
from tracube.errors import CorruptStoreError, NotFoundError
from tracube.succinct import BitVector, DacSequence


def naive_rank1(bits, i):
    return sum(bits[:i])


def naive_select(bits, b, j):
    seen = 0
    for pos, v in enumerate(bits):
        if v == b:
            seen += 1
            if seen == j:
                return pos
    raise ValueError


def test_rank_select_small_example():
    bv = BitVector([1, 0, 1, 1, 0, 0, 1])
    assert [bv.rank1(i) for i in range(8)] == [0, 1, 1, 2, 3, 3, 3, 4]
    assert [bv.select1(j) for j in range(1, 5)] == [0, 2, 3, 6]
    assert [bv.select0(j) for j in range(1, 4)] == [1, 4, 5]
    assert bv.rank0(7) == 3


def test_empty_and_all_ones():
    empty = BitVector([])
    assert len(empty) == 0 and empty.rank1(0) == 0
    with pytest.raises(NotFoundError):
        empty.select1(1)
    ones = BitVector([1] * 1000)
    assert ones.rank1(1000) == 1000
    assert ones.select1(777) == 776
    with pytest.raises(NotFoundError):
        ones.select0(1)


def test_bounds_are_checked():
    bv = BitVector([0, 1])
    with pytest.raises(IndexError):
        bv.rank1(3)
    with pytest.raises(NotFoundError):
        bv.select1(2)
    with pytest.raises(NotFoundError):
        bv.select1(0)


@pytest.mark.parametrize("n", [1, 63, 64, 65, 511, 512, 513, 5000])
@pytest.mark.parametrize("density", [0.0, 0.03, 0.5, 0.97, 1.0])
def test_rank_select_against_numpy(n, density):
    rng = np.random.default_rng(n)
    bits = (rng.random(n) < density).astype(np.uint8)
    bv = BitVector(bits)
    cum = np.concatenate([[0], np.cumsum(bits)])
    assert [bv.rank1(i) for i in range(n + 1)] == cum.tolist()
    ones = np.flatnonzero(bits)
    zeros = np.flatnonzero(bits == 0)
    assert [bv.select1(j + 1) for j in range(len(ones))] == ones.tolist()
    assert [bv.select0(j + 1) for j in range(len(zeros))] == zeros.tolist()


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(0, 1), max_size=1500), st.data())
def test_rank_select_property(bits, data):
    bv = BitVector(bits)
    i = data.draw(st.integers(0, len(bits)))
    assert bv.rank1(i) == naive_rank1(bits, i)
    assert bv.rank1(i) + bv.rank0(i) == i
    if bv.ones:
        j = data.draw(st.integers(1, bv.ones))
        p = bv.select1(j)
        assert p == naive_select(bits, 1, j)
        assert bv.rank1(p + 1) == j and bits[p] == 1


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 1), max_size=3000))
def test_bitvector_serialization_roundtrip(bits):
    bv = BitVector(bits)
    w = ByteWriter()
    bv.write(w)
    back = BitVector.read(ByteReader(w.getvalue()))
    assert back == bv
    assert [back.rank1(i) for i in range(0, len(bits) + 1, 97)] == [bv.rank1(i) for i in range(0, len(bits) + 1, 97)]


def test_dac_examples():
    seq = DacSequence([5, 300, 7])
    assert seq.access(1) == 300
    assert seq.levels == 2
    assert DacSequence([65536]).levels == 3
    assert DacSequence([]).to_list() == []
    assert DacSequence([0, 0, 0]).levels == 1


@pytest.mark.parametrize("width", [1, 3, 8, 13, 32])
def test_dac_widths(width):
    rng = np.random.default_rng(width)
    vals = (rng.pareto(0.8, size=3000) * 10).astype(np.int64).clip(0, 2**40).tolist()
    seq = DacSequence(vals, width)
    assert seq.to_list() == vals
    assert [seq[i] for i in range(0, 3000, 7)] == vals[::7]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 2**48), max_size=300), st.integers(1, 16))
def test_dac_roundtrip_property(vals, width):
    seq = DacSequence(vals, width)
    assert seq.to_list() == vals
    w = ByteWriter()
    seq.write(w)
    back = DacSequence.read(ByteReader(w.getvalue()))
    assert back.to_list() == vals and back.chunk_width == width


def test_dac_rejects_bad_input():
    with pytest.raises(ValueError):
        DacSequence([1], chunk_width=0)
    with pytest.raises(ValueError):
        DacSequence([-1])
    w = ByteWriter()
    DacSequence([1, 2, 3]).write(w)
    data = bytearray(w.getvalue())
    data[0] = 0  # chunk width
    with pytest.raises(CorruptStoreError):
        DacSequence.read(ByteReader(bytes(data)))
    with pytest.raises(CorruptStoreError):
        DacSequence.read(ByteReader(w.getvalue()[:-1] if len(w.getvalue()) > 3 else b""))
