"""Relative movements packed into 32-bit terminals, plus the reserved codewords.

Layout of a movement code: bits 31..20 hold zigzag(dx), 19..8 zigzag(dy)
and 7..0 zigzag(dz). The three largest 32-bit values are reserved for the
disappearance / appearance codewords, which removes the three movements
with every component at its most negative value from the legal domain.
"""
from __future__ import annotations

import numpy as np

from ._io import unzigzag, zigzag

__all__ = [
    "ABS_APPEAR",
    "CODEWORDS",
    "DISAPPEAR",
    "MAX_XY",
    "MAX_Z",
    "MIN_XY",
    "MIN_Z",
    "REL_DISAPPEAR",
    "is_codeword",
    "is_packable",
    "pack_movement",
    "pack_movements",
    "unpack_movement",
    "unpack_movements",
    "zigzag_decode",
    "zigzag_encode",
]

DISAPPEAR = 0xFFFFFFFF
ABS_APPEAR = 0xFFFFFFFE
REL_DISAPPEAR = 0xFFFFFFFD
CODEWORDS = frozenset((DISAPPEAR, ABS_APPEAR, REL_DISAPPEAR))
CODEWORD_NAMES = {DISAPPEAR: "D", ABS_APPEAR: "AA", REL_DISAPPEAR: "RD"}

MIN_XY, MAX_XY = -2048, 2047
MIN_Z, MAX_Z = -128, 127

zigzag_encode = zigzag
zigzag_decode = unzigzag


def is_codeword(sym: int) -> bool:
    return sym in CODEWORDS


def is_packable(dx: int, dy: int, dz: int) -> bool:
    """True when the movement fits the 12/12/8 layout and is not a reserved value."""
    if not (MIN_XY <= dx <= MAX_XY and MIN_XY <= dy <= MAX_XY and MIN_Z <= dz <= MAX_Z):
        return False
    return (zigzag(dx) << 20 | zigzag(dy) << 8 | zigzag(dz)) < REL_DISAPPEAR


def pack_movement(dx: int, dy: int, dz: int) -> int:
    if not is_packable(dx, dy, dz):
        raise ValueError(f"movement ({dx}, {dy}, {dz}) does not fit a 32-bit code")
    return zigzag(dx) << 20 | zigzag(dy) << 8 | zigzag(dz)


def unpack_movement(code: int) -> tuple[int, int, int]:
    if not 0 <= code < REL_DISAPPEAR:
        raise ValueError(f"{code:#x} is not a movement code")
    return unzigzag(code >> 20), unzigzag((code >> 8) & 0xFFF), unzigzag(code & 0xFF)


def pack_movements(dx, dy, dz) -> np.ndarray:
    """Vectorized :func:`pack_movement`; -1 marks movements that do not fit."""
    dx, dy, dz = (np.asarray(v, dtype=np.int64) for v in (dx, dy, dz))
    bad = ((dx - MIN_XY) | (dy - MIN_XY)) >> 12
    bad |= (dz - MIN_Z) >> 8
    code = ((dx << 1) ^ (dx >> 63)) << 20
    code |= ((dy << 1) ^ (dy >> 63)) << 8
    code |= (dz << 1) ^ (dz >> 63)
    code[(bad != 0) | (code >= REL_DISAPPEAR)] = -1
    return code


def unpack_movements(codes) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`unpack_movement`; raises on codewords or out-of-range codes."""
    c = np.asarray(codes, dtype=np.int64)
    if c.size and (c.min() < 0 or c.max() >= REL_DISAPPEAR):
        raise ValueError("array holds values that are not movement codes")
    ux, uy, uz = c >> 20, (c >> 8) & 0xFFF, c & 0xFF
    return (ux >> 1) ^ -(ux & 1), (uy >> 1) ^ -(uy & 1), (uz >> 1) ^ -(uz & 1)
