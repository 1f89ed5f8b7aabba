"""Little-endian byte writer/reader used by every serializer in the package."""
from __future__ import annotations

import struct

from .errors import CorruptStoreError


def zigzag(n: int) -> int:
    return (n << 1) if n >= 0 else ((-n << 1) - 1)


def unzigzag(u: int) -> int:
    return (u >> 1) if not u & 1 else -((u + 1) >> 1)


class ByteWriter:
    def __init__(self) -> None:
        self._buf = bytearray()

    def __len__(self) -> int:
        return len(self._buf)

    def getvalue(self) -> bytes:
        return bytes(self._buf)

    def raw(self, data: bytes) -> None:
        self._buf += data

    def pack(self, fmt: str, *values) -> None:
        self._buf += struct.pack("<" + fmt, *values)

    def u8(self, v: int) -> None:
        self.pack("B", v)

    def u16(self, v: int) -> None:
        self.pack("H", v)

    def u32(self, v: int) -> None:
        self.pack("I", v)

    def u64(self, v: int) -> None:
        self.pack("Q", v)

    def f64(self, v: float) -> None:
        self.pack("d", v)

    def varint(self, v: int) -> None:
        if v < 0:
            raise ValueError("varint requires a non-negative value")
        buf = self._buf
        while v >= 0x80:
            buf.append((v & 0x7F) | 0x80)
            v >>= 7
        buf.append(v)

    def svarint(self, v: int) -> None:
        self.varint(zigzag(v))

    def blob(self, data: bytes) -> None:
        self.varint(len(data))
        self._buf += data

    def text(self, s: str) -> None:
        self.blob(s.encode("utf-8"))


class ByteReader:
    def __init__(self, data: bytes, pos: int = 0, end: int | None = None) -> None:
        self._data = memoryview(data)
        self.pos = pos
        self.end = len(data) if end is None else end

    def remaining(self) -> int:
        return self.end - self.pos

    def raw(self, n: int) -> bytes:
        if n < 0 or self.pos + n > self.end:
            raise CorruptStoreError(
                f"truncated data: wanted {n} bytes at offset {self.pos}, "
                f"{self.end - self.pos} left"
            )
        out = bytes(self._data[self.pos:self.pos + n])
        self.pos += n
        return out

    def unpack(self, fmt: str):
        fmt = "<" + fmt
        return struct.unpack(fmt, self.raw(struct.calcsize(fmt)))

    def u8(self) -> int:
        return self.unpack("B")[0]

    def u16(self) -> int:
        return self.unpack("H")[0]

    def u32(self) -> int:
        return self.unpack("I")[0]

    def u64(self) -> int:
        return self.unpack("Q")[0]

    def f64(self) -> float:
        return self.unpack("d")[0]

    def varint(self) -> int:
        data, pos, end = self._data, self.pos, self.end
        result = shift = 0
        while True:
            if pos >= end:
                raise CorruptStoreError("truncated varint")
            b = data[pos]
            pos += 1
            result |= (b & 0x7F) << shift
            if not b & 0x80:
                break
            shift += 7
            if shift > 70:
                raise CorruptStoreError("varint too long")
        self.pos = pos
        return result

    def svarint(self) -> int:
        return unzigzag(self.varint())

    def count(self, min_bits: int = 8) -> int:
        """Read an element count; reject counts the remaining bytes cannot hold.

        ``min_bits`` is the smallest encoded size of one element, so a
        corrupted length field fails here instead of triggering a huge
        allocation further on.
        """
        n = self.varint()
        if n * min_bits > self.remaining() * 8:
            raise CorruptStoreError(f"implausible element count {n}")
        return n

    def blob(self) -> bytes:
        n = self.varint()
        return self.raw(n)

    def text(self) -> str:
        try:
            return self.blob().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptStoreError("invalid utf-8 string") from exc
