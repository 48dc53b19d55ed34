import struct

import numpy as np

from app.utils import DataFormatError


__all__ = ["ByteReader"]


class ByteReader:
    """Cursor over a byte buffer that reports truncation with the failing offset."""

    def __init__(self, data: bytes, label: str):
        self.data = data
        self.offset = 0
        self.label = label

    def take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise DataFormatError(f"{self.label}: truncated while reading {what}", self.offset)
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str, what: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def array(self, dtype: str, count: int, what: str) -> np.ndarray:
        itemsize = np.dtype(dtype).itemsize
        return np.frombuffer(self.take(itemsize * count, what), dtype=dtype, count=count)

    def expect_magic(self, magic: bytes) -> None:
        found = self.take(len(magic), "magic")
        if found != magic:
            raise DataFormatError(f"{self.label}: bad magic {found!r}, expected {magic!r}", 0)

    def expect_version(self, version: int) -> None:
        offset = self.offset
        (found,) = self.unpack("<I", "version")
        if found != version:
            raise DataFormatError(f"{self.label}: unsupported version {found}, expected {version}", offset)

    def expect_end(self) -> None:
        if self.offset != len(self.data):
            raise DataFormatError(f"{self.label}: {len(self.data) - self.offset} trailing bytes", self.offset)
