"""Stream and little-endian binary helpers for the file formats."""

from __future__ import annotations

import struct

import numpy as np


class TruncatedFileError(ValueError):
    """Binary stream ended before the declared content."""


def as_text(stream) -> str:
    """Bytes, str, or file-like (text or binary) -> decoded UTF-8 text."""
    if isinstance(stream, bytes):
        return stream.decode("utf-8")
    if isinstance(stream, str):
        return stream
    data = stream.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def as_bytes(stream) -> bytes:
    if isinstance(stream, bytes):
        return stream
    data = stream.read()
    if not isinstance(data, bytes):
        raise TypeError("expected a binary stream")
    return data


class ByteReader:
    """Cursor over a bytes buffer; every read raises on truncation."""

    def __init__(self, data: bytes, offset: int = 0):
        self.data = data
        self.offset = offset

    def read(self, n: int) -> bytes:
        end = self.offset + n
        if end > len(self.data):
            raise TruncatedFileError(
                f"need {n} bytes at offset {self.offset}, only {len(self.data) - self.offset} left"
            )
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def u8(self) -> int:
        return self.read(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.read(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.read(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.read(8))[0]

    def i32(self) -> int:
        return struct.unpack("<i", self.read(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.read(8))[0]

    def str16(self) -> str:
        return self.read(self.u16()).decode("utf-8")

    def f32_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.read(4 * count), dtype="<f4").copy()

    def f64_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.read(8 * count), dtype="<f8").copy()

    def i32_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.read(4 * count), dtype="<i4").copy()

    def at_end(self) -> bool:
        return self.offset == len(self.data)


def pack_u16(value: int) -> bytes:
    return struct.pack("<H", value)


def pack_u32(value: int) -> bytes:
    return struct.pack("<I", value)


def pack_u64(value: int) -> bytes:
    return struct.pack("<Q", value)


def pack_i32(value: int) -> bytes:
    return struct.pack("<i", value)


def pack_f64(value: float) -> bytes:
    return struct.pack("<d", value)


def pack_str16(value: str) -> bytes:
    raw = value.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError(f"string too long for u16 length prefix ({len(raw)} bytes)")
    return pack_u16(len(raw)) + raw


def pack_f32_array(values: np.ndarray) -> bytes:
    return np.ascontiguousarray(values, dtype="<f4").tobytes()


def pack_f64_array(values: np.ndarray) -> bytes:
    return np.ascontiguousarray(values, dtype="<f8").tobytes()


def pack_i32_array(values: np.ndarray) -> bytes:
    return np.ascontiguousarray(values, dtype="<i4").tobytes()
