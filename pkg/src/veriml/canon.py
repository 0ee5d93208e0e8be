"""Canonical byte serialization and hashing.

One fixed little-endian layout backs everything that gets hashed, MAC'd, or
compared bit-for-bit: certificates, ledger transactions, model spec digests,
and the exact-equality comparisons of the deterministic benchmark. Floats are
IEEE-754 binary64 little-endian; integers are unsigned little-endian of the
stated width; variable-length fields are u32-length-prefixed.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

ZERO32 = b"\x00" * 32


def f64(x: float) -> bytes:
    return struct.pack("<d", x)


def u64(n: int) -> bytes:
    return struct.pack("<Q", n)


def u32(n: int) -> bytes:
    return struct.pack("<I", n)


def u16(n: int) -> bytes:
    return struct.pack("<H", n)


def u8(n: int) -> bytes:
    return struct.pack("<B", n)


def vec(values) -> bytes:
    """Float components in index order as little-endian binary64."""
    arr = np.ascontiguousarray(values, dtype="<f8")
    return arr.tobytes()


def lp_bytes(b: bytes) -> bytes:
    return u32(len(b)) + b


def lp_str(s: str) -> bytes:
    return lp_bytes(s.encode("utf-8"))


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()
