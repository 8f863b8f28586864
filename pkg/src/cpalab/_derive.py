"""Deterministic randomness derivation for reproducible experiments.

Every randomized step of corpus generation pulls its randomness from an
independent stream keyed by (master seed, role label, record index) through
SHA-256, so records can be produced in any order, or in parallel, without
changing a single output byte.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def derive_bytes(seed: int, role: str, index: int = 0, n: int = 32) -> bytes:
    """Return ``n`` bytes from the (seed, role, index) stream.

    SHA-256 in counter mode over the encoded stream identity.
    """
    prefix = (
        struct.pack("<Q", seed & _MASK64)
        + role.encode("utf-8")
        + struct.pack("<Q", index & _MASK64)
    )
    out = bytearray()
    counter = 0
    while len(out) < n:
        out += hashlib.sha256(prefix + struct.pack("<I", counter)).digest()
        counter += 1
    return bytes(out[:n])


def derive_int(seed: int, role: str, index: int = 0) -> int:
    """64-bit subseed for the (seed, role, index) stream."""
    return struct.unpack("<Q", derive_bytes(seed, role, index, 8))[0]


def derive_rng(seed: int, role: str, index: int = 0) -> np.random.Generator:
    """Independent numpy generator for the (seed, role, index) stream."""
    return np.random.Generator(np.random.PCG64(derive_int(seed, role, index)))
