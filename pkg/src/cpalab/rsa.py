"""RSA primitives: seeded key generation, textbook encryption, and OAEP.

Key generation is deterministic given a seed so corpora can be rebuilt
bit-exactly. OAEP is RSAES-OAEP per RFC 8017 with SHA-256, MGF1-SHA-256 and
an empty label; the padding seed can be pinned for known-answer checks.

Everything here is plain integer arithmetic: no timing hardening, no key
management. It produces ciphertext corpora, nothing more.
"""

from __future__ import annotations

import hashlib
import math
import random
import secrets
from dataclasses import dataclass

import numpy as np

PUBLIC_EXPONENT = 65537
_HASH_LEN = 32  # SHA-256

_SMALL_PRIMES = [3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67,
                 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131, 137, 139,
                 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199]


@dataclass(frozen=True)
class RsaKeyPair:
    """Modulus, exponents, and the prime factors (kept for CRT-based tooling)."""

    n: int
    e: int
    d: int
    p: int
    q: int
    modulus_bits: int

    @property
    def modulus_bytes(self) -> int:
        return self.modulus_bits // 8

    @property
    def oaep_max_message_len(self) -> int:
        return self.modulus_bytes - 2 * _HASH_LEN - 2


def _is_probable_prime(n: int, rng: random.Random, rounds: int = 40) -> bool:
    """Miller-Rabin with witnesses drawn from ``rng``."""
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    r, d = 0, n - 1
    while d % 2 == 0:
        r += 1
        d //= 2
    for _ in range(rounds):
        a = rng.randrange(2, n - 1)
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def _gen_prime(bits: int, rng: random.Random) -> int:
    while True:
        candidate = rng.getrandbits(bits)
        # top two bits set so the product reaches the full modulus width
        candidate |= (1 << (bits - 1)) | (1 << (bits - 2)) | 1
        if candidate % PUBLIC_EXPONENT == 1:
            continue
        if _is_probable_prime(candidate, rng):
            return candidate


def rsa_keygen(modulus_bits: int, seed: int) -> RsaKeyPair:
    """Deterministic key pair with e = 65537; same seed, same key."""
    if modulus_bits not in (1024, 2048):
        raise ValueError("modulus_bits must be 1024 or 2048")
    rng = random.Random(seed)
    half = modulus_bits // 2
    while True:
        p = _gen_prime(half, rng)
        q = _gen_prime(half, rng)
        if p == q:
            continue
        lam = math.lcm(p - 1, q - 1)
        if math.gcd(PUBLIC_EXPONENT, lam) != 1:
            continue
        n = p * q
        if n.bit_length() != modulus_bits:
            continue
        d = pow(PUBLIC_EXPONENT, -1, lam)
        return RsaKeyPair(n=n, e=PUBLIC_EXPONENT, d=d, p=p, q=q, modulus_bits=modulus_bits)


def rsa_textbook_encrypt(key: RsaKeyPair, plaintext: bytes) -> bytes:
    """c = m^e mod n, fixed-width big-endian; deterministic by construction."""
    m = int.from_bytes(plaintext, "big")
    if m >= key.n:
        raise ValueError("plaintext integer must be smaller than the modulus")
    c = pow(m, key.e, key.n)
    return c.to_bytes(key.modulus_bytes, "big")


def rsa_textbook_decrypt(key: RsaKeyPair, ciphertext: bytes, length: int | None = None) -> bytes:
    """m = c^d mod n, big-endian; ``length`` restores leading zero bytes."""
    c = int.from_bytes(ciphertext, "big")
    if c >= key.n:
        raise ValueError("ciphertext integer must be smaller than the modulus")
    m = pow(c, key.d, key.n)
    if length is None:
        length = max(1, (m.bit_length() + 7) // 8)
    return m.to_bytes(length, "big")


def mgf1(seed: bytes, length: int) -> bytes:
    """MGF1 over SHA-256 (RFC 8017 appendix B.2.1)."""
    out = bytearray()
    for counter in range((length + _HASH_LEN - 1) // _HASH_LEN):
        out += hashlib.sha256(seed + counter.to_bytes(4, "big")).digest()
    return bytes(out[:length])


def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


def rsa_oaep_encrypt(
    key: RsaKeyPair,
    plaintext: bytes,
    rng: np.random.Generator | None = None,
    pad_seed: bytes | None = None,
) -> bytes:
    """RSAES-OAEP encryption (SHA-256 / MGF1-SHA-256, empty label).

    A fresh random padding seed is drawn per call; ``pad_seed`` pins it for
    known-answer comparisons.
    """
    k = key.modulus_bytes
    if len(plaintext) > key.oaep_max_message_len:
        raise ValueError(
            f"message of {len(plaintext)} bytes exceeds the OAEP limit "
            f"{key.oaep_max_message_len} for a {key.modulus_bits}-bit modulus"
        )
    l_hash = hashlib.sha256(b"").digest()
    ps = bytes(k - len(plaintext) - 2 * _HASH_LEN - 2)
    db = l_hash + ps + b"\x01" + plaintext
    if pad_seed is None:
        pad_seed = rng.bytes(_HASH_LEN) if rng is not None else secrets.token_bytes(_HASH_LEN)
    elif len(pad_seed) != _HASH_LEN:
        raise ValueError("pad_seed must be 32 bytes")
    masked_db = _xor(db, mgf1(pad_seed, k - _HASH_LEN - 1))
    masked_seed = _xor(pad_seed, mgf1(masked_db, _HASH_LEN))
    em = b"\x00" + masked_seed + masked_db
    return rsa_textbook_encrypt(key, em)


def rsa_oaep_decrypt(key: RsaKeyPair, ciphertext: bytes) -> bytes:
    """RSAES-OAEP decryption; raises ValueError on any consistency failure."""
    k = key.modulus_bytes
    if len(ciphertext) != k:
        raise ValueError("ciphertext length must equal the modulus length")
    em = rsa_textbook_decrypt(key, ciphertext, length=k)
    y, masked_seed, masked_db = em[0], em[1 : 1 + _HASH_LEN], em[1 + _HASH_LEN :]
    pad_seed = _xor(masked_seed, mgf1(masked_db, _HASH_LEN))
    db = _xor(masked_db, mgf1(pad_seed, k - _HASH_LEN - 1))
    l_hash, rest = db[:_HASH_LEN], db[_HASH_LEN:]
    sep = rest.find(b"\x01")
    if y != 0 or l_hash != hashlib.sha256(b"").digest() or sep < 0 or any(rest[:sep]):
        raise ValueError("OAEP decryption error")
    return rest[sep + 1 :]
