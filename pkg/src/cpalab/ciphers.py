"""Symmetric cipher suite and cascade composition.

The block/stream transforms are backed by pyca/cryptography (OpenSSL); this
module owns key and IV policy, ciphertext framing, and the cascade rules.
Schemes with a fresh-random IV/nonce prepend it to the ciphertext, so the
ciphertext bytes are exactly what an eavesdropper would see on the wire.

Framing per algorithm (prefix counts as ciphertext):

    aes-ecb    no prefix
    aes-cbc    16-byte random IV
    aes-ctr    16-byte random initial counter block
    chacha20   16-byte field: 4-byte zero block counter || 12-byte random nonce
    des-ecb    no prefix

Block modes take unpadded plaintext (a positive multiple of the block size);
stream modes take any positive length.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass

import numpy as np
from cryptography.hazmat.decrepit.ciphers.algorithms import TripleDES
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from ._derive import derive_bytes

ALGORITHMS = ("aes-ecb", "aes-cbc", "aes-ctr", "chacha20", "des-ecb")
DETERMINISTIC_ALGORITHMS = ("aes-ecb", "des-ecb")

KEY_LEN = {"aes-ecb": 16, "aes-cbc": 16, "aes-ctr": 16, "chacha20": 32, "des-ecb": 8}
IV_LEN = {"aes-ecb": 0, "aes-cbc": 16, "aes-ctr": 16, "chacha20": 16, "des-ecb": 0}
# required plaintext alignment; 1 means any positive length
BLOCK_LEN = {"aes-ecb": 16, "aes-cbc": 16, "aes-ctr": 1, "chacha20": 1, "des-ecb": 8}


@dataclass(frozen=True)
class SymmetricScheme:
    """One symmetric cipher with its key; the IV policy follows the algorithm."""

    algorithm: str
    key: bytes

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        want = KEY_LEN[self.algorithm]
        if len(self.key) != want:
            raise ValueError(
                f"{self.algorithm} key must be {want} bytes, got {len(self.key)}"
            )

    @property
    def iv_policy(self) -> str:
        return "none" if IV_LEN[self.algorithm] == 0 else "fresh-random-per-encryption"

    @property
    def iv_len(self) -> int:
        return IV_LEN[self.algorithm]

    @property
    def block_len(self) -> int:
        return BLOCK_LEN[self.algorithm]

    @property
    def is_deterministic(self) -> bool:
        return self.algorithm in DETERMINISTIC_ALGORITHMS

    def ciphertext_len(self, plaintext_len: int) -> int:
        """Ciphertext length is a pure function of the plaintext length."""
        return self.iv_len + plaintext_len

    @classmethod
    def from_seed(cls, algorithm: str, seed: int, role: str = "key") -> "SymmetricScheme":
        """Scheme with a key derived deterministically from ``seed``."""
        key = derive_bytes(seed, f"{role}/{algorithm}", 0, KEY_LEN.get(algorithm, 1))
        if algorithm == "des-ecb":
            key = des_set_odd_parity(key)
        return cls(algorithm, key)


@dataclass(frozen=True)
class CascadeSpec:
    """Two-cipher cascade: the outer cipher encrypts the inner's ciphertext."""

    outer: SymmetricScheme
    inner: SymmetricScheme

    def __post_init__(self) -> None:
        if self.outer.algorithm == self.inner.algorithm:
            raise ValueError("cascade components must use different algorithms")
        pair = {self.outer.algorithm, self.inner.algorithm}
        if pair == {"aes-ecb", "des-ecb"}:
            raise ValueError(
                "aes-ecb/des-ecb cascade rejected: both components are deterministic"
            )

    def ciphertext_len(self, plaintext_len: int) -> int:
        return self.outer.ciphertext_len(self.inner.ciphertext_len(plaintext_len))


def des_set_odd_parity(key: bytes) -> bytes:
    """Force odd parity on every byte (DES convention; parity bit is the LSB)."""
    out = bytearray()
    for b in key:
        high = b & 0xFE
        out.append(high | (1 - bin(high).count("1") % 2))
    return bytes(out)


def _random_bytes(rng: np.random.Generator | None, n: int) -> bytes:
    if rng is None:
        return secrets.token_bytes(n)
    return rng.bytes(n)


# one-shot primitives with explicit IV/nonce (no framing); these are what the
# known-answer vectors pin down


def aes_ecb_encrypt(key: bytes, data: bytes) -> bytes:
    enc = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
    return enc.update(data) + enc.finalize()


def aes_ecb_decrypt(key: bytes, data: bytes) -> bytes:
    dec = Cipher(algorithms.AES(key), modes.ECB()).decryptor()
    return dec.update(data) + dec.finalize()


def aes_cbc_encrypt(key: bytes, iv: bytes, data: bytes) -> bytes:
    enc = Cipher(algorithms.AES(key), modes.CBC(iv)).encryptor()
    return enc.update(data) + enc.finalize()


def aes_cbc_decrypt(key: bytes, iv: bytes, data: bytes) -> bytes:
    dec = Cipher(algorithms.AES(key), modes.CBC(iv)).decryptor()
    return dec.update(data) + dec.finalize()


def aes_ctr_transform(key: bytes, counter_block: bytes, data: bytes) -> bytes:
    """CTR keystream XOR; encryption and decryption are the same map."""
    enc = Cipher(algorithms.AES(key), modes.CTR(counter_block)).encryptor()
    return enc.update(data) + enc.finalize()


def chacha20_transform(key: bytes, nonce: bytes, data: bytes, counter: int = 0) -> bytes:
    """ChaCha20 keystream XOR with a 12-byte nonce and 32-bit block counter."""
    if len(nonce) != 12:
        raise ValueError("chacha20 nonce must be 12 bytes")
    full = counter.to_bytes(4, "little") + nonce
    enc = Cipher(algorithms.ChaCha20(key, full), mode=None).encryptor()
    return enc.update(data) + enc.finalize()


def des_ecb_encrypt(key: bytes, data: bytes) -> bytes:
    # single DES == TripleDES with K1 = K2 = K3
    enc = Cipher(TripleDES(key * 3), modes.ECB()).encryptor()
    return enc.update(data) + enc.finalize()


def des_ecb_decrypt(key: bytes, data: bytes) -> bytes:
    dec = Cipher(TripleDES(key * 3), modes.ECB()).decryptor()
    return dec.update(data) + dec.finalize()


def _check_alignment(scheme: SymmetricScheme, n: int, what: str) -> None:
    if n <= 0:
        raise ValueError(f"{what} must be non-empty")
    if n % scheme.block_len != 0:
        raise ValueError(
            f"{what} length {n} is not a multiple of the {scheme.algorithm} "
            f"block size {scheme.block_len}"
        )


def sym_encrypt(
    scheme: SymmetricScheme, plaintext: bytes, rng: np.random.Generator | None = None
) -> bytes:
    """Encrypt one message; randomized schemes prepend their fresh IV/nonce.

    ``rng`` supplies the IV randomness (fresh system entropy when None); each
    concurrent caller should hold its own generator.
    """
    _check_alignment(scheme, len(plaintext), "plaintext")
    alg = scheme.algorithm
    if alg == "aes-ecb":
        return aes_ecb_encrypt(scheme.key, plaintext)
    if alg == "des-ecb":
        return des_ecb_encrypt(scheme.key, plaintext)
    if alg == "aes-cbc":
        iv = _random_bytes(rng, 16)
        return iv + aes_cbc_encrypt(scheme.key, iv, plaintext)
    if alg == "aes-ctr":
        block = _random_bytes(rng, 16)
        return block + aes_ctr_transform(scheme.key, block, plaintext)
    # chacha20: zero 32-bit counter word, then the random 12-byte nonce
    nonce = _random_bytes(rng, 12)
    prefix = b"\x00\x00\x00\x00" + nonce
    return prefix + chacha20_transform(scheme.key, nonce, plaintext)


def sym_decrypt(scheme: SymmetricScheme, ciphertext: bytes) -> bytes:
    """Invert :func:`sym_encrypt`, consuming any prepended IV/nonce."""
    alg = scheme.algorithm
    if len(ciphertext) <= scheme.iv_len:
        raise ValueError(
            f"ciphertext of {len(ciphertext)} bytes is truncated for {alg} "
            f"(needs a {scheme.iv_len}-byte prefix plus payload)"
        )
    prefix, body = ciphertext[: scheme.iv_len], ciphertext[scheme.iv_len :]
    _check_alignment(scheme, len(body), "ciphertext payload")
    if alg == "aes-ecb":
        return aes_ecb_decrypt(scheme.key, body)
    if alg == "des-ecb":
        return des_ecb_decrypt(scheme.key, body)
    if alg == "aes-cbc":
        return aes_cbc_decrypt(scheme.key, prefix, body)
    if alg == "aes-ctr":
        return aes_ctr_transform(scheme.key, prefix, body)
    counter = int.from_bytes(prefix[:4], "little")
    return chacha20_transform(scheme.key, prefix[4:], body, counter=counter)


def cascade_encrypt(
    spec: CascadeSpec, plaintext: bytes, rng: np.random.Generator | None = None
) -> bytes:
    """outer(inner(plaintext)) with independent keys and fresh IVs per call."""
    mid_len = spec.inner.ciphertext_len(len(plaintext))
    if mid_len % spec.outer.block_len != 0:
        raise ValueError(
            f"inner {spec.inner.algorithm} ciphertext of {mid_len} bytes is not "
            f"compatible with the outer {spec.outer.algorithm} block size "
            f"{spec.outer.block_len}"
        )
    return sym_encrypt(spec.outer, sym_encrypt(spec.inner, plaintext, rng), rng)


def cascade_decrypt(spec: CascadeSpec, ciphertext: bytes) -> bytes:
    return sym_decrypt(spec.inner, sym_decrypt(spec.outer, ciphertext))
