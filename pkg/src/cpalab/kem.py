"""Key-encapsulation providers, the two-KEM combiner, and corpus ingestion.

Providers produce (shared_secret, ciphertext) pairs. Besides the RSA-based
wrapper there are three mock providers used as pipeline controls (a perfect
KEM, a broken all-zero-secret KEM, and a secret-leaking KEM), plus a reader
for externally generated corpora so real post-quantum schemes can be tested
without reimplementing them.

KEM-corpus binary format, little-endian:

    magic "ICKS" | version u16 | ss_len u32 | ct_len u32 | count u64
    then count records of shared_secret || ciphertext

A companion text format (hex secret, space, hex ciphertext, one per line,
'#' comments allowed) is accepted for hand-made fixtures.
"""

from __future__ import annotations

import hmac
import secrets
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rsa import RsaKeyPair, rsa_textbook_encrypt

KEM_CORPUS_MAGIC = b"ICKS"
KEM_CORPUS_VERSION = 1

KEM_KINDS = ("rsa-kem", "ideal-mock", "degenerate-mock", "leaky-mock", "external-corpus")
COMBINER_PRFS = ("identity", "hmac-sha256")


@dataclass(frozen=True)
class KemSample:
    """One encapsulation: the shared secret and the ciphertext that carries it."""

    shared_secret: bytes
    ciphertext: bytes


def _rand(rng: np.random.Generator | None, n: int) -> bytes:
    return secrets.token_bytes(n) if rng is None else rng.bytes(n)


class KemProvider:
    """Base provider; subclasses fill in :meth:`encapsulate`."""

    kind = "abstract"

    def __init__(self, name: str, ss_len: int, ct_len: int):
        if ss_len < 1 or ct_len < 1:
            raise ValueError("ss_len and ct_len must be positive")
        self.name = name
        self.ss_len = ss_len
        self.ct_len = ct_len

    def encapsulate(self, rng: np.random.Generator | None = None) -> KemSample:
        raise NotImplementedError


class RsaKem(KemProvider):
    """Uniform shared secret, transported as its textbook-RSA encryption."""

    kind = "rsa-kem"

    def __init__(self, key: RsaKeyPair, ss_len: int = 32, name: str = "rsa-kem"):
        super().__init__(name, ss_len, key.modulus_bytes)
        self.key = key

    def encapsulate(self, rng: np.random.Generator | None = None) -> KemSample:
        ss = _rand(rng, self.ss_len)
        return KemSample(ss, rsa_textbook_encrypt(self.key, ss))


class IdealMockKem(KemProvider):
    """Control: ciphertext carries no information about the secret."""

    kind = "ideal-mock"

    def __init__(self, ss_len: int = 32, ct_len: int = 32, name: str = "ideal-mock"):
        super().__init__(name, ss_len, ct_len)

    def encapsulate(self, rng: np.random.Generator | None = None) -> KemSample:
        return KemSample(_rand(rng, self.ss_len), _rand(rng, self.ct_len))


class DegenerateMockKem(KemProvider):
    """Control: the shared secret is always the all-zero string."""

    kind = "degenerate-mock"

    def __init__(self, ss_len: int = 32, ct_len: int = 32, name: str = "degenerate-mock"):
        super().__init__(name, ss_len, ct_len)

    def encapsulate(self, rng: np.random.Generator | None = None) -> KemSample:
        return KemSample(bytes(self.ss_len), _rand(rng, self.ct_len))


class LeakyMockKem(KemProvider):
    """Control: the ciphertext starts with the shared secret in the clear."""

    kind = "leaky-mock"

    def __init__(self, ss_len: int = 32, ct_len: int = 32, name: str = "leaky-mock"):
        if ct_len < ss_len:
            raise ValueError("leaky-mock needs ct_len >= ss_len")
        super().__init__(name, ss_len, ct_len)

    def encapsulate(self, rng: np.random.Generator | None = None) -> KemSample:
        ct = _rand(rng, self.ct_len)
        return KemSample(ct[: self.ss_len], ct)


class ExternalCorpusKem(KemProvider):
    """Replays encapsulations recorded by an outside tool, in file order."""

    kind = "external-corpus"

    def __init__(self, samples: list[KemSample], name: str = "external-corpus"):
        if not samples:
            raise ValueError("external corpus is empty")
        super().__init__(name, len(samples[0].shared_secret), len(samples[0].ciphertext))
        self._samples = samples
        self._cursor = 0

    @classmethod
    def from_file(cls, path: str | Path, name: str | None = None) -> "ExternalCorpusKem":
        return cls(load_kem_corpus(path), name=name or str(path))

    @property
    def remaining(self) -> int:
        return len(self._samples) - self._cursor

    def encapsulate(self, rng: np.random.Generator | None = None) -> KemSample:
        if self._cursor >= len(self._samples):
            raise RuntimeError(f"external KEM corpus {self.name!r} exhausted")
        sample = self._samples[self._cursor]
        self._cursor += 1
        return sample


@dataclass(frozen=True)
class CombinerSpec:
    """How two shared secrets are merged: PRF(k1,c) XOR PRF(k2,c).

    ``prf="identity"`` ignores the ciphertext and reduces to plain XOR of the
    two secrets; ``prf="hmac-sha256"`` keys HMAC-SHA-256 with the secret over
    the concatenated ciphertext, truncated or counter-expanded to output_len.
    """

    prf: str = "hmac-sha256"
    output_len: int = 32

    def __post_init__(self) -> None:
        if self.prf not in COMBINER_PRFS:
            raise ValueError(f"unknown combiner prf {self.prf!r}")
        if self.output_len < 1:
            raise ValueError("output_len must be positive")


def _prf(spec: CombinerSpec, k: bytes, c: bytes) -> bytes:
    if spec.prf == "identity":
        if spec.output_len != len(k):
            raise ValueError("identity combiner requires output_len == secret length")
        return k
    if spec.output_len <= 32:
        return hmac.new(k, c, "sha256").digest()[: spec.output_len]
    blocks = []
    for i in range((spec.output_len + 31) // 32):
        blocks.append(hmac.new(k, c + i.to_bytes(4, "big"), "sha256").digest())
    return b"".join(blocks)[: spec.output_len]


def combine(spec: CombinerSpec, k1: bytes, k2: bytes, c: bytes) -> bytes:
    """Combined shared secret; equal inputs cancel to the all-zero string."""
    if len(k1) != len(k2):
        raise ValueError("component secrets must have equal length")
    a, b = _prf(spec, k1, c), _prf(spec, k2, c)
    return bytes(x ^ y for x, y in zip(a, b))


def save_kem_corpus(
    samples: list[KemSample],
    path: str | Path,
    ss_len: int | None = None,
    ct_len: int | None = None,
) -> None:
    """Write the binary corpus; lengths are inferred unless the corpus is empty."""
    if samples:
        ss_len = len(samples[0].shared_secret) if ss_len is None else ss_len
        ct_len = len(samples[0].ciphertext) if ct_len is None else ct_len
    elif ss_len is None or ct_len is None:
        raise ValueError("an empty corpus needs explicit ss_len and ct_len")
    with open(path, "wb") as fh:
        fh.write(KEM_CORPUS_MAGIC)
        fh.write(struct.pack("<HIIQ", KEM_CORPUS_VERSION, ss_len, ct_len, len(samples)))
        for s in samples:
            if len(s.shared_secret) != ss_len or len(s.ciphertext) != ct_len:
                raise ValueError("sample lengths differ from the corpus header")
            fh.write(s.shared_secret)
            fh.write(s.ciphertext)


def load_kem_corpus(path: str | Path) -> list[KemSample]:
    """Read a corpus; binary when the magic matches, text-fixture otherwise."""
    raw = Path(path).read_bytes()
    if not raw.startswith(KEM_CORPUS_MAGIC):
        return _parse_text_corpus(raw, path)
    header = raw[len(KEM_CORPUS_MAGIC) : len(KEM_CORPUS_MAGIC) + 18]
    if len(header) < 18:
        raise ValueError(f"{path}: truncated corpus header")
    version, ss_len, ct_len, count = struct.unpack("<HIIQ", header)
    if version != KEM_CORPUS_VERSION:
        raise ValueError(f"{path}: unsupported corpus version {version}")
    if ss_len < 1 or ct_len < 1:
        raise ValueError(f"{path}: corpus header declares empty record fields")
    body = raw[len(KEM_CORPUS_MAGIC) + 18 :]
    record = ss_len + ct_len
    if len(body) != count * record:
        raise ValueError(
            f"{path}: expected {count} records of {record} bytes, found {len(body)} bytes"
        )
    samples = []
    for i in range(count):
        at = i * record
        samples.append(KemSample(body[at : at + ss_len], body[at + ss_len : at + record]))
    return samples


def load_labeled_ciphertext_corpus(path: str | Path):
    """Load an externally produced labeled ciphertext corpus.

    Same binary format as internally generated datasets, so corpora built by
    outside tooling (e.g. real post-quantum PKE ciphertexts) plug straight
    into training.
    """
    from .datasets import load_dataset

    return load_dataset(path)


def _parse_text_corpus(raw: bytes, path: str | Path) -> list[KemSample]:
    samples = []
    for lineno, line in enumerate(raw.decode("ascii").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'hex_secret hex_ciphertext'")
        try:
            sample = KemSample(bytes.fromhex(parts[0]), bytes.fromhex(parts[1]))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: bad hex field: {exc}") from exc
        samples.append(sample)
    lengths = {(len(s.shared_secret), len(s.ciphertext)) for s in samples}
    if len(lengths) > 1:
        raise ValueError(f"{path}: inconsistent record lengths {sorted(lengths)}")
    return samples
