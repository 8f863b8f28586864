"""Labeled ciphertext corpus construction, splitting, and serialization.

Both distinguishing games yield one balanced two-class corpus, generated
under a single fixed key (or key pair) with per-record derived randomness:

  single-cipher game   class 0 encrypts fresh uniform plaintexts, class 1
                       encrypts the fixed all-zero plaintext.

  hybrid-KEM game      class 0 rows are kem_ct || asym_enc(shared_secret);
                       class 1 rows are kem_ct' || asym_enc(u) for a fresh
                       encapsulation and an independent uniform u.

Rows are interleaved class 0/class 1 and then shuffled with the seeded
generator, so stored order carries no label information.

Dataset binary format, little-endian:

    magic "ICPA" | version u16 | feature_len u32 | n_samples u64
    | n_class0 u64 | n_class1 u64 | seed u64
    then per sample: label u8 || features (feature_len bytes)

Features are stored as raw ciphertext bytes; any scaling belongs to the
classifier, not the corpus.
"""

from __future__ import annotations

import struct
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from ._derive import derive_bytes, derive_int, derive_rng
from .ciphers import ALGORITHMS, CascadeSpec, SymmetricScheme, cascade_encrypt, sym_encrypt
from .rsa import rsa_keygen, rsa_oaep_encrypt, rsa_textbook_encrypt

DATASET_MAGIC = b"ICPA"
DATASET_VERSION = 1

GAMES = ("single-cipher", "hybrid-kem")
RSA_CIPHERS = ("rsa-plain", "rsa-oaep")
ASYM_COMPONENTS = ("rsa-oaep", "rsa-textbook", "plaintext-identity")


@dataclass
class LabeledDataset:
    """Byte-valued feature matrix plus binary labels."""

    features: np.ndarray  # (n, feature_len) uint8
    labels: np.ndarray  # (n,) uint8 over {0, 1}
    seed: int = 0

    def __post_init__(self) -> None:
        self.features = np.ascontiguousarray(self.features, dtype=np.uint8)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must be one per feature row")
        if self.labels.size and not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must lie in {0, 1}")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def feature_len(self) -> int:
        return self.features.shape[1]

    @property
    def n_class0(self) -> int:
        return int((self.labels == 0).sum())

    @property
    def n_class1(self) -> int:
        return int((self.labels == 1).sum())

    def subset(self, indices: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.features[indices], self.labels[indices], seed=self.seed)


@dataclass(frozen=True)
class GameSpec:
    """Complete description of one corpus; equal specs build identical bytes.

    Exactly one source is set: ``cipher`` (a symmetric algorithm name,
    "rsa-plain", or "rsa-oaep") or ``cascade=(inner, outer)`` for the
    single-cipher game; ``kem`` and ``asym`` for the hybrid game.
    """

    game: str
    samples_per_class: int
    seed: int
    plaintext_len: int = 16
    cipher: str | None = None
    cascade: tuple[str, str] | None = None
    kem: str | None = None
    asym: str | None = None
    kem_corpus: str | None = None
    ss_len: int = 32
    mock_ct_len: int = 32
    modulus_bits: int = 2048
    include_iv: bool = True

    def __post_init__(self) -> None:
        if self.game not in GAMES:
            raise ValueError(f"unknown game {self.game!r}; expected one of {GAMES}")
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be >= 1")
        if self.plaintext_len < 1:
            raise ValueError("plaintext_len must be >= 1")
        if self.game == "single-cipher":
            if (self.cipher is None) == (self.cascade is None):
                raise ValueError("single-cipher game needs exactly one of cipher/cascade")
            if self.cipher is not None and self.cipher not in ALGORITHMS + RSA_CIPHERS:
                raise ValueError(f"unknown cipher {self.cipher!r}")
            if self.cascade is not None:
                inner, outer = self.cascade
                if inner not in ALGORITHMS or outer not in ALGORITHMS:
                    raise ValueError(f"unknown cascade component in {self.cascade!r}")
        else:
            if self.kem is None or self.asym is None:
                raise ValueError("hybrid game needs both kem and asym")
            if self.asym not in ASYM_COMPONENTS:
                raise ValueError(f"unknown asym component {self.asym!r}")
            if self.kem == "external-corpus" and not self.kem_corpus:
                raise ValueError("external-corpus kem needs kem_corpus path")

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["cascade"] is not None:
            d["cascade"] = list(d["cascade"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GameSpec":
        known = {f.name for f in fields(cls)}
        kwargs = {k: v for k, v in d.items() if k in known}
        if kwargs.get("cascade") is not None:
            kwargs["cascade"] = tuple(kwargs["cascade"])
        return cls(**kwargs)


def class0_plaintext(seed: int, index: int, length: int) -> bytes:
    """The uniform plaintext stream fed to class 0 of the single-cipher game."""
    return derive_bytes(seed, "plaintext", index, length)


def _single_cipher_encryptor(spec: GameSpec):
    """Resolve (encrypt(pt, rng) -> bytes, clear-prefix length to strip)."""
    seed = spec.seed
    if spec.cascade is not None:
        inner_name, outer_name = spec.cascade
        cas = CascadeSpec(
            outer=SymmetricScheme.from_seed(outer_name, seed, role="key-outer"),
            inner=SymmetricScheme.from_seed(inner_name, seed, role="key-inner"),
        )
        strip = 0 if spec.include_iv else cas.outer.iv_len
        return (lambda pt, rng: cascade_encrypt(cas, pt, rng)), strip
    if spec.cipher in RSA_CIPHERS:
        key = rsa_keygen(spec.modulus_bits, derive_int(seed, "rsa-keygen"))
        if spec.cipher == "rsa-plain":
            return (lambda pt, rng: rsa_textbook_encrypt(key, pt)), 0
        return (lambda pt, rng: rsa_oaep_encrypt(key, pt, rng)), 0
    scheme = SymmetricScheme.from_seed(spec.cipher, seed)
    strip = 0 if spec.include_iv else scheme.iv_len
    return (lambda pt, rng: sym_encrypt(scheme, pt, rng)), strip


def build_single_cipher_dataset(spec: GameSpec) -> LabeledDataset:
    """Single-cipher game corpus: uniform plaintexts vs. the fixed zero plaintext."""
    if spec.game != "single-cipher":
        raise ValueError("spec.game must be 'single-cipher'")
    encrypt, strip = _single_cipher_encryptor(spec)
    n, length, seed = spec.samples_per_class, spec.plaintext_len, spec.seed
    zero = bytes(length)
    rows: list[bytes] = []
    for i in range(n):
        c0 = encrypt(class0_plaintext(seed, i, length), derive_rng(seed, "encrypt/0", i))
        c1 = encrypt(zero, derive_rng(seed, "encrypt/1", i))
        rows.append(c0[strip:])
        rows.append(c1[strip:])
    return _assemble(rows, seed)


def _hybrid_components(spec: GameSpec):
    from . import kem as kemmod

    seed = spec.seed
    if spec.kem == "rsa-kem":
        key = rsa_keygen(spec.modulus_bits, derive_int(seed, "kem-keygen"))
        provider = kemmod.RsaKem(key, ss_len=spec.ss_len)
    elif spec.kem == "ideal-mock":
        provider = kemmod.IdealMockKem(spec.ss_len, spec.mock_ct_len)
    elif spec.kem == "degenerate-mock":
        provider = kemmod.DegenerateMockKem(spec.ss_len, spec.mock_ct_len)
    elif spec.kem == "leaky-mock":
        provider = kemmod.LeakyMockKem(spec.ss_len, spec.mock_ct_len)
    elif spec.kem == "external-corpus":
        provider = kemmod.ExternalCorpusKem.from_file(spec.kem_corpus)
    else:
        raise ValueError(f"unknown kem kind {spec.kem!r}")

    if spec.asym == "plaintext-identity":
        return provider, (lambda m, rng: m)
    key = rsa_keygen(spec.modulus_bits, derive_int(seed, "asym-keygen"))
    if spec.asym == "rsa-textbook":
        return provider, (lambda m, rng: rsa_textbook_encrypt(key, m))
    return provider, (lambda m, rng: rsa_oaep_encrypt(key, m, rng))


def build_hybrid_kem_dataset(spec: GameSpec) -> LabeledDataset:
    """Hybrid-KEM game corpus: real shared secret vs. independent uniform string."""
    if spec.game != "hybrid-kem":
        raise ValueError("spec.game must be 'hybrid-kem'")
    provider, asym_enc = _hybrid_components(spec)
    n, seed = spec.samples_per_class, spec.seed
    if provider.kind == "external-corpus" and provider.remaining < 2 * n:
        raise ValueError(
            f"external corpus holds {provider.remaining} records; "
            f"{2 * n} are needed for {n} samples per class"
        )
    class0: list[bytes] = []
    class1: list[bytes] = []
    for i in range(n):
        s = provider.encapsulate(derive_rng(seed, "encap/0", i))
        class0.append(s.ciphertext + asym_enc(s.shared_secret, derive_rng(seed, "asym/0", i)))
    for i in range(n):
        s = provider.encapsulate(derive_rng(seed, "encap/1", i))
        u = derive_bytes(seed, "uniform-secret", i, provider.ss_len)
        class1.append(s.ciphertext + asym_enc(u, derive_rng(seed, "asym/1", i)))
    rows = [row for pair in zip(class0, class1) for row in pair]
    return _assemble(rows, seed)


def _assemble(interleaved_rows: list[bytes], seed: int) -> LabeledDataset:
    """Interleaved class0/class1 rows -> shuffled dataset."""
    lengths = {len(r) for r in interleaved_rows}
    if len(lengths) != 1:
        raise ValueError(f"inconsistent row lengths {sorted(lengths)}")
    n = len(interleaved_rows)
    features = np.frombuffer(b"".join(interleaved_rows), dtype=np.uint8).reshape(n, -1)
    labels = np.tile(np.array([0, 1], dtype=np.uint8), n // 2)
    perm = derive_rng(seed, "shuffle").permutation(n)
    return LabeledDataset(features[perm], labels[perm], seed=seed)


def build_dataset(spec: GameSpec) -> LabeledDataset:
    if spec.game == "single-cipher":
        return build_single_cipher_dataset(spec)
    return build_hybrid_kem_dataset(spec)


def split_dataset(
    dataset: LabeledDataset, train_n: int, val_n: int, test_n: int, seed: int
) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    """Disjoint class-balanced splits with ``*_n`` samples per class each."""
    for name, value in (("train_n", train_n), ("val_n", val_n), ("test_n", test_n)):
        if value < 0:
            raise ValueError(f"{name} must be >= 0")
    need = train_n + val_n + test_n
    per_class = [np.flatnonzero(dataset.labels == c) for c in (0, 1)]
    for c, idx in enumerate(per_class):
        if len(idx) < need:
            raise ValueError(
                f"class {c} holds {len(idx)} samples; split needs {need} per class"
            )
    rng = derive_rng(seed, "split")
    shuffled = [rng.permutation(idx) for idx in per_class]
    out = []
    at = 0
    for count in (train_n, val_n, test_n):
        take = np.concatenate([idx[at : at + count] for idx in shuffled])
        out.append(dataset.subset(rng.permutation(take)))
        at += count
    return tuple(out)


def save_dataset(dataset: LabeledDataset, path: str | Path) -> None:
    """Serialize bit-exactly; load(save(d)) == d."""
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(
            struct.pack(
                "<HIQQQQ",
                DATASET_VERSION,
                dataset.feature_len,
                dataset.n_samples,
                dataset.n_class0,
                dataset.n_class1,
                dataset.seed & 0xFFFFFFFFFFFFFFFF,
            )
        )
        body = np.empty((dataset.n_samples, dataset.feature_len + 1), dtype=np.uint8)
        body[:, 0] = dataset.labels
        body[:, 1:] = dataset.features
        fh.write(body.tobytes())


def load_dataset(path: str | Path) -> LabeledDataset:
    raw = Path(path).read_bytes()
    if not raw.startswith(DATASET_MAGIC):
        raise ValueError(f"{path}: not a dataset file (bad magic)")
    header_len = len(DATASET_MAGIC) + 38
    if len(raw) < header_len:
        raise ValueError(f"{path}: truncated dataset header")
    version, feature_len, n, n0, n1, seed = struct.unpack(
        "<HIQQQQ", raw[len(DATASET_MAGIC) : header_len]
    )
    if version != DATASET_VERSION:
        raise ValueError(f"{path}: unsupported dataset version {version}")
    if n0 + n1 != n:
        raise ValueError(f"{path}: class counts {n0}+{n1} do not sum to {n} samples")
    body = raw[header_len:]
    if len(body) != n * (feature_len + 1):
        raise ValueError(
            f"{path}: expected {n} records of {feature_len + 1} bytes, "
            f"found {len(body)} bytes"
        )
    table = np.frombuffer(body, dtype=np.uint8).reshape(n, feature_len + 1) if n else (
        np.empty((0, feature_len + 1), dtype=np.uint8)
    )
    labels, features = table[:, 0], table[:, 1:]
    if n and not np.isin(labels, (0, 1)).all():
        raise ValueError(f"{path}: label outside {{0, 1}}")
    dataset = LabeledDataset(features, labels, seed=seed)
    if dataset.n_class0 != n0 or dataset.n_class1 != n1:
        raise ValueError(
            f"{path}: header class counts ({n0}, {n1}) differ from actual "
            f"({dataset.n_class0}, {dataset.n_class1})"
        )
    return dataset


def export_csv(dataset: LabeledDataset, path: str | Path) -> None:
    """Human-inspectable dump: one 'label,hex_features' row per sample."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("label,features_hex\n")
        for label, row in zip(dataset.labels, dataset.features):
            fh.write(f"{int(label)},{bytes(row).hex()}\n")
