from __future__ import annotations

from pathlib import Path

import pytest

from cpalab.rsa import rsa_keygen

VECTOR_DIR = Path(__file__).parent / "vectors"


def load_vectors(name: str) -> list[tuple[bytes, bytes, bytes, bytes]]:
    """Parse a hex fixture file: key, iv ('-' when absent), plaintext, ciphertext."""
    records = []
    for line in (VECTOR_DIR / f"{name}.txt").read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, iv, pt, ct = line.split()
        records.append(
            (
                bytes.fromhex(key),
                b"" if iv == "-" else bytes.fromhex(iv),
                bytes.fromhex(pt),
                bytes.fromhex(ct),
            )
        )
    return records


@pytest.fixture(scope="session")
def rsa_key():
    """One 2048-bit key pair shared across the suite (keygen is the slow part)."""
    return rsa_keygen(2048, seed=20480001)


@pytest.fixture(scope="session")
def rsa_key_1024():
    return rsa_keygen(1024, seed=10240001)
