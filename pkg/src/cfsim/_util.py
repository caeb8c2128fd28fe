"""Small shared helpers: stable seed derivation and content digests."""

from __future__ import annotations

import hashlib
from pathlib import Path


def derive_seed(*parts: object) -> int:
    """Derive a 63-bit seed from arbitrary parts, stably across runs and platforms.

    Uses SHA-256 over the ':'-joined string forms, so derived seeds are
    independent of Python's hash randomization.
    """
    text = ":".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def fmt_float(x: float) -> str:
    """Shortest decimal that round-trips the exact double (Python repr)."""
    return repr(float(x))
