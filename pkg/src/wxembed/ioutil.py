"""Shared helpers for the binary container formats (WXD1 datasets, WXC1 checkpoints)."""

from __future__ import annotations

import hashlib
import json
from typing import IO, Iterable


class FormatError(ValueError):
    """Structurally malformed file (bad lengths, bad header JSON, trailing bytes)."""


class BadMagicError(FormatError):
    pass


class ChecksumError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def checksum64(chunks: Iterable[bytes]) -> int:
    """64-bit content checksum (blake2b-8) over a byte stream."""
    h = hashlib.blake2b(digest_size=8)
    for c in chunks:
        h.update(c)
    return int.from_bytes(h.digest(), "little")


def read_exact(f: IO[bytes], n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise TruncatedError(f"file truncated while reading {what} ({len(buf)}/{n} bytes)")
    return buf


def verify_trailing_checksum(f: IO[bytes], body_len: int, chunk: int = 1 << 20) -> None:
    """Stream-verify that the final u64 matches the checksum of the preceding bytes."""
    f.seek(0)
    h = hashlib.blake2b(digest_size=8)
    remaining = body_len
    while remaining > 0:
        buf = f.read(min(chunk, remaining))
        if not buf:
            raise TruncatedError("file truncated inside checksummed body")
        h.update(buf)
        remaining -= len(buf)
    stored = read_exact(f, 8, "checksum")
    if h.digest() != stored:
        raise ChecksumError("checksum mismatch, file is corrupt")
