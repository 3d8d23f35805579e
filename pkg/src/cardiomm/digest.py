"""Fast non-cryptographic content digest (FNV-1a style, 64-bit)."""

from __future__ import annotations

import numpy as np

_OFFSET = 0xCBF29CE484222325
_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF
_LANES = 64


def fnv64(data: bytes) -> str:
    """Hex digest of ``data``.

    The body is hashed as 64 interleaved lanes of little-endian 64-bit words
    (xor then multiply by the FNV prime), the lanes are folded FNV-1a style,
    and trailing bytes are mixed in one at a time. The length is mixed last so
    that zero-padded inputs differ.
    """
    data = bytes(data)
    n_words = len(data) // 8
    words = np.frombuffer(data[: n_words * 8], dtype="<u8")
    full = n_words // _LANES * _LANES
    acc = np.full(_LANES, _OFFSET, dtype=np.uint64)
    prime = np.uint64(_PRIME)
    with np.errstate(over="ignore"):
        for row in words[:full].reshape(-1, _LANES):
            acc = (acc ^ row) * prime
        for i, w in enumerate(words[full:]):
            acc[i] = (acc[i] ^ w) * prime
    h = _OFFSET
    for lane in acc.tolist():
        h = ((h ^ lane) * _PRIME) & _MASK
    for byte in data[n_words * 8:]:
        h = ((h ^ byte) * _PRIME) & _MASK
    h = ((h ^ len(data)) * _PRIME) & _MASK
    return f"{h:016x}"
