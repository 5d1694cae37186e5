"""Authenticated sealing for envelopes and mock-FHE ciphertexts.

Stream cipher + MAC built from sha256; deterministic given (key, nonce).
"""

from __future__ import annotations

import hashlib

from .errors import ProtocolError


def _keystream(key: bytes, nonce: bytes, n: int) -> bytes:
    out = bytearray()
    ctr = 0
    while len(out) < n:
        out += hashlib.sha256(key + nonce + ctr.to_bytes(8, "little")).digest()
        ctr += 1
    return bytes(out[:n])


def _tag(key: bytes, nonce: bytes, ct: bytes) -> bytes:
    return hashlib.sha256(b"tag" + key + nonce + ct).digest()[:16]


def seal(key: bytes, nonce: bytes, plaintext: bytes) -> bytes:
    if len(nonce) != 16:
        raise ProtocolError("nonce must be 16 bytes")
    ks = _keystream(key, nonce, len(plaintext))
    ct = bytes(a ^ b for a, b in zip(plaintext, ks))
    return nonce + len(ct).to_bytes(4, "little") + ct + _tag(key, nonce, ct)


def unseal(key: bytes, blob: bytes) -> bytes:
    if len(blob) < 36:
        raise ProtocolError("sealed blob too short")
    nonce = blob[:16]
    n = int.from_bytes(blob[16:20], "little")
    ct, tag = blob[20:20 + n], blob[20 + n:]
    if len(ct) != n or tag != _tag(key, nonce, ct):
        raise ProtocolError("authentication failure")
    ks = _keystream(key, nonce, n)
    return bytes(a ^ b for a, b in zip(ct, ks))
