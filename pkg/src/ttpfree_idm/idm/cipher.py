"""演示用流密码：SHA-256 计数器模式 + 哈希认证标签。

keystream 块 j = SHA-256(K ∥ 0x00 ∥ j 的 8 字节大端)，
标签 = SHA-256(K ∥ 0x01 ∥ 密文)，输出为 密文 ∥ 标签。
"""

from __future__ import annotations

import hmac

from ..canonical import sha256
from ..errors import IntegrityFailure

TAG_SIZE = 32
BLOCK_SIZE = 32


def keystream(key: bytes, length: int) -> bytes:
    blocks = (length + BLOCK_SIZE - 1) // BLOCK_SIZE
    stream = b"".join(sha256(key, b"\x00", j.to_bytes(8, "big")) for j in range(blocks))
    return stream[:length]


def xor_bytes(a: bytes, b: bytes) -> bytes:
    if len(a) != len(b):
        raise ValueError("异或的两个字节串长度必须相同")
    return bytes(x ^ y for x, y in zip(a, b, strict=True))


def auth_tag(key: bytes, ciphertext: bytes) -> bytes:
    return sha256(key, b"\x01", ciphertext)


def seal(key: bytes, plaintext: bytes) -> bytes:
    ciphertext = xor_bytes(plaintext, keystream(key, len(plaintext)))
    return ciphertext + auth_tag(key, ciphertext)


def open_sealed(key: bytes, blob: bytes) -> bytes:
    if len(blob) < TAG_SIZE:
        raise IntegrityFailure("密文长度不足以包含认证标签")
    ciphertext, tag = blob[:-TAG_SIZE], blob[-TAG_SIZE:]
    if not hmac.compare_digest(tag, auth_tag(key, ciphertext)):
        raise IntegrityFailure("认证标签不匹配, 密文被篡改或密钥错误")
    return xor_bytes(ciphertext, keystream(key, len(ciphertext)))


def derive_key(key: bytes, *context: bytes) -> bytes:
    return sha256(key, *context)
