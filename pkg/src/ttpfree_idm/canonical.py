"""规范化序列化（所有哈希 / 签名的输入都经过这里）。

规则：
- UTF-8 JSON，对象键按字节序排序，无多余空白；
- 绝对值 >= 2^53 的整数与所有字节串编码为小写十六进制字符串，带 ``0x`` 前缀；
- 列表保持顺序，集合按元素的规范编码排序；
- 摘要统一为 SHA-256。
"""

from __future__ import annotations

import hashlib
import json
from collections.abc import Mapping
from typing import Annotated, Any

from pydantic import BaseModel, BeforeValidator, PlainSerializer

JSON_SAFE_INT = 2**53


def _encode_int(value: int) -> int | str:
    if abs(value) < JSON_SAFE_INT:
        return value
    return f"-0x{-value:x}" if value < 0 else f"0x{value:x}"


def to_canonical_value(obj: Any) -> Any:
    """把任意值转换为只含 JSON 基本类型、且已规范化的结构。"""
    if isinstance(obj, BaseModel):
        return to_canonical_value(obj.model_dump(mode="python"))
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return _encode_int(obj)
    if isinstance(obj, float):
        return obj
    if isinstance(obj, bytes | bytearray):
        return "0x" + bytes(obj).hex()
    if isinstance(obj, Mapping):
        out: dict[str, Any] = {}
        for key, value in obj.items():
            if not isinstance(key, str):
                raise TypeError(f"规范化序列化仅支持字符串键: {key!r}")
            out[key] = to_canonical_value(value)
        return out
    if isinstance(obj, set | frozenset):
        items = [to_canonical_value(v) for v in obj]
        return sorted(items, key=_dumps)
    if isinstance(obj, list | tuple):
        return [to_canonical_value(v) for v in obj]
    raise TypeError(f"无法规范化序列化的类型: {type(obj).__name__}")


def _dumps(value: Any) -> str:
    # 码点序与 UTF-8 字节序一致，sort_keys 即满足字节序排序
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def canonical_bytes(obj: Any) -> bytes:
    return _dumps(to_canonical_value(obj)).encode("utf-8")


def canonical_text(obj: Any) -> str:
    return canonical_bytes(obj).decode("utf-8")


def sha256(*parts: bytes) -> bytes:
    h = hashlib.sha256()
    for part in parts:
        h.update(part)
    return h.digest()


def digest(obj: Any) -> bytes:
    """对象规范编码后的 SHA-256。"""
    return sha256(canonical_bytes(obj))


def parse_canonical_int(value: Any) -> Any:
    if isinstance(value, str):
        text = value.strip().lower()
        if text.startswith("0x"):
            return int(text[2:], 16)
        if text.startswith("-0x"):
            return -int(text[3:], 16)
    return value


def parse_hex_bytes(value: Any) -> Any:
    if isinstance(value, str):
        text = value.strip().lower()
        return bytes.fromhex(text.removeprefix("0x"))
    return value


# 持久化模型的字段类型：读入时接受 0x 十六进制，写出时大整数由 to_canonical_value 处理
BigInt = Annotated[int, BeforeValidator(parse_canonical_int)]
HexBytes = Annotated[
    bytes,
    BeforeValidator(parse_hex_bytes),
    PlainSerializer(lambda b: "0x" + b.hex(), return_type=str),
]
