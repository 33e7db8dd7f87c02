"""转写泄露审计：检查秘密值的规范编码是否出现在消息体中。"""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping
from typing import Any

from ..canonical import canonical_text
from .structs import Message


def _leaf_tokens(value: Any, out: set[str]) -> None:
    if isinstance(value, dict):
        for key, item in value.items():
            out.add(json.dumps(key, ensure_ascii=False))
            _leaf_tokens(item, out)
    elif isinstance(value, list):
        for item in value:
            _leaf_tokens(item, out)
    else:
        out.add(canonical_text(value))


def body_tokens(message: Message) -> set[str]:
    """消息体中所有叶子值的规范编码。"""
    tokens: set[str] = set()
    _leaf_tokens(message.payload(), tokens)
    return tokens


def find_leaks(messages: Iterable[Message], secrets: Mapping[str, int | bytes]) -> list[tuple[str, Message]]:
    """返回 (秘密名称, 消息) 列表。

    整数按叶子 token 完全匹配；字节串按十六进制子串匹配（覆盖拼接后的编码）。
    """
    leaks: list[tuple[str, Message]] = []
    for message in messages:
        tokens = body_tokens(message)
        text = message.body.decode("utf-8")
        for name, value in secrets.items():
            if isinstance(value, bytes):
                if value.hex() in text:
                    leaks.append((name, message))
            elif canonical_text(value) in tokens:
                leaks.append((name, message))
    return leaks
