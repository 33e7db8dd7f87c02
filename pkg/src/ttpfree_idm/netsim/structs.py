"""网络模拟器的数据结构。"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Literal, NamedTuple

from pydantic import BaseModel, ConfigDict, Field

from ..canonical import parse_canonical_int
from ..errors import ConfigError

BROADCAST: Literal["broadcast"] = "broadcast"
# 外部客户端（用户 / 请求方）不占用 1..k 的参与方编号
CLIENT_ID = 0

PartyId = int
Recipient = int | Literal["broadcast"]


class Message(BaseModel):
    """一条网络消息，body 为负载的规范化序列化字节。"""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    round: int
    sender: PartyId = Field(alias="from")
    to: Recipient
    kind: str
    body: bytes

    def payload(self) -> Any:
        return json.loads(self.body.decode("utf-8"))

    def is_broadcast(self) -> bool:
        return self.to == BROADCAST

    def visible_to(self, party_id: PartyId) -> bool:
        return self.sender == party_id or self.to == party_id or self.is_broadcast()

    def to_record(self) -> dict[str, Any]:
        """转写格式：{round, from, to|"broadcast", kind, bodyHex}。"""
        return {
            "round": self.round,
            "from": self.sender,
            "to": self.to,
            "kind": self.kind,
            "bodyHex": self.body.hex(),
        }


def sort_key(message: Message) -> tuple[int, int, int, str]:
    """同一轮内的规范投递顺序：(from, to, kind)，广播排在点对点之前。"""
    to_key = -1 if message.to == BROADCAST else int(message.to)
    return (message.round, message.sender, to_key, message.kind)


class Outgoing(NamedTuple):
    to: Recipient
    kind: str
    payload: Any


def as_int(value: Any) -> int:
    """解析消息负载中的整数（大整数以 0x 十六进制出现）。"""
    parsed = parse_canonical_int(value)
    if not isinstance(parsed, int):
        raise TypeError(f"期望整数, 实际为: {value!r}")
    return parsed


@dataclass(frozen=True)
class AdversaryConfig:
    """被动腐化集合与崩溃计划。"""

    corrupted_parties: frozenset[PartyId] = frozenset()
    # partyId -> 从该轮起静默
    crash_schedule: dict[PartyId, int] = field(default_factory=dict)

    def validate(self, k: int) -> None:
        limit = (k - 1) // 2
        if len(self.corrupted_parties) > limit:
            raise ConfigError(
                f"配置非法: 被腐化参与方数 {len(self.corrupted_parties)} 超过诚实多数上限 {limit}"
            )
        for party_id in (*self.corrupted_parties, *self.crash_schedule):
            if not 1 <= party_id <= k:
                raise ConfigError(f"配置非法: 参与方编号 {party_id} 不在 [1, {k}] 内")
        for party_id, crash_round in self.crash_schedule.items():
            if crash_round < 0:
                raise ConfigError(f"配置非法: 参与方 {party_id} 的崩溃轮次必须 >= 0")


@dataclass
class Metrics:
    rounds: int = 0
    total_bytes: int = 0
    candidate_attempts: int = 0
    recoveries: int = 0
    wall_clock_seconds: float = 0.0

    def to_dict(self, *, include_wall_clock: bool = True) -> dict[str, Any]:
        data: dict[str, Any] = {
            "rounds": self.rounds,
            "totalBytes": self.total_bytes,
            "candidateAttempts": self.candidate_attempts,
            "recoveries": self.recoveries,
        }
        if include_wall_clock:
            data["wallClockSeconds"] = round(self.wall_clock_seconds, 6)
        return data
