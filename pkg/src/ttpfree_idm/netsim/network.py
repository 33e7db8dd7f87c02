"""确定性的内存多方网络：同步轮次、广播 / 点对点消息、崩溃计划与被动腐化视图。"""

from __future__ import annotations

import json
import logging
import random
import time
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

from ..canonical import canonical_bytes, sha256
from ..errors import AlreadyCrashed, Deadlock
from .structs import BROADCAST, CLIENT_ID, AdversaryConfig, Message, Metrics, Outgoing, PartyId, Recipient, sort_key

logger = logging.getLogger(__name__)


class PartyProtocol(Protocol):
    """单个参与方的协议状态机。"""

    party_id: PartyId

    @property
    def done(self) -> bool: ...

    @property
    def output(self) -> Any: ...

    def step(self, round_no: int, inbox: list[Message]) -> list[Outgoing]: ...


PartyFactory = Callable[[PartyId, random.Random], PartyProtocol]


def derive_rng(seed: int, party_id: PartyId, purpose: str = "") -> random.Random:
    """按 SHA-256(seed ∥ partyId ∥ purpose) 派生独立随机流，与调度顺序无关。"""
    material = sha256(canonical_bytes(seed), canonical_bytes(party_id), canonical_bytes(purpose))
    return random.Random(int.from_bytes(material, "big"))


@dataclass
class ProtocolRun:
    outputs: dict[PartyId, Any]
    transcript: list[Message]
    metrics: Metrics


@dataclass
class Network:
    """模拟器持有全部消息与轮次状态；参与方之间只能通过这里交换数据。"""

    k: int
    seed: int = 0
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    parallel: bool = False
    round: int = 0
    transcript: list[Message] = field(default_factory=list)
    metrics: Metrics = field(default_factory=Metrics)

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("参与方数量 k 必须 >= 1")
        self.adversary.validate(self.k)
        self._crashed: dict[PartyId, int] = dict(self.adversary.crash_schedule)

    # --- 参与方状态 ---

    @property
    def parties(self) -> list[PartyId]:
        return list(range(1, self.k + 1))

    def is_live(self, party_id: PartyId, at_round: int | None = None) -> bool:
        if party_id == CLIENT_ID:
            return True
        crash_round = self._crashed.get(party_id)
        current = self.round if at_round is None else at_round
        return crash_round is None or current < crash_round

    def live_parties(self) -> list[PartyId]:
        return [p for p in self.parties if self.is_live(p)]

    def crash_party(self, party_id: PartyId, at_round: int | None = None) -> None:
        """从指定轮次起让参与方静默（不会复活）。"""
        if party_id in self._crashed:
            raise AlreadyCrashed(f"参与方 {party_id} 已在第 {self._crashed[party_id]} 轮崩溃")
        if not 1 <= party_id <= self.k:
            raise ValueError(f"参与方编号 {party_id} 不在 [1, {self.k}] 内")
        crash_round = self.round if at_round is None else at_round
        self._crashed[party_id] = crash_round
        logger.warning("参与方 %d 将从第 %d 轮起崩溃", party_id, crash_round)

    def party_rng(self, party_id: PartyId, purpose: str = "") -> random.Random:
        return derive_rng(self.seed, party_id, purpose)

    # --- 消息 ---

    def send(self, sender: PartyId, to: Recipient, kind: str, payload: Any) -> Message | None:
        """记录一条本轮消息；已崩溃的发送方静默返回 None。"""
        if not self.is_live(sender):
            logger.debug("参与方 %d 已崩溃, 丢弃消息 kind=%s", sender, kind)
            return None
        message = Message(round=self.round, sender=sender, to=to, kind=kind, body=canonical_bytes(payload))
        self.transcript.append(message)
        self.metrics.total_bytes += len(message.body)
        return message

    def broadcast(self, sender: PartyId, kind: str, payload: Any) -> Message | None:
        return self.send(sender, BROADCAST, kind, payload)

    def advance(self) -> int:
        self.round += 1
        self.metrics.rounds += 1
        return self.round

    def received(self, party_id: PartyId, kind: str, *, at_round: int | None = None) -> list[Message]:
        """某参与方在指定轮收到的某类消息（含广播，不含自己发出的）。"""
        target = self.round if at_round is None else at_round
        if not self.is_live(party_id, target):
            return []
        return sorted(
            (
                m
                for m in self.transcript
                if m.round == target
                and m.kind == kind
                and m.sender != party_id
                and (m.to == party_id or m.is_broadcast())
            ),
            key=sort_key,
        )

    # --- 状态机执行 ---

    def run(
        self,
        factory: PartyFactory,
        *,
        purpose: str = "",
        parties: Sequence[PartyId] | None = None,
    ) -> dict[PartyId, Any]:
        """按同步轮次驱动各参与方状态机，直到所有存活参与方结束。"""
        roster = list(parties) if parties is not None else self.parties
        machines = {pid: factory(pid, self.party_rng(pid, purpose)) for pid in roster}
        start_index = len(self.transcript)
        started = time.perf_counter()
        inbox_round: int | None = None

        while True:
            active = [m for pid, m in machines.items() if self.is_live(pid) and not m.done]
            if not active:
                break

            pending = [m for m in self.transcript[start_index:] if m.round == inbox_round]
            inboxes = {
                m.party_id: [
                    msg for msg in pending if msg.sender != m.party_id and (msg.to == m.party_id or msg.is_broadcast())
                ]
                for m in active
            }
            outgoing = self._step_all(active, inboxes)

            sent = 0
            finished_now = sum(1 for m in active if m.done)
            batch: list[Message] = []
            for machine, messages in zip(active, outgoing, strict=True):
                for out in messages:
                    message = Message(
                        round=self.round,
                        sender=machine.party_id,
                        to=out.to,
                        kind=out.kind,
                        body=canonical_bytes(out.payload),
                    )
                    batch.append(message)
            for message in sorted(batch, key=sort_key):
                self.transcript.append(message)
                self.metrics.total_bytes += len(message.body)
                sent += 1

            if sent == 0 and finished_now == 0:
                raise Deadlock(f"第 {self.round} 轮无任何参与方推进且无人结束")
            inbox_round = self.round
            self.advance()

        self.metrics.wall_clock_seconds += time.perf_counter() - started
        return {pid: m.output for pid, m in machines.items() if m.done}

    def _step_all(self, active: list[PartyProtocol], inboxes: dict[PartyId, list[Message]]) -> list[list[Outgoing]]:
        current = self.round
        if not self.parallel or len(active) == 1:
            return [m.step(current, inboxes[m.party_id]) for m in active]
        # 并行模式：同一轮内并发推进，轮与轮之间由 map 的完成作为屏障
        with ThreadPoolExecutor(max_workers=len(active), thread_name_prefix="idm-party") as executor:
            return list(executor.map(lambda m: m.step(current, inboxes[m.party_id]), active))

    # --- 视图与导出 ---

    def corrupt_view(self) -> list[Message]:
        return corrupt_view(self.transcript, self.adversary)

    def export_transcript(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as f:
            for message in self.transcript:
                f.write(json.dumps(message.to_record(), sort_keys=True, separators=(",", ":")))
                f.write("\n")
        logger.info("转写已导出: %s, 消息数: %d", path, len(self.transcript))
        return path


def corrupt_view(transcript: Iterable[Message], adversary: AdversaryConfig) -> list[Message]:
    """被腐化参与方可见的全部消息：由其发出、发给它们或广播。"""
    corrupted = adversary.corrupted_parties
    if not corrupted:
        return []
    return [m for m in transcript if m.sender in corrupted or m.to in corrupted or m.is_broadcast()]


def run_protocol(
    factory: PartyFactory,
    k: int,
    adversary: AdversaryConfig | None = None,
    seed: int = 0,
    *,
    parallel: bool = False,
) -> ProtocolRun:
    """在一个全新网络上执行协议，返回 (outputs, transcript, metrics)。"""
    network = Network(k=k, seed=seed, adversary=adversary or AdversaryConfig(), parallel=parallel)
    outputs = network.run(factory)
    return ProtocolRun(outputs=outputs, transcript=list(network.transcript), metrics=network.metrics)
