"""BGW 共享乘积子协议（半诚实模型）。

每方 i 用 ⌊(k-1)/2⌋ 次多项式分享 a_i、b_i，并贡献一个 k-1 次零分享掩码；
第 j 方广播 (Σf_a)(j)·(Σf_b)(j) + h(j)，所有人由 k 个点插值得到 (Σa)(Σb) mod P。
"""

from __future__ import annotations

import logging
import random
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any

from ..errors import FieldTooSmall, PartyCountTooSmall
from ..netsim import Message, Network, Outgoing, as_int
from .shamir import lagrange_at_zero, shamir_share, zero_share
from .structs import PrimeField, SharePoint

logger = logging.getLogger(__name__)

SHARE_KIND = "bgw.share"
POINT_KIND = "bgw.point"


def input_degree(k: int) -> int:
    return (k - 1) // 2


class BgwParty:
    """单个参与方的 BGW 状态机，可一次处理一批 (a_i, b_i) 输入。"""

    def __init__(
        self,
        party_id: int,
        rng: random.Random,
        *,
        k: int,
        field: PrimeField,
        pairs: Sequence[tuple[int, int]],
    ) -> None:
        self.party_id = party_id
        self._rng = rng
        self._k = k
        self._field = field
        self._pairs = list(pairs)
        self._phase = 0
        self._own: dict[str, list[int]] = {}
        self._points: list[int] = []
        self._output: list[int] | None = None

    @property
    def done(self) -> bool:
        return self._output is not None

    @property
    def output(self) -> list[int] | None:
        return self._output

    def step(self, round_no: int, inbox: list[Message]) -> list[Outgoing]:
        if self._phase == 0:
            return self._share_inputs()
        if self._phase == 1:
            return self._broadcast_points(inbox)
        self._interpolate(inbox)
        return []

    def _share_inputs(self) -> list[Outgoing]:
        k, field, rng = self._k, self._field, self._rng
        degree = input_degree(k)
        per_target: dict[int, dict[str, list[int]]] = {j: {"a": [], "b": [], "h": []} for j in range(1, k + 1)}
        for a, b in self._pairs:
            share_a = shamir_share(a % field.modulus, degree + 1, k, field, rng)
            share_b = shamir_share(b % field.modulus, degree + 1, k, field, rng)
            mask = zero_share(k - 1, k, field, rng)
            for j in range(1, k + 1):
                per_target[j]["a"].append(share_a.points[j - 1].value)
                per_target[j]["b"].append(share_b.points[j - 1].value)
                per_target[j]["h"].append(mask.points[j - 1].value)

        self._own = per_target[self.party_id]
        self._phase = 1
        return [Outgoing(j, SHARE_KIND, body) for j, body in per_target.items() if j != self.party_id]

    def _broadcast_points(self, inbox: list[Message]) -> list[Outgoing]:
        received = [m.payload() for m in inbox if m.kind == SHARE_KIND]
        if len(received) < self._k - 1:
            # 同步模型中缺失的消息不会再到达，交给网络层判定死锁
            return []
        q = self._field.modulus
        points: list[int] = []
        for idx in range(len(self._pairs)):
            sum_a = self._own["a"][idx] + sum(as_int(r["a"][idx]) for r in received)
            sum_b = self._own["b"][idx] + sum(as_int(r["b"][idx]) for r in received)
            sum_h = self._own["h"][idx] + sum(as_int(r["h"][idx]) for r in received)
            points.append((sum_a * sum_b + sum_h) % q)
        self._points = points
        self._phase = 2
        return [Outgoing("broadcast", POINT_KIND, {"points": points})]

    def _interpolate(self, inbox: list[Message]) -> None:
        broadcasts = {m.sender: [as_int(v) for v in m.payload()["points"]] for m in inbox if m.kind == POINT_KIND}
        if len(broadcasts) < self._k - 1:
            return
        broadcasts[self.party_id] = self._points
        outputs: list[int] = []
        for idx in range(len(self._pairs)):
            pts = [SharePoint(index=j, value=broadcasts[j][idx]) for j in sorted(broadcasts)]
            outputs.append(lagrange_at_zero(pts, self._field))
        self._output = outputs


@dataclass
class BgwResult:
    value: int
    transcript: list[Message]

    def party_transcript(self, party_id: int) -> list[Message]:
        """某一方在本次协议中看到的消息。"""
        return [m for m in self.transcript if m.visible_to(party_id)]


def bgw_shared_products(
    pairs_per_party: Mapping[int, Sequence[tuple[int, int]]],
    field: PrimeField,
    network: Network,
    *,
    purpose: str = "bgw",
) -> list[int]:
    """批量运行 BGW，返回每个候选的 (Σa)(Σb) mod P。"""
    k = network.k
    if k < 3:
        raise PartyCountTooSmall(f"BGW 乘法需要至少 3 方, 实际 k={k}")

    def factory(party_id: int, rng: random.Random) -> BgwParty:
        return BgwParty(party_id, rng, k=k, field=field, pairs=pairs_per_party[party_id])

    outputs: dict[int, Any] = network.run(factory, purpose=purpose)
    results = {tuple(v) for v in outputs.values()}
    if len(results) != 1:
        raise RuntimeError("BGW 各方插值结果不一致")
    return list(results.pop())


def bgw_shared_product(
    per_party_a: Sequence[int],
    per_party_b: Sequence[int],
    field: PrimeField,
    k: int | None = None,
    *,
    network: Network | None = None,
    seed: int = 0,
) -> BgwResult:
    """模拟 BGW：返回 N = (Σa_i)(Σb_i) mod P 以及本次转写。"""
    k = len(per_party_a) if k is None else k
    if len(per_party_a) != k or len(per_party_b) != k:
        raise ValueError(f"输入长度必须等于参与方数 k={k}")
    if k < 3:
        raise PartyCountTooSmall(f"BGW 乘法需要至少 3 方, 实际 k={k}")
    product = sum(per_party_a) * sum(per_party_b)
    if field.modulus <= product:
        raise FieldTooSmall(f"BGW 素数 {field.modulus} 必须大于乘积 {product}")

    network = network or Network(k=k, seed=seed)
    start = len(network.transcript)
    values = bgw_shared_products(
        {pid: [(per_party_a[pid - 1], per_party_b[pid - 1])] for pid in range(1, k + 1)},
        field,
        network,
    )
    logger.debug("BGW 完成, 轮次: %d, 消息数: %d", network.round, len(network.transcript) - start)
    return BgwResult(value=values[0], transcript=network.transcript[start:])
