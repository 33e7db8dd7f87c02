"""群组认证：权威方承诺群组秘密并下发 t-of-n 分片，成员一次性联合认证。"""

from __future__ import annotations

import hmac
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from ..canonical import canonical_bytes, sha256
from ..errors import Consumed, EpochMismatch, InsufficientShares, ThresholdOutOfRange
from ..netsim import Network
from ..sharing import PrimeField, RandomSource, SharePoint, dedup_shares, shamir_reconstruct, shamir_share
from .structs import GroupAuthState

logger = logging.getLogger(__name__)

GROUP_AUTHORITY = 1


def group_commitment(secret: int, epoch: int) -> bytes:
    return sha256(canonical_bytes([secret, epoch]))


def group_setup(
    group_id: str,
    members: Sequence[str],
    t: int,
    field: PrimeField,
    epoch: int,
    rng: RandomSource,
    *,
    network: Network | None = None,
) -> GroupAuthState:
    """每个纪元使用新的群组秘密与多项式。成员 j（从 1 开始）拿到编号 j 的分片。"""
    n = len(members)
    if len(set(members)) != n:
        raise ValueError("群组成员不能重复")
    if not 2 <= t <= n:
        raise ThresholdOutOfRange(f"群组门限必须在 [2, {n}] 内, 实际 {t}")

    secret = rng.randrange(field.modulus)
    share_set = shamir_share(secret, t, n, field, rng)
    commitment = group_commitment(secret, epoch)
    if network is not None:
        payload = {"group": group_id, "epoch": epoch, "commitment": commitment}
        network.broadcast(GROUP_AUTHORITY, "group.commitment", payload)
        network.advance()

    logger.info("群组 %s 纪元 %d 已建立: t=%d, n=%d", group_id, epoch, t, n)
    return GroupAuthState(
        group_id=group_id,
        epoch=epoch,
        commitment=commitment,
        member_shares=dict(zip(members, share_set.points, strict=True)),
        t=t,
        n=n,
        field_modulus=field.modulus,
    )


@dataclass
class GroupAuthResult:
    accepted: bool
    state: GroupAuthState


def group_authenticate(state: GroupAuthState, submitted: Iterable[SharePoint], epoch: int) -> GroupAuthResult:
    """去重后至少 t 个分片才重建；承诺匹配即接受，并把状态标记为已消费。"""
    if state.consumed:
        raise Consumed(f"群组 {state.group_id} 纪元 {state.epoch} 的认证状态已被使用")
    if epoch != state.epoch:
        raise EpochMismatch(f"纪元不匹配: 期望 {state.epoch}, 实际 {epoch}")

    field = PrimeField(modulus=state.field_modulus)
    distinct = dedup_shares(submitted, field.modulus)
    if len(distinct) < state.t:
        raise InsufficientShares(f"群组认证需要 {state.t} 个不同分片, 实际 {len(distinct)}")

    candidate = shamir_reconstruct(distinct, state.t, field)
    accepted = hmac.compare_digest(group_commitment(candidate, epoch), state.commitment)
    if not accepted:
        logger.warning("群组 %s 认证失败: 重建值与承诺不符", state.group_id)
        return GroupAuthResult(accepted=False, state=state)
    logger.info("群组 %s 纪元 %d 认证通过, 状态已消费", state.group_id, epoch)
    return GroupAuthResult(accepted=True, state=state.model_copy(update={"consumed": True}))
