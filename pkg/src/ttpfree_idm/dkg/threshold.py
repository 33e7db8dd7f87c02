"""门限部分解密 / 签名，以及私钥分片的备份与恢复。"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence

from ..canonical import digest
from ..errors import (
    DuplicatePartyPartial,
    FieldTooSmall,
    InsufficientShares,
    MissingParty,
    NonInvertibleCiphertext,
    ThresholdOutOfRange,
)
from ..netsim import Network
from ..sharing import PrimeField, RandomSource, dedup_shares, shamir_reconstruct, shamir_share
from .structs import Partial, PrivateShare, RsaPublicKey, ShareBackup

logger = logging.getLogger(__name__)


def partial_decrypt(ciphertext: int, d_i: int, n: int) -> int:
    """c^{d_i} mod N；负指数通过 c 的模逆计算。"""
    if not 0 < ciphertext < n:
        raise ValueError(f"密文必须满足 0 < c < N, 实际 {ciphertext}")
    if d_i >= 0:
        return pow(ciphertext, d_i, n)
    if math.gcd(ciphertext, n) != 1:
        raise NonInvertibleCiphertext("密文与 N 不互素, 无法计算负指数分片")
    return pow(pow(ciphertext, -1, n), -d_i, n)


def _unique_partials(partials: Iterable[Partial]) -> dict[int, Partial]:
    seen: set[bytes] = set()
    by_party: dict[int, Partial] = {}
    for partial in partials:
        key = digest(partial)
        if key in seen:
            continue
        if partial.party_id in by_party:
            raise DuplicatePartyPartial(f"参与方 {partial.party_id} 提交了两个不同的部分值")
        seen.add(key)
        by_party[partial.party_id] = partial
    return by_party


def combine_partials(partials: Iterable[Partial], correction: int, ciphertext: int, n: int, k: int) -> int:
    """Π partials · c^{correction} mod N，需覆盖全部 k 方（原值或恢复值）。"""
    by_party = _unique_partials(partials)
    missing = [pid for pid in range(1, k + 1) if pid not in by_party]
    if missing:
        raise MissingParty(f"缺少参与方 {missing} 的部分值")
    result = pow(ciphertext, correction, n)
    for partial in by_party.values():
        result = result * partial.value % n
    return result


def threshold_sign(digest_value: int, shares: Sequence[PrivateShare], public_key: RsaPublicKey, k: int) -> int:
    """σ = h^{Σd_i + c} mod N，满足 σ^e ≡ h。"""
    n = public_key.n
    if not 0 < digest_value < n:
        raise ValueError(f"待签名值必须满足 0 < h < N, 实际 {digest_value}")
    if not shares:
        raise MissingParty("没有任何参与方提供签名分片")
    partials = [Partial(party_id=s.party_id, value=partial_decrypt(digest_value, s.d, n)) for s in shares]
    return combine_partials(partials, shares[0].correction, digest_value, n, k)


def backup_field(k: int, n: int) -> PrimeField:
    """备份域 Q：大于 2·k·N 的最小素数。"""
    return PrimeField.next_above(2 * k * n)


def replicate_share(
    owner_id: int,
    d_i: int,
    t: int,
    k: int,
    n: int,
    field: PrimeField,
    rng: RandomSource,
) -> list[ShareBackup]:
    """把 d_i 平移到 [0, Q) 后做 t-of-k Shamir 分享，每个 holder 一份。"""
    if field.modulus <= 2 * k * n:
        raise FieldTooSmall(
            f"备份域 {field.modulus} 必须大于 2·k·N = {2 * k * n}: "
            f"比 Q > k·N 更严, d_i 平移 k·N 后落在 [0, 2·k·N) 内且不能回绕"
        )
    if not 2 <= t <= k:
        raise ThresholdOutOfRange(f"备份门限必须在 [2, {k}] 内, 实际 {t}")
    offset = k * n
    share_set = shamir_share(d_i + offset, t, k, field, rng)
    return [
        ShareBackup(
            owner_party_id=owner_id,
            holder_party_id=point.index,
            sub_share=point,
            threshold=t,
            field_modulus=field.modulus,
            offset=offset,
        )
        for point in share_set.points
    ]


def recover_share(absent_id: int, backups: Iterable[ShareBackup]) -> int:
    relevant = [b for b in backups if b.owner_party_id == absent_id]
    if not relevant:
        raise InsufficientShares(f"没有参与方 {absent_id} 的任何备份")
    first = relevant[0]
    field = PrimeField(modulus=first.field_modulus)
    points = dedup_shares((b.sub_share for b in relevant), field.modulus)
    value = shamir_reconstruct(points, first.threshold, field)
    return value - first.offset


def recover_absent_partial(
    absent_id: int,
    backups: Iterable[ShareBackup],
    ciphertext: int,
    n: int,
    *,
    network: Network | None = None,
    coordinator: int | None = None,
) -> int:
    """由 >= t 个 holder 的备份重建缺席方的 d_i，再计算其部分值。"""
    backups = list(backups)
    d_absent = recover_share(absent_id, backups)
    partial = partial_decrypt(ciphertext, d_absent, n)
    holders = sorted({b.holder_party_id for b in backups if b.owner_party_id == absent_id})
    logger.info("已通过备份恢复参与方 %d 的部分值, holders=%s", absent_id, holders)
    if network is not None:
        network.metrics.recoveries += 1
        if coordinator is not None:
            network.broadcast(coordinator, "recovery.event", {"absent": absent_id, "holders": holders})
    return partial
