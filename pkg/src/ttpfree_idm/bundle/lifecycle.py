"""到达主机时的信任判定、凋亡 / 蒸发与最小披露。"""

from __future__ import annotations

import hmac
import logging
from collections.abc import Iterable

from ..errors import BundleApoptosed, IntegrityFailure, LabelUnknown, ThresholdViolation
from ..policy import AccessTree, AttributeKey, EvaluationContext
from .structs import ActiveBundle, Authenticator, BundleItem, CredentialEnvelope, Decision, DecisionKind, HostProfile

logger = logging.getLogger(__name__)


def seal_bundle(bundle: ActiveBundle) -> ActiveBundle:
    """重新计算完整性摘要。"""
    items = tuple(sorted(bundle.items, key=lambda i: i.label))
    unsealed = bundle.model_copy(update={"items": items})
    return unsealed.model_copy(update={"integrity_digest": unsealed.content_digest()})


def make_bundle(
    bundle_id: str,
    items: Iterable[BundleItem],
    access_tree: AccessTree,
    *,
    apoptosis_threshold: float,
    evaporation_threshold: float,
    creation_epoch: int = 0,
    credential: CredentialEnvelope | None = None,
) -> ActiveBundle:
    bundle = ActiveBundle(
        bundle_id=bundle_id,
        creation_epoch=creation_epoch,
        items=tuple(items),
        access_tree=access_tree,
        apoptosis_threshold=apoptosis_threshold,
        evaporation_threshold=evaporation_threshold,
        credential=credential,
    )
    return seal_bundle(bundle)


def verify_integrity(bundle: ActiveBundle) -> bool:
    return hmac.compare_digest(bundle.integrity_digest, bundle.content_digest())


def evaluate_arrival(bundle: ActiveBundle, host: HostProfile) -> Decision:
    """τ < Ta 凋亡；Ta ≤ τ < Te 只保留敏感度 ≤ τ 的项；τ ≥ Te 完整保留。"""
    if not verify_integrity(bundle):
        logger.error("bundle %s 完整性校验失败, 按凋亡处理 (host=%s)", bundle.bundle_id, host.host_id)
        return Decision(kind=DecisionKind.APOPTOSIS, integrity_ok=False)

    tau = host.trust_level
    if tau < bundle.apoptosis_threshold:
        return Decision(kind=DecisionKind.APOPTOSIS)
    if tau < bundle.evaporation_threshold:
        retained = tuple(i.label for i in bundle.items if i.sensitivity <= tau)
        return Decision(kind=DecisionKind.EVAPORATE, retained_labels=retained)
    return Decision(kind=DecisionKind.FULL, retained_labels=tuple(bundle.labels))


def wipe_items(items: Iterable[BundleItem]) -> tuple[BundleItem, ...]:
    """用同长度的全零密文覆盖每个数据项。"""
    return tuple(i.model_copy(update={"ciphertext": bytes(len(i.ciphertext))}) for i in items)


def apoptose(bundle: ActiveBundle) -> ActiveBundle:
    """先零覆盖全部数据项、丢弃凭据，再移除数据项留下墓碑；对墓碑幂等。"""
    if bundle.tombstone:
        return bundle
    wiped = wipe_items(bundle.items)
    overwritten = bundle.model_copy(update={"items": wiped, "credential": None})
    logger.warning(
        "bundle %s 已凋亡, 零覆盖并清除 %d 个数据项 (%d 字节)",
        bundle.bundle_id,
        len(wiped),
        sum(len(i.ciphertext) for i in wiped),
    )
    return seal_bundle(overwritten.model_copy(update={"items": (), "tombstone": True}))


def evaporate(bundle: ActiveBundle, tau: float) -> ActiveBundle:
    """移除敏感度 > τ 的数据项；要求 Ta ≤ τ < Te。"""
    if not bundle.apoptosis_threshold <= tau < bundle.evaporation_threshold:
        raise ThresholdViolation(
            f"蒸发要求 {bundle.apoptosis_threshold} <= τ < {bundle.evaporation_threshold}, 实际 τ={tau}"
        )
    removed = [i for i in bundle.items if i.sensitivity > tau]
    if not removed:
        return bundle
    kept = tuple(i for i in bundle.items if i.sensitivity <= tau)
    logger.info("bundle %s 部分蒸发: 移除 %s", bundle.bundle_id, [i.label for i in removed])
    return seal_bundle(bundle.model_copy(update={"items": kept}))


def arrive(bundle: ActiveBundle, host: HostProfile) -> tuple[Decision, ActiveBundle]:
    """在模拟主机上执行判定并返回处理后的 bundle。"""
    decision = evaluate_arrival(bundle, host)
    if decision.kind is DecisionKind.APOPTOSIS:
        return decision, apoptose(bundle)
    if decision.kind is DecisionKind.EVAPORATE:
        return decision, evaporate(bundle, host.trust_level)
    return decision, bundle


def disclose_item(
    bundle: ActiveBundle,
    label: str,
    requester_key: AttributeKey,
    ctx: EvaluationContext,
    authorities: Authenticator,
) -> str:
    """只返回请求的那一项明文。"""
    if bundle.tombstone:
        raise BundleApoptosed(f"bundle {bundle.bundle_id} 已凋亡")
    if not verify_integrity(bundle):
        raise IntegrityFailure(f"bundle {bundle.bundle_id} 完整性校验失败")
    if bundle.item(label) is None:
        raise LabelUnknown(f"bundle {bundle.bundle_id} 中没有数据项 {label!r}")
    claims = authorities.open_claims(bundle, requester_key, ctx, [label])
    return claims[label]
