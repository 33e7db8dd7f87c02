"""属性密钥：各方 mk_i 独立签发的哈希标签，支持离线委托。

标签绑定 (userId, 属性, 等级, 过期纪元)；委托链上每一环把 (孩子, 孩子的过期纪元) 再折叠一次。
另有一个按参与方排列的绑定标签覆盖整把密钥，持有者改动等级或过期时间都会让它失配。
"""

from __future__ import annotations

import hmac
import logging
from collections.abc import Iterable, Mapping, Sequence

from pydantic import BaseModel, ConfigDict, model_validator

from ..canonical import HexBytes, canonical_bytes, sha256
from ..errors import NotASubset, SelfDelegation, StaleRevocationList
from .revocation import RevocationList
from .tree import AttributeId

logger = logging.getLogger(__name__)

DELEGATION_MARK = b"dlg"
# 不是合法的 ns/name，不会与属性冲突
BINDING_LABEL = "#binding"

Link = tuple[str, int | None]


def issue_tag(
    mk: bytes,
    user_id: str,
    label: AttributeId | str,
    *,
    rank: str,
    expiry_epoch: int | None = None,
    chain: Sequence[Link] = (),
) -> bytes:
    tag = sha256(mk, canonical_bytes([user_id, str(label), rank, expiry_epoch]))
    for child, child_expiry in chain:
        tag = fold_tag(tag, child, child_expiry)
    return tag


def fold_tag(tag: bytes, child_user_id: str, expiry_epoch: int | None = None) -> bytes:
    return sha256(tag, DELEGATION_MARK, canonical_bytes([child_user_id, expiry_epoch]))


def issue_key_tags(
    mk: bytes,
    user_id: str,
    attributes: Iterable[AttributeId],
    *,
    rank: str,
    expiry_epoch: int | None = None,
) -> dict[str, bytes]:
    """一方为一把密钥签发的全部标签：每个属性一个，外加绑定标签。"""
    labels = [*(str(a) for a in attributes), BINDING_LABEL]
    return {label: issue_tag(mk, user_id, label, rank=rank, expiry_epoch=expiry_epoch) for label in labels}


class AttributeKey(BaseModel):
    """用户的属性密钥。tags 以 ``ns/name`` 为键，值按参与方 1..k 排列。

    expiry_chain 与 identity_path 一一对应，记录每一环声明的过期纪元。
    """

    model_config = ConfigDict(frozen=True)

    user_id: str
    attributes: frozenset[AttributeId]
    rank: str
    epoch: int = 0
    tags: dict[str, tuple[HexBytes, ...]]
    binding: tuple[HexBytes, ...] = ()
    delegation_chain: tuple[str, ...] = ()
    expiry_chain: tuple[int | None, ...] = ()

    @model_validator(mode="after")
    def _check(self) -> AttributeKey:
        if not self.user_id:
            raise ValueError("userId 不能为空")
        names = {str(a) for a in self.attributes}
        if names != set(self.tags):
            raise ValueError("每个属性必须恰好对应一组标签")
        counts = {len(v) for v in self.tags.values()}
        if len(counts) > 1:
            raise ValueError("各属性的标签数量必须一致")
        if self.expiry_chain and len(self.expiry_chain) != len(self.identity_path):
            raise ValueError("expiry_chain 的长度必须与委托路径一致")
        return self

    @classmethod
    def assemble(
        cls,
        user_id: str,
        attributes: Iterable[AttributeId],
        by_party: Mapping[int, Mapping[str, bytes]],
        *,
        rank: str,
        epoch: int = 0,
        expiry_epoch: int | None = None,
    ) -> AttributeKey:
        """把各方 issue_key_tags 的结果按参与方编号组装成一把密钥。"""
        granted = frozenset(attributes)
        parties = sorted(by_party)
        return cls(
            user_id=user_id,
            attributes=granted,
            rank=rank,
            epoch=epoch,
            tags={str(a): tuple(by_party[pid][str(a)] for pid in parties) for a in granted},
            binding=tuple(by_party[pid][BINDING_LABEL] for pid in parties),
            expiry_chain=(expiry_epoch,),
        )

    @property
    def identity_path(self) -> tuple[str, ...]:
        """委托路径：根被授权者 … 当前持有者。"""
        return (*self.delegation_chain, self.user_id)

    @property
    def link_expiries(self) -> tuple[int | None, ...]:
        return self.expiry_chain or (None,) * len(self.identity_path)

    @property
    def expiry_epoch(self) -> int | None:
        """委托链上最早的过期纪元。"""
        stated = [e for e in self.link_expiries if e is not None]
        return min(stated) if stated else None

    @property
    def party_count(self) -> int:
        return next((len(v) for v in self.tags.values()), len(self.binding))

    def tag_for(self, party_id: int, attribute: AttributeId) -> bytes | None:
        tags = self.tags.get(str(attribute))
        if tags is None or not 1 <= party_id <= len(tags):
            return None
        return tags[party_id - 1]

    def binding_for(self, party_id: int) -> bytes | None:
        if not 1 <= party_id <= len(self.binding):
            return None
        return self.binding[party_id - 1]

    def expired(self, now_epoch: int) -> bool:
        expiry = self.expiry_epoch
        return expiry is not None and now_epoch > expiry

    def sorted_attributes(self) -> list[AttributeId]:
        return sorted(self.attributes, key=str)


def _expected_tag(mk: bytes, key: AttributeKey, label: AttributeId | str) -> bytes:
    root, *links = key.identity_path
    root_expiry, *link_expiries = key.link_expiries
    chain = list(zip(links, link_expiries, strict=True))
    return issue_tag(mk, root, label, rank=key.rank, expiry_epoch=root_expiry, chain=chain)


def tag_matches(mk: bytes, party_id: int, key: AttributeKey, attribute: AttributeId) -> bool:
    presented = key.tag_for(party_id, attribute)
    if presented is None or attribute not in key.attributes:
        return False
    return hmac.compare_digest(presented, _expected_tag(mk, key, attribute))


def binding_matches(mk: bytes, party_id: int, key: AttributeKey) -> bool:
    """重算绑定标签：等级、过期链与委托路径都未被改动时才成立。"""
    presented = key.binding_for(party_id)
    if presented is None:
        return False
    return hmac.compare_digest(presented, _expected_tag(mk, key, BINDING_LABEL))


def verify_attribute_tag(
    party_id: int,
    mk: bytes,
    key: AttributeKey,
    attribute: AttributeId,
    arl: RevocationList,
    *,
    maintainer_version: int | None = None,
) -> bool:
    """本方重算标签并检查撤销列表；本地副本落后于维护方时拒绝判断。"""
    if maintainer_version is not None and arl.version < maintainer_version:
        raise StaleRevocationList(
            f"参与方 {party_id} 的撤销列表版本 {arl.version} 落后于 {maintainer_version}"
        )
    if not tag_matches(mk, party_id, key, attribute):
        return False
    return not arl.denies(key.identity_path, attribute)


def delegate(
    parent: AttributeKey,
    child_user_id: str,
    subset: Iterable[AttributeId],
    *,
    expiry_epoch: int | None = None,
) -> AttributeKey:
    """父密钥持有者离线为孩子派生属性更少的密钥，无需联系任何权威方。"""
    wanted = frozenset(subset)
    extra = wanted - parent.attributes
    if extra:
        raise NotASubset(f"委托属性不是父密钥属性的子集: {sorted(str(a) for a in extra)}")
    if child_user_id in parent.identity_path:
        raise SelfDelegation(f"不能委托给委托链上已有的用户: {child_user_id}")

    # 每一环的过期纪元都折叠进标签，生效值取整条链的最小值，只能收紧
    tags = {
        str(a): tuple(fold_tag(tag, child_user_id, expiry_epoch) for tag in parent.tags[str(a)]) for a in wanted
    }
    binding = tuple(fold_tag(tag, child_user_id, expiry_epoch) for tag in parent.binding)

    logger.info("离线委托: %s -> %s, 属性数: %d", parent.user_id, child_user_id, len(wanted))
    return AttributeKey(
        user_id=child_user_id,
        attributes=wanted,
        rank=parent.rank,
        epoch=parent.epoch,
        tags=tags,
        binding=binding,
        delegation_chain=parent.identity_path,
        expiry_chain=(*parent.link_expiries, expiry_epoch),
    )
