"""权威方状态机：只使用本方 MK_i 与撤销列表副本做判断。"""

from __future__ import annotations

import json
import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from typing import Any

from pydantic import BaseModel, ConfigDict

from ..canonical import BigInt, HexBytes, canonical_bytes
from ..dkg import partial_decrypt
from ..errors import PolicyDenied, StaleRevocationList, Unsatisfied, UnknownUser
from ..netsim import as_int
from ..policy import (
    AccessTree,
    AttributeId,
    AttributeKey,
    EvaluationContext,
    RevocationList,
    binding_matches,
    issue_key_tags,
    satisfies,
    tag_matches,
    verify_attribute_tag,
)
from ..policy.tree import leaf_holds
from ..sharing import SharePoint
from .cipher import derive_key, open_sealed, seal
from .structs import IdentityRecord, PartySecret, PublicParameters

logger = logging.getLogger(__name__)

RELEASED = "Released"


def encode_leaves(leaves: Mapping[str, SharePoint]) -> dict[str, tuple[int, int]]:
    return {path: (p.index, p.value) for path, p in sorted(leaves.items())}


def decode_leaves(data: Mapping[str, Any]) -> dict[str, SharePoint]:
    return {path: SharePoint(index=int(v[0]), value=as_int(v[1])) for path, v in data.items()}


class AuthnRequest(BaseModel):
    """请求方发给某一方的认证请求：只含密钥标签与上下文，不含任何凭据明文。"""

    model_config = ConfigDict(frozen=True)

    key: AttributeKey
    ctx: EvaluationContext
    tree: AccessTree
    nonce: HexBytes
    sealed: HexBytes


class ShareRelease(BaseModel):
    model_config = ConfigDict(frozen=True)

    party_id: int
    verdict: str
    leaves: dict[str, tuple[int, BigInt]] = {}

    def points(self) -> dict[str, SharePoint]:
        return decode_leaves(self.leaves)


@dataclass
class AuthorityParty:
    secret: PartySecret
    params: PublicParameters

    @property
    def party_id(self) -> int:
        return self.secret.party_id

    @property
    def arl(self) -> RevocationList:
        return self.secret.arl

    # --- 注册与签发 ---

    def partial(self, value: int) -> int:
        return partial_decrypt(value, self.secret.share.d, self.params.public_key.n)

    def store_record(self, record: IdentityRecord) -> None:
        records = {**self.secret.records, record.user_id: record}
        self.secret = self.secret.model_copy(update={"records": records})

    def record_for(self, user_id: str) -> IdentityRecord | None:
        return self.secret.records.get(user_id)

    def issue_tags(
        self,
        user_id: str,
        attributes: Iterable[AttributeId],
        *,
        rank: str,
        expiry_epoch: int | None = None,
    ) -> dict[str, bytes]:
        """按本方保存的注册记录核对等级后签发标签。"""
        record = self.record_for(user_id)
        if record is None:
            raise UnknownUser(f"参与方 {self.party_id} 没有用户 {user_id} 的注册记录")
        if not self.params.rank_policy.permits(record.rank, rank):
            raise PolicyDenied(f"参与方 {self.party_id}: 用户 {user_id} 注册等级为 {record.rank}, 不能签发 {rank}")
        return issue_key_tags(self.secret.mk, user_id, attributes, rank=rank, expiry_epoch=expiry_epoch)

    def remember_pseudonym(self, pseudonym: str, user_id: str) -> None:
        pseudonyms = {**self.secret.pseudonyms, pseudonym: user_id}
        self.secret = self.secret.model_copy(update={"pseudonyms": pseudonyms})

    # --- 撤销列表副本 ---

    def apply_arl(self, arl: RevocationList) -> bool:
        if arl.version <= self.secret.arl.version:
            return False
        self.secret = self.secret.model_copy(update={"arl": arl})
        logger.debug("参与方 %d 撤销列表更新到版本 %d", self.party_id, arl.version)
        return True

    # --- 会话密钥分片 ---

    def _seal_key(self, nonce: bytes) -> bytes:
        return derive_key(self.secret.seal_key, nonce)

    def seal_leaves(self, nonce: bytes, leaves: Mapping[str, SharePoint]) -> bytes:
        return seal(self._seal_key(nonce), canonical_bytes(encode_leaves(leaves)))

    def _unseal_leaves(self, nonce: bytes, sealed: bytes) -> dict[str, SharePoint]:
        plaintext = open_sealed(self._seal_key(nonce), sealed)
        return decode_leaves(json.loads(plaintext.decode("utf-8")))

    def evaluate_request(self, request: AuthnRequest, maintainer_version: int) -> ShareRelease:
        """本方独立判断：过期、撤销、标签与策略都通过才释放已验证叶子的分片。"""
        key, ctx, tree = request.key, request.ctx, request.tree
        # 等级与过期链改动过的密钥在这里失配
        if not binding_matches(self.secret.mk, self.party_id, key):
            return ShareRelease(party_id=self.party_id, verdict="PolicyDenied")
        if key.expired(ctx.now_epoch):
            return ShareRelease(party_id=self.party_id, verdict="Expired")
        if self.arl.version < maintainer_version:
            raise StaleRevocationList(
                f"参与方 {self.party_id} 的撤销列表版本 {self.arl.version} 落后于 {maintainer_version}"
            )
        if self.arl.revokes_user(key.identity_path):
            return ShareRelease(party_id=self.party_id, verdict="Revoked")

        needed = tree.attribute_leaves()
        granted = {
            a
            for a in needed
            if verify_attribute_tag(
                self.party_id, self.secret.mk, key, a, self.arl, maintainer_version=maintainer_version
            )
        }
        if not satisfies(tree, granted, ctx):
            # 标签有效但因撤销而不满足时给出 Revoked
            valid = {a for a in needed if tag_matches(self.secret.mk, self.party_id, key, a)}
            verdict = "Revoked" if satisfies(tree, valid, ctx) else "PolicyDenied"
            return ShareRelease(party_id=self.party_id, verdict=verdict)

        leaves = self._unseal_leaves(request.nonce, request.sealed)
        released: dict[str, SharePoint] = {}
        for path, leaf in tree.iter_leaves():
            if path not in leaves:
                continue
            if leaf_holds(leaf, granted, ctx):
                released[path] = leaves[path]
        if not released:
            raise Unsatisfied(f"参与方 {self.party_id} 没有可释放的叶子分片")
        return ShareRelease(party_id=self.party_id, verdict=RELEASED, leaves=encode_leaves(released))
