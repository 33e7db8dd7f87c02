"""属性撤销列表（ARL）：单一维护方写入，其余参与方只读副本。"""

from __future__ import annotations

import logging
from collections.abc import Iterable

from pydantic import BaseModel, ConfigDict

from ..errors import NotMaintainer
from ..netsim import Network
from .tree import AttributeId

logger = logging.getLogger(__name__)

ARL_UPDATE_KIND = "arl.update"


class RevocationList(BaseModel):
    model_config = ConfigDict(frozen=True)

    version: int = 0
    revoked_users: frozenset[str] = frozenset()
    # (userId, "ns/name")
    revoked_grants: frozenset[tuple[str, str]] = frozenset()
    maintainer_party_id: int = 1

    def denies(self, identity_path: Iterable[str], attribute: AttributeId | None = None) -> bool:
        """路径上任一成员被整体撤销，或 (成员, 属性) 被撤销时返回 True。"""
        attribute_text = str(attribute) if attribute is not None else None
        for member in identity_path:
            if member in self.revoked_users:
                return True
            if attribute_text is not None and (member, attribute_text) in self.revoked_grants:
                return True
        return False

    def revokes_user(self, identity_path: Iterable[str]) -> bool:
        return self.denies(identity_path)


RevocationTarget = str | tuple[str, AttributeId | str]


def revoke(
    arl: RevocationList,
    target: RevocationTarget,
    *,
    caller: int,
    network: Network | None = None,
) -> RevocationList:
    """加入撤销目标并递增版本；有网络时由维护方广播新副本。"""
    if caller != arl.maintainer_party_id:
        raise NotMaintainer(f"参与方 {caller} 不是撤销列表维护方 (维护方为 {arl.maintainer_party_id})")

    if isinstance(target, str):
        updated = arl.model_copy(
            update={"version": arl.version + 1, "revoked_users": arl.revoked_users | {target}}
        )
        logger.info("撤销用户: %s, 新版本: %d", target, updated.version)
    else:
        user_id, attribute = target
        grant = (user_id, str(attribute))
        updated = arl.model_copy(
            update={"version": arl.version + 1, "revoked_grants": arl.revoked_grants | {grant}}
        )
        logger.info("撤销属性授权: %s -> %s, 新版本: %d", user_id, grant[1], updated.version)

    if network is not None:
        network.broadcast(caller, ARL_UPDATE_KIND, updated)
        network.advance()
    return updated
