"""状态目录：pk.json、party-<i>.secret.json、arl.json、bundles/、keys/、tokens/、groups/。

所有文件都是规范化 JSON，便于重放与比对。
"""

from __future__ import annotations

import json
import logging
import re
from pathlib import Path
from typing import TypeVar

from pydantic import BaseModel

from ..bundle import ActiveBundle, BundlePolicy
from ..canonical import canonical_text
from ..errors import UnknownUser, UsageError
from ..netsim import Network
from ..policy import AttributeKey, RevocationList
from .authority import AuthorityParty
from .structs import GroupAuthState, PartySecret, PublicParameters, SsoToken
from .system import IdmSystem

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)

_SAFE_NAME = re.compile(r"[^A-Za-z0-9._-]+")


def _safe(name: str) -> str:
    cleaned = _SAFE_NAME.sub("_", name).strip("._")
    if not cleaned:
        raise UsageError(f"无法用作文件名: {name!r}")
    return cleaned


def write_model(path: Path, model: BaseModel) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_text(model) + "\n", encoding="utf-8")
    return path


def read_model(path: Path, model_type: type[ModelT]) -> ModelT:
    if not path.exists():
        raise UsageError(f"文件不存在: {path}")
    return model_type.model_validate(json.loads(path.read_text(encoding="utf-8")))


class StateStore:
    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    @property
    def pk_path(self) -> Path:
        return self.root / "pk.json"

    @property
    def arl_path(self) -> Path:
        return self.root / "arl.json"

    def party_path(self, party_id: int) -> Path:
        return self.root / f"party-{party_id}.secret.json"

    def bundle_path(self, bundle_id: str) -> Path:
        return self.root / "bundles" / f"{_safe(bundle_id)}.ab.json"

    def key_path(self, user_id: str) -> Path:
        return self.root / "keys" / f"{_safe(user_id)}.key.json"

    def token_path(self, token_id: str) -> Path:
        return self.root / "tokens" / f"{_safe(token_id)}.json"

    def group_path(self, group_id: str) -> Path:
        return self.root / "groups" / f"{_safe(group_id)}.json"

    # --- 系统整体 ---

    def exists(self) -> bool:
        return self.pk_path.exists()

    def save_system(self, system: IdmSystem) -> None:
        write_model(self.pk_path, system.params)
        for pid, party in sorted(system.parties.items()):
            write_model(self.party_path(pid), party.secret)
        write_model(self.arl_path, system.arl)
        logger.info("状态已保存到 %s", self.root)

    def load_public(self) -> PublicParameters:
        if not self.pk_path.exists():
            raise UsageError(f"状态目录 {self.root} 中没有 pk.json, 请先运行 setup")
        return read_model(self.pk_path, PublicParameters)

    def load_system(self, network: Network, bundle_policy: BundlePolicy | None = None) -> IdmSystem:
        params = self.load_public()
        parties = {
            pid: AuthorityParty(secret=read_model(self.party_path(pid), PartySecret), params=params)
            for pid in range(1, params.k + 1)
        }
        if self.arl_path.exists():
            arl = read_model(self.arl_path, RevocationList)
            maintainer = parties[params.maintainer_party_id]
            maintainer.apply_arl(arl)
        policy = bundle_policy or BundlePolicy()
        return IdmSystem(network=network, params=params, parties=parties, bundle_policy=policy)

    # --- 单个对象 ---

    def save_bundle(self, bundle: ActiveBundle) -> Path:
        return write_model(self.bundle_path(bundle.bundle_id), bundle)

    def save_key(self, key: AttributeKey) -> Path:
        return write_model(self.key_path(key.user_id), key)

    def load_key_for(self, user_id: str) -> AttributeKey:
        path = self.key_path(user_id)
        if not path.exists():
            raise UnknownUser(f"没有用户 {user_id} 的属性密钥")
        return read_model(path, AttributeKey)

    def save_token(self, token: SsoToken) -> Path:
        return write_model(self.token_path(token.token_id), token)

    def save_group(self, state: GroupAuthState) -> Path:
        return write_model(self.group_path(state.group_id), state)

    def load_group(self, group_id: str) -> GroupAuthState:
        return read_model(self.group_path(group_id), GroupAuthState)
