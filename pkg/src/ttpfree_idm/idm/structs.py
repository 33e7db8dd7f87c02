"""IDM 协议的数据结构。"""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..canonical import BigInt, HexBytes
from ..dkg import PrivateShare, RsaPublicKey, ShareBackup
from ..errors import ConfigError, UnknownRank
from ..policy import RevocationList
from ..sharing import SharePoint


class IdentityRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    user_id: str = Field(min_length=1)
    claims: dict[str, str]
    rank: str


class RankPolicy(BaseModel):
    """身份等级 → 解密所需参与方数 t。ordering 从低权限到高权限排列。"""

    model_config = ConfigDict(frozen=True)

    thresholds: dict[str, int]
    ordering: tuple[str, ...] = ()
    default_rank: str | None = None
    # None 表示所有等级都可获得 SSO 令牌
    sso_ranks: tuple[str, ...] | None = None
    # 操作安全级别对 t 的附加量，最终结果截断到 k
    operation_levels: dict[str, int] = Field(default_factory=dict)

    @classmethod
    def default_for(cls, k: int) -> RankPolicy:
        return cls(thresholds={"regular": 2, "senior": max(2, k - 1)}, ordering=("regular", "senior"))

    def validate_for(self, k: int) -> RankPolicy:
        if not self.thresholds:
            raise ConfigError("配置非法: rank_policy.thresholds 不能为空")
        for rank, t in self.thresholds.items():
            if not 2 <= t <= k:
                raise ConfigError(f"配置非法: 等级 {rank} 的 t={t} 必须在 [2, {k}] 内")
        for rank in self.ordering:
            if rank not in self.thresholds:
                raise ConfigError(f"配置非法: rank_policy.ordering 中的等级 {rank} 没有门限")
        for lower, higher in zip(self.ordering, self.ordering[1:], strict=False):
            if self.thresholds[lower] > self.thresholds[higher]:
                raise ConfigError(f"配置非法: 高等级 {higher} 的 t 不能小于低等级 {lower}")
        if self.default_rank is not None and self.default_rank not in self.thresholds:
            raise ConfigError(f"配置非法: rank_policy.default_rank={self.default_rank} 没有门限")
        for rank in self.sso_ranks or ():
            if rank not in self.thresholds:
                raise ConfigError(f"配置非法: rank_policy.sso_ranks 中的等级 {rank} 没有门限")
        for op, bump in self.operation_levels.items():
            if bump < 0:
                raise ConfigError(f"配置非法: 操作级别 {op} 的附加量必须 >= 0")
        return self

    def resolve_rank(self, rank: str) -> str:
        if rank in self.thresholds:
            return rank
        if self.default_rank is not None:
            return self.default_rank
        raise UnknownRank(f"未知身份等级: {rank}")

    def threshold_for(self, rank: str, k: int, operation: str | None = None) -> int:
        t = self.thresholds[self.resolve_rank(rank)]
        if operation is not None:
            if operation not in self.operation_levels:
                raise UnknownRank(f"未知操作安全级别: {operation}")
            t += self.operation_levels[operation]
        return min(t, k)

    def permits(self, enrolled: str, requested: str) -> bool:
        """请求的等级不高于注册等级。不在 ordering 中的等级只能与注册等级相同。"""
        enrolled, requested = self.resolve_rank(enrolled), self.resolve_rank(requested)
        if enrolled == requested:
            return True
        if enrolled not in self.ordering or requested not in self.ordering:
            return False
        return self.ordering.index(requested) <= self.ordering.index(enrolled)

    def allows_sso(self, rank: str) -> bool:
        return self.sso_ranks is None or self.resolve_rank(rank) in self.sso_ranks


class PublicParameters(BaseModel):
    """公开参数 PK。"""

    model_config = ConfigDict(frozen=True)

    public_key: RsaPublicKey
    k: int
    correction: int
    sharing_prime: BigInt
    bgw_prime: BigInt
    backup_modulus: BigInt
    backup_threshold: int
    rank_policy: RankPolicy
    maintainer_party_id: int = 1


class PartySecret(BaseModel):
    """第 i 方的私有状态 MK_i 及其保管的数据，从不以明文离开该方。"""

    model_config = ConfigDict(frozen=True)

    party_id: int
    mk: HexBytes
    seal_key: HexBytes
    share: PrivateShare
    # 本方保管的其他方 d_j 备份
    backups: tuple[ShareBackup, ...] = ()
    records: dict[str, IdentityRecord] = Field(default_factory=dict)
    arl: RevocationList = Field(default_factory=RevocationList)
    # 假名 → userId，只保存在权威方
    pseudonyms: dict[str, str] = Field(default_factory=dict)


class SsoToken(BaseModel):
    model_config = ConfigDict(frozen=True)

    subject: str
    audiences: tuple[str, ...]
    issued_epoch: int
    expiry_epoch: int
    nonce: HexBytes
    signature: BigInt = 0

    @model_validator(mode="after")
    def _check(self) -> SsoToken:
        if self.issued_epoch >= self.expiry_epoch:
            raise ValueError("SSO 令牌要求 issuedEpoch < expiryEpoch")
        return self

    def body(self) -> dict[str, Any]:
        return self.model_dump(mode="python", exclude={"signature"})

    @property
    def token_id(self) -> str:
        return self.nonce.hex()


class GroupAuthState(BaseModel):
    model_config = ConfigDict(frozen=True)

    group_id: str
    epoch: int
    commitment: HexBytes
    member_shares: dict[str, SharePoint]
    t: int
    n: int
    field_modulus: BigInt
    consumed: bool = False
