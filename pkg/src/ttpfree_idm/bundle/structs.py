"""Active Bundle 的数据结构。"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from enum import Enum
from typing import Protocol

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..canonical import BigInt, HexBytes, digest
from ..policy import AccessTree, AttributeKey, EvaluationContext


class BundleItem(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str = Field(min_length=1)
    sensitivity: float = Field(ge=0.0, le=1.0)
    # 密文 ∥ 32 字节认证标签
    ciphertext: HexBytes


class HostProfile(BaseModel):
    model_config = ConfigDict(frozen=True)

    host_id: str
    trust_level: float = Field(ge=0.0, le=1.0)


class DecisionKind(str, Enum):
    APOPTOSIS = "Apoptosis"
    EVAPORATE = "Evaporate"
    FULL = "Full"


class Decision(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: DecisionKind
    retained_labels: tuple[str, ...] = ()
    integrity_ok: bool = True


class SealedShare(BaseModel):
    """第 i 方的会话密钥分片（已展开到访问树叶子），用该方的 sealKey_i 封装。"""

    model_config = ConfigDict(frozen=True)

    party_id: int
    sealed: HexBytes


class CredentialEnvelope(BaseModel):
    """凭据密文中除逐项密文以外的部分；会话密钥 K 本身从不存储。"""

    model_config = ConfigDict(frozen=True)

    owner: str
    rank: str
    threshold: int
    roster: tuple[int, ...]
    sealed_shares: tuple[SealedShare, ...]
    nonce: HexBytes
    # K ⊕ SHA-256(canonical(域内秘密))
    mask: HexBytes
    sharing_prime: BigInt

    @model_validator(mode="after")
    def _check(self) -> CredentialEnvelope:
        k = len(self.roster)
        if len(self.sealed_shares) != k:
            raise ValueError(f"封装分片数 {len(self.sealed_shares)} 与名册大小 {k} 不一致")
        if not 2 <= self.threshold <= k:
            raise ValueError(f"门限必须在 [2, {k}] 内, 实际 {self.threshold}")
        return self

    def sealed_for(self, party_id: int) -> SealedShare | None:
        return next((s for s in self.sealed_shares if s.party_id == party_id), None)


class ActiveBundle(BaseModel):
    model_config = ConfigDict(frozen=True)

    bundle_id: str
    creation_epoch: int = 0
    items: tuple[BundleItem, ...] = ()
    access_tree: AccessTree
    apoptosis_threshold: float = Field(ge=0.0, le=1.0)
    evaporation_threshold: float = Field(ge=0.0, le=1.0)
    tombstone: bool = False
    credential: CredentialEnvelope | None = None
    integrity_digest: HexBytes = b""

    @model_validator(mode="after")
    def _check(self) -> ActiveBundle:
        if self.apoptosis_threshold > self.evaporation_threshold:
            raise ValueError(
                f"凋亡阈值 Ta={self.apoptosis_threshold} 不能大于蒸发阈值 Te={self.evaporation_threshold}"
            )
        if self.tombstone and self.items:
            raise ValueError("墓碑 bundle 不能包含数据项")
        labels = [i.label for i in self.items]
        if len(set(labels)) != len(labels):
            raise ValueError("数据项标签必须唯一")
        return self

    @property
    def labels(self) -> list[str]:
        return [i.label for i in self.items]

    def item(self, label: str) -> BundleItem | None:
        return next((i for i in self.items if i.label == label), None)

    def content_digest(self) -> bytes:
        """除 integrity_digest 外全部字段的规范编码摘要（数据项按标签排序）。"""
        body = self.model_dump(mode="python", exclude={"integrity_digest"})
        body["items"] = sorted(body["items"], key=lambda i: i["label"])
        return digest(body)


class Authenticator(Protocol):
    """解封凭据所需的权威方入口（由 idm 层实现）。"""

    def open_claims(
        self,
        bundle: ActiveBundle,
        key: AttributeKey,
        ctx: EvaluationContext,
        labels: Sequence[str],
    ) -> Mapping[str, str]: ...


class BundlePolicy(BaseModel):
    """新建 bundle 时使用的阈值与各数据项敏感度。"""

    model_config = ConfigDict(frozen=True)

    apoptosis_threshold: float = Field(default=0.3, ge=0.0, le=1.0)
    evaporation_threshold: float = Field(default=0.8, ge=0.0, le=1.0)
    sensitivity: dict[str, float] = Field(default_factory=dict)
    # 未配置的数据项按最敏感处理
    default_sensitivity: float = Field(default=1.0, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check(self) -> BundlePolicy:
        if self.apoptosis_threshold > self.evaporation_threshold:
            raise ValueError("apoptosis_threshold 不能大于 evaporation_threshold")
        for label, value in self.sensitivity.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"数据项 {label} 的敏感度必须在 [0, 1] 内")
        return self

    def sensitivity_of(self, label: str) -> float:
        return self.sensitivity.get(label, self.default_sensitivity)
