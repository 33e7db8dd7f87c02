"""分布式 RSA 密钥生成的数据结构。"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import sympy
from pydantic import BaseModel, ConfigDict

from ..canonical import BigInt
from ..errors import ConfigError
from ..netsim import Metrics
from ..sharing import PrimeField, SharePoint


def default_bgw_bound(prime_share_bits: int, k: int) -> int:
    ceil_log2_k = (k - 1).bit_length()
    return 1 << (2 * (prime_share_bits + ceil_log2_k))


@dataclass(frozen=True)
class KeygenConfig:
    k: int = 3
    prime_share_bits: int = 16
    trial_division_bound: int = 200
    biprimality_rounds: int = 40
    public_exponent: int = 65537
    # 未指定时取大于 2^(2·(bits + ceil(log2 k))) 的最小素数
    bgw_prime: int | None = None
    max_attempts: int = 2000
    batch_size: int = 1
    # 私钥分片备份门限；未指定时取 ⌊k/2⌋ + 1
    backup_threshold: int | None = None

    def __post_init__(self) -> None:
        if self.k < 3:
            raise ConfigError(f"配置非法: keygen.k 必须 >= 3, 实际 {self.k}")
        if self.prime_share_bits < 4:
            raise ConfigError("配置非法: keygen.prime_share_bits 必须 >= 4")
        e = self.public_exponent
        if e < 3 or e % 2 == 0 or not sympy.isprime(e):
            raise ConfigError(f"配置非法: keygen.public_exponent 必须是 >= 3 的奇素数, 实际 {e}")
        if self.biprimality_rounds < 1:
            raise ConfigError("配置非法: keygen.biprimality_rounds 必须 >= 1")
        if self.batch_size < 1:
            raise ConfigError("配置非法: keygen.batch_size 必须 >= 1")
        if self.max_attempts < 1:
            raise ConfigError("配置非法: keygen.max_attempts 必须 >= 1")
        if self.trial_division_bound < 2:
            raise ConfigError("配置非法: keygen.trial_division_bound 必须 >= 2")
        bound = default_bgw_bound(self.prime_share_bits, self.k)
        if self.bgw_prime is not None and (self.bgw_prime <= bound or not sympy.isprime(self.bgw_prime)):
            raise ConfigError(f"配置非法: keygen.bgw_prime 必须是大于 2^{bound.bit_length() - 1} 的素数")
        if self.backup_threshold is not None and not 2 <= self.backup_threshold <= self.k:
            raise ConfigError(f"配置非法: keygen.backup_threshold 必须在 [2, {self.k}] 内")

    @cached_property
    def bgw_field(self) -> PrimeField:
        if self.bgw_prime is not None:
            return PrimeField(modulus=self.bgw_prime)
        return PrimeField.next_above(default_bgw_bound(self.prime_share_bits, self.k))

    @property
    def effective_backup_threshold(self) -> int:
        return self.backup_threshold if self.backup_threshold is not None else self.k // 2 + 1


class RsaPublicKey(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: BigInt
    e: int


class PrivateShare(BaseModel):
    """某一方的加法分片：p_i, q_i, φ_i, d_i 与公开修正值 c。"""

    model_config = ConfigDict(frozen=True)

    party_id: int
    p: BigInt
    q: BigInt
    phi: BigInt
    d: BigInt
    correction: int


class BiprimalityRound(BaseModel):
    model_config = ConfigDict(frozen=True)

    g: BigInt
    values: dict[int, BigInt]
    accepted: bool


class ShareBackup(BaseModel):
    """owner 的 d_i 在 GF(Q) 上的 t-of-k Shamir 子分片，由 holder 保管。"""

    model_config = ConfigDict(frozen=True)

    owner_party_id: int
    holder_party_id: int
    sub_share: SharePoint
    threshold: int
    field_modulus: BigInt
    # d_i 先平移 k·N 再分享，保证负值唯一嵌入
    offset: BigInt


class Partial(BaseModel):
    model_config = ConfigDict(frozen=True)

    party_id: int
    value: BigInt


@dataclass
class KeygenResult:
    public_key: RsaPublicKey
    shares: dict[int, PrivateShare]
    # holder -> 其保管的其他方备份
    backups: dict[int, list[ShareBackup]]
    metrics: Metrics
    bgw_prime: int
    backup_modulus: int
    attempts: int = 0
    rejections: dict[str, int] = field(default_factory=dict)
