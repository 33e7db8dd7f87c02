"""加法秘密分享（k-of-k）。"""

from __future__ import annotations

from ..errors import PartyCountTooSmall
from .structs import AdditiveShareVector, RandomSource

# 整数上分享时的统计隐藏参数（比特）
STATISTICAL_SECURITY_BITS = 40


def additive_share(secret: int, k: int, modulus: int | None, rng: RandomSource) -> AdditiveShareVector:
    """前 k-1 个值随机，最后一个取残差。"""
    if k < 2:
        raise PartyCountTooSmall(f"加法分享至少需要 2 方, 实际 k={k}")

    if modulus is not None:
        values = [rng.randrange(modulus) for _ in range(k - 1)]
        values.append((secret - sum(values)) % modulus)
    else:
        bound = 1 << (max(secret.bit_length(), 1) + STATISTICAL_SECURITY_BITS)
        values = [rng.randrange(-bound, bound) for _ in range(k - 1)]
        values.append(secret - sum(values))
    return AdditiveShareVector(k=k, values=tuple(values), modulus=modulus)


def additive_reconstruct(vector: AdditiveShareVector) -> int:
    total = sum(vector.values)
    return total % vector.modulus if vector.modulus is not None else total
