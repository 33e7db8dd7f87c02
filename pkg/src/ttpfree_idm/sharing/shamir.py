"""Shamir 门限分享、去重与零分享。"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence

from ..canonical import canonical_bytes, sha256
from ..errors import FieldTooSmall, IndexCollision, InsufficientShares, SecretOutOfField, ThresholdOutOfRange
from .structs import PrimeField, RandomSource, SharePoint, ShareSet

logger = logging.getLogger(__name__)


def share_digest(point: SharePoint, modulus: int = 0) -> bytes:
    """分片的哈希：SHA-256(canonical([index, value, modulus]))。"""
    return sha256(canonical_bytes([point.index, point.value, modulus]))


def dedup_shares(points: Iterable[SharePoint], modulus: int = 0) -> list[SharePoint]:
    """按哈希去掉完全重复的分片（保留首次出现）；同编号不同值视为冲突。"""
    seen_digests: set[bytes] = set()
    by_index: dict[int, SharePoint] = {}
    out: list[SharePoint] = []
    for point in points:
        key = share_digest(point, modulus)
        if key in seen_digests:
            continue
        existing = by_index.get(point.index)
        if existing is not None:
            raise IndexCollision(f"分片编号 {point.index} 出现两个不同的值")
        seen_digests.add(key)
        by_index[point.index] = point
        out.append(point)
    return out


def _random_coefficients(count: int, field: PrimeField, rng: RandomSource) -> list[int]:
    return [rng.randrange(field.modulus) for _ in range(count)]


def shamir_share(secret: int, t: int, n: int, field: PrimeField, rng: RandomSource) -> ShareSet:
    """用 t-1 次多项式 f（f(0)=secret）把秘密分给 n 方，第 i 方拿到 (i, f(i))。"""
    if t < 1 or t > n:
        raise ThresholdOutOfRange(f"门限非法: t={t}, n={n}")
    if not field.contains(secret):
        raise SecretOutOfField(f"秘密 {secret} 不在 GF({field.modulus}) 内")
    if n >= field.modulus:
        raise FieldTooSmall(f"参与方数 n={n} 必须小于域模数 {field.modulus}")

    coefficients = [secret, *_random_coefficients(t - 1, field, rng)]
    points = tuple(SharePoint(index=i, value=field.evaluate(coefficients, i)) for i in range(1, n + 1))
    return ShareSet(threshold=t, count=n, points=points, field=field)


def zero_share(degree: int, n: int, field: PrimeField, rng: RandomSource) -> ShareSet:
    """h(0)=0 的 degree 次随机多项式在 1..n 处的取值（BGW 乘法的掩码）。"""
    if degree < 1 or n <= degree:
        raise ThresholdOutOfRange(f"零分享需要 1 <= degree < n, 实际 degree={degree}, n={n}")
    if n >= field.modulus:
        raise FieldTooSmall(f"参与方数 n={n} 必须小于域模数 {field.modulus}")
    coefficients = [0, *_random_coefficients(degree, field, rng)]
    points = tuple(SharePoint(index=i, value=field.evaluate(coefficients, i)) for i in range(1, n + 1))
    return ShareSet(threshold=degree + 1, count=n, points=points, field=field)


def lagrange_at_zero(points: Sequence[SharePoint], field: PrimeField) -> int:
    q = field.modulus
    total = 0
    for j, pj in enumerate(points):
        num, den = 1, 1
        for m, pm in enumerate(points):
            if m == j:
                continue
            num = num * pm.index % q
            den = den * (pm.index - pj.index) % q
        total = (total + pj.value * num * pow(den, -1, q)) % q
    return total


def shamir_reconstruct(points: Iterable[SharePoint], t: int, field: PrimeField) -> int:
    """去重后按编号升序取前 t 个点，在 0 处做 Lagrange 插值。"""
    distinct = dedup_shares(points, field.modulus)
    if len(distinct) < t:
        raise InsufficientShares(f"有效分片 {len(distinct)} 个, 少于门限 {t}")
    chosen = sorted(distinct, key=lambda p: p.index)[:t]
    return lagrange_at_zero(chosen, field)
