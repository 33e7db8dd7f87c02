"""有限域与秘密分享的数据结构。"""

from __future__ import annotations

from typing import Protocol

import sympy
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from ..canonical import BigInt


class RandomSource(Protocol):
    """可注入的随机源；``random.Random`` 即满足。"""

    def randrange(self, start: int, stop: int | None = None, step: int = 1) -> int: ...

    def randbytes(self, n: int) -> bytes: ...


class PrimeField(BaseModel):
    """素数域 GF(q)。构造时做确定性素性检查。"""

    model_config = ConfigDict(frozen=True)

    modulus: BigInt

    @field_validator("modulus")
    @classmethod
    def _check_prime(cls, value: int) -> int:
        if value <= 2 or not sympy.isprime(value):
            raise ValueError(f"域模数必须是大于 2 的素数: {value}")
        return value

    @classmethod
    def next_above(cls, bound: int) -> PrimeField:
        """大于 bound 的最小素数域（确定性搜索）。"""
        return cls(modulus=int(sympy.nextprime(max(bound, 2))))

    def contains(self, value: int) -> bool:
        return 0 <= value < self.modulus

    def inv(self, value: int) -> int:
        return pow(value % self.modulus, -1, self.modulus)

    def evaluate(self, coefficients: list[int], x: int) -> int:
        """Horner 求值，coefficients[0] 为常数项。"""
        acc = 0
        for c in reversed(coefficients):
            acc = (acc * x + c) % self.modulus
        return acc


class SharePoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    index: int
    value: BigInt

    @field_validator("index")
    @classmethod
    def _check_index(cls, value: int) -> int:
        if value == 0:
            raise ValueError("分片编号不能为 0")
        return value


class ShareSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    threshold: int
    count: int
    points: tuple[SharePoint, ...]
    field: PrimeField

    @model_validator(mode="after")
    def _check(self) -> ShareSet:
        if not 1 <= self.threshold <= self.count:
            raise ValueError(f"门限非法: t={self.threshold}, n={self.count}")
        indices = [p.index for p in self.points]
        if len(set(indices)) != len(indices):
            raise ValueError("分片编号必须两两不同")
        if any(not self.field.contains(p.value) for p in self.points):
            raise ValueError("分片值必须落在域内")
        return self

    def subset(self, indices: list[int]) -> list[SharePoint]:
        wanted = set(indices)
        return [p for p in self.points if p.index in wanted]


class AdditiveShareVector(BaseModel):
    """加法分享；modulus 为空表示在整数上分享（允许负值）。"""

    model_config = ConfigDict(frozen=True)

    k: int
    values: tuple[BigInt, ...]
    modulus: BigInt | None = None

    @model_validator(mode="after")
    def _check(self) -> AdditiveShareVector:
        if len(self.values) != self.k:
            raise ValueError(f"加法分享长度 {len(self.values)} 与 k={self.k} 不一致")
        if self.modulus is not None and self.modulus <= 0:
            raise ValueError("加法分享模数必须为正")
        return self
