"""数论工具：素数表、公开 N 上的试除、Jacobi 符号。"""

from __future__ import annotations

import math
from functools import lru_cache

import sympy


@lru_cache(maxsize=32)
def primorial(bound: int) -> int:
    """所有 <= bound 的素数之积。"""
    return math.prod(sympy.primerange(2, bound + 1))


def trial_division_public(n: int, bound: int) -> bool:
    """公开 N 上的试除：存在素数 l <= bound 整除 N 时拒绝（返回 False）。"""
    if n <= 1:
        raise ValueError(f"试除要求 N > 1, 实际 {n}")
    return math.gcd(n, primorial(bound)) == 1


def jacobi(a: int, n: int) -> int:
    return int(sympy.jacobi_symbol(a % n, n))
