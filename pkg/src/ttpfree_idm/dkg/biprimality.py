"""候选分片生成、共享模数计算与分布式双素性检验。"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass, field

from ..errors import FieldTooSmall
from ..netsim import Network
from ..sharing import PrimeField, RandomSource, bgw_shared_product, bgw_shared_products
from .numbers import jacobi
from .structs import BiprimalityRound, KeygenConfig

logger = logging.getLogger(__name__)

Candidate = tuple[int, int]


def generate_candidate_shares(cfg: KeygenConfig, party_id: int, rng: RandomSource) -> Candidate:
    """第 1 方的 p_1, q_1 ≡ 3 (mod 4)，其余方 ≡ 0 (mod 4)，保证 Σp ≡ Σq ≡ 3 (mod 4)。"""
    lo = 1 << (cfg.prime_share_bits - 1)
    hi = 1 << cfg.prime_share_bits
    residue = 3 if party_id == 1 else 0

    def draw() -> int:
        r = rng.randrange(lo, hi)
        return r - (r % 4) + residue

    return draw(), draw()


def compute_shared_modulus(
    candidates: Mapping[int, Candidate],
    field: PrimeField,
    *,
    network: Network | None = None,
    seed: int = 0,
) -> int:
    """N = (Σp_i)(Σq_i)，通过 BGW 计算，任何一方都看不到其他方的分片。"""
    k = len(candidates)
    ps = [candidates[pid][0] for pid in range(1, k + 1)]
    qs = [candidates[pid][1] for pid in range(1, k + 1)]
    return bgw_shared_product(ps, qs, field, k, network=network, seed=seed).value


def compute_shared_moduli(
    batches: Mapping[int, list[Candidate]],
    field: PrimeField,
    network: Network,
    *,
    purpose: str,
) -> list[int]:
    """一次 BGW 运行并行计算一批候选的 N。"""
    sizes = {len(v) for v in batches.values()}
    if len(sizes) != 1:
        raise ValueError("各方候选批大小必须一致")
    bound = 0
    for idx in range(sizes.pop()):
        total_p = sum(batches[pid][idx][0] for pid in batches)
        total_q = sum(batches[pid][idx][1] for pid in batches)
        bound = max(bound, total_p * total_q)
    if field.modulus <= bound:
        raise FieldTooSmall(f"BGW 素数 {field.modulus} 不足以容纳候选 N")
    return bgw_shared_products(batches, field, network, purpose=purpose)


@dataclass
class BiprimalityOutcome:
    accepted: bool
    rounds: list[BiprimalityRound] = field(default_factory=list)
    # g 与 N 不互素时直接暴露的因子（候选作废）
    leaked_factor: int | None = None


def _party_values(n: int, g: int, shares: Mapping[int, Candidate]) -> dict[int, int]:
    values: dict[int, int] = {}
    for pid, (p_i, q_i) in shares.items():
        if pid == 1:
            exponent = (n - p_i - q_i + 1) // 4
        else:
            exponent = (p_i + q_i) // 4
        values[pid] = pow(g, exponent, n)
    return values


def biprimality_test(
    n: int,
    shares: Mapping[int, Candidate],
    rounds: int,
    rng: RandomSource,
    *,
    network: Network | None = None,
) -> BiprimalityOutcome:
    """每轮取 Jacobi(g/N)=+1 的 g，检查 v_1 ≡ ±Π_{i≥2} v_i (mod N)；全部通过才接受。"""
    if n % 4 != 1:
        raise ValueError(f"双素性检验要求 N ≡ 1 (mod 4), 实际 N mod 4 = {n % 4}")

    outcome = BiprimalityOutcome(accepted=True)
    for round_idx in range(rounds):
        while True:
            g = rng.randrange(2, n)
            factor = math.gcd(g, n)
            if factor != 1:
                logger.info("双素性检验第 %d 轮采样到非互素 g, 候选作废", round_idx + 1)
                outcome.accepted = False
                outcome.leaked_factor = factor
                return outcome
            if jacobi(g, n) == 1:
                break

        if network is not None:
            network.broadcast(1, "biprimality.g", {"g": g})
            network.advance()

        values = _party_values(n, g, shares)
        if network is not None:
            for pid in sorted(values):
                network.broadcast(pid, "biprimality.v", {"v": values[pid]})
            network.advance()

        rest = 1
        for pid, v in values.items():
            if pid != 1:
                rest = rest * v % n
        accepted = values[1] in (rest, (-rest) % n)
        outcome.rounds.append(BiprimalityRound(g=g, values=values, accepted=accepted))
        if not accepted:
            outcome.accepted = False
            return outcome
    return outcome
