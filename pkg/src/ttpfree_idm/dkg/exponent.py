"""共享私钥指数的推导：公开 ζ = φ(N) mod e，各方本地取整，再用试解密找公开修正值。"""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass

from ..errors import CorrectionNotFound, NotInvertible
from ..netsim import Network, as_int
from ..sharing import additive_share
from .biprimality import Candidate
from .threshold import partial_decrypt

logger = logging.getLogger(__name__)

# 试解密消息，N 为奇数保证 gcd(2, N) = 1
TEST_MESSAGE = 2


@dataclass
class ExponentResult:
    d_shares: dict[int, int]
    correction: int
    zeta: int
    t_value: int


def phi_shares(n: int, candidates: Mapping[int, Candidate]) -> dict[int, int]:
    """φ_1 = N - p_1 - q_1 + 1，其余 φ_i = -(p_i + q_i)，Σφ_i = φ(N)。"""
    shares: dict[int, int] = {}
    for pid, (p_i, q_i) in candidates.items():
        shares[pid] = n - p_i - q_i + 1 if pid == 1 else -(p_i + q_i)
    return shares


def _reveal_zeta(e: int, phi: Mapping[int, int], network: Network | None, tag: str) -> int:
    if network is None:
        return sum(phi.values()) % e

    # 每方把 φ_i mod e 再做一次模 e 加法分享，只公开总和
    k = len(phi)
    kept: dict[int, int] = {}
    for pid in sorted(phi):
        vector = additive_share(phi[pid] % e, k, e, network.party_rng(pid, f"exponent.zeta.{tag}"))
        for target, value in enumerate(vector.values, start=1):
            if target == pid:
                kept[pid] = value
            else:
                network.send(pid, target, "exponent.zeta_share", {"share": value})
    network.advance()

    share_round = network.round - 1
    sums: list[int] = []
    for pid in sorted(phi):
        inbox = network.received(pid, "exponent.zeta_share", at_round=share_round)
        received = [as_int(m.payload()["share"]) for m in inbox]
        partial_sum = (kept[pid] + sum(received)) % e
        network.broadcast(pid, "exponent.zeta_sum", {"sum": partial_sum})
        sums.append(partial_sum)
    network.advance()
    return sum(sums) % e


def compute_shared_private_exponent(
    e: int,
    phi: Mapping[int, int],
    n: int,
    *,
    network: Network | None = None,
    tag: str = "",
) -> ExponentResult:
    """d_i = ⌊T·φ_i / e⌋，T = -ζ^{-1} mod e；修正值 c 取 [0, k+1] 中使试解密成立的最小值。"""
    k = len(phi)
    zeta = _reveal_zeta(e, phi, network, tag)
    if zeta == 0:
        raise NotInvertible(f"gcd(e, φ(N)) != 1 (ζ = 0, e = {e}), 需要更换候选")

    t_value = (-pow(zeta, -1, e)) % e
    d_shares = {pid: (t_value * phi_i) // e for pid, phi_i in phi.items()}

    test_ciphertext = pow(TEST_MESSAGE, e, n)
    combined = 1
    for pid in sorted(d_shares):
        partial = partial_decrypt(test_ciphertext, d_shares[pid], n)
        if network is not None:
            network.broadcast(pid, "exponent.trial", {"partial": partial})
        combined = combined * partial % n
    if network is not None:
        network.advance()

    for correction in range(k + 2):
        if combined * pow(test_ciphertext, correction, n) % n == TEST_MESSAGE:
            logger.debug("修正值搜索完成: c=%d", correction)
            return ExponentResult(d_shares=d_shares, correction=correction, zeta=zeta, t_value=t_value)
    raise CorrectionNotFound(f"在 [0, {k + 1}] 内找不到修正值, 协议实现有误")
