"""无可信分发者的分布式 RSA 密钥生成主循环。

候选生成 → BGW 共享模数 → 公开试除 → 双素性检验 → 私钥指数推导，
直到得到合格的 N 或用尽 max_attempts。batch_size > 1 时一轮 BGW 同时计算多个候选。
"""

from __future__ import annotations

import logging
import time
from collections import Counter

from ..errors import ConfigError, MaxAttemptsExceeded, NotInvertible
from ..netsim import Network
from .biprimality import Candidate, biprimality_test, compute_shared_moduli, generate_candidate_shares
from .exponent import compute_shared_private_exponent, phi_shares
from .numbers import trial_division_public
from .structs import KeygenConfig, KeygenResult, PrivateShare, RsaPublicKey, ShareBackup
from .threshold import backup_field, replicate_share

logger = logging.getLogger(__name__)


def _distribute_backups(
    cfg: KeygenConfig,
    network: Network,
    shares: dict[int, PrivateShare],
    n: int,
) -> tuple[dict[int, list[ShareBackup]], int]:
    field = backup_field(cfg.k, n)
    t = cfg.effective_backup_threshold
    held: dict[int, list[ShareBackup]] = {pid: [] for pid in shares}
    for owner, share in sorted(shares.items()):
        backups = replicate_share(owner, share.d, t, cfg.k, n, field, network.party_rng(owner, "keygen.backup"))
        for backup in backups:
            if backup.holder_party_id == owner:
                continue
            network.send(owner, backup.holder_party_id, "keygen.backup", backup)
            held[backup.holder_party_id].append(backup)
    network.advance()
    return held, field.modulus


def run_distributed_keygen(cfg: KeygenConfig, network: Network) -> KeygenResult:
    """在网络上运行完整的 DSKG，返回公钥、各方私有分片与备份。"""
    if network.k != cfg.k or len(network.live_parties()) != cfg.k:
        raise ConfigError(f"密钥生成需要恰好 {cfg.k} 个存活参与方, 当前 {len(network.live_parties())}")

    started = time.perf_counter()
    field = cfg.bgw_field
    parties = network.parties
    candidate_rngs = {pid: network.party_rng(pid, "keygen.candidates") for pid in parties}
    # 双素性检验的 g 由第 1 方采样并广播
    coin_rng = network.party_rng(1, "keygen.biprimality")
    rejections: Counter[str] = Counter()
    attempts = 0
    batch_no = 0

    logger.info(
        "开始分布式密钥生成, k=%d, 分片位数=%d, 批大小=%d, 最大尝试=%d",
        cfg.k,
        cfg.prime_share_bits,
        cfg.batch_size,
        cfg.max_attempts,
    )

    while attempts < cfg.max_attempts:
        size = min(cfg.batch_size, cfg.max_attempts - attempts)
        batch_no += 1
        batches: dict[int, list[Candidate]] = {
            pid: [generate_candidate_shares(cfg, pid, candidate_rngs[pid]) for _ in range(size)] for pid in parties
        }

        logger.debug("步骤 1/4: 第 %d 批候选的共享模数 (BGW)", batch_no)
        moduli = compute_shared_moduli(batches, field, network, purpose=f"keygen.bgw.{batch_no}")

        for idx, n in enumerate(moduli):
            attempts += 1
            network.metrics.candidate_attempts += 1
            candidate = {pid: batches[pid][idx] for pid in parties}

            logger.debug("步骤 2/4: 候选 %d 公开试除", attempts)
            if not trial_division_public(n, cfg.trial_division_bound):
                rejections["trial_division"] += 1
                continue

            logger.debug("步骤 3/4: 候选 %d 双素性检验", attempts)
            outcome = biprimality_test(n, candidate, cfg.biprimality_rounds, coin_rng, network=network)
            if not outcome.accepted:
                rejections["gcd_leak" if outcome.leaked_factor else "biprimality"] += 1
                continue

            logger.debug("步骤 4/4: 候选 %d 推导私钥指数", attempts)
            phi = phi_shares(n, candidate)
            try:
                exponent = compute_shared_private_exponent(
                    cfg.public_exponent, phi, n, network=network, tag=str(attempts)
                )
            except NotInvertible:
                rejections["not_invertible"] += 1
                continue

            shares = {
                pid: PrivateShare(
                    party_id=pid,
                    p=candidate[pid][0],
                    q=candidate[pid][1],
                    phi=phi[pid],
                    d=exponent.d_shares[pid],
                    correction=exponent.correction,
                )
                for pid in parties
            }
            backups, backup_modulus = _distribute_backups(cfg, network, shares, n)
            network.metrics.wall_clock_seconds = time.perf_counter() - started
            logger.info(
                "密钥生成成功, N 位数=%d, 尝试次数=%d, 轮次=%d, 拒绝统计=%s",
                n.bit_length(),
                attempts,
                network.metrics.rounds,
                dict(rejections),
            )
            return KeygenResult(
                public_key=RsaPublicKey(n=n, e=cfg.public_exponent),
                shares=shares,
                backups=backups,
                metrics=network.metrics,
                bgw_prime=field.modulus,
                backup_modulus=backup_modulus,
                attempts=attempts,
                rejections=dict(rejections),
            )

    network.metrics.wall_clock_seconds = time.perf_counter() - started
    raise MaxAttemptsExceeded(
        f"{cfg.max_attempts} 次尝试内未生成合格的 RSA 模数, 拒绝统计={dict(rejections)}"
    )
