"""IDM 协议：setup / enroll / encrypt / keyGen / authenticate / revoke 与 SSO 令牌签发。

所有跨方交互都经过 ``Network``；请求方（用户）在网络中的编号为 ``CLIENT_ID``。
会话密钥 K 与重建出的域内秘密只存在于请求方的局部变量中。
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from pydantic import BaseModel, ConfigDict

from ..bundle import (
    ActiveBundle,
    BundleItem,
    BundlePolicy,
    CredentialEnvelope,
    SealedShare,
    make_bundle,
    verify_integrity,
)
from ..canonical import BigInt, HexBytes, canonical_bytes, digest, parse_hex_bytes, sha256
from ..dkg import KeygenConfig, Partial, ShareBackup, combine_partials, recover_absent_partial, run_distributed_keygen
from ..errors import (
    BundleApoptosed,
    Expired,
    IdmError,
    InsufficientShares,
    IntegrityFailure,
    LabelUnknown,
    MissingParty,
    PolicyDenied,
    Revoked,
    StaleRevocationList,
    Unsatisfied,
    UnknownUser,
    UsageError,
)
from ..netsim import BROADCAST, CLIENT_ID, Network, Recipient
from ..netsim.structs import Message
from ..policy import (
    ARL_UPDATE_KIND,
    AccessTree,
    AttributeId,
    AttributeKey,
    EvaluationContext,
    RevocationList,
    distribute_tree_shares,
    reconstruct_from_leaves,
    revoke,
)
from ..sharing import PrimeField, RandomSource, SharePoint, dedup_shares, shamir_reconstruct, shamir_share
from .authority import RELEASED, AuthnRequest, AuthorityParty, ShareRelease, decode_leaves, encode_leaves
from .cipher import derive_key, open_sealed, seal, xor_bytes
from .sso import token_digest_value
from .structs import IdentityRecord, PartySecret, PublicParameters, RankPolicy, SsoToken

logger = logging.getLogger(__name__)

# 大于 2^61 的最小素数，K 的前 8 字节映射到这里近似均匀
SHARING_FIELD_BOUND = 2**61
SESSION_KEY_BYTES = 32
NONCE_BYTES = 16
DEFAULT_TOKEN_TTL = 10

# 请求方侧汇总拒绝原因时的优先级
_DENIAL_PRIORITY: tuple[tuple[str, type[IdmError]], ...] = (("Revoked", Revoked), ("Expired", Expired))


class EnrollmentSubmission(BaseModel):
    """用户提交的注册材料：K_e^e mod N 与用 K_e 派生密钥加密的身份记录。"""

    model_config = ConfigDict(frozen=True)

    ciphertext: BigInt
    sealed_record: HexBytes


@dataclass
class AuthResult:
    claims: dict[str, str]
    token: SsoToken | None
    verdicts: dict[int, str] = field(default_factory=dict)

    @property
    def released_parties(self) -> list[int]:
        return sorted(pid for pid, v in self.verdicts.items() if v == RELEASED)


def sharing_field() -> PrimeField:
    return PrimeField.next_above(SHARING_FIELD_BOUND)


def _enroll_key(session_value: int) -> bytes:
    return derive_key(canonical_bytes(session_value), b"enroll")


def _claim_key(session_key: bytes, nonce: bytes, label: str) -> bytes:
    return derive_key(session_key, nonce, canonical_bytes(label))


@dataclass
class IdmSystem:
    network: Network
    params: PublicParameters
    parties: dict[int, AuthorityParty]
    bundle_policy: BundlePolicy = field(default_factory=BundlePolicy)

    def __post_init__(self) -> None:
        if self.network.k != self.params.k:
            raise ValueError(f"网络参与方数 {self.network.k} 与公开参数 k={self.params.k} 不一致")

    # ------------------------------------------------------------------
    # setup
    # ------------------------------------------------------------------

    @classmethod
    def setup(
        cls,
        keygen_cfg: KeygenConfig,
        network: Network,
        *,
        rank_policy: RankPolicy | None = None,
        bundle_policy: BundlePolicy | None = None,
    ) -> IdmSystem:
        """DSKG 生成共享 RSA 密钥；各方再本地采样 mk_i 与 sealKey_i，最后公布 PK。"""
        k = keygen_cfg.k
        policy = (rank_policy or RankPolicy.default_for(k)).validate_for(k)

        logger.info("步骤 1/3: 分布式共享密钥生成, k=%d", k)
        result = run_distributed_keygen(keygen_cfg, network)

        logger.info("步骤 2/3: 各方本地采样主密钥分量")
        params = PublicParameters(
            public_key=result.public_key,
            k=k,
            correction=next(iter(result.shares.values())).correction,
            sharing_prime=sharing_field().modulus,
            bgw_prime=result.bgw_prime,
            backup_modulus=result.backup_modulus,
            backup_threshold=keygen_cfg.effective_backup_threshold,
            rank_policy=policy,
        )
        parties: dict[int, AuthorityParty] = {}
        for pid, share in sorted(result.shares.items()):
            rng = network.party_rng(pid, "setup.master")
            secret = PartySecret(
                party_id=pid,
                mk=rng.randbytes(32),
                seal_key=rng.randbytes(32),
                share=share,
                backups=tuple(result.backups.get(pid, [])),
                arl=RevocationList(maintainer_party_id=params.maintainer_party_id),
            )
            parties[pid] = AuthorityParty(secret=secret, params=params)

        logger.info("步骤 3/3: 公布 PK, N 位数=%d", params.public_key.n.bit_length())
        network.broadcast(1, "setup.pk", params)
        network.advance()
        return cls(network=network, params=params, parties=parties, bundle_policy=bundle_policy or BundlePolicy())

    # ------------------------------------------------------------------
    # 公共工具
    # ------------------------------------------------------------------

    @property
    def k(self) -> int:
        return self.params.k

    @property
    def share_field(self) -> PrimeField:
        return PrimeField(modulus=self.params.sharing_prime)

    @property
    def maintainer(self) -> AuthorityParty:
        return self.parties[self.params.maintainer_party_id]

    @property
    def arl(self) -> RevocationList:
        return self.maintainer.arl

    def live_parties(self) -> list[AuthorityParty]:
        return [self.parties[pid] for pid in self.network.live_parties()]

    def _inbox(self, pid: int, kind: str, at_round: int) -> list[Message]:
        return self.network.received(pid, kind, at_round=at_round)

    def _require_all_live(self, action: str) -> None:
        absent = [pid for pid in self.network.parties if not self.network.is_live(pid)]
        if absent:
            raise MissingParty(f"{action}需要全部参与方在线, 缺少 {absent}")

    def _joint_power(self, value: int, kind: str, to: Recipient) -> int:
        """全部 k 方对 value 做部分解密 / 签名。

        缺席方的部分值由编号最小的在线方用备份恢复。
        """
        n = self.params.public_key.n
        live = self.live_parties()
        if not live:
            raise MissingParty("没有任何在线参与方")
        partials: list[Partial] = []
        for party in live:
            partial = Partial(party_id=party.party_id, value=party.partial(value))
            self.network.send(party.party_id, to, kind, partial)
            partials.append(partial)

        absent = [pid for pid in self.network.parties if not self.network.is_live(pid)]
        if absent:
            coordinator = live[0].party_id
            for absent_id in absent:
                backups: list[ShareBackup] = []
                for holder in live:
                    mine = [b for b in holder.secret.backups if b.owner_party_id == absent_id]
                    for backup in mine:
                        if holder.party_id != coordinator:
                            self.network.send(holder.party_id, coordinator, "recovery.backup", backup)
                        backups.append(backup)
                try:
                    recovered = recover_absent_partial(
                        absent_id, backups, value, n, network=self.network, coordinator=coordinator
                    )
                except InsufficientShares as exc:
                    raise MissingParty(f"参与方 {absent_id} 缺席且在线备份不足") from exc
                partial = Partial(party_id=absent_id, value=recovered)
                self.network.send(coordinator, to, kind, partial)
                partials.append(partial)
        self.network.advance()
        return combine_partials(partials, self.params.correction, value, n, self.k)

    # ------------------------------------------------------------------
    # enroll
    # ------------------------------------------------------------------

    def prepare_enrollment(self, record: IdentityRecord, rng: RandomSource | None = None) -> EnrollmentSubmission:
        """用户侧：采样 K_e ∈ [2, N) 并加密身份记录。"""
        n, e = self.params.public_key.n, self.params.public_key.e
        rng = rng or self.network.party_rng(CLIENT_ID, f"enroll.{record.user_id}")
        while True:
            session_value = rng.randrange(2, n)
            if math.gcd(session_value, n) == 1:
                break
        return EnrollmentSubmission(
            ciphertext=pow(session_value, e, n),
            sealed_record=seal(_enroll_key(session_value), canonical_bytes(record)),
        )

    def submit_enrollment(self, submission: EnrollmentSubmission) -> IdentityRecord:
        """各方联合门限解密 K_e，再解密并保存身份记录。"""
        logger.info("步骤 1/3: 用户提交加密身份")
        self.network.broadcast(CLIENT_ID, "enroll.submit", submission)
        self.network.advance()

        logger.info("步骤 2/3: 各方计算部分解密")
        session_value = self._joint_power(submission.ciphertext, "enroll.partial", BROADCAST)

        logger.info("步骤 3/3: 解密并保存身份记录")
        plaintext = open_sealed(_enroll_key(session_value), submission.sealed_record)
        record = IdentityRecord.model_validate(json.loads(plaintext.decode("utf-8")))
        for party in self.live_parties():
            party.store_record(record)
        logger.info("用户 %s 注册完成, 等级=%s, 数据项=%d", record.user_id, record.rank, len(record.claims))
        return record

    def enroll(self, record: IdentityRecord, *, rng: RandomSource | None = None) -> IdentityRecord:
        return self.submit_enrollment(self.prepare_enrollment(record, rng))

    def find_record(self, user_id: str) -> IdentityRecord:
        for party in self.live_parties():
            record = party.record_for(user_id)
            if record is not None:
                return record
        raise UnknownUser(f"用户 {user_id} 未注册")

    # ------------------------------------------------------------------
    # keyGen
    # ------------------------------------------------------------------

    def key_gen(
        self,
        user_id: str,
        attributes: Iterable[AttributeId],
        rank: str | None = None,
        *,
        epoch: int = 0,
        expiry_epoch: int | None = None,
    ) -> AttributeKey:
        """每方用自己的 mk_i 为每个属性签发标签，请求方组装成属性密钥。"""
        record = self.find_record(user_id)
        granted = sorted(frozenset(attributes), key=str)
        resolved_rank = self.params.rank_policy.resolve_rank(rank or record.rank)
        self._require_all_live("签发属性密钥")

        request = {
            "user": user_id,
            "attributes": [str(a) for a in granted],
            "rank": resolved_rank,
            "expiry": expiry_epoch,
        }
        for pid in self.network.parties:
            self.network.send(CLIENT_ID, pid, "keygen.request", request)
        self.network.advance()

        for party in self.live_parties():
            tags = party.issue_tags(user_id, granted, rank=resolved_rank, expiry_epoch=expiry_epoch)
            self.network.send(party.party_id, CLIENT_ID, "keygen.tags", tags)
        self.network.advance()

        tag_round = self.network.round - 1
        by_party = {
            m.sender: {label: parse_hex_bytes(tag) for label, tag in m.payload().items()}
            for m in self._inbox(CLIENT_ID, "keygen.tags", tag_round)
        }
        logger.info("已为用户 %s 签发属性密钥, 属性数=%d, 等级=%s", user_id, len(granted), resolved_rank)
        return AttributeKey.assemble(
            user_id, granted, by_party, rank=resolved_rank, epoch=epoch, expiry_epoch=expiry_epoch
        )

    # ------------------------------------------------------------------
    # encrypt
    # ------------------------------------------------------------------

    def encrypt(
        self,
        record: IdentityRecord,
        tree: AccessTree,
        *,
        operation: str | None = None,
        bundle_id: str | None = None,
        creation_epoch: int = 0,
        rng: RandomSource | None = None,
    ) -> ActiveBundle:
        """逐项加密身份数据。

        K 映射进共享域后做 t-of-k 分享，每份再沿访问树展开并交给对应参与方封装。
        """
        t = self.params.rank_policy.threshold_for(record.rank, self.k, operation)
        self._require_all_live("封装会话密钥分片")
        rng = rng or self.network.party_rng(
            CLIENT_ID, f"encrypt.{record.user_id}.{bundle_id or ''}.{creation_epoch}.{digest(tree).hex()}"
        )
        field_ = self.share_field
        session_key = rng.randbytes(SESSION_KEY_BYTES)
        nonce = rng.randbytes(NONCE_BYTES)
        field_secret = int.from_bytes(session_key[:8], "big") % field_.modulus
        mask = xor_bytes(session_key, sha256(canonical_bytes(field_secret)))

        logger.info("步骤 1/3: 会话密钥分享, t=%d, k=%d", t, self.k)
        share_set = shamir_share(field_secret, t, self.k, field_, rng)
        for point in share_set.points:
            leaves = distribute_tree_shares(tree, point.value, field_, rng)
            payload = {"nonce": nonce, "leaves": encode_leaves(leaves)}
            self.network.send(CLIENT_ID, point.index, "encrypt.seal", payload)
        self.network.advance()

        logger.info("步骤 2/3: 各方用 sealKey_i 封装分片")
        request_round = self.network.round - 1
        for party in self.live_parties():
            for message in self._inbox(party.party_id, "encrypt.seal", request_round):
                payload = message.payload()
                sealed = party.seal_leaves(parse_hex_bytes(payload["nonce"]), decode_leaves(payload["leaves"]))
                self.network.send(party.party_id, CLIENT_ID, "encrypt.sealed", {"sealed": sealed})
        self.network.advance()
        sealed_round = self.network.round - 1
        sealed_shares = tuple(
            SealedShare(party_id=m.sender, sealed=m.payload()["sealed"])
            for m in self._inbox(CLIENT_ID, "encrypt.sealed", sealed_round)
        )

        logger.info("步骤 3/3: 逐项加密并打包 Active Bundle")
        items = [
            BundleItem(
                label=label,
                sensitivity=self.bundle_policy.sensitivity_of(label),
                ciphertext=seal(_claim_key(session_key, nonce, label), value.encode("utf-8")),
            )
            for label, value in sorted(record.claims.items())
        ]
        envelope = CredentialEnvelope(
            owner=record.user_id,
            rank=record.rank,
            threshold=t,
            roster=tuple(self.network.parties),
            sealed_shares=sealed_shares,
            nonce=nonce,
            mask=mask,
            sharing_prime=field_.modulus,
        )
        return make_bundle(
            bundle_id or digest([record.user_id, nonce]).hex()[:16],
            items,
            tree,
            apoptosis_threshold=self.bundle_policy.apoptosis_threshold,
            evaporation_threshold=self.bundle_policy.evaporation_threshold,
            creation_epoch=creation_epoch,
            credential=envelope,
        )

    # ------------------------------------------------------------------
    # authenticate / decrypt
    # ------------------------------------------------------------------

    def _sync_arl(self, party: AuthorityParty) -> None:
        """维护方通过 arl.sync 把最新撤销列表发给落后的副本。"""
        maintainer = self.maintainer
        if not self.network.is_live(maintainer.party_id):
            raise StaleRevocationList(
                f"维护方 {maintainer.party_id} 不在线, 参与方 {party.party_id} 无法同步"
            )
        self.network.send(maintainer.party_id, party.party_id, "arl.sync", maintainer.arl)
        self.network.advance()
        for message in self._inbox(party.party_id, "arl.sync", self.network.round - 1):
            party.apply_arl(RevocationList.model_validate(message.payload()))
        logger.info("参与方 %d 撤销列表已同步到版本 %d", party.party_id, party.arl.version)

    def _release_from(self, party: AuthorityParty, request: AuthnRequest) -> ShareRelease:
        version = self.arl.version
        try:
            return party.evaluate_request(request, version)
        except StaleRevocationList:
            self._sync_arl(party)
            return party.evaluate_request(request, version)

    def authenticate(
        self,
        bundle: ActiveBundle,
        key: AttributeKey,
        ctx: EvaluationContext,
        requested_labels: Sequence[str],
        *,
        audiences: Sequence[str] = (),
        ttl_epochs: int = DEFAULT_TOKEN_TTL,
        anonymous: bool = False,
        issue_token: bool = True,
    ) -> AuthResult:
        """各方独立校验后释放分片；请求方去重、重建 K，只解密请求的数据项。"""
        labels = list(dict.fromkeys(requested_labels))
        if not labels:
            raise UsageError("至少需要请求一个数据项")
        if bundle.tombstone or bundle.credential is None:
            raise BundleApoptosed(f"bundle {bundle.bundle_id} 已凋亡或不含凭据")
        if not verify_integrity(bundle):
            raise IntegrityFailure(f"bundle {bundle.bundle_id} 完整性校验失败")
        for label in labels:
            if bundle.item(label) is None:
                raise LabelUnknown(f"bundle {bundle.bundle_id} 中没有数据项 {label!r}")
        envelope = bundle.credential
        tree = bundle.access_tree

        logger.info("步骤 1/4: 向名册 %s 提交认证请求", list(envelope.roster))
        for pid in envelope.roster:
            sealed = envelope.sealed_for(pid)
            if sealed is None:
                continue
            request = AuthnRequest(key=key, ctx=ctx, tree=tree, nonce=envelope.nonce, sealed=sealed.sealed)
            self.network.send(CLIENT_ID, pid, "authn.request", request)
        self.network.advance()
        request_round = self.network.round - 1

        logger.info("步骤 2/4: 各方独立校验标签、策略与撤销状态")
        releases: list[tuple[int, ShareRelease]] = []
        for pid in envelope.roster:
            if not self.network.is_live(pid):
                continue
            party = self.parties[pid]
            for message in self._inbox(pid, "authn.request", request_round):
                releases.append((pid, self._release_from(party, AuthnRequest.model_validate(message.payload()))))
        for pid, release in releases:
            self.network.send(pid, CLIENT_ID, "authn.release", release)
        self.network.advance()
        release_round = self.network.round - 1

        logger.info("步骤 3/4: 去重并重建会话密钥")
        field_ = PrimeField(modulus=envelope.sharing_prime)
        verdicts: dict[int, str] = {}
        points: list[SharePoint] = []
        for message in self._inbox(CLIENT_ID, "authn.release", release_round):
            release = ShareRelease.model_validate(message.payload())
            verdicts[message.sender] = release.verdict
            if release.verdict != RELEASED:
                continue
            try:
                value = reconstruct_from_leaves(tree, release.points(), ctx, field_)
            except Unsatisfied:
                verdicts[message.sender] = "PolicyDenied"
                continue
            points.append(SharePoint(index=message.sender, value=value))
        points = dedup_shares(points, field_.modulus)

        if len(points) < envelope.threshold:
            denied = set(verdicts.values())
            for name, error in _DENIAL_PRIORITY:
                if name in denied:
                    raise error(f"认证被拒绝: {verdicts}")
            raise PolicyDenied(
                f"释放分片的参与方 {len(points)} 个, 少于门限 {envelope.threshold}: {verdicts}"
            )

        field_secret = shamir_reconstruct(points, envelope.threshold, field_)
        session_key = xor_bytes(envelope.mask, sha256(canonical_bytes(field_secret)))
        claims: dict[str, str] = {}
        for label in labels:
            item = bundle.item(label)
            assert item is not None
            plaintext = open_sealed(_claim_key(session_key, envelope.nonce, label), item.ciphertext)
            claims[label] = plaintext.decode("utf-8")

        logger.info("步骤 4/4: 认证通过, 释放方=%s, 数据项=%s", sorted(p.index for p in points), labels)
        token: SsoToken | None = None
        policy = self.params.rank_policy
        # 释放分片的各方都已用绑定标签核对过 key.rank
        if issue_token and audiences and policy.allows_sso(key.rank):
            subject = key.user_id
            try:
                if anonymous:
                    subject = self._pseudonym(key.user_id, ctx.now_epoch)
                token = self.issue_sso_token(subject, audiences, ttl_epochs, ctx.now_epoch)
            except IdmError as exc:
                logger.warning("SSO 令牌签发失败 (非致命): %s", exc)
        return AuthResult(claims=claims, token=token, verdicts=verdicts)

    def open_claims(
        self,
        bundle: ActiveBundle,
        key: AttributeKey,
        ctx: EvaluationContext,
        labels: Sequence[str],
    ) -> Mapping[str, str]:
        return self.authenticate(bundle, key, ctx, labels, issue_token=False).claims

    # ------------------------------------------------------------------
    # revoke
    # ------------------------------------------------------------------

    def revoke(
        self,
        user_id: str,
        attribute: AttributeId | None = None,
        *,
        caller: int | None = None,
    ) -> RevocationList:
        """由维护方写入并广播；在线副本当轮更新，崩溃的副本在下次校验前同步。"""
        caller_id = self.params.maintainer_party_id if caller is None else caller
        if not self.network.is_live(self.maintainer.party_id):
            raise MissingParty(f"撤销列表维护方 {self.maintainer.party_id} 不在线")
        target = user_id if attribute is None else (user_id, attribute)
        updated = revoke(self.arl, target, caller=caller_id, network=self.network)
        self.maintainer.apply_arl(updated)
        update_round = self.network.round - 1
        for party in self.live_parties():
            for message in self._inbox(party.party_id, ARL_UPDATE_KIND, update_round):
                party.apply_arl(RevocationList.model_validate(message.payload()))
        return updated

    # ------------------------------------------------------------------
    # SSO
    # ------------------------------------------------------------------

    def _pseudonym(self, user_id: str, now_epoch: int) -> str:
        nonce = self.network.party_rng(CLIENT_ID, f"pseudonym.{user_id}.{now_epoch}").randbytes(NONCE_BYTES)
        pseudonym = sha256(canonical_bytes(user_id), nonce).hex()
        for party in self.live_parties():
            party.remember_pseudonym(pseudonym, user_id)
        return pseudonym

    def issue_sso_token(
        self,
        subject: str,
        audiences: Sequence[str],
        ttl_epochs: int,
        now_epoch: int,
        *,
        rng: RandomSource | None = None,
    ) -> SsoToken:
        """令牌体规范化后取 SHA-256，映射到 [2, N) 再由 k 方门限签名。"""
        if ttl_epochs < 1:
            raise UsageError(f"ttl 必须 >= 1, 实际 {ttl_epochs}")
        if not audiences:
            raise UsageError("SSO 令牌至少需要一个受众")
        rng = rng or self.network.party_rng(CLIENT_ID, f"sso.{subject}.{now_epoch}")
        token = SsoToken(
            subject=subject,
            audiences=tuple(audiences),
            issued_epoch=now_epoch,
            expiry_epoch=now_epoch + ttl_epochs,
            nonce=rng.randbytes(NONCE_BYTES),
        )
        value = token_digest_value(token, self.params.public_key.n)
        self.network.send(CLIENT_ID, BROADCAST, "sso.request", {"digest": value})
        self.network.advance()
        signature = self._joint_power(value, "sso.partial", CLIENT_ID)
        logger.info("SSO 令牌已签发: 受众=%s, 有效期至纪元 %d", list(audiences), token.expiry_epoch)
        return token.model_copy(update={"signature": signature})
