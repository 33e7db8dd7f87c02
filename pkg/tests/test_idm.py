from __future__ import annotations

import itertools
import random
from pathlib import Path

import pytest
from pytest_mock import MockerFixture

from ttpfree_idm.dkg import KeygenConfig, PrivateShare, RsaPublicKey, backup_field, phi_shares, replicate_share
from ttpfree_idm.errors import (
    ConfigError,
    Consumed,
    EpochMismatch,
    Expired,
    InsufficientShares,
    MissingParty,
    NotMaintainer,
    PolicyDenied,
    Revoked,
    UnknownRank,
    UnknownUser,
)
from ttpfree_idm.idm import (
    AuthorityParty,
    IdentityRecord,
    IdmSystem,
    PartySecret,
    PublicParameters,
    RankPolicy,
    SsoToken,
    StateStore,
    group_authenticate,
    group_setup,
    sharing_field,
    verify_sso_token,
)
from ttpfree_idm.netsim import AdversaryConfig, Network, find_leaks
from ttpfree_idm.policy import (
    AccessTree,
    AttributeKey,
    EvaluationContext,
    RevocationList,
    attr,
    parse_attributes,
    time_window,
)
from ttpfree_idm.sharing import PrimeField, SharePoint

TOY_N = 437
TOY_CANDIDATES = {1: (11, 15), 2: (4, 4), 3: (4, 4)}
TOY_D = {1: 329, 2: -7, 3: -7}
STAFF_TREE = AccessTree.of(attr("role/staff"))
HEAD_TREE = AccessTree.of(attr("role/head"))
ALICE_CLAIMS = {"name": "Alice", "ssn": "123-45-6789", "dob": "1990-01-01"}
ALICE = IdentityRecord(user_id="alice", claims=ALICE_CLAIMS, rank="regular")
BOB = IdentityRecord(user_id="bob", claims={"name": "Bob"}, rank="regular")


class ScriptedRng:
    def __init__(self, values: list[int]) -> None:
        self._values = list(values)

    def randrange(self, start: int, stop: int | None = None, step: int = 1) -> int:
        return self._values.pop(0)

    def randbytes(self, n: int) -> bytes:
        return bytes(n)


def _rank_policy(**overrides: object) -> RankPolicy:
    data: dict[str, object] = {
        "thresholds": {"regular": 2, "senior": 3},
        "ordering": ("regular", "senior"),
        "operation_levels": {"transfer": 1},
    }
    data.update(overrides)
    return RankPolicy.model_validate(data)


def _build_toy_system(network: Network | None = None) -> IdmSystem:
    """N = 437 的三方系统，私钥分片与备份均按手算值构造。"""
    network = network or Network(k=3, seed=3)
    field = backup_field(3, TOY_N)
    params = PublicParameters(
        public_key=RsaPublicKey(n=TOY_N, e=5),
        k=3,
        correction=2,
        sharing_prime=sharing_field().modulus,
        bgw_prime=1009,
        backup_modulus=field.modulus,
        backup_threshold=2,
        rank_policy=_rank_policy().validate_for(3),
    )
    phi = phi_shares(TOY_N, TOY_CANDIDATES)
    backups = [
        b for pid in (1, 2, 3) for b in replicate_share(pid, TOY_D[pid], 2, 3, TOY_N, field, random.Random(pid))
    ]
    parties: dict[int, AuthorityParty] = {}
    for pid, (p, q) in sorted(TOY_CANDIDATES.items()):
        share = PrivateShare(party_id=pid, p=p, q=q, phi=phi[pid], d=TOY_D[pid], correction=2)
        secret = PartySecret(
            party_id=pid,
            mk=bytes([pid]) * 32,
            seal_key=bytes([pid + 10]) * 32,
            share=share,
            backups=tuple(b for b in backups if b.holder_party_id == pid and b.owner_party_id != pid),
        )
        parties[pid] = AuthorityParty(secret=secret, params=params)
    return IdmSystem(network=network, params=params, parties=parties)


def _enrolled_with_key(
    system: IdmSystem, record: IdentityRecord = ALICE, attrs: tuple[str, ...] = ("role/staff",)
) -> AttributeKey:
    system.enroll(record)
    return system.key_gen(record.user_id, parse_attributes(attrs))


# ----------------------------------------------------------------------
# 等级策略
# ----------------------------------------------------------------------


def test_rank_policy_thresholds_and_operations() -> None:
    policy = _rank_policy(default_rank="regular")

    assert policy.threshold_for("senior", 3) == 3
    assert policy.threshold_for("intern", 3) == 2
    assert policy.threshold_for("senior", 3, "transfer") == 3
    with pytest.raises(UnknownRank):
        policy.threshold_for("regular", 3, "wire")
    with pytest.raises(UnknownRank):
        _rank_policy().resolve_rank("intern")


def test_rank_policy_validation() -> None:
    with pytest.raises(ConfigError):
        _rank_policy(thresholds={"regular": 1}, ordering=()).validate_for(3)
    with pytest.raises(ConfigError):
        _rank_policy(thresholds={"regular": 3, "senior": 2}).validate_for(3)
    with pytest.raises(ConfigError):
        _rank_policy(sso_ranks=("admin",)).validate_for(3)

    assert _rank_policy(sso_ranks=("senior",)).allows_sso("regular") is False


def _opening_patterns(policy: RankPolicy, rank: str, k: int, operation: str | None = None) -> set[frozenset[int]]:
    """能凑齐该等级门限的全部存活参与方集合。"""
    t = policy.threshold_for(rank, k, operation)
    parties = range(1, k + 1)
    return {frozenset(live) for size in range(t, k + 1) for live in itertools.combinations(parties, size)}


def test_higher_rank_opens_only_patterns_lower_rank_opens() -> None:
    ordering = ("guest", "regular", "senior")

    for thresholds in itertools.product(range(2, 6), repeat=3):
        policy = _rank_policy(
            thresholds=dict(zip(ordering, thresholds, strict=True)),
            ordering=ordering,
            operation_levels={"read": 0, "transfer": 1, "close": 3},
        )
        try:
            policy.validate_for(5)
        except ConfigError:
            assert list(thresholds) != sorted(thresholds)
            continue
        for lower, higher in itertools.pairwise(ordering):
            assert policy.permits(higher, lower)
            assert not policy.permits(lower, higher)
            for operation in (None, "read", "transfer", "close"):
                assert _opening_patterns(policy, higher, 5, operation) <= _opening_patterns(policy, lower, 5, operation)


# ----------------------------------------------------------------------
# 注册
# ----------------------------------------------------------------------


def test_enrollment_worked_ciphertext() -> None:
    system = _build_toy_system()

    submission = system.prepare_enrollment(ALICE, ScriptedRng([2]))
    record = system.submit_enrollment(submission)

    assert submission.ciphertext == 32
    assert record == ALICE
    assert all(party.record_for("alice") == ALICE for party in system.parties.values())


def test_enrollment_recovers_crashed_party_partial() -> None:
    network = Network(k=3, seed=3, adversary=AdversaryConfig(crash_schedule={3: 0}))
    system = _build_toy_system(network)

    system.enroll(ALICE)

    assert network.metrics.recoveries == 1
    assert any(m.kind == "recovery.event" for m in network.transcript)
    assert system.parties[3].record_for("alice") is None
    assert system.find_record("alice") == ALICE


def test_find_record_unknown_user() -> None:
    with pytest.raises(UnknownUser):
        _build_toy_system().find_record("nobody")


# ----------------------------------------------------------------------
# 属性密钥、加密与认证
# ----------------------------------------------------------------------


def test_key_gen_requires_enrollment_and_all_parties() -> None:
    system = _build_toy_system()

    with pytest.raises(UnknownUser):
        system.key_gen("alice", parse_attributes(["role/staff"]))

    system.enroll(ALICE)
    system.network.crash_party(2)
    with pytest.raises(MissingParty):
        system.key_gen("alice", parse_attributes(["role/staff"]))


def test_grant_grant_then_revoked() -> None:
    system = _build_toy_system()
    key = _enrolled_with_key(system)
    bundle = system.encrypt(ALICE, STAFF_TREE, bundle_id="alice-1")
    ctx = EvaluationContext(now_epoch=1)

    first = system.authenticate(bundle, key, ctx, ["name"])
    second = system.authenticate(bundle, key, ctx, ["dob", "name"])

    assert first.claims == {"name": "Alice"}
    assert second.claims == {"dob": "1990-01-01", "name": "Alice"}
    assert first.released_parties == [1, 2, 3]

    system.revoke("alice")
    with pytest.raises(Revoked):
        system.authenticate(bundle, key, ctx, ["name"])


def test_other_user_fails_stricter_tree() -> None:
    system = _build_toy_system()
    system.enroll(ALICE)
    bob_key = _enrolled_with_key(system, BOB)
    bundle = system.encrypt(ALICE, HEAD_TREE, bundle_id="alice-head")

    with pytest.raises(PolicyDenied):
        system.authenticate(bundle, bob_key, EvaluationContext(now_epoch=1), ["name"])


def test_expired_key_is_denied() -> None:
    system = _build_toy_system()
    system.enroll(ALICE)
    key = system.key_gen("alice", parse_attributes(["role/staff"]), expiry_epoch=5)
    bundle = system.encrypt(ALICE, STAFF_TREE)

    assert system.authenticate(bundle, key, EvaluationContext(now_epoch=5), ["name"]).claims
    with pytest.raises(Expired):
        system.authenticate(bundle, key, EvaluationContext(now_epoch=6), ["name"])


def test_key_with_edited_expiry_is_denied() -> None:
    system = _build_toy_system()
    system.enroll(ALICE)
    key = system.key_gen("alice", parse_attributes(["role/staff"]), expiry_epoch=5)
    bundle = system.encrypt(ALICE, STAFF_TREE)
    never_expires = key.model_copy(update={"expiry_chain": (None,)})

    with pytest.raises(Expired):
        system.authenticate(bundle, key, EvaluationContext(now_epoch=10), ["name"])
    with pytest.raises(PolicyDenied):
        system.authenticate(bundle, never_expires, EvaluationContext(now_epoch=10), ["name"])


def test_key_with_edited_rank_is_denied() -> None:
    system = _build_toy_system()
    key = _enrolled_with_key(system)
    bundle = system.encrypt(ALICE, AccessTree.of(time_window(0, 100)))
    promoted = key.model_copy(update={"rank": "senior"})

    assert system.authenticate(bundle, key, EvaluationContext(now_epoch=1), ["name"]).claims == {"name": "Alice"}
    with pytest.raises(PolicyDenied):
        system.authenticate(bundle, promoted, EvaluationContext(now_epoch=1), ["name"])


def test_parties_refuse_rank_above_enrollment() -> None:
    system = _build_toy_system()
    system.enroll(ALICE)

    with pytest.raises(PolicyDenied):
        system.key_gen("alice", parse_attributes(["role/staff"]), "senior")


def test_authentication_tolerates_one_crash_but_not_two() -> None:
    system = _build_toy_system()
    key = _enrolled_with_key(system)
    bundle = system.encrypt(ALICE, STAFF_TREE)
    ctx = EvaluationContext(now_epoch=1)

    system.network.crash_party(3)
    result = system.authenticate(bundle, key, ctx, ["ssn"])
    assert result.claims == {"ssn": "123-45-6789"}
    assert result.released_parties == [1, 2]

    system.network.crash_party(2)
    with pytest.raises(PolicyDenied):
        system.authenticate(bundle, key, ctx, ["ssn"])


def test_operation_level_raises_threshold() -> None:
    system = _build_toy_system()
    system.enroll(ALICE)

    bundle = system.encrypt(ALICE, STAFF_TREE, operation="transfer")

    assert bundle.credential is not None
    assert bundle.credential.threshold == 3
    with pytest.raises(UnknownRank):
        system.encrypt(ALICE, STAFF_TREE, operation="wire")


def test_stale_replica_syncs_before_deciding() -> None:
    system = _build_toy_system()
    key = _enrolled_with_key(system)
    bundle = system.encrypt(ALICE, STAFF_TREE)
    system.revoke("carol")
    stale = system.parties[3]
    stale.secret = stale.secret.model_copy(update={"arl": RevocationList()})

    result = system.authenticate(bundle, key, EvaluationContext(now_epoch=1), ["name"])

    assert result.released_parties == [1, 2, 3]
    assert stale.arl.version == 1
    assert any(m.kind == "arl.sync" and m.to == 3 for m in system.network.transcript)


def test_revoke_only_by_maintainer() -> None:
    system = _build_toy_system()

    with pytest.raises(NotMaintainer):
        system.revoke("alice", caller=2)


def test_transcript_never_carries_session_key_or_claims() -> None:
    system = _build_toy_system()
    key = _enrolled_with_key(system)
    session_key = random.Random(5).randbytes(32)
    field_secret = int.from_bytes(session_key[:8], "big") % sharing_field().modulus

    bundle = system.encrypt(ALICE, STAFF_TREE, rng=random.Random(5))
    system.authenticate(bundle, key, EvaluationContext(now_epoch=1), ["ssn"])

    secrets: dict[str, int | bytes] = {"K": session_key, "fieldSecret": field_secret, "ssn": b"123-45-6789"}
    assert find_leaks(system.network.transcript, secrets) == []


def test_state_store_round_trip(tmp_path: Path) -> None:
    system = _build_toy_system()
    key = _enrolled_with_key(system)
    system.revoke("carol")
    store = StateStore(tmp_path / "state")

    store.save_system(system)
    store.save_key(key)
    loaded = store.load_system(Network(k=3))

    assert loaded.params == system.params
    assert {pid: p.secret for pid, p in loaded.parties.items()} == {
        pid: p.secret for pid, p in system.parties.items()
    }
    assert loaded.arl.version == 1
    assert store.load_key_for("alice") == key
    with pytest.raises(UnknownUser):
        store.load_key_for("bob")


# ----------------------------------------------------------------------
# 群组认证
# ----------------------------------------------------------------------


def test_group_setup_hands_out_worked_shares() -> None:
    state = group_setup("g", ["a", "b", "c"], 2, PrimeField(modulus=11), 1, ScriptedRng([5, 2]))

    assert {m: (p.index, p.value) for m, p in state.member_shares.items()} == {"a": (1, 7), "b": (2, 9), "c": (3, 0)}


def test_group_authentication_is_single_use() -> None:
    state = group_setup("g", ["a", "b", "c"], 2, PrimeField(modulus=11), 1, ScriptedRng([5, 2]))
    shares = [state.member_shares["a"], state.member_shares["c"]]

    result = group_authenticate(state, shares, 1)

    assert result.accepted
    assert result.state.consumed
    with pytest.raises(Consumed):
        group_authenticate(result.state, shares, 1)


def test_group_authentication_rejections() -> None:
    state = group_setup("g", ["a", "b", "c"], 2, PrimeField(modulus=11), 1, ScriptedRng([5, 2]))
    a = state.member_shares["a"]

    with pytest.raises(EpochMismatch):
        group_authenticate(state, [a, state.member_shares["b"]], 2)
    with pytest.raises(InsufficientShares):
        group_authenticate(state, [a, a], 1)

    forged = group_authenticate(state, [a, SharePoint(index=2, value=3)], 1)
    assert forged.accepted is False
    assert forged.state.consumed is False


# ----------------------------------------------------------------------
# SSO（需要真实的分布式密钥）
# ----------------------------------------------------------------------


@pytest.fixture(scope="module")
def keyed_system() -> IdmSystem:
    network = Network(k=3, seed=7)
    system = IdmSystem.setup(KeygenConfig(), network, rank_policy=_rank_policy())
    system.enroll(ALICE)
    return system


def test_sso_token_accept_and_rejections(keyed_system: IdmSystem) -> None:
    public_key = keyed_system.params.public_key

    token = keyed_system.issue_sso_token("alice", ["mail", "wiki"], 10, 90)

    assert token.expiry_epoch == 100
    assert verify_sso_token(token, public_key, "mail", 95).reason == "Accepted"
    assert verify_sso_token(token, public_key, "bank", 95).reason == "AudienceMismatch"
    assert verify_sso_token(token, public_key, "wiki", 100).accepted
    assert verify_sso_token(token, public_key, "wiki", 101).reason == "Expired"
    forged = token.model_copy(update={"subject": "mallory"})
    assert verify_sso_token(forged, public_key, "mail", 95).reason == "BadSignature"


def _mutate_token(token: SsoToken, field: str, rng: random.Random, n: int) -> SsoToken:
    if field == "subject":
        value: object = token.subject + rng.choice("abcxyz")
    elif field == "audiences":
        extra = f"aud-{rng.randrange(1000)}"
        value = rng.choice([(*token.audiences, extra), token.audiences[1:], (extra, *token.audiences[1:])])
    elif field in ("issued_epoch", "expiry_epoch"):
        value = getattr(token, field) + rng.choice([-1, 1]) * rng.randint(1, 50)
    elif field == "nonce":
        flipped = bytearray(token.nonce)
        flipped[rng.randrange(len(flipped))] ^= 1 << rng.randrange(8)
        value = bytes(flipped)
    else:
        value = (token.signature + rng.randrange(1, n)) % n
    return token.model_copy(update={field: value})


@pytest.mark.slow
def test_mutated_sso_tokens_are_rejected(keyed_system: IdmSystem) -> None:
    public_key = keyed_system.params.public_key
    token = keyed_system.issue_sso_token("alice", ["mail", "wiki"], 10, 90)
    fields = ["subject", "audiences", "issued_epoch", "expiry_epoch", "nonce", "signature"]
    rng = random.Random(500)

    for trial in range(500):
        field = fields[trial % len(fields)]
        mutated = _mutate_token(token, field, rng, public_key.n)

        assert mutated != token
        assert verify_sso_token(mutated, public_key, "mail", 95).reason == "BadSignature", f"{field} trial={trial}"


def test_authentication_issues_verifiable_token(keyed_system: IdmSystem) -> None:
    key = keyed_system.key_gen("alice", parse_attributes(["role/staff"]))
    bundle = keyed_system.encrypt(ALICE, STAFF_TREE, bundle_id="sso")
    ctx = EvaluationContext(now_epoch=3)

    named = keyed_system.authenticate(bundle, key, ctx, ["name"], audiences=["mail"])
    anonymous = keyed_system.authenticate(bundle, key, ctx, ["name"], audiences=["mail"], anonymous=True)

    assert named.token is not None and named.token.subject == "alice"
    assert verify_sso_token(named.token, keyed_system.params.public_key, "mail", 4).accepted
    assert anonymous.token is not None and anonymous.token.subject != "alice"
    assert keyed_system.parties[1].secret.pseudonyms[anonymous.token.subject] == "alice"


def test_sso_restricted_to_configured_ranks(keyed_system: IdmSystem) -> None:
    params = keyed_system.params.model_copy(update={"rank_policy": _rank_policy(sso_ranks=("senior",))})
    restricted = IdmSystem(network=keyed_system.network, params=params, parties=keyed_system.parties)
    key = restricted.key_gen("alice", parse_attributes(["role/staff"]))
    bundle = restricted.encrypt(ALICE, STAFF_TREE, bundle_id="sso-restricted")

    result = restricted.authenticate(bundle, key, EvaluationContext(now_epoch=3), ["name"], audiences=["mail"])

    assert result.claims == {"name": "Alice"}
    assert result.token is None


def test_token_failure_does_not_block_claims(keyed_system: IdmSystem, mocker: MockerFixture) -> None:
    key = keyed_system.key_gen("alice", parse_attributes(["role/staff"]))
    bundle = keyed_system.encrypt(ALICE, STAFF_TREE, bundle_id="sso-failure")
    issue = mocker.patch.object(keyed_system, "issue_sso_token", side_effect=MissingParty("party 2 crashed"))

    result = keyed_system.authenticate(bundle, key, EvaluationContext(now_epoch=3), ["name"], audiences=["mail"])

    issue.assert_called_once()
    assert result.claims == {"name": "Alice"}
    assert result.token is None
