from __future__ import annotations

import json
import random
from collections.abc import Mapping, Sequence

import pytest
from pytest_mock import MockerFixture

from ttpfree_idm.bundle import (
    ActiveBundle,
    BundleItem,
    BundlePolicy,
    DecisionKind,
    HostProfile,
    apoptose,
    arrive,
    disclose_item,
    evaluate_arrival,
    evaporate,
    lifecycle,
    make_bundle,
    verify_integrity,
    wipe_items,
)
from ttpfree_idm.canonical import canonical_bytes
from ttpfree_idm.errors import BundleApoptosed, IntegrityFailure, LabelUnknown, ThresholdViolation
from ttpfree_idm.policy import AccessTree, AttributeKey, EvaluationContext, attr

TREE = AccessTree.of(attr("role/staff"))


def _build_bundle(**overrides: float) -> ActiveBundle:
    items = [
        BundleItem(label="ssn", sensitivity=0.9, ciphertext=b"\x01" * 40),
        BundleItem(label="name", sensitivity=0.2, ciphertext=b"\x02" * 40),
        BundleItem(label="dob", sensitivity=0.5, ciphertext=b"\x03" * 40),
    ]
    return make_bundle(
        "b1",
        items,
        TREE,
        apoptosis_threshold=overrides.get("ta", 0.3),
        evaporation_threshold=overrides.get("te", 0.8),
    )


def _host(tau: float) -> HostProfile:
    return HostProfile(host_id="h", trust_level=tau)


class FakeAuthenticator:
    def __init__(self) -> None:
        self.requested: list[list[str]] = []

    def open_claims(
        self,
        bundle: ActiveBundle,
        key: AttributeKey,
        ctx: EvaluationContext,
        labels: Sequence[str],
    ) -> Mapping[str, str]:
        self.requested.append(list(labels))
        return {label: f"plain-{label}" for label in labels}


def _key() -> AttributeKey:
    return AttributeKey(user_id="alice", attributes=frozenset(), rank="regular", tags={})


def test_items_are_sorted_and_sealed() -> None:
    bundle = _build_bundle()

    assert bundle.labels == ["dob", "name", "ssn"]
    assert verify_integrity(bundle)


@pytest.mark.parametrize(
    ("tau", "kind", "retained"),
    [
        (0.2, DecisionKind.APOPTOSIS, ()),
        (0.5, DecisionKind.EVAPORATE, ("dob", "name")),
        (0.85, DecisionKind.FULL, ("dob", "name", "ssn")),
    ],
)
def test_arrival_decision_by_trust_level(tau: float, kind: DecisionKind, retained: tuple[str, ...]) -> None:
    decision = evaluate_arrival(_build_bundle(), _host(tau))

    assert decision.kind is kind
    assert decision.retained_labels == retained
    assert decision.integrity_ok


def test_boundary_trust_levels() -> None:
    bundle = _build_bundle()

    assert evaluate_arrival(bundle, _host(0.3)).kind is DecisionKind.EVAPORATE
    assert evaluate_arrival(bundle, _host(0.8)).kind is DecisionKind.FULL


def test_arrive_applies_decision() -> None:
    decision, evaporated = arrive(_build_bundle(), _host(0.5))

    assert decision.kind is DecisionKind.EVAPORATE
    assert evaporated.labels == ["dob", "name"]
    assert verify_integrity(evaporated)

    _, dead = arrive(_build_bundle(), _host(0.1))
    assert dead.tombstone
    assert dead.items == ()
    assert dead.credential is None


def test_tampered_bundle_apoptoses_on_arrival() -> None:
    bundle = _build_bundle()
    tampered = bundle.model_copy(update={"items": bundle.items[:1]})

    decision, result = arrive(tampered, _host(0.95))

    assert decision.kind is DecisionKind.APOPTOSIS
    assert decision.integrity_ok is False
    assert result.tombstone


def test_evaporate_outside_window_raises() -> None:
    bundle = _build_bundle()

    with pytest.raises(ThresholdViolation):
        evaporate(bundle, 0.2)
    with pytest.raises(ThresholdViolation):
        evaporate(bundle, 0.8)


def test_evaporate_without_removal_keeps_bundle() -> None:
    bundle = _build_bundle()

    assert evaporate(bundle, 0.79).labels == ["dob", "name"]
    only_low = [BundleItem(label="x", sensitivity=0.1, ciphertext=b"")]
    low = make_bundle("b2", only_low, TREE, apoptosis_threshold=0.3, evaporation_threshold=0.8)
    assert evaporate(low, 0.4) is low


def test_apoptose_is_idempotent() -> None:
    dead = apoptose(_build_bundle())

    assert apoptose(dead) is dead
    assert verify_integrity(dead)


def test_wipe_items_zero_fills_same_length() -> None:
    items = _build_bundle().items

    wiped = wipe_items(items)

    assert [i.label for i in wiped] == [i.label for i in items]
    assert [len(i.ciphertext) for i in wiped] == [len(i.ciphertext) for i in items]
    assert all(set(i.ciphertext) <= {0} for i in wiped)


def test_apoptose_overwrites_items_before_removal(mocker: MockerFixture) -> None:
    spy = mocker.spy(lifecycle, "wipe_items")
    bundle = _build_bundle()

    dead = apoptose(bundle)

    spy.assert_called_once()
    assert len(spy.spy_return) == len(bundle.items)
    assert all(not any(i.ciphertext) for i in spy.spy_return)
    assert dead.items == () and dead.tombstone and dead.credential is None
    apoptose(dead)
    spy.assert_called_once()


def test_bundle_rejects_inverted_thresholds() -> None:
    with pytest.raises(ValueError):
        _build_bundle(ta=0.9, te=0.5)
    with pytest.raises(ValueError):
        BundlePolicy(apoptosis_threshold=0.9, evaporation_threshold=0.5)


def test_policy_default_sensitivity() -> None:
    policy = BundlePolicy(sensitivity={"name": 0.2})

    assert policy.sensitivity_of("name") == 0.2
    assert policy.sensitivity_of("unknown") == 1.0


def test_disclose_item_asks_only_for_requested_label() -> None:
    authenticator = FakeAuthenticator()
    ctx = EvaluationContext(now_epoch=1)

    value = disclose_item(_build_bundle(), "dob", _key(), ctx, authenticator)

    assert value == "plain-dob"
    assert authenticator.requested == [["dob"]]


def test_disclose_item_guards() -> None:
    authenticator = FakeAuthenticator()
    ctx = EvaluationContext(now_epoch=1)
    bundle = _build_bundle()

    with pytest.raises(LabelUnknown):
        disclose_item(bundle, "email", _key(), ctx, authenticator)
    with pytest.raises(BundleApoptosed):
        disclose_item(apoptose(bundle), "dob", _key(), ctx, authenticator)
    with pytest.raises(IntegrityFailure):
        disclose_item(bundle.model_copy(update={"creation_epoch": 9}), "dob", _key(), ctx, authenticator)
    assert authenticator.requested == []


@pytest.mark.slow
def test_retained_items_grow_with_trust() -> None:
    rng = random.Random(31)

    for _ in range(200):
        ta = round(rng.uniform(0.0, 0.5), 2)
        te = round(rng.uniform(ta, 1.0), 2)
        items = [
            BundleItem(label=f"item{j}", sensitivity=round(rng.random(), 2), ciphertext=b"")
            for j in range(rng.randint(1, 6))
        ]
        bundle = make_bundle("sweep", items, TREE, apoptosis_threshold=ta, evaporation_threshold=te)
        previous: set[str] = set()
        for step in range(0, 101):
            decision = evaluate_arrival(bundle, _host(step / 100))
            retained = set(decision.retained_labels)
            assert previous <= retained
            for label in retained:
                item = bundle.item(label)
                assert item is not None
                assert decision.kind is DecisionKind.FULL or item.sensitivity <= step / 100
            previous = retained


@pytest.mark.slow
def test_single_bit_flips_never_pass_integrity() -> None:
    bundle = _build_bundle()
    encoded = canonical_bytes(bundle)
    rng = random.Random(1000)
    detected = 0

    for _ in range(1000):
        flipped = bytearray(encoded)
        bit = rng.randrange(len(flipped) * 8)
        flipped[bit // 8] ^= 1 << (bit % 8)
        try:
            mutated = ActiveBundle.model_validate(json.loads(flipped.decode("utf-8")))
        except ValueError:
            continue
        # 大小写等不改变内容的翻转解析后与原 bundle 相同
        if mutated == bundle:
            continue
        assert not verify_integrity(mutated), f"bit={bit}"
        detected += 1

    assert detected > 0
