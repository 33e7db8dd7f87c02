from __future__ import annotations

import itertools
import random
from collections import Counter

import pytest
import sympy

from ttpfree_idm.errors import (
    FieldTooSmall,
    IndexCollision,
    InsufficientShares,
    PartyCountTooSmall,
    SecretOutOfField,
    ThresholdOutOfRange,
)
from ttpfree_idm.netsim import Network, as_int, find_leaks
from ttpfree_idm.sharing import (
    PrimeField,
    SharePoint,
    additive_reconstruct,
    additive_share,
    bgw_shared_product,
    dedup_shares,
    shamir_reconstruct,
    shamir_share,
    zero_share,
)


class ScriptedRng:
    """按顺序返回预设值的随机源。"""

    def __init__(self, values: list[int]) -> None:
        self._values = list(values)

    def randrange(self, start: int, stop: int | None = None, step: int = 1) -> int:
        return self._values.pop(0)

    def randbytes(self, n: int) -> bytes:
        return bytes(n)


def test_shamir_share_matches_hand_computed_polynomial() -> None:
    field = PrimeField(modulus=11)

    share_set = shamir_share(5, 2, 3, field, ScriptedRng([2]))

    assert [(p.index, p.value) for p in share_set.points] == [(1, 7), (2, 9), (3, 0)]
    for pair in itertools.combinations(share_set.points, 2):
        assert shamir_reconstruct(pair, 2, field) == 5


def test_shamir_share_rejects_bad_parameters() -> None:
    field = PrimeField(modulus=11)

    with pytest.raises(ThresholdOutOfRange):
        shamir_share(5, 4, 3, field, ScriptedRng([]))
    with pytest.raises(SecretOutOfField):
        shamir_share(11, 2, 3, field, ScriptedRng([1]))
    with pytest.raises(FieldTooSmall):
        shamir_share(1, 2, 11, field, ScriptedRng([1]))


def test_prime_field_requires_prime_modulus() -> None:
    with pytest.raises(ValueError):
        PrimeField(modulus=12)

    assert PrimeField.next_above(2**61).modulus > 2**61


def test_reconstruct_below_threshold_raises() -> None:
    field = PrimeField(modulus=11)
    share_set = shamir_share(5, 3, 4, field, ScriptedRng([1, 1]))

    with pytest.raises(InsufficientShares):
        shamir_reconstruct(share_set.points[:2], 3, field)


def test_dedup_drops_exact_duplicates_and_flags_collisions() -> None:
    a = SharePoint(index=1, value=7)
    b = SharePoint(index=2, value=9)

    assert dedup_shares([a, b, a], 11) == [a, b]
    # 重复分片不能凑数
    with pytest.raises(InsufficientShares):
        shamir_reconstruct([a, a], 2, PrimeField(modulus=11))
    with pytest.raises(IndexCollision):
        dedup_shares([a, SharePoint(index=1, value=8)], 11)


def test_share_index_zero_is_rejected() -> None:
    with pytest.raises(ValueError):
        SharePoint(index=0, value=1)


def test_additive_share_modular_and_integer() -> None:
    rng = random.Random(3)

    modular = additive_share(10, 3, 97, rng)
    integer = additive_share(-412, 3, None, rng)

    assert additive_reconstruct(modular) == 10
    assert all(0 <= v < 97 for v in modular.values)
    assert additive_reconstruct(integer) == -412
    with pytest.raises(PartyCountTooSmall):
        additive_share(1, 1, None, rng)


def test_zero_share_hides_zero() -> None:
    field = PrimeField(modulus=101)

    share_set = zero_share(2, 3, field, random.Random(1))

    assert shamir_reconstruct(share_set.points, 3, field) == 0


def test_bgw_shared_product_worked_example() -> None:
    result = bgw_shared_product([11, 4, 4], [15, 4, 4], PrimeField(modulus=1009))

    assert result.value == 437
    # 每方只看到发给自己的分片与广播点，不含其他方的原始输入
    kinds = {m.kind for m in result.party_transcript(2)}
    assert kinds == {"bgw.share", "bgw.point"}


def test_bgw_rejects_small_field_and_two_parties() -> None:
    with pytest.raises(FieldTooSmall):
        bgw_shared_product([11, 4, 4], [15, 4, 4], PrimeField(modulus=431))
    with pytest.raises(PartyCountTooSmall):
        bgw_shared_product([3, 4], [3, 4], PrimeField(modulus=1009))


def test_bgw_serial_and_parallel_transcripts_match() -> None:
    field = PrimeField(modulus=1009)
    serial = Network(k=3, seed=9)
    parallel = Network(k=3, seed=9, parallel=True)

    bgw_shared_product([11, 4, 4], [15, 4, 4], field, network=serial)
    bgw_shared_product([11, 4, 4], [15, 4, 4], field, network=parallel)

    assert [m.to_record() for m in serial.transcript] == [m.to_record() for m in parallel.transcript]


@pytest.mark.slow
def test_threshold_wall_over_random_credentials() -> None:
    field = PrimeField.next_above(2**61)
    rng = random.Random(2024)

    for t in (2, 3, 4):
        for _ in range(100):
            secret = rng.randrange(field.modulus)
            points = shamir_share(secret, t, 5, field, rng).points
            for subset in itertools.combinations(points, t):
                assert shamir_reconstruct(subset, t, field) == secret
            for subset in itertools.combinations(points, t - 1):
                with pytest.raises(InsufficientShares):
                    shamir_reconstruct(subset, t, field)


def _naive_lagrange(points: list[SharePoint], modulus: int) -> int:
    """用 sympy 在有理数上插值 f(0)，再映射回 GF(modulus)。"""
    value = sympy.Rational(sympy.interpolate([(p.index, p.value) for p in points], 0))
    return int(value.p) * pow(int(value.q), -1, modulus) % modulus


@pytest.mark.slow
def test_shamir_round_trip_over_random_subsets() -> None:
    field = PrimeField.next_above(2**61)
    rng = random.Random(77)

    for case in range(1000):
        n = rng.randint(2, 8)
        t = rng.randint(1, n)
        secret = rng.randrange(field.modulus)
        points = list(shamir_share(secret, t, n, field, rng).points)
        subset = rng.sample(points, t)

        assert shamir_reconstruct(subset, t, field) == secret, f"case={case}"
        if case % 5 == 0:
            assert _naive_lagrange(subset, field.modulus) == secret, f"case={case}"


@pytest.mark.slow
def test_threshold_wall_exhaustive_for_small_groups() -> None:
    field = PrimeField.next_above(2**61)
    rng = random.Random(6)

    for n in range(2, 7):
        for t in range(1, n + 1):
            secret = rng.randrange(field.modulus)
            points = shamir_share(secret, t, n, field, rng).points
            for size in range(n + 1):
                for subset in itertools.combinations(points, size):
                    if size >= t:
                        assert shamir_reconstruct(subset, t, field) == secret
                    else:
                        with pytest.raises(InsufficientShares):
                            shamir_reconstruct(subset, t, field)


@pytest.mark.parametrize("t", [2, 3])
def test_fewer_than_t_shares_are_uniform_for_every_secret(t: int) -> None:
    field = PrimeField(modulus=7)

    for subset in itertools.combinations(range(1, 5), t - 1):
        views: dict[int, Counter[tuple[int, ...]]] = {}
        for secret in range(field.modulus):
            seen: Counter[tuple[int, ...]] = Counter()
            for coefficients in itertools.product(range(field.modulus), repeat=t - 1):
                share_set = shamir_share(secret, t, 4, field, ScriptedRng(list(coefficients)))
                seen[tuple(p.value for p in share_set.subset(list(subset)))] += 1
            views[secret] = seen
        # 每个 t-1 点视图恰好出现一次，与秘密无关
        assert all(view == views[0] for view in views.values())
        assert set(views[0].values()) == {1}


def test_dedup_is_idempotent() -> None:
    field = PrimeField(modulus=1009)
    rng = random.Random(12)

    for _ in range(50):
        points = list(shamir_share(rng.randrange(1009), 3, 6, field, rng).points)
        noisy = [rng.choice(points) for _ in range(12)]
        once = dedup_shares(noisy, field.modulus)

        assert dedup_shares(once, field.modulus) == once
        assert len({p.index for p in once}) == len(once)
        assert set(once) == set(noisy)


@pytest.mark.slow
def test_bgw_product_over_random_inputs() -> None:
    field = PrimeField.next_above(2**64)
    rng = random.Random(404)

    for case in range(1000):
        k = rng.choice((3, 4, 5))
        a = [rng.randrange(2**20) for _ in range(k)]
        b = [rng.randrange(2**20) for _ in range(k)]

        result = bgw_shared_product(a, b, field, seed=case)

        assert result.value == sum(a) * sum(b), f"case={case}"


def _received_share_of_a(seed: int, a_1: int) -> int:
    result = bgw_shared_product([a_1, 1, 1], [1, 1, 1], PrimeField(modulus=31), seed=seed)
    [message] = [m for m in result.party_transcript(2) if m.kind == "bgw.share" and m.sender == 1]
    return as_int(message.payload()["a"][0])


@pytest.mark.slow
def test_bgw_share_received_is_independent_of_input() -> None:
    samples = 2000
    low = Counter(_received_share_of_a(seed, 0) for seed in range(samples))
    high = Counter(_received_share_of_a(seed, 3) for seed in range(samples, 2 * samples))

    assert set(low) == set(high) == set(range(31))
    distance = sum(abs(low[v] - high[v]) for v in range(31)) / (2 * samples)
    assert distance < 0.2


def test_bgw_party_view_holds_no_other_inputs() -> None:
    field = PrimeField.next_above(2**61)
    rng = random.Random(8)

    for case in range(30):
        a = [rng.randrange(2**20) for _ in range(3)]
        b = [rng.randrange(2**20) for _ in range(3)]
        result = bgw_shared_product(a, b, field, seed=case)
        secrets = {f"{name}_{pid}": values[pid - 1] for name, values in (("a", a), ("b", b)) for pid in (1, 3)}

        assert find_leaks(result.party_transcript(2), secrets) == []
