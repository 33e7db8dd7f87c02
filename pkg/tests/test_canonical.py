from __future__ import annotations

from pydantic import BaseModel

from ttpfree_idm.canonical import BigInt, HexBytes, canonical_bytes, canonical_text, digest, parse_canonical_int


class Holder(BaseModel):
    value: BigInt
    blob: HexBytes = b""


def test_keys_sorted_and_compact() -> None:
    assert canonical_text({"b": 1, "a": [True, None]}) == '{"a":[true,null],"b":1}'


def test_large_ints_and_bytes_become_hex() -> None:
    assert canonical_text(2**53 - 1) == str(2**53 - 1)
    assert canonical_text(2**53) == '"0x20000000000000"'
    assert canonical_text(-(2**60)) == '"-0x1000000000000000"'
    assert canonical_text(b"\x00\xff") == '"0x00ff"'


def test_sets_sorted_by_encoding() -> None:
    assert canonical_text({"s": frozenset({"b", "a", "c"})}) == '{"s":["a","b","c"]}'


def test_unicode_kept_verbatim() -> None:
    assert canonical_bytes({"名": "值"}) == '{"名":"值"}'.encode()


def test_big_int_field_round_trips_through_hex() -> None:
    model = Holder(value=2**70, blob=b"\x01\x02")

    restored = Holder.model_validate_json(canonical_text(model))

    assert restored == model
    assert parse_canonical_int("0x10") == 16
    assert parse_canonical_int("-0x10") == -16


def test_digest_ignores_key_order() -> None:
    assert digest({"a": 1, "b": 2}) == digest({"b": 2, "a": 1})
