import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from keyhop.bits import (
    BitString,
    KeyStore,
    SymbolicExpr,
    nonce,
    p2p_key,
    parse_secret_name,
    random_bits,
    tf_key,
)


def test_xor_masks_and_unmasks():
    x = BitString.from01("1011")
    k = BitString.from01("0110")
    assert (x ^ k).to01() == "1101"
    assert (x ^ k ^ k) == x


def test_xor_rejects_length_mismatch():
    with pytest.raises(ValueError):
        BitString.from01("10") ^ BitString.from01("101")


def test_bit_order_is_low_first():
    b = BitString.from01("1000")
    assert b.value == 1
    assert b.bit(0) == 1 and b.bit(3) == 0


def test_hex_round_trip():
    b = BitString.from01("10110010011")
    assert BitString.from_hex(b.to_hex(), 11) == b
    assert BitString.from_bytes(b.to_bytes(), 11) == b


def test_from_bytes_rejects_wrong_size():
    with pytest.raises(ValueError):
        BitString.from_bytes(b"\x00\x00", 4)


def test_random_bits_are_roughly_balanced():
    rng = random.Random(1234)
    ones = sum(random_bits(1000, rng).to01().count("1") for _ in range(10))
    assert abs(ones / 10_000 - 0.5) < 0.02


def test_secret_names_round_trip():
    for sid in (tf_key("A", "N2"), p2p_key("N1", "A"), nonce("B"), nonce("A", 1)):
        assert parse_secret_name(sid.name) == sid


def test_key_names_preserve_end_order():
    # ends are stored in path order; the name reflects it
    assert tf_key("A", "N2").name == "K[A,N2]"
    assert tf_key("N2", "A").name == "K[N2,A]"
    assert tf_key("N2", "A") != tf_key("A", "N2")


@pytest.mark.parametrize("bad", ["", "K[A]", "X[A,B]", "Q[A,B]", "K[A,A]", "X[A@x]", "K[A,B]extra"])
def test_malformed_secret_names_rejected(bad):
    with pytest.raises(ValueError):
        parse_secret_name(bad)


def test_expr_text_is_sorted_and_self_cancelling():
    a, b = tf_key("A", "N2"), nonce("A")
    expr = SymbolicExpr.of(b) ^ SymbolicExpr.of(a)
    assert expr.text() == "K[A,N2]+X[A]"
    assert (expr ^ expr).is_zero
    assert (expr ^ expr).text() == "0"


def test_store_rejects_duplicates_and_names_missing_ids():
    store = KeyStore(4)
    sid = tf_key("A", "N2")
    store.add(sid, BitString.from01("1010"))
    with pytest.raises(ValueError):
        store.add(sid, BitString.from01("0000"))
    with pytest.raises(KeyError, match=r"X\[A\]"):
        store[nonce("A")]


def test_store_keeps_insertion_order():
    store = KeyStore(2)
    rng = random.Random(0)
    ids = [nonce("B"), tf_key("A", "N2"), nonce("A")]
    for sid in ids:
        store.sample(sid, rng)
    assert list(store.ids()) == ids


_POOL = [tf_key("A", "N2"), tf_key("N1", "B"), p2p_key("A", "N1"), nonce("A"), nonce("B")]


def _store_over_pool(n):
    store = KeyStore(n)
    rng = random.Random(99)
    for sid in _POOL:
        store.sample(sid, rng)
    return store


@given(st.lists(st.sampled_from(_POOL)), st.lists(st.sampled_from(_POOL)))
def test_evaluate_is_a_xor_homomorphism(lhs, rhs):
    store = _store_over_pool(8)
    e1 = SymbolicExpr.of(*lhs)
    e2 = SymbolicExpr.of(*rhs)
    assert store.evaluate(e1 ^ e2) == store.evaluate(e1) ^ store.evaluate(e2)


@given(st.lists(st.sampled_from(_POOL)), st.lists(st.sampled_from(_POOL)))
def test_expr_xor_is_commutative_and_involutive(lhs, rhs):
    e1 = SymbolicExpr.of(*lhs)
    e2 = SymbolicExpr.of(*rhs)
    assert e1 ^ e2 == e2 ^ e1
    assert (e1 ^ e2) ^ e2 == e1


def test_evaluate_empty_expr_is_zero():
    store = _store_over_pool(6)
    assert store.evaluate(SymbolicExpr.of()) == BitString.zeros(6)
