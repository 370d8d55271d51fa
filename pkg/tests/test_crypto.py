import random

import pytest
from hypothesis import given, settings, strategies as st

from prestige.crypto import (
    CryptoError, HashPuzzle, Keyring, QCVerifier, aggregate_qc, canonical, digest, leading_zero_bits,
)


@pytest.fixture
def keyring():
    return Keyring.generate(range(4), seed=9)


def _sigs(keyring, ids, msg):
    return {i: keyring.key(i).sign(msg) for i in ids}


def test_signature_roundtrip_and_forgery(keyring):
    msg = digest("hello", 1)
    sig = keyring.key(2).sign(msg)
    assert keyring.verify(2, msg, sig)
    assert not keyring.verify(1, msg, sig)
    assert not keyring.verify(2, digest("hello", 2), sig)
    assert not keyring.verify(99, msg, sig)


def test_qc_threshold_enforced(keyring):
    msg = digest("ORD", 3)
    qc = aggregate_qc(_sigs(keyring, [0, 1, 2], msg), msg, view=1, threshold=3, keyring=keyring)
    v = QCVerifier(keyring)
    assert v.verify(qc, msg, 3)
    assert not v.verify(qc, msg, 4)
    assert not v.verify(qc, digest("ORD", 4), 3)
    with pytest.raises(CryptoError):
        aggregate_qc(_sigs(keyring, [0, 1], msg), msg, 1, 3, keyring)


def test_qc_rejects_bad_member(keyring):
    msg = digest("CMT", 1)
    sigs = _sigs(keyring, [0, 1, 2], msg)
    sigs[1] = b"\x00" * 32
    with pytest.raises(CryptoError):
        aggregate_qc(sigs, msg, 1, 3, keyring)


def test_qc_tampered_signer_list_fails(keyring):
    msg = digest("CMT", 2)
    qc = aggregate_qc(_sigs(keyring, [0, 1, 2], msg), msg, 1, 3, keyring)
    forged = type(qc)(qc.message_digest, qc.view, qc.threshold, qc.signatures[:2] + qc.signatures[:1],
                      qc.aggregate_proof)
    assert not QCVerifier(keyring).verify(forged, msg, 3)


def test_canonical_encoding_is_injective_on_types():
    assert canonical(1) != canonical("1")
    assert canonical([1, 2]) != canonical([12])
    assert digest(b"a", b"bc") != digest(b"ab", b"c")


@pytest.mark.parametrize("h,bits", [(b"\x00\x0f", 12), (b"\xff", 0), (b"\x00\x00", 16), (b"\x01", 7)])
def test_leading_zero_bits(h, bits):
    assert leading_zero_bits(h) == bits


def test_real_puzzle_solution_verifies_with_one_hash():
    p = HashPuzzle(bits_per_rp=4, mode="real")
    sol = p.solve(digest("tx"), 2, random.Random(1))
    assert leading_zero_bits(sol.hash_result) >= 8
    before = p.hash_calls
    assert p.verify(digest("tx"), sol.nonce, 2, sol.hash_result)
    assert p.hash_calls - before == 1
    assert not p.verify(digest("tx"), sol.nonce, 10, sol.hash_result)
    assert not p.verify(digest("other"), sol.nonce, 2, sol.hash_result)


def test_modeled_solution_binds_payload_and_rp():
    p = HashPuzzle(bits_per_rp=4, mode="modeled")
    sol = p.solve(digest("tx"), 5, random.Random(3))
    before = p.hash_calls
    assert p.verify(digest("tx"), sol.nonce, 5, sol.hash_result)
    assert p.hash_calls - before == 1
    assert not p.verify(digest("tx"), sol.nonce, 6, sol.hash_result)
    assert not p.verify(digest("tx2"), sol.nonce, 5, sol.hash_result)


def test_budget_reports_exhaustion():
    p = HashPuzzle(bits_per_rp=4, mode="modeled")
    sol = p.solve(digest("tx"), 8, random.Random(0), budget=2.0 ** 30)
    assert sol.exhausted and sol.iterations == 0


@settings(max_examples=50)
@given(st.integers(1, 6), st.integers(0, 2**32))
def test_modeled_cost_scales_with_rate(rp, seed):
    slow = HashPuzzle(4, "modeled", hash_rate=1e6).solve(b"x", rp, random.Random(seed))
    fast = HashPuzzle(4, "modeled", hash_rate=1e7).solve(b"x", rp, random.Random(seed))
    assert slow.iterations == fast.iterations >= 1
    assert slow.cost_ms == pytest.approx(10 * fast.cost_ms)
