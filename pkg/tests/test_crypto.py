"""Signatures, messages, quorums and certificates."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastset.claims import ClaimBlock, transfer
from fastset.crypto import (
    ED25519,
    MOCK,
    Certificate,
    InsufficientQuorum,
    InvalidSignature,
    KeyPair,
    QuorumConfig,
    UnknownValidator,
    aggregate,
    approve,
    check_certificate,
    load_key_file,
    sign,
    sign_message,
    verify,
    write_key_file,
)


def validators(f, scheme=MOCK):
    return [KeyPair.from_name(f"v{i}", scheme) for i in range(3 * f + 1)]


def a_message(sender_name="alice", nonce=0):
    key = KeyPair.from_name(sender_name)
    block = ClaimBlock((transfer(key.address, KeyPair.from_name("bob").address, 1),))
    return sign_message(key, block, nonce, 1000)


@pytest.mark.parametrize("scheme", [MOCK, ED25519])
def test_sign_and_verify(scheme):
    k = KeyPair.from_name("alice", scheme)
    sig = sign(k, b"hello")
    assert verify(k.address, b"hello", sig)
    assert not verify(k.address, b"hullo", sig)
    assert not verify(KeyPair.from_name("bob", scheme).address, b"hello", sig)
    assert not verify(k.address, b"hello", b"")


def test_keys_are_deterministic_per_name():
    assert KeyPair.from_name("x") == KeyPair.from_name("x")
    assert KeyPair.from_name("x").address != KeyPair.from_name("y").address
    with pytest.raises(ValueError):
        KeyPair.from_seed(b"short")


def test_signed_message_checks_its_signature():
    m = a_message()
    assert m.signature_ok()
    forged = type(m)(m.block, m.nonce, m.timestamp, KeyPair.from_name("bob").address, m.signature)
    assert not forged.signature_ok()
    assert m.digest() != a_message(nonce=1).digest()


def test_quorum_config_requires_3f_plus_1():
    keys = validators(1)
    cfg = QuorumConfig([k.address for k in keys], 1)
    assert cfg.n == 4 and cfg.quorum_size == 3
    with pytest.raises(ValueError):
        QuorumConfig([k.address for k in keys[:3]], 1)
    with pytest.raises(ValueError):
        QuorumConfig([keys[0].address] * 4, 1)


@pytest.mark.parametrize("f", [0, 1, 2])
def test_aggregate_needs_2f_plus_1_distinct_approvals(f):
    keys = validators(f)
    cfg = QuorumConfig([k.address for k in keys], f)
    m = a_message()
    sigs = {k.address: approve(k, m) for k in keys[: 2 * f + 1]}
    cert = aggregate(m, sigs, cfg)
    assert check_certificate(cert, cfg)
    assert len(cert.signers()) == 2 * f + 1
    if f:
        short = dict(list(sigs.items())[: 2 * f])
        with pytest.raises(InsufficientQuorum):
            aggregate(m, short, cfg)
        # a duplicated signer does not count twice
        first = next(iter(short.items()))
        dup = Certificate(m, tuple(short.items()) + (first,))
        assert not check_certificate(dup, cfg)


def test_aggregate_rejects_outsiders_and_bad_signatures():
    keys = validators(1)
    cfg = QuorumConfig([k.address for k in keys], 1)
    m = a_message()
    outsider = KeyPair.from_name("mallory")
    with pytest.raises(UnknownValidator):
        aggregate(m, {outsider.address: approve(outsider, m)}, cfg)
    other = a_message(nonce=5)
    with pytest.raises(InvalidSignature):
        aggregate(m, {keys[0].address: approve(keys[0], other)}, cfg)


def test_certificate_for_one_message_does_not_certify_another():
    keys = validators(1)
    cfg = QuorumConfig([k.address for k in keys], 1)
    m, m2 = a_message(), a_message(nonce=1)
    cert = aggregate(m, {k.address: approve(k, m) for k in keys[:3]}, cfg)
    moved = Certificate(m2, cert.validator_sigs)
    assert not check_certificate(moved, cfg)


def test_key_file_round_trip(tmp_path):
    seeds = [bytes([i]) * 32 for i in range(4)]
    path = tmp_path / "keys.txt"
    write_key_file(path, seeds)
    keys = load_key_file(path)
    assert [k.address for k in keys] == [KeyPair.from_seed(s).address for s in seeds]


@settings(max_examples=50, deadline=None)
@given(st.binary(max_size=64), st.binary(min_size=32, max_size=32))
def test_mock_signature_property(payload, seed):
    k = KeyPair.from_seed(seed)
    assert verify(k.address, payload, sign(k, payload))
    assert not verify(k.address, payload + b"!", sign(k, payload))
