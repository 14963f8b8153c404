"""Signatures, the three message forms and quorum certificates.

Two signature schemes sit behind one interface:

* ``ed25519`` (via ``cryptography``) for realistic runs;
* ``mock``, a keyed SHA-256 MAC, for property tests that need many
  thousands of signatures per second.  The mock keeps a process-local
  table from public key to secret so anybody can verify.

A signature is ``scheme_tag || raw`` so both schemes can coexist.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from cryptography.exceptions import InvalidSignature as _CryptoInvalid
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .claims import ClaimBlock
from .encoding import Digest, digest, record
from .values import Address

ED25519 = "ed25519"
MOCK = "mock"
_TAGS = {ED25519: b"\x01", MOCK: b"\x02"}

_MOCK_SECRETS: Dict[bytes, bytes] = {}


class CryptoError(Exception):
    pass


class InsufficientQuorum(CryptoError):
    def __init__(self, have: int, need: int) -> None:
        super().__init__(f"have {have} signatures, need {need}")
        self.have = have
        self.need = need


class InvalidSignature(CryptoError):
    def __init__(self, validator: Address) -> None:
        super().__init__(f"invalid signature from {validator!r}")
        self.validator = validator


class UnknownValidator(CryptoError):
    def __init__(self, address: Address) -> None:
        super().__init__(f"{address!r} is not a configured validator")
        self.address = address


@dataclass(frozen=True)
class KeyPair:
    public: Address
    secret: bytes = field(repr=False)
    scheme: str = MOCK

    @classmethod
    def from_seed(cls, seed: bytes, scheme: str = MOCK) -> "KeyPair":
        if len(seed) != 32:
            raise ValueError("seeds are 32 bytes")
        if scheme == ED25519:
            sk = Ed25519PrivateKey.from_private_bytes(seed)
            pk = sk.public_key().public_bytes(
                serialization.Encoding.Raw, serialization.PublicFormat.Raw)
            return cls(Address(pk), seed, ED25519)
        if scheme == MOCK:
            pk = hashlib.sha256(b"fastset/mock-pk\x00" + seed).digest()
            _MOCK_SECRETS[pk] = seed
            return cls(Address(pk), seed, MOCK)
        raise ValueError(f"unknown scheme {scheme}")

    @classmethod
    def from_name(cls, name: str, scheme: str = MOCK) -> "KeyPair":
        """Deterministic key for a scenario alias."""
        return cls.from_seed(hashlib.sha256(b"fastset/seed/" + name.encode()).digest(), scheme)

    @property
    def address(self) -> Address:
        return self.public


def sign(key: KeyPair, payload: bytes) -> bytes:
    if key.scheme == ED25519:
        return _TAGS[ED25519] + Ed25519PrivateKey.from_private_bytes(key.secret).sign(payload)
    return _TAGS[MOCK] + hmac.new(key.secret, payload, hashlib.sha256).digest()


def verify(public: Address, payload: bytes, signature: bytes) -> bool:
    if not signature:
        return False
    tag, raw = signature[:1], signature[1:]
    if tag == _TAGS[ED25519]:
        try:
            Ed25519PublicKey.from_public_bytes(public.raw).verify(raw, payload)
            return True
        except (_CryptoInvalid, ValueError):
            return False
    if tag == _TAGS[MOCK]:
        secret = _MOCK_SECRETS.get(public.raw)
        if secret is None:
            return False
        return hmac.compare_digest(raw, hmac.new(secret, payload, hashlib.sha256).digest())
    return False


# --------------------------------------------------------------------------
# messages


@record
@dataclass(frozen=True)
class SignedMessage:
    """``<block, nonce>_sender`` together with the timestamp it carries."""

    block: ClaimBlock
    nonce: int
    timestamp: int
    sender: Address
    signature: bytes = field(default=b"", compare=False)

    @property
    def account(self) -> Address:
        return self.block.issuer

    def payload(self) -> bytes:
        cached = self.__dict__.get("_payload")
        if cached is None:
            cached = digest(("msg", self.block, self.nonce, self.timestamp, self.sender))
            object.__setattr__(self, "_payload", cached)
        return cached

    def digest(self) -> Digest:
        return self.payload()

    def signature_ok(self) -> bool:
        return verify(self.sender, self.payload(), self.signature)


def sign_message(key: KeyPair, block: ClaimBlock, nonce: int, timestamp: int) -> SignedMessage:
    unsigned = SignedMessage(block, nonce, timestamp, key.public)
    return SignedMessage(block, nonce, timestamp, key.public, sign(key, unsigned.payload()))


def _sig_pairs(sigs) -> Tuple[Tuple[Address, bytes], ...]:
    if isinstance(sigs, Mapping):
        sigs = sigs.items()
    return tuple(sorted(sigs, key=lambda p: (p[0], p[1])))


@dataclass(frozen=True)
class VerifiedMessage:
    """``<m>_#T``: a signed message plus verifier signatures over its digest."""

    message: SignedMessage
    verifier_sigs: Tuple[Tuple[Address, bytes], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "verifier_sigs", _sig_pairs(self.verifier_sigs))

    def verifiers(self) -> frozenset:
        """Verifier addresses whose signatures check out (the set T)."""
        d = self.message.digest()
        return frozenset(a for a, s in self.verifier_sigs if verify(a, _verifier_payload(d), s))

    def all_verifier_sigs_valid(self) -> bool:
        d = self.message.digest()
        return all(verify(a, _verifier_payload(d), s) for a, s in self.verifier_sigs)


def _verifier_payload(d: Digest) -> bytes:
    return b"fastset/verifier\x00" + d


def _validator_payload(d: Digest) -> bytes:
    return b"fastset/approve\x00" + d


def verifier_sign(key: KeyPair, msg: SignedMessage) -> bytes:
    return sign(key, _verifier_payload(msg.digest()))


def approve(key: KeyPair, msg: SignedMessage) -> bytes:
    """A validator's Step-4 approval signature over ``digest(msg)``."""
    return sign(key, _validator_payload(msg.digest()))


def check_approval(validator: Address, msg: SignedMessage, sig: bytes) -> bool:
    return verify(validator, _validator_payload(msg.digest()), sig)


@dataclass(frozen=True)
class QuorumConfig:
    validators: Tuple[Address, ...]
    f: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "validators", tuple(self.validators))
        if self.f < 0:
            raise ValueError("f must be non-negative")
        if len(self.validators) != 3 * self.f + 1:
            raise ValueError(f"need 3f+1 = {3 * self.f + 1} validators, got {len(self.validators)}")
        if len(set(self.validators)) != len(self.validators):
            raise ValueError("duplicate validator address")

    @property
    def quorum_size(self) -> int:
        return 2 * self.f + 1

    @property
    def n(self) -> int:
        return len(self.validators)


@dataclass(frozen=True)
class Certificate:
    """``<m>_#``: a message with at least 2f+1 validator approvals.

    The signer list is kept in full (sorted pairs) so tests can audit who
    signed; duplicates are representable and counted once by
    ``check_certificate``.
    """

    message: SignedMessage
    validator_sigs: Tuple[Tuple[Address, bytes], ...]
    verifier_sigs: Tuple[Tuple[Address, bytes], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "validator_sigs", _sig_pairs(self.validator_sigs))
        object.__setattr__(self, "verifier_sigs", _sig_pairs(self.verifier_sigs))

    def signers(self) -> List[Address]:
        return sorted({a for a, _ in self.validator_sigs})

    def verified(self) -> VerifiedMessage:
        return VerifiedMessage(self.message, self.verifier_sigs)


def aggregate(message: SignedMessage, sigs, config: QuorumConfig,
              verifier_sigs=()) -> Certificate:
    pairs = _sig_pairs(sigs)
    known = set(config.validators)
    for addr, sig in pairs:
        if addr not in known:
            raise UnknownValidator(addr)
        if not check_approval(addr, message, sig):
            raise InvalidSignature(addr)
    have = len({a for a, _ in pairs})
    if have < config.quorum_size:
        raise InsufficientQuorum(have, config.quorum_size)
    return Certificate(message, pairs, verifier_sigs)


def check_certificate(cert: Certificate, config: QuorumConfig) -> bool:
    known = set(config.validators)
    good = set()
    for addr, sig in cert.validator_sigs:
        if addr not in known or not check_approval(addr, cert.message, sig):
            return False
        good.add(addr)
    return len(good) >= config.quorum_size and cert.message.signature_ok()


# --------------------------------------------------------------------------
# key files


def write_key_file(path, seeds: Iterable[bytes]) -> None:
    Path(path).write_text("".join(s.hex() + "\n" for s in seeds))


def load_key_file(path, scheme: str = MOCK) -> List[KeyPair]:
    keys = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            seed = bytes.fromhex(line)
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: not hex") from exc
        keys.append(KeyPair.from_seed(seed, scheme))
    return keys
