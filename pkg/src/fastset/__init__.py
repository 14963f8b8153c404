"""FastSet: consensus-free settlement of weakly independent claims.

The package is layered: ``claims`` (state and the denotation of claims),
``crypto`` (signatures and quorum certificates), ``setl`` (the contract
language), ``validator`` and ``client`` (the protocol state machines),
``simnet`` (a deterministic network simulator), ``scenario`` and ``cli``
(scripted runs), and ``oracle`` (brute-force checkers).
"""

from .claims import ClaimBlock, GlobalState, apply_block, apply_claim, genesis, try_apply
from .crypto import Certificate, KeyPair, QuorumConfig, SignedMessage, VerifiedMessage
from .validator import Validator, ValidatorOptions

__version__ = "0.1.0"

__all__ = [
    "Certificate",
    "ClaimBlock",
    "GlobalState",
    "KeyPair",
    "QuorumConfig",
    "SignedMessage",
    "Validator",
    "ValidatorOptions",
    "VerifiedMessage",
    "apply_block",
    "apply_claim",
    "genesis",
    "try_apply",
]
