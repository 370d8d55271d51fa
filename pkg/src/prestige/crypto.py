"""Signatures, quorum certificates and the reputation-priced hash puzzle.

Signatures are HMAC-SHA256 under a per-server secret. That is enough for the
simulator's trust model (a faulty server never holds a correct server's key);
it is not public-key cryptography. A quorum certificate keeps the individual
member signatures and a digest over them standing in for a threshold proof.
"""

from __future__ import annotations

import hashlib
import hmac
import math
import random
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Iterable, Mapping

HASH_BYTES = 32


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def canonical(*fields) -> bytes:
    """Length-prefixed encoding of a flat field sequence.

    Supported field types: bytes, str, int, float, bool, None and nested
    tuples/lists of those. The encoding is unambiguous, so equal byte strings
    imply equal field sequences.
    """
    out = bytearray()
    for value in fields:
        if isinstance(value, bytes):
            tag, body = b"b", value
        elif isinstance(value, str):
            tag, body = b"s", value.encode()
        elif isinstance(value, bool):
            tag, body = b"?", b"1" if value else b"0"
        elif isinstance(value, int):
            tag, body = b"i", str(value).encode()
        elif isinstance(value, float):
            tag, body = b"f", repr(value).encode()
        elif value is None:
            tag, body = b"n", b""
        elif isinstance(value, (tuple, list)):
            tag, body = b"l", canonical(*value)
        else:
            raise TypeError(f"cannot canonicalize {type(value).__name__}")
        out += tag + len(body).to_bytes(4, "big") + body
    return bytes(out)


def digest(*fields) -> bytes:
    return sha256(canonical(*fields))


class CryptoError(ValueError):
    pass


@dataclass(frozen=True)
class KeyPair:
    server_id: int
    secret: bytes = field(repr=False)

    def sign(self, msg_digest: bytes) -> bytes:
        return hmac.new(self.secret, msg_digest, hashlib.sha256).digest()


class Keyring:
    """Verification side of every participant's key (servers and clients)."""

    def __init__(self, keys: Mapping[int, KeyPair]):
        self._keys = dict(keys)

    @classmethod
    def generate(cls, ids: Iterable[int], seed: int) -> "Keyring":
        rng = random.Random(f"keyring:{seed}")
        return cls({i: KeyPair(i, rng.randbytes(32)) for i in ids})

    def key(self, server_id: int) -> KeyPair:
        return self._keys[server_id]

    def verify(self, server_id: int, msg_digest: bytes, signature: bytes) -> bool:
        key = self._keys.get(server_id)
        if key is None or not isinstance(signature, bytes):
            return False
        return hmac.compare_digest(key.sign(msg_digest), signature)


@dataclass(frozen=True)
class QuorumCert:
    message_digest: bytes
    view: int
    threshold: int
    signatures: tuple[tuple[int, bytes], ...]
    aggregate_proof: bytes

    @property
    def signer_set(self) -> frozenset[int]:
        return frozenset(s for s, _ in self.signatures)

    def to_json(self) -> dict:
        return {
            "message_digest": self.message_digest.hex(),
            "view": self.view,
            "threshold": self.threshold,
            "signers": sorted(self.signer_set),
        }


def _proof(msg_digest: bytes, view: int, threshold: int, sigs: tuple) -> bytes:
    return digest(msg_digest, view, threshold, [[s, sig] for s, sig in sigs])


def aggregate_qc(
    sigs: Mapping[int, bytes] | Iterable[tuple[int, bytes]],
    msg_digest: bytes,
    view: int,
    threshold: int,
    keyring: Keyring,
) -> QuorumCert:
    """Combine individual signatures into a certificate.

    Raises ``CryptoError`` on a duplicate signer, a bad member signature or
    fewer than ``threshold`` members.
    """
    items = list(sigs.items()) if isinstance(sigs, Mapping) else list(sigs)
    seen: set[int] = set()
    for signer, sig in items:
        if signer in seen:
            raise CryptoError(f"duplicate signer {signer}")
        seen.add(signer)
        if not keyring.verify(signer, msg_digest, sig):
            raise CryptoError(f"invalid signature from {signer}")
    if len(items) < threshold:
        raise CryptoError(f"{len(items)} signatures below threshold {threshold}")
    ordered = tuple(sorted(items))
    return QuorumCert(msg_digest, view, threshold, ordered, _proof(msg_digest, view, threshold, ordered))


class QCVerifier:
    """Checks certificates; caches accepted proofs so re-checks cost O(1)."""

    def __init__(self, keyring: Keyring):
        self.keyring = keyring
        self._ok: set[bytes] = set()

    def verify(self, qc: QuorumCert | None, msg_digest: bytes, threshold: int) -> bool:
        if not isinstance(qc, QuorumCert):
            return False
        if qc.message_digest != msg_digest or qc.threshold < threshold:
            return False
        if qc.aggregate_proof in self._ok:
            return True
        sigs = qc.signatures
        if len(sigs) < threshold or len({s for s, _ in sigs}) != len(sigs):
            return False
        if qc.aggregate_proof != _proof(qc.message_digest, qc.view, qc.threshold, sigs):
            return False
        if not all(self.keyring.verify(s, msg_digest, sig) for s, sig in sigs):
            return False
        self._ok.add(qc.aggregate_proof)
        return True


# -- hash puzzle ---------------------------------------------------------------


def leading_zero_bits(h: bytes) -> int:
    n = 0
    for byte in h:
        if byte == 0:
            n += 8
            continue
        return n + 8 - byte.bit_length()
    return n


@dataclass(frozen=True)
class PuzzleSolution:
    nonce: bytes
    hash_result: bytes
    difficulty: int
    payload_digest: bytes
    iterations: int
    cost_ms: float
    exhausted: bool = False


class LeadershipCost(ABC):
    """Work a redeemer must show before it may campaign."""

    @abstractmethod
    def solve(self, payload_digest: bytes, rp: int, rng: random.Random, budget: float | None = None,
              workers: int = 1) -> PuzzleSolution: ...

    @abstractmethod
    def verify(self, payload_digest: bytes, nonce: bytes, claimed_rp: int, hash_result: bytes | None = None) -> bool: ...


class HashPuzzle(LeadershipCost):
    """Find ``nc`` with ``SHA-256(payload || nc)`` starting with ``bits_per_rp * rp`` zero bits.

    In ``real`` mode nonces are hashed until one qualifies. In ``modeled``
    mode the iteration count is sampled from the geometric distribution with
    success probability ``2**-(bits_per_rp*rp)`` and the solution carries a
    tag that only this instance can check; verification stays one hash.
    ``budget`` is a cap on expected iterations: if ``2**(bits*rp)`` exceeds
    it the solver reports exhaustion instead of solving.
    """

    MODELED_PREFIX = b"modeled:"

    def __init__(self, bits_per_rp: int = 8, mode: str = "real", hash_rate: float = 1e7,
                 tag_secret: bytes = b"prestige-sim"):
        if mode not in ("real", "modeled"):
            raise ValueError(f"unknown puzzle mode {mode!r}")
        if bits_per_rp < 1:
            raise ValueError("bits_per_rp must be positive")
        self.bits_per_rp = bits_per_rp
        self.mode = mode
        self.hash_rate = hash_rate
        self._tag_secret = tag_secret
        self.hash_calls = 0

    def required_bits(self, rp: int) -> int:
        return self.bits_per_rp * rp

    def expected_iterations(self, rp: int) -> float:
        return 2.0 ** self.required_bits(rp)

    def _hash(self, payload_digest: bytes, nonce: bytes) -> bytes:
        self.hash_calls += 1
        return sha256(payload_digest + nonce)

    def _tag(self, payload_digest: bytes, rp: int, nonce: bytes) -> bytes:
        return hmac.new(self._tag_secret, payload_digest + rp.to_bytes(4, "big") + nonce, hashlib.sha256).digest()

    def solve(self, payload_digest: bytes, rp: int, rng: random.Random, budget: float | None = None,
              workers: int = 1) -> PuzzleSolution:
        if rp < 0:
            raise ValueError("rp must be >= 0")
        bits = self.required_bits(rp)
        rate = self.hash_rate * max(1, workers)
        if budget is not None and self.expected_iterations(rp) > budget:
            return PuzzleSolution(b"", b"", rp, payload_digest, 0, math.inf, exhausted=True)
        if self.mode == "real":
            iterations = 0
            while True:
                iterations += 1
                nonce = rng.randbytes(16)
                h = self._hash(payload_digest, nonce)
                if leading_zero_bits(h) >= bits:
                    return PuzzleSolution(nonce, h, rp, payload_digest, iterations, iterations / rate * 1000.0)
        p = 2.0 ** -bits
        if p >= 1.0:
            iterations = 1
        else:
            u = 1.0 - rng.random()
            iterations = max(1, math.ceil(math.log(u) / math.log1p(-p)))
        body = rng.randbytes(8)
        nonce = self.MODELED_PREFIX + body + self._tag(payload_digest, rp, body)
        h = bytes(math.ceil(bits / 8)) + sha256(payload_digest + nonce)[math.ceil(bits / 8):] if bits else sha256(payload_digest + nonce)
        return PuzzleSolution(nonce, h[:HASH_BYTES], rp, payload_digest, iterations, iterations / rate * 1000.0)

    def verify(self, payload_digest: bytes, nonce: bytes, claimed_rp: int, hash_result: bytes | None = None) -> bool:
        if claimed_rp < 0 or not isinstance(nonce, bytes):
            return False
        if nonce.startswith(self.MODELED_PREFIX) and len(nonce) == len(self.MODELED_PREFIX) + 8 + 32:
            self.hash_calls += 1
            body = nonce[len(self.MODELED_PREFIX):len(self.MODELED_PREFIX) + 8]
            tag = nonce[len(self.MODELED_PREFIX) + 8:]
            return hmac.compare_digest(tag, self._tag(payload_digest, claimed_rp, body))
        h = self._hash(payload_digest, nonce)
        if hash_result is not None and h != hash_result:
            return False
        return leading_zero_bits(h) >= self.required_bits(claimed_rp)
