"""Authentication keys ``AK = h(ID, C)`` and the keyed H/I coding."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

from ..qstate import Gate, Qubit, Registry


def _frame(user_id: bytes, counter: int) -> bytes:
    return len(user_id).to_bytes(4, "big") + user_id + counter.to_bytes(8, "big")


def _shake256(user_id: bytes, counter: int, nbytes: int) -> bytes:
    return hashlib.shake_256(b"qdc-ak/" + _frame(user_id, counter)).digest(nbytes)


def _sha256_ctr(user_id: bytes, counter: int, nbytes: int) -> bytes:
    out = bytearray()
    block = 0
    base = _frame(user_id, counter)
    while len(out) < nbytes:
        out += hashlib.sha256(base + block.to_bytes(4, "big")).digest()
        block += 1
    return bytes(out[:nbytes])


HASHES: dict[str, Callable[[bytes, int, int], bytes]] = {
    "shake256": _shake256,
    "sha256-ctr": _sha256_ctr,
}


@dataclass(frozen=True)
class AuthKey:
    user_id: bytes
    counter: int
    bits: tuple[int, ...]
    hash_id: str = "shake256"

    def __post_init__(self) -> None:
        if not self.bits:
            raise ValueError("key must have at least one bit")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("key bits must be 0/1")

    def __len__(self) -> int:
        return len(self.bits)

    def bit(self, position: int) -> int:
        """Key bit for sequence position ``position``; the key is reused cyclically."""
        return self.bits[position % len(self.bits)]

    def refreshed(self) -> "AuthKey":
        """Next key from the same identity with the counter incremented."""
        return derive_auth_key(self.user_id, self.counter + 1, len(self.bits), self.hash_id)

    @classmethod
    def from_bits(cls, bits: Sequence[int] | str, user_id: bytes = b"", counter: int = 0) -> "AuthKey":
        """Key with explicit bits (scripted scenarios, tests)."""
        if isinstance(bits, str):
            bits = [int(c) for c in bits]
        return cls(user_id, counter, tuple(int(b) for b in bits), hash_id="explicit")


def derive_auth_key(user_id: bytes | str, counter: int, length: int, hash_id: str = "shake256") -> AuthKey:
    if length < 1:
        raise ValueError("key length must be >= 1")
    if counter < 0:
        raise ValueError("counter must be non-negative")
    if hash_id not in HASHES:
        raise ValueError(f"unknown hash construction {hash_id!r}; choose from {sorted(HASHES)}")
    uid = user_id.encode() if isinstance(user_id, str) else bytes(user_id)
    raw = HASHES[hash_id](uid, counter, (length + 7) // 8)
    bits = tuple((raw[i // 8] >> (7 - i % 8)) & 1 for i in range(length))
    return AuthKey(uid, counter, bits, hash_id)


class Convention(str, Enum):
    """Which key-bit value triggers an H in a keyed coding step."""

    H_FOR_ZERO = "h_for_zero"
    H_FOR_ONE = "h_for_one"

    def gate(self, bit: int) -> Gate:
        hit = 0 if self is Convention.H_FOR_ZERO else 1
        return Gate.H if bit == hit else Gate.I


def keyed_code_sequence(
    reg: Registry,
    qs: Sequence[Qubit],
    key: AuthKey,
    convention: Convention,
    offset: int = 0,
) -> None:
    """H or I on each qubit by the key bit at its sequence position."""
    for i, q in enumerate(qs):
        g = convention.gate(key.bit(offset + i))
        if g is Gate.H:
            reg.apply_gate(g, q)


def keyed_transform(reg: Registry, qubits: Sequence[Qubit], key_bit: int, convention: Convention = Convention.H_FOR_ONE) -> None:
    """Apply the keyed I/H transform to each of one party's qubits at a position."""
    g = convention.gate(key_bit)
    if g is Gate.H:
        for q in qubits:
            reg.apply_gate(g, q)
