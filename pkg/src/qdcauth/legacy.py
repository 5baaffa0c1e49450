"""
The earlier GHZ-based authenticated QDC protocols and the authenticator's
different-initial-state attack on them.

Trent prepares one three-qubit state per position over qubits ``(A, T, B)``,
hides it with keyed I/H on A and B, and hands out A and B. The users undo
the keys and compare Z results on a random subset. Alice then writes one bit
per remaining position with a unitary on A:

* Lee: I for 0, H for 1
* Zhang: H for 0, HZ (Z first, then H) for 1

and A goes to Bob (``Protocol1``) or to Trent (``Protocol2``). Lee's bit is
read by an X measurement of the third qubit plus a Bell measurement of the
other two; Zhang's by X measurements after H on A.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .channels import log_measurement, send_qubits
from .protocol.config import Session
from .protocol.keys import AuthKey, Convention, derive_auth_key, keyed_code_sequence
from .qstate import BellLabel, Gate, Party, Qubit


class LegacyVariant(str, Enum):
    LEE = "lee"
    ZHANG = "zhang"


class DeliveryMode(str, Enum):
    PROTOCOL1 = "protocol1"  # A goes to Bob
    PROTOCOL2 = "protocol2"  # A goes to Trent


class TrentState(str, Enum):
    STANDARD_GHZ = "standard_ghz"
    PLUS_GHZ = "plus_ghz"


_H = Gate.H.matrix
_Z = Gate.Z.matrix
HZ = _H @ _Z

GHZ = np.zeros(8, dtype=complex)
GHZ[[0, 7]] = 1 / np.sqrt(2)
# (|+++> + |--->)/sqrt(2): the even-parity computational states
PLUS_GHZ = np.zeros(8, dtype=complex)
PLUS_GHZ[[0b000, 0b011, 0b101, 0b110]] = 0.5

# Expected Z-check mismatch rate when Trent prepares the plus state.
PLUS_GHZ_CHECK_MISMATCH = 0.5


def lee_decode(label: BellLabel, x: int) -> int:
    """Bit 0 (I) leaves the pair in phi+ for x=0 or phi- for x=1; bit 1 (H) never does."""
    return int(BellLabel(label) is not (BellLabel.PHI_MINUS if x else BellLabel.PHI_PLUS))


def infer_bit(z_a: int, x_t: int) -> int:
    """Trent's rule: (0,+) or (1,-) means H (bit 0), otherwise HZ (bit 1)."""
    return z_a ^ x_t


@dataclass
class LegacyConfig:
    variant: LegacyVariant = LegacyVariant.ZHANG
    mode: DeliveryMode = DeliveryMode.PROTOCOL1
    trent_state: TrentState = TrentState.STANDARD_GHZ
    auth_check_fraction: float = 0.25
    message_check_fraction: float = 0.25

    def __post_init__(self) -> None:
        self.variant = LegacyVariant(self.variant)
        self.mode = DeliveryMode(self.mode)
        self.trent_state = TrentState(self.trent_state)
        for name in ("auth_check_fraction", "message_check_fraction"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")


@dataclass
class LegacyResult:
    delivered: list[int]
    auth_mismatches: int
    auth_checked: int
    check_mismatches: int
    check_count: int
    inferred: list[int] | None
    transcript: object = field(repr=False, default=None)

    @property
    def auth_error_rate(self) -> float:
        return legacy_error_rate(self)

    @property
    def check_error_rate(self) -> float:
        return self.check_mismatches / self.check_count if self.check_count else 0.0


def legacy_error_rate(result: LegacyResult) -> float:
    """Fraction of authentication check positions where Alice's and Bob's Z results differ."""
    return result.auth_mismatches / result.auth_checked if result.auth_checked else 0.0


def _encode(sess: Session, variant: LegacyVariant, a: Qubit, bit: int) -> None:
    if variant is LegacyVariant.LEE:
        if bit:
            sess.reg.apply_gate(Gate.H, a)
    else:
        sess.reg.apply_gate(HZ if bit else _H, a)


def legacy_run(
    cfg: LegacyConfig,
    alice_bits: Sequence[int],
    rng,
    *,
    alice_key: AuthKey | None = None,
    bob_key: AuthKey | None = None,
    trent_attack: bool = False,
    session: Session | None = None,
) -> LegacyResult:
    """One legacy session carrying ``alice_bits``.

    With zero check fractions the only random draws are measurements, so
    the run can be enumerated branch by branch.
    """
    sess = session or Session()
    reg, log = sess.reg, sess.transcript
    bits = [int(b) for b in alice_bits]
    alice_key = alice_key or derive_auth_key(b"alice", 0, 8)
    bob_key = bob_key or derive_auth_key(b"bob", 0, 8)
    if trent_attack and cfg.variant is not LegacyVariant.ZHANG:
        raise ValueError("the plus-state inference attack targets the Zhang encoding")

    n_checks = math.ceil(cfg.message_check_fraction * len(bits))
    n_auth = math.ceil(cfg.auth_check_fraction * (len(bits) + n_checks))
    L = len(bits) + n_checks
    total = n_auth + L

    amps = PLUS_GHZ if cfg.trent_state is TrentState.PLUS_GHZ else GHZ
    triples = [reg.prepare(amps, [Party.TRENT] * 3) for _ in range(total)]
    A = [t[0] for t in triples]
    T = [t[1] for t in triples]
    B = [t[2] for t in triples]
    keyed_code_sequence(reg, A, alice_key, Convention.H_FOR_ONE)
    keyed_code_sequence(reg, B, bob_key, Convention.H_FOR_ONE)
    sess.say(Party.TRENT, phase="legacy-distribute", count=total, state=cfg.trent_state)
    send_qubits(sess.channel(Party.TRENT, Party.ALICE), A)
    send_qubits(sess.channel(Party.TRENT, Party.BOB), B)
    keyed_code_sequence(reg, A, alice_key, Convention.H_FOR_ONE)
    keyed_code_sequence(reg, B, bob_key, Convention.H_FOR_ONE)

    auth_pos = sorted(int(p) for p in rng.choice(total, size=n_auth, replace=False)) if n_auth else []
    za = [reg.measure_z(A[p], rng) for p in auth_pos]
    zb = [reg.measure_z(B[p], rng) for p in auth_pos]
    sess.say(Party.ALICE, phase="legacy-auth", positions=auth_pos, results=za)
    sess.say(Party.BOB, phase="legacy-auth", results=zb)
    auth_mismatches = sum(int(x != y) for x, y in zip(za, zb))

    rest = [p for p in range(total) if p not in set(auth_pos)]
    check_slots = sorted(int(s) for s in rng.choice(L, size=n_checks, replace=False)) if n_checks else []
    check_bits = [int(b) for b in rng.integers(0, 2, size=n_checks)] if n_checks else []
    stream, it_msg, it_chk = [], iter(bits), iter(check_bits)
    for s in range(L):
        stream.append(next(it_chk) if s in check_slots else next(it_msg))
    for s, p in enumerate(rest):
        _encode(sess, cfg.variant, A[p], stream[s])

    trent_view: list[int] = []
    received: list[int] = []
    receiver = Party.BOB if cfg.mode is DeliveryMode.PROTOCOL1 else Party.TRENT
    for s, p in enumerate(rest):
        a, t, b = A[p], T[p], B[p]
        if cfg.mode is DeliveryMode.PROTOCOL1:
            if trent_attack:
                # intercept in transit, measure, resend
                send_qubits(sess.channel(Party.ALICE, Party.TRENT), [a])
                za_, xt = reg.measure_z(a, rng), reg.measure_x(t, rng)
                log_measurement(log, Party.TRENT, "ZX", [za_, xt], slot=s)
                trent_view.append(infer_bit(za_, xt))
                send_qubits(sess.channel(Party.TRENT, Party.BOB), [a])
            else:
                send_qubits(sess.channel(Party.ALICE, Party.BOB), [a])
        else:
            send_qubits(sess.channel(Party.ALICE, Party.TRENT), [a])
            if trent_attack:
                za_, xt = reg.measure_z(a, rng), reg.measure_x(t, rng)
                log_measurement(log, Party.TRENT, "ZX", [za_, xt], slot=s)
                trent_view.append(infer_bit(za_, xt))

        if cfg.variant is LegacyVariant.LEE:
            # an X outcome on the third qubit leaves the pair in phi+/phi-;
            # H on A moves it wholly outside that label
            if cfg.mode is DeliveryMode.PROTOCOL1:
                x = reg.measure_x(t, rng)
                sess.say(Party.TRENT, phase="legacy-relay", slot=s, value=x)
                label = reg.measure_bell(a, b, rng)
            else:
                x = reg.measure_x(b, rng)
                label = reg.measure_bell(a, t, rng)
                sess.say(Party.TRENT, phase="legacy-relay", slot=s, value=label)
            received.append(lee_decode(label, x))
        else:
            if cfg.mode is DeliveryMode.PROTOCOL1:
                xt = reg.measure_x(t, rng)
                sess.say(Party.TRENT, phase="legacy-relay", slot=s, value=xt)
                reg.apply_gate(Gate.H, a)
                received.append(reg.measure_x(a, rng) ^ xt ^ reg.measure_x(b, rng))
            else:
                if trent_attack:
                    relay = trent_view[-1]
                else:
                    reg.apply_gate(Gate.H, a)
                    relay = reg.measure_x(a, rng) ^ reg.measure_x(t, rng)
                sess.say(Party.TRENT, phase="legacy-relay", slot=s, value=relay)
                received.append(relay ^ reg.measure_x(b, rng))
        log_measurement(log, receiver, "decode", received[-1], slot=s)

    sess.say(Party.ALICE, phase="legacy-checks", slots=check_slots, bits=check_bits)
    chk = set(check_slots)
    check_mismatches = sum(int(received[s] != stream[s]) for s in check_slots)
    delivered = [received[s] for s in range(L) if s not in chk]
    inferred = [trent_view[s] for s in range(L) if s not in chk] if trent_attack else None
    return LegacyResult(delivered, auth_mismatches, len(auth_pos), check_mismatches, n_checks, inferred, log)


def trent_plus_state_attack(
    variant: LegacyVariant,
    mode: DeliveryMode,
    alice_bits: Sequence[int],
    rng,
    **kw,
) -> list[int]:
    """Trent prepares the plus state and reads Alice's bits; returns his inferred message."""
    variant = LegacyVariant(variant)
    if variant is not LegacyVariant.ZHANG:
        raise ValueError("the plus-state inference attack targets the Zhang encoding")
    cfg = LegacyConfig(variant, mode, TrentState.PLUS_GHZ, **kw)
    return legacy_run(cfg, alice_bits, rng, trent_attack=True).inferred
