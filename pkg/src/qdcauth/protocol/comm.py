"""
Session-key creation by entanglement swapping and the two message schemes.

Label bookkeeping uses Pauli frames: a Pauli on one qubit of a Bell pair
XORs its frame into the pair's label, and swapping two pairs labelled
``L1``, ``L2`` with Trent outcome ``b`` leaves the outer qubits in
``b ^ L1 ^ L2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from ..channels import Tap, Transcript, log_measurement, send_qubits
from ..qstate import BellLabel, Gate, Party, Qubit, Registry
from .auth import AuthenticationAborted, AuthOutcome, MutualAuthResult, run_mutual_auth, verify_outcomes
from .config import CommScheme, ConfigError, Session, SessionConfig
from .keys import AuthKey


class DecodeError(ValueError):
    """Observed outcomes fit no gate in the mapping (tampering or desync)."""


class MessageCapacityError(ConfigError):
    pass


class EavesdropDetected(AuthenticationAborted):
    def __init__(self, message: str, result=None, check: AuthOutcome | None = None):
        super().__init__(message, result)
        self.check = check


def _bits_key(bits: Sequence[int] | str) -> str:
    s = "".join(str(int(b)) for b in bits)
    if len(s) != 2 or set(s) - {"0", "1"}:
        raise ValueError(f"expected two bits, got {bits!r}")
    return s


def _invert(mapping: dict[str, Gate]) -> dict[tuple[int, int], str]:
    return {g.frame: bits for bits, g in mapping.items()}


@dataclass
class SessionKey:
    """Trent's announced outcomes and the resulting Alice-Bob pair labels."""

    announced: list[BellLabel]
    labels: list[BellLabel]
    pairs: list[tuple[Qubit, Qubit]] = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self.labels)


def swap_to_session_key(
    sess: Session,
    pairs_a: Sequence[tuple[Qubit, Qubit]],
    pairs_b: Sequence[tuple[Qubit, Qubit]],
    rng,
    initial_a: BellLabel = BellLabel.PHI_PLUS,
    initial_b: BellLabel = BellLabel.PHI_PLUS,
) -> SessionKey:
    """Trent Bell-measures his halves of (T-A, T-B) pair ``i`` for every ``i``.

    Pairs are ``(trent qubit, user qubit)``.
    """
    if len(pairs_a) != len(pairs_b):
        raise ValueError("both users need the same number of pairs")
    announced, labels, ab = [], [], []
    for (ta, a), (tb, b) in zip(pairs_a, pairs_b):
        out = sess.reg.measure_bell(ta, tb, rng)
        announced.append(out)
        labels.append(out.compose(BellLabel(initial_a)).compose(BellLabel(initial_b)))
        ab.append((a, b))
    sess.say(Party.TRENT, phase="swap", labels=announced)
    return SessionKey(announced, labels, ab)


def dense_encode(pair_label: BellLabel, two_bits, mapping: dict[str, Gate]) -> Gate:
    """Gate Alice applies to her half. The pair label does not change the choice."""
    BellLabel(pair_label)
    return mapping[_bits_key(two_bits)]


def dense_decode(
    reg: Registry,
    received: Qubit,
    kept: Qubit,
    pair_label: BellLabel,
    rng,
    mapping: dict[str, Gate],
) -> str:
    measured = reg.measure_bell(received, kept, rng)
    return dense_decode_label(measured, pair_label, mapping)


def dense_decode_label(measured: BellLabel, pair_label: BellLabel, mapping: dict[str, Gate]) -> str:
    frame = measured.compose(BellLabel(pair_label)).frame
    inv = _invert(mapping)
    if frame not in inv:
        raise DecodeError(f"{measured.value} is not reachable from {BellLabel(pair_label).value}")
    return inv[frame]


def swap_encode(
    reg: Registry,
    a1: Qubit,
    a2: Qubit,
    two_bits,
    rng,
    mapping: dict[str, Gate],
) -> tuple[Gate, BellLabel]:
    """Gate on Alice's half of pair 1, then Bell measurement of her two halves."""
    g = mapping[_bits_key(two_bits)]
    if g is not Gate.I:
        reg.apply_gate(g, a1)
    return g, reg.measure_bell(a1, a2, rng)


def swap_decode(
    bob_outcome: BellLabel,
    alice_outcome: BellLabel,
    pair1: BellLabel,
    pair2: BellLabel,
    mapping: dict[str, Gate],
) -> str:
    frame = BellLabel(bob_outcome).compose(BellLabel(alice_outcome)).compose(BellLabel(pair1)).compose(BellLabel(pair2)).frame
    inv = _invert(mapping)
    if frame not in inv:
        raise DecodeError("outcome pair is inconsistent with every gate")
    return inv[frame]


def _pad(message: Sequence[int]) -> list[int]:
    bits = [int(b) for b in message]
    if any(b not in (0, 1) for b in bits):
        raise ValueError("message must be a bit sequence")
    return bits + [0] * (len(bits) % 2)


@dataclass
class SessionResult:
    delivered: list[int]
    transcript: Transcript
    session_key: SessionKey | None
    auth: dict[Party, MutualAuthResult]
    channel_check: AuthOutcome | None = None

    @property
    def mismatches(self) -> int:
        n = sum(r.mismatches for r in self.auth.values())
        return n + (self.channel_check.mismatches if self.channel_check else 0)


def _send_dense(
    sess: Session,
    cfg: SessionConfig,
    key: SessionKey,
    bits: list[int],
    rng,
    transit_tap: Tap | None,
) -> tuple[list[int], AuthOutcome]:
    n = len(key)
    k = cfg.dense_checks
    free = n - k
    if len(bits) > 2 * free:
        raise MessageCapacityError(f"{len(bits)} bits exceed dense-coding capacity {2 * free}")
    checks = sorted(int(p) for p in rng.choice(n, size=k, replace=False)) if k else []
    data_pos = [p for p in range(n) if p not in set(checks)]
    chunks = [bits[i:i + 2] for i in range(0, len(bits), 2)]
    for pos, chunk in zip(data_pos, chunks):
        a = key.pairs[pos][0]
        g = dense_encode(key.labels[pos], chunk, cfg.dense_map)
        if g is not Gate.I:
            sess.reg.apply_gate(g, a)

    alice_halves = [key.pairs[p][0] for p in range(n)]
    delivery = send_qubits(sess.channel(Party.ALICE, Party.BOB, transit_tap), alice_halves, rng)
    measured = []
    for p, got in enumerate(delivery.received):
        if got is None:
            raise EavesdropDetected("qubit lost in transit")
        out = sess.reg.measure_bell(got, key.pairs[p][1], rng)
        log_measurement(sess.transcript, Party.BOB, "Bell", out, position=p)
        measured.append(out)

    sess.say(Party.ALICE, phase="dense-check", positions=checks)
    sess.say(Party.BOB, phase="dense-check", results=[measured[p] for p in checks])
    check = verify_outcomes([key.labels[p] for p in checks], [measured[p] for p in checks], cfg.error_threshold)
    if not check.accepted:
        sess.say(Party.ALICE, phase="dense-check", verdict="abort")
        raise EavesdropDetected(f"{check.mismatches} of {check.checked} check pairs disturbed", check=check)
    out = []
    for pos, _ in zip(data_pos, chunks):
        out.extend(int(c) for c in dense_decode_label(measured[pos], key.labels[pos], cfg.dense_map))
    return out, check


def _send_swap(sess: Session, cfg: SessionConfig, key: SessionKey, bits: list[int], rng) -> list[int]:
    if len(bits) > cfg.capacity():
        raise MessageCapacityError(f"{len(bits)} bits exceed swap-encoding capacity {cfg.capacity()}")
    out = []
    for j in range(0, len(bits), 2):
        (a1, b1), (a2, b2) = key.pairs[j], key.pairs[j + 1]
        _, alice_out = swap_encode(sess.reg, a1, a2, bits[j:j + 2], rng, cfg.swap_map)
        sess.say(Party.ALICE, phase="swap-encode", index=j // 2, outcome=alice_out)
        bob_out = sess.reg.measure_bell(b1, b2, rng)
        log_measurement(sess.transcript, Party.BOB, "Bell", bob_out, index=j // 2)
        dec = swap_decode(bob_out, alice_out, key.labels[j], key.labels[j + 1], cfg.swap_map)
        out.extend(int(c) for c in dec)
    return out


def run_session(
    cfg: SessionConfig,
    message: Sequence[int],
    rng,
    alice_key: AuthKey,
    bob_key: AuthKey,
    *,
    tap: Tap | None = None,
    transit_tap: Tap | None = None,
    trent_ghz: bool = False,
    session: Session | None = None,
    positions: dict[Party, tuple[Sequence[int], Sequence[int]]] | None = None,
) -> SessionResult:
    """Authenticate both users, swap, then send ``message`` from Alice to Bob.

    ``tap`` sits on the Trent -> Alice channel, ``transit_tap`` on the
    Alice -> Bob channel used by dense coding. Raises
    :class:`AuthenticationAborted` (carrying the partial result) when any
    check fails, before a single message bit is sent.
    """
    sess = session or Session()
    bits = _pad(message)
    if len(bits) > cfg.capacity():
        raise MessageCapacityError(f"{len(bits)} bits exceed the {cfg.comm_scheme.value} capacity {cfg.capacity()}")

    positions = positions or {}

    def pinned(party: Party) -> dict:
        if party not in positions:
            return {}
        fwd, rev = positions[party]
        return {"forward_positions": fwd, "reverse_positions": rev}

    auth = {
        Party.ALICE: run_mutual_auth(
            sess, cfg, Party.ALICE, alice_key, rng, tap=tap, trent_ghz=trent_ghz, **pinned(Party.ALICE)
        ),
        Party.BOB: run_mutual_auth(sess, cfg, Party.BOB, bob_key, rng, **pinned(Party.BOB)),
    }
    result = SessionResult([], sess.transcript, None, auth)
    if any(r.detected for r in auth.values()):
        sess.say(Party.TRENT, phase="auth", verdict="abort")
        raise AuthenticationAborted("mutual authentication failed", result)
    user_pairs = {}
    for party, r in auth.items():
        ex = next((e for e in r.exchanges if e.user.party is party), None)
        if ex is None:
            sess.say(party, phase="auth", verdict="abort")
            raise AuthenticationAborted(f"{party.value} never received a sequence", result)
        user_pairs[party] = [u for _, u in ex.pairs]
    trent_a = [t for t, _ in auth[Party.ALICE].pairs]
    trent_b = [t for t, _ in auth[Party.BOB].pairs]

    key = swap_to_session_key(
        sess,
        list(zip(trent_a, user_pairs[Party.ALICE])),
        list(zip(trent_b, user_pairs[Party.BOB])),
        rng,
        cfg.initial_bell,
        cfg.initial_bell,
    )
    result.session_key = key
    if cfg.comm_scheme is CommScheme.DENSE:
        try:
            delivered, result.channel_check = _send_dense(sess, cfg, key, bits, rng, transit_tap)
        except EavesdropDetected as exc:
            result.channel_check = exc.check
            exc.result = result
            raise
    else:
        delivered = _send_swap(sess, cfg, key, bits, rng)
    result.delivered = delivered[: len(message)]
    return result
