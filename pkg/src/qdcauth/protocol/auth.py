"""
Mutual authentication between the authenticator (Trent) and one user.

The flow for one user:

1. Trent prepares ``N + 2v`` Bell pairs, codes the user's halves with the
   key (forward convention) and sends them.
2. The user decodes, picks a verifying set ``V`` and entangles one ancilla
   per ``V`` pair with a CNOT.
3-4. Both sides apply the keyed I/H transform to their qubits in ``V``.
5. The user consumes the ancillas and restores each ``V`` pair.
6. Trent announces his Z results on ``V``; the user compares (checks Trent).
7. Trent picks ``V'`` from the rest; the user announces her Z results on it
   and Trent compares (checks the user).
8. The remaining ``N`` pairs survive.

Roles are split into an authenticator side and a user side so that an
adversary without a key can stand in for either one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..channels import log_measurement, send_qubits
from ..qstate import BellLabel, Gate, Party, Qubit, Registry
from .config import ConfigError, Session, SessionConfig
from .keys import AuthKey, Convention, keyed_code_sequence, keyed_transform

# Recovery gate on the user's pair qubit, indexed by ancilla outcome 0/1.
RECOVERY_DERIVED: dict[BellLabel, tuple[Gate, Gate]] = {
    BellLabel.PHI_PLUS: (Gate.I, Gate.X),
    BellLabel.PHI_MINUS: (Gate.IY, Gate.Z),
    BellLabel.PSI_PLUS: (Gate.IY, Gate.Z),
    BellLabel.PSI_MINUS: (Gate.I, Gate.X),
}
# As published. The PhiMinus and PsiMinus rows land on PhiPlus and PsiPlus
# respectively, which still passes a Z-basis comparison.
RECOVERY_PUBLISHED: dict[BellLabel, tuple[Gate, Gate]] = {
    BellLabel.PHI_PLUS: (Gate.I, Gate.X),
    BellLabel.PHI_MINUS: (Gate.X, Gate.I),
    BellLabel.PSI_PLUS: (Gate.IY, Gate.Z),
    BellLabel.PSI_MINUS: (Gate.Z, Gate.IY),
}
RECOVERY_TABLES = {"derived": RECOVERY_DERIVED, "published": RECOVERY_PUBLISHED}


class AuthenticationAborted(RuntimeError):
    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class AuthOutcome:
    mismatches: int
    checked: int
    accepted: bool

    @property
    def error_rate(self) -> float:
        return self.mismatches / self.checked if self.checked else 0.0


def verify_outcomes(local: Sequence, announced: Sequence, threshold: int = 0, flip: int = 0) -> AuthOutcome:
    """Count positions where ``local != announced ^ flip``.

    ``flip`` is 1 for the psi-type initial states, whose halves are
    anti-correlated in Z.
    """
    if len(local) != len(announced):
        raise ValueError("result lists differ in length")
    if flip:
        announced = [int(b) ^ 1 for b in announced]
    mismatches = sum(int(a != b) for a, b in zip(local, announced))
    return AuthOutcome(mismatches, len(local), mismatches <= threshold)


# Verifiers without a key (impostors) never reject.
UNCHECKED = AuthOutcome(0, 0, True)


def choose_positions(rng: np.random.Generator, candidates: Sequence[int], k: int) -> list[int]:
    if k > len(candidates):
        raise ConfigError(f"cannot pick {k} positions out of {len(candidates)}")
    picked = rng.choice(np.asarray(candidates, dtype=int), size=k, replace=False)
    return sorted(int(p) for p in picked)


def attach_ancilla(reg: Registry, pair_qubit: Qubit) -> Qubit:
    """Fresh ``|0>`` ancilla for the pair qubit's owner, CNOT'ed from that qubit."""
    anc = reg.new_qubit(pair_qubit.owner)
    reg.apply_cnot(pair_qubit, anc)
    return anc


def recover_pair(
    reg: Registry,
    pair_qubit: Qubit,
    ancilla: Qubit,
    key_bit: int,
    initial: BellLabel,
    rng,
    *,
    transform: Convention = Convention.H_FOR_ONE,
    table: dict[BellLabel, tuple[Gate, Gate]] = RECOVERY_DERIVED,
) -> int | None:
    """Consume the ancilla and return the pair to ``initial``.

    Returns the ancilla outcome when it had to be measured, else ``None``.
    """
    if transform.gate(key_bit) is Gate.I:
        reg.apply_cnot(pair_qubit, ancilla)
        return None
    outcome = reg.measure_z(ancilla, rng)
    gate = table[BellLabel(initial)][outcome]
    if gate is not Gate.I:
        reg.apply_gate(gate, pair_qubit)
    return outcome


class AuthenticatorRole:
    """Holder of the T sequence. ``key=None`` is an impostor that skips the keyed steps."""

    def __init__(
        self,
        party: Party,
        key: AuthKey | None,
        t_seq: Sequence[Qubit],
        extras: Sequence[Sequence[Qubit]] | None = None,
        local_gate: Gate | None = None,
    ):
        self.party = party
        self.key = key
        self.t_seq = list(t_seq)
        self.extras = [list(e) for e in extras] if extras is not None else [[] for _ in self.t_seq]
        self.local_gate = local_gate

    def transform(self, sess: Session, cfg: SessionConfig, positions: Sequence[int]) -> None:
        for p in positions:
            held = [self.t_seq[p], *self.extras[p]]
            if self.key is not None:
                keyed_transform(sess.reg, held, self.key.bit(p), cfg.transform)
            elif self.local_gate is not None:
                sess.reg.apply_gate(self.local_gate, self.t_seq[p])

    def measure(self, sess: Session, positions: Sequence[int], rng, phase: str) -> list[int]:
        out = []
        for p in positions:
            b = sess.reg.measure_z(self.t_seq[p], rng)
            log_measurement(sess.transcript, self.party, "Z", b, position=p, phase=phase)
            out.append(b)
        return out

    def check(self, own: Sequence[int], announced: Sequence[int], cfg: SessionConfig) -> AuthOutcome:
        if self.key is None:
            return UNCHECKED
        return verify_outcomes(own, announced, cfg.error_threshold, cfg.initial_bell.frame[0])


class UserRole:
    """Holder of the A sequence. ``key=None`` is an impostor (Eve playing the user)."""

    def __init__(
        self,
        party: Party,
        key: AuthKey | None,
        a_seq: Sequence[Qubit],
        extras: Sequence[Sequence[Qubit]] | None = None,
        local_gate: Gate | None = None,
    ):
        self.party = party
        self.key = key
        self.a_seq = list(a_seq)
        self.extras = [list(e) for e in extras] if extras is not None else [[] for _ in self.a_seq]
        self.local_gate = local_gate
        self.ancillas: dict[int, Qubit] = {}

    def decode(self, sess: Session, cfg: SessionConfig) -> None:
        if self.key is not None:
            keyed_code_sequence(sess.reg, self.a_seq, self.key, cfg.forward)
        elif self.local_gate is not None:
            for q in self.a_seq:
                sess.reg.apply_gate(self.local_gate, q)

    def prepare_checks(self, sess: Session, positions: Sequence[int]) -> None:
        if self.key is None:
            return
        for p in positions:
            self.ancillas[p] = attach_ancilla(sess.reg, self.a_seq[p])

    def transform(self, sess: Session, cfg: SessionConfig, positions: Sequence[int]) -> None:
        if self.key is None:
            return
        for p in positions:
            keyed_transform(sess.reg, [self.a_seq[p], self.ancillas[p]], self.key.bit(p), cfg.transform)

    def recover(self, sess: Session, cfg: SessionConfig, positions: Sequence[int], rng) -> None:
        if self.key is None:
            return
        table = RECOVERY_TABLES[cfg.recovery_table]
        for p in positions:
            anc = self.ancillas.pop(p)
            m = recover_pair(
                sess.reg, self.a_seq[p], anc, self.key.bit(p), cfg.initial_bell, rng,
                transform=cfg.transform, table=table,
            )
            if m is not None:
                log_measurement(sess.transcript, self.party, "Z", m, position=p, phase="ancilla")
            sess.reg.discard(anc)

    def measure(self, sess: Session, positions: Sequence[int], rng, phase: str) -> list[int]:
        out = []
        for p in positions:
            b = sess.reg.measure_z(self.a_seq[p], rng)
            log_measurement(sess.transcript, self.party, "Z", b, position=p, phase=phase)
            out.append(b)
            if self.key is None:
                # an impostor also reads out whatever else it holds at this position
                for j, e in enumerate(self.extras[p]):
                    eb = sess.reg.measure_z(e, rng)
                    log_measurement(sess.transcript, self.party, "Z", eb, position=p, phase=phase, extra=j)
        return out

    def check(self, own: Sequence[int], announced: Sequence[int], cfg: SessionConfig) -> AuthOutcome:
        if self.key is None:
            return UNCHECKED
        return verify_outcomes(own, announced, cfg.error_threshold, cfg.initial_bell.frame[0])


@dataclass
class AuthExchange:
    authenticator: AuthenticatorRole
    user: UserRole
    forward: AuthOutcome | None = None
    reverse: AuthOutcome | None = None
    forward_positions: list[int] = field(default_factory=list)
    reverse_positions: list[int] = field(default_factory=list)
    pairs: list[tuple[Qubit, Qubit]] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return bool(self.forward and self.forward.accepted and self.reverse and self.reverse.accepted)


def run_exchange(
    sess: Session,
    cfg: SessionConfig,
    auth: AuthenticatorRole,
    user: UserRole,
    rng,
    *,
    forward_positions: Sequence[int] | None = None,
    reverse_positions: Sequence[int] | None = None,
) -> AuthExchange:
    """Steps 2-8 once the user side holds the A sequence."""
    M = len(auth.t_seq)
    ex = AuthExchange(auth, user)

    user.decode(sess, cfg)
    V = sorted(forward_positions) if forward_positions is not None else choose_positions(rng, range(M), cfg.v)
    ex.forward_positions = list(V)
    user.prepare_checks(sess, V)
    user.transform(sess, cfg, V)
    sess.say(user.party, step=4, role="user", positions=V, done="transform")
    auth.transform(sess, cfg, V)
    sess.say(auth.party, step=4, role="authenticator", done="transform")
    user.recover(sess, cfg, V, rng)

    u_bits = user.measure(sess, V, rng, "V")
    sess.say(user.party, step=6, role="user", done="measure")
    t_bits = auth.measure(sess, V, rng, "V")
    sess.say(auth.party, step=6, role="authenticator", results=t_bits)
    ex.forward = user.check(u_bits, t_bits, cfg)
    if not ex.forward.accepted:
        sess.say(user.party, step=6, role="user", verdict="abort")
        return ex

    rest = [p for p in range(M) if p not in set(V)]
    Vr = sorted(reverse_positions) if reverse_positions is not None else choose_positions(rng, rest, cfg.v)
    if set(Vr) & set(V):
        raise ConfigError("forward and reverse verifying sets overlap")
    ex.reverse_positions = list(Vr)
    t2 = auth.measure(sess, Vr, rng, "V'")
    sess.say(auth.party, step=7, role="authenticator", positions=Vr, done="measure")
    u2 = user.measure(sess, Vr, rng, "V'")
    sess.say(user.party, step=7, role="user", results=u2)
    ex.reverse = auth.check(t2, u2, cfg)
    if not ex.reverse.accepted:
        sess.say(auth.party, step=7, role="authenticator", verdict="abort")
        return ex

    used = set(V) | set(Vr)
    ex.pairs = [(auth.t_seq[p], user.a_seq[p]) for p in range(M) if p not in used]
    return ex


GHZ3 = np.zeros(8, dtype=complex)
GHZ3[0] = GHZ3[7] = 1 / np.sqrt(2)


@dataclass
class MutualAuthResult:
    user: Party
    exchanges: list[AuthExchange]
    forward: AuthOutcome | None
    reverse: AuthOutcome | None

    @property
    def detected(self) -> bool:
        """Some verifier holding a real key rejected."""
        for ex in self.exchanges:
            for role, outcome in ((ex.user, ex.forward), (ex.authenticator, ex.reverse)):
                if role.key is not None and outcome is not None and not outcome.accepted:
                    return True
        return False

    @property
    def accepted(self) -> bool:
        return not self.detected

    @property
    def pairs(self) -> list[tuple[Qubit, Qubit]]:
        """Surviving (Trent qubit, user-side qubit) pairs from Trent's exchange."""
        for ex in self.exchanges:
            if ex.authenticator.party is Party.TRENT:
                return ex.pairs
        return []

    @property
    def mismatches(self) -> int:
        return sum(
            o.mismatches for ex in self.exchanges for o in (ex.forward, ex.reverse) if o is not None
        )


def prepare_sequence(
    sess: Session,
    cfg: SessionConfig,
    user: Party,
    ghz: bool = False,
) -> tuple[list[Qubit], list[Qubit], list[list[Qubit]]]:
    """Trent's pairs (or malicious GHZ triples). Returns (T seq, A seq, Trent's extra qubits)."""
    t_seq, a_seq, extras = [], [], []
    frame_gate = Gate.from_frame(cfg.initial_bell.frame)
    for _ in range(cfg.sequence_length):
        if ghz:
            t, e, a = sess.reg.prepare(GHZ3, [Party.TRENT, Party.TRENT, Party.TRENT])
            if frame_gate is not Gate.I:
                sess.reg.apply_gate(frame_gate, a)
            extras.append([e])
        else:
            t, a = sess.reg.prepare_bell(cfg.initial_bell, Party.TRENT, Party.TRENT)
            extras.append([])
        t_seq.append(t)
        a_seq.append(a)
    return t_seq, a_seq, extras


def run_mutual_auth(
    sess: Session,
    cfg: SessionConfig,
    user: Party,
    user_key: AuthKey,
    rng,
    *,
    trent_key: AuthKey | None = None,
    tap=None,
    trent_ghz: bool = False,
    forward_positions: Sequence[int] | None = None,
    reverse_positions: Sequence[int] | None = None,
) -> MutualAuthResult:
    """Trent <-> ``user`` authentication, steps 1-8.

    ``tap`` is an adversary on the Trent -> user quantum channel. If it
    withholds the qubits it takes the user's place; if it substitutes its
    own qubits it also plays Trent toward the real user.
    """
    cfg.check_key_length(len(user_key))
    trent_key = trent_key if trent_key is not None else user_key
    t_seq, a_seq, extras = prepare_sequence(sess, cfg, user, ghz=trent_ghz)
    keyed_code_sequence(sess.reg, a_seq, trent_key, cfg.forward)
    sess.say(Party.TRENT, step=1, sending=len(a_seq), to=user)
    delivery = send_qubits(sess.channel(Party.TRENT, user, tap), a_seq, rng)

    trent = AuthenticatorRole(Party.TRENT, trent_key, t_seq, extras)
    kw = dict(forward_positions=forward_positions, reverse_positions=reverse_positions)
    exchanges = []
    if not delivery.intercepted:
        real_user = UserRole(user, user_key, delivery.delivered)
        exchanges.append(run_exchange(sess, cfg, trent, real_user, rng, **kw))
    else:
        if any(q is None for q in delivery.received) and any(q is not None for q in delivery.received):
            raise RuntimeError("tap must withhold either every qubit or none")
        exchanges.append(run_exchange(sess, cfg, trent, tap.impostor_user(a_seq), rng, **kw))
        if delivery.delivered:
            real_user = UserRole(user, user_key, delivery.delivered)
            exchanges.append(run_exchange(sess, cfg, tap.impostor_authenticator(), real_user, rng, **kw))

    forward = next((ex.forward for ex in exchanges if ex.user.party is user), None)
    reverse = next((ex.reverse for ex in exchanges if ex.authenticator.party is Party.TRENT), None)
    return MutualAuthResult(user, exchanges, forward, reverse)


def detection_probability(ones: int) -> float:
    """Chance that ``ones`` independent positions with mismatch rate 1/2 expose the cheat."""
    return 1.0 - math.pow(0.5, ones)
