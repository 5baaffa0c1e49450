"""
Attack strategies against the mutual-authentication protocol.

Eve's strategies are taps on the Trent -> user quantum channel. When she
keeps the qubits she also steps into the user's role without the key
(``impostor_user``); when she resends her own qubits she also plays Trent
toward the real user (``impostor_authenticator``). Each strategy takes an
optional ``local_gate`` that Eve applies to what she holds, which lets the
tests check that extra local operations change nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

from .channels import TapContext, TapDecision, Transcript
from .protocol.auth import AuthenticatorRole, UserRole
from .qstate import BellLabel, Gate, Party, Qubit


@dataclass
class EveIntercept:
    """Keep every qubit and answer Trent as the user, doing nothing quantum."""

    local_gate: Gate | None = None
    party: Party = Party.EVE
    captured: list[Qubit] = field(default_factory=list)
    ancillas: list[list[Qubit]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    name = "eve_intercept"
    kind = "tap"

    def on_qubit(self, ctx: TapContext) -> TapDecision:
        self.captured.append(ctx.qubit)
        self.ancillas.append([])
        return TapDecision.withhold()

    def impostor_user(self, originals: Sequence[Qubit]) -> UserRole:
        return UserRole(self.party, None, originals, self.ancillas, self.local_gate)

    def impostor_authenticator(self) -> AuthenticatorRole:
        raise RuntimeError(f"{self.name} never resends, so it never faces the user")


@dataclass
class EveInterceptCnot(EveIntercept):
    """As :class:`EveIntercept`, after a CNOT from each captured qubit onto a fresh ancilla."""

    name = "eve_intercept_cnot"

    def on_qubit(self, ctx: TapContext) -> TapDecision:
        decision = super().on_qubit(ctx)
        anc = ctx.registry.new_qubit(self.party)
        ctx.registry.apply_cnot(ctx.qubit, anc)
        self.ancillas[-1].append(anc)
        return decision


@dataclass
class EveInterceptResend(EveIntercept):
    """Keep Trent's qubit and send the user one half of Eve's own phi+ pair.

    ``cnot_into`` optionally adds an ancilla CNOT'ed from Trent's qubit
    (``"trent"``) or from Eve's retained half (``"own"``).
    """

    cnot_into: str | None = None
    retained: list[Qubit] = field(default_factory=list)
    own_ancillas: list[list[Qubit]] = field(default_factory=list)
    name = "eve_intercept_resend"

    def __post_init__(self) -> None:
        if self.cnot_into not in (None, "trent", "own"):
            raise ValueError("cnot_into must be None, 'trent' or 'own'")

    def on_qubit(self, ctx: TapContext) -> TapDecision:
        reg = ctx.registry
        self.captured.append(ctx.qubit)
        e, e_a = reg.prepare_bell(BellLabel.PHI_PLUS, self.party, self.party)
        self.retained.append(e)
        self.ancillas.append([])
        self.own_ancillas.append([])
        if self.cnot_into is not None:
            src = ctx.qubit if self.cnot_into == "trent" else e
            anc = reg.new_qubit(self.party)
            reg.apply_cnot(src, anc)
            (self.ancillas if self.cnot_into == "trent" else self.own_ancillas)[-1].append(anc)
        return TapDecision.replace(e_a)

    def impostor_authenticator(self) -> AuthenticatorRole:
        return AuthenticatorRole(self.party, None, self.retained, self.own_ancillas, self.local_gate)


@dataclass
class MaliciousTrentGHZ:
    """Trent prepares GHZ triples (T, E, A) and keeps E."""

    name = "malicious_trent_ghz"
    kind = "trent"
    notes: list[str] = field(default_factory=list)


@dataclass
class TransitFlip:
    """Bit-flips every qubit on the Alice -> Bob channel and lets it through."""

    party: Party = Party.EVE
    name = "transit_flip"
    kind = "transit"

    def on_qubit(self, ctx: TapContext) -> TapDecision:
        ctx.registry.apply_gate(Gate.X, ctx.qubit)
        ctx.transcript.log("tamper", self.party, index=ctx.index, gate="X", endpoints=[self.party])
        return TapDecision.deliver()


@dataclass
class TrentPlusState:
    """Marker for the legacy plus-state attack by Trent."""

    name = "trent_plus_state"
    kind = "legacy"


STRATEGIES: dict[str, type] = {
    "eve_intercept": EveIntercept,
    "eve_intercept_cnot": EveInterceptCnot,
    "eve_intercept_resend": EveInterceptResend,
    "malicious_trent_ghz": MaliciousTrentGHZ,
    "transit_flip": TransitFlip,
    "trent_plus_state": TrentPlusState,
}


def make_strategy(name: str | None, **kw: Any):
    """Fresh per-session strategy object; ``None``/``"none"`` gives no attack."""
    if name in (None, "none", "None"):
        return None
    if name not in STRATEGIES:
        raise ValueError(f"unknown attack {name!r}; choose from {['none', *STRATEGIES]}")
    return STRATEGIES[name](**kw)


def eve_view(transcript: Transcript, party: Party = Party.EVE, verdicts: bool = False) -> tuple:
    """Canonical tuple of what Eve sees: broadcasts plus her own measurement records.

    Accept/abort announcements are left out unless ``verdicts`` is set: they
    depend on whether Eve got caught, which is a detection event rather than
    part of the per-position view.
    """
    who = party.value
    view = []
    for ev in transcript:
        if ev.kind == "broadcast":
            if "verdict" in ev.data and not verdicts:
                continue
            items = tuple(sorted((k, _freeze(v)) for k, v in ev.data.items()))
            view.append(("b", ev.actor, items))
        elif ev.kind == "measure" and ev.actor == who:
            items = tuple(sorted((k, _freeze(v)) for k, v in ev.data.items() if k != "endpoints"))
            view.append(("m", items))
    return tuple(view)


def _freeze(v: Any) -> Any:
    if isinstance(v, list):
        return tuple(_freeze(x) for x in v)
    if isinstance(v, dict):
        return tuple(sorted((k, _freeze(x)) for k, x in v.items()))
    return v
