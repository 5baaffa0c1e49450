"""
Simulated quantum and classical channels with a shared event transcript.

A :class:`QuantumChannel` moves qubit ownership from sender to receiver.
An optional tap (the adversary) sees each qubit in flight and decides to
deliver it, withhold it, or deliver a substitute it prepared. The
:class:`ClassicalBroadcast` is an append-only public channel: everyone,
Eve included, reads every message, and nobody can rewrite one unless the
channel was built with ``modifiable=True``.

Everything lands in one :class:`Transcript`, which serializes to JSON
lines (``{seq, kind, actor, data}``) and is the adversary's classical view.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Protocol, Sequence

from .qstate import Party, Qubit, Registry


def _plain(value: Any) -> Any:
    """Coerce payloads into JSON-friendly builtins."""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(_plain(k)): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "item") and callable(value.item):  # numpy scalars
        return value.item()
    return value


@dataclass(frozen=True)
class Event:
    seq: int
    kind: str
    actor: str
    data: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"seq": self.seq, "kind": self.kind, "actor": self.actor, "data": self.data}


class Transcript:
    """Ordered log of broadcasts, channel events and measurement records."""

    def __init__(self) -> None:
        self.events: list[Event] = []

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def log(self, kind: str, actor: Party | str, **data: Any) -> Event:
        ev = Event(len(self.events), kind, _plain(actor), _plain(data))
        self.events.append(ev)
        return ev

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(ev.to_dict(), sort_keys=True, separators=(",", ":")) + "\n" for ev in self.events
        )

    @classmethod
    def from_jsonl(cls, text: str) -> "Transcript":
        t = cls()
        for line in text.splitlines():
            if line.strip():
                d = json.loads(line)
                t.events.append(Event(d["seq"], d["kind"], d["actor"], d["data"]))
        return t


def transcript_view(t: Transcript, viewer: Party | str) -> list[Event]:
    """Events visible to ``viewer``: every broadcast, plus events it took part in."""
    who = _plain(viewer)
    out = []
    for ev in t:
        if ev.kind == "broadcast" or ev.actor == who or who in ev.data.get("endpoints", ()):
            out.append(ev)
    return out


class ClassicalBroadcast:
    def __init__(self, transcript: Transcript, modifiable: bool = False) -> None:
        self.transcript = transcript
        self.modifiable = modifiable

    def broadcast(self, sender: Party | str, payload: dict | None = None) -> Event:
        return self.transcript.log("broadcast", sender, **(payload or {}))

    @property
    def messages(self) -> list[Event]:
        return [ev for ev in self.transcript if ev.kind == "broadcast"]

    def rewrite(self, seq: int, payload: dict, by: Party | str) -> Event:
        """Replace a broadcast payload in place (tampering); off by default."""
        if not self.modifiable:
            raise PermissionError("classical broadcast channel is integrity-protected")
        old = self.transcript.events[seq]
        if old.kind != "broadcast":
            raise ValueError(f"event {seq} is not a broadcast")
        new = Event(seq, old.kind, old.actor, _plain(payload))
        self.transcript.events[seq] = new
        self.transcript.log("tamper", by, target=seq, endpoints=[_plain(by)])
        return new


class TapAction(Enum):
    DELIVER = "deliver"
    SUBSTITUTE = "substitute"
    WITHHOLD = "withhold"


@dataclass(frozen=True)
class TapDecision:
    action: TapAction
    substitute: Qubit | None = None

    @classmethod
    def deliver(cls) -> "TapDecision":
        return cls(TapAction.DELIVER)

    @classmethod
    def withhold(cls) -> "TapDecision":
        return cls(TapAction.WITHHOLD)

    @classmethod
    def replace(cls, q: Qubit) -> "TapDecision":
        return cls(TapAction.SUBSTITUTE, q)


@dataclass
class TapContext:
    """What a tap sees for one qubit in flight."""

    channel: "QuantumChannel"
    qubit: Qubit
    index: int
    rng: Any

    @property
    def registry(self) -> Registry:
        return self.channel.registry

    @property
    def transcript(self) -> Transcript:
        return self.channel.transcript


class Tap(Protocol):
    party: Party

    def on_qubit(self, ctx: TapContext) -> TapDecision: ...


@dataclass
class QuantumChannel:
    sender: Party
    receiver: Party
    registry: Registry
    transcript: Transcript
    tap: Tap | None = None


@dataclass
class Delivery:
    """Per-position result of :func:`send_qubits`; ``None`` marks a withheld qubit."""

    received: list[Qubit | None]
    actions: list[TapAction]

    @property
    def delivered(self) -> list[Qubit]:
        return [q for q in self.received if q is not None]

    @property
    def intercepted(self) -> bool:
        return any(a is not TapAction.DELIVER for a in self.actions)


def send_qubits(ch: QuantumChannel, qs: Sequence[Qubit], rng=None) -> Delivery:
    """Transfer ``qs`` from ``ch.sender`` to ``ch.receiver`` through the tap, if any."""
    reg, log = ch.registry, ch.transcript
    for q in qs:
        if not reg.is_live(q):
            raise ValueError(f"qubit {q.id} is not live")
        if q.owner is not ch.sender:
            raise PermissionError(f"{ch.sender.value} does not own qubit {q.id} (owner {q.owner.value})")

    received: list[Qubit | None] = []
    actions: list[TapAction] = []
    for i, q in enumerate(qs):
        log.log("send", ch.sender, qubit=q.id, index=i, to=ch.receiver, endpoints=[ch.sender])
        decision = TapDecision.deliver() if ch.tap is None else ch.tap.on_qubit(TapContext(ch, q, i, rng))
        actions.append(decision.action)
        if decision.action is TapAction.DELIVER:
            reg.set_owner(q, ch.receiver)
            out: Qubit | None = q
        else:
            eve = ch.tap.party
            reg.set_owner(q, eve)
            log.log("intercept", eve, qubit=q.id, index=i, endpoints=[eve])
            if decision.action is TapAction.WITHHOLD:
                out = None
            else:
                out = decision.substitute
                if out is None or out.owner is not eve:
                    raise PermissionError("substitute must be a qubit held by the tap")
                log.log("substitute", eve, original=q.id, qubit=out.id, index=i, endpoints=[eve])
                reg.set_owner(out, ch.receiver)
        if out is not None:
            log.log("receive", ch.receiver, qubit=out.id, index=i, endpoints=[ch.receiver])
        received.append(out)
    return Delivery(received, actions)


def broadcast(b: ClassicalBroadcast, sender: Party | str, payload: dict | None = None) -> Event:
    return b.broadcast(sender, payload)


def log_measurement(t: Transcript, who: Party, basis: str, outcome: Any, **extra: Any) -> Event:
    """Private record of a local measurement; only ``who`` sees it."""
    return t.log("measure", who, basis=basis, outcome=outcome, endpoints=[who], **extra)


def broadcasts_from(t: Transcript, sender: Party | str) -> Iterable[Event]:
    who = _plain(sender)
    return (ev for ev in t if ev.kind == "broadcast" and ev.actor == who)
