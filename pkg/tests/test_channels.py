import json

import numpy as np
import pytest

from qdcauth.adversary import EveIntercept, EveInterceptResend
from qdcauth.channels import (
    ClassicalBroadcast,
    QuantumChannel,
    TapAction,
    Transcript,
    broadcast,
    log_measurement,
    send_qubits,
    transcript_view,
)
from qdcauth.protocol import AuthKey, Session, SessionConfig, run_mutual_auth
from qdcauth.qstate import BellLabel, Party, Registry


def pairs(reg, n, owner=Party.TRENT):
    return [reg.prepare_bell(BellLabel.PHI_PLUS, owner, owner) for _ in range(n)]


def test_plain_delivery_keeps_handles_and_state():
    reg, t = Registry(), Transcript()
    ps = pairs(reg, 3)
    qs = [a for _, a in ps]
    before = [reg.state_of(p).amps.copy() for p in ps]
    out = send_qubits(QuantumChannel(Party.TRENT, Party.ALICE, reg, t), qs)
    assert out.received == qs and not out.intercepted
    assert all(q.owner is Party.ALICE for q in qs)
    assert all(np.array_equal(reg.state_of(p).amps, b) for p, b in zip(ps, before))


def test_sender_must_own_qubits():
    reg, t = Registry(), Transcript()
    a, b = reg.prepare_bell(BellLabel.PHI_PLUS, Party.TRENT, Party.BOB)
    with pytest.raises(PermissionError):
        send_qubits(QuantumChannel(Party.TRENT, Party.ALICE, reg, t), [b])


def test_withholding_tap_keeps_originals():
    reg, t = Registry(), Transcript()
    qs = [a for _, a in pairs(reg, 3)]
    eve = EveIntercept()
    out = send_qubits(QuantumChannel(Party.TRENT, Party.ALICE, reg, t, eve), qs)
    assert out.delivered == [] and out.actions == [TapAction.WITHHOLD] * 3
    assert all(q.owner is Party.EVE for q in qs)
    assert eve.captured == qs


def test_resend_tap_substitutes():
    reg, t = Registry(), Transcript()
    qs = [a for _, a in pairs(reg, 2)]
    eve = EveInterceptResend()
    out = send_qubits(QuantumChannel(Party.TRENT, Party.ALICE, reg, t, eve), qs)
    assert len(out.delivered) == 2
    assert all(q not in qs and q.owner is Party.ALICE for q in out.delivered)
    assert all(q.owner is Party.EVE for q in qs)


def test_one_owner_per_handle_after_transfers():
    reg, t = Registry(), Transcript()
    qs = [a for _, a in pairs(reg, 4)]
    send_qubits(QuantumChannel(Party.TRENT, Party.ALICE, reg, t), qs)
    send_qubits(QuantumChannel(Party.ALICE, Party.BOB, reg, t), qs[:2])
    assert [q.owner for q in qs] == [Party.BOB, Party.BOB, Party.ALICE, Party.ALICE]


def test_broadcast_is_public_and_integrity_protected():
    t = Transcript()
    b = ClassicalBroadcast(t)
    broadcast(b, Party.ALICE, {"positions": [3, 1, 4]})
    broadcast(b, Party.TRENT)
    for who in (Party.ALICE, Party.BOB, Party.EVE, Party.TRENT):
        seen = [e for e in transcript_view(t, who) if e.kind == "broadcast"]
        assert [e.data for e in seen] == [{"positions": [3, 1, 4]}, {}]
    with pytest.raises(PermissionError):
        b.rewrite(0, {"positions": []}, Party.EVE)


def test_modifiable_broadcast_logs_tamper():
    t = Transcript()
    b = ClassicalBroadcast(t, modifiable=True)
    b.broadcast(Party.ALICE, {"x": 1})
    b.rewrite(0, {"x": 2}, Party.EVE)
    assert t.events[0].data == {"x": 2}
    assert t.events[-1].kind == "tamper"


def _auth_transcript(tap=None):
    sess = Session()
    run_mutual_auth(sess, SessionConfig(N=2, v=2), Party.ALICE, AuthKey.from_bits("01"), np.random.default_rng(1), tap=tap)
    return sess.transcript


def test_eve_sees_only_broadcasts_in_honest_run():
    t = _auth_transcript()
    assert {e.kind for e in transcript_view(t, Party.EVE)} == {"broadcast"}


def test_eve_sees_her_tap_events_when_intercepting():
    t = _auth_transcript(EveIntercept())
    kinds = {e.kind for e in transcript_view(t, Party.EVE)}
    assert "intercept" in kinds and "broadcast" in kinds
    assert all(e.actor != "Alice" for e in transcript_view(t, Party.EVE) if e.kind != "broadcast")


def test_alice_sees_her_own_events():
    t = _auth_transcript()
    view = transcript_view(t, Party.ALICE)
    assert {"receive", "measure", "broadcast"} <= {e.kind for e in view}
    assert all(e.kind == "broadcast" or "Alice" in e.data.get("endpoints", ()) or e.actor == "Alice" for e in view)
    assert not any(e.kind == "measure" and e.actor == "Trent" for e in view)


def test_jsonl_round_trip_and_replay():
    t1, t2 = _auth_transcript(), _auth_transcript()
    text = t1.to_jsonl()
    assert text == t2.to_jsonl()
    for line in text.splitlines():
        assert set(json.loads(line)) == {"seq", "kind", "actor", "data"}
    assert Transcript.from_jsonl(text).to_jsonl() == text


def test_log_measurement_is_private():
    t = Transcript()
    log_measurement(t, Party.TRENT, "Z", 1)
    assert transcript_view(t, Party.EVE) == []
    assert len(transcript_view(t, Party.TRENT)) == 1
