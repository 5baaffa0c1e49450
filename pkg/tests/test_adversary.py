import math

import numpy as np
import pytest

from qdcauth.adversary import (
    STRATEGIES,
    EveIntercept,
    EveInterceptCnot,
    EveInterceptResend,
    eve_view,
    make_strategy,
)
from qdcauth.harness.oracle import enumerate_branches, position_scenario
from qdcauth.harness.selftest import leakage, sample_ghz_detection, sample_intercept
from qdcauth.protocol import (
    AuthenticationAborted,
    AuthKey,
    Session,
    SessionConfig,
    detection_probability,
    run_mutual_auth,
    run_session,
)
from qdcauth.qstate import BellLabel, Gate, Party

# I(k; V) when Eve's view reveals whether she was caught (detection 1/2 for k=0, 0 for k=1)
VERDICT_MI = 1.5 - 0.75 * math.log2(3)


def test_verdict_mi_closed_form():
    assert VERDICT_MI == pytest.approx(0.31127812445913294, abs=1e-15)


class TestIntercept:
    @pytest.mark.parametrize("attack", ["eve_intercept", "eve_intercept_cnot"])
    @pytest.mark.parametrize("gate", [None, Gate.X, Gate.Z, Gate.H, Gate.IY])
    def test_zero_leakage_any_local_gate(self, attack, gate):
        assert leakage(attack, local_gate=gate) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("label", list(BellLabel))
    def test_zero_leakage_any_initial_state(self, label):
        assert leakage("eve_intercept_cnot", initial=label) == pytest.approx(0.0, abs=1e-12)

    def test_verdicts_reveal_detection(self):
        assert leakage("eve_intercept", verdicts=True) == pytest.approx(VERDICT_MI, abs=1e-12)

    @pytest.mark.parametrize("k,want", [(0, 0.5), (1, 0.0)])
    def test_reverse_mismatch_exact(self, k, want):
        d = enumerate_branches(position_scenario("eve_intercept", k, observe="outcomes"))
        assert sum(p for (_, r), p in d.items() if r) == pytest.approx(want, abs=1e-12)

    def test_reverse_mismatch_sampled(self):
        assert sample_intercept(0, 4000, 21) == pytest.approx(0.5, abs=0.03)
        assert sample_intercept(1, 500, 22) == 0.0

    def test_eve_measures_her_extras(self):
        sess = Session()
        eve = EveInterceptCnot()
        run_mutual_auth(sess, SessionConfig(N=0, v=1), Party.ALICE, AuthKey.from_bits("1"), np.random.default_rng(0), tap=eve)
        ms = [o for o in eve_view(sess.transcript) if o[0] == "m"]
        # both positions measured, each with its ancilla
        assert len(ms) == 4
        assert sum(any(k == "extra" for k, _ in items) for _, items in ms) == 2
        assert all(len(a) == 1 for a in eve.ancillas)

    def test_session_aborts_before_message(self):
        cfg = SessionConfig(N=4, v=16)
        key = AuthKey.from_bits("0" * 16)
        with pytest.raises(AuthenticationAborted) as info:
            run_session(cfg, [1, 1], np.random.default_rng(0), key, key, tap=EveIntercept())
        assert info.value.result.delivered == [] and info.value.result.session_key is None


class TestResend:
    def test_leak_through_reverse_announcements(self):
        assert leakage("eve_intercept_resend") == pytest.approx(VERDICT_MI / 2, abs=1e-12)
        assert leakage("eve_intercept_resend") == pytest.approx(0.15563906222956714, abs=1e-12)

    @pytest.mark.parametrize("where", ["own", "trent"])
    def test_ancilla_adds_nothing(self, where):
        assert leakage("eve_intercept_resend", cnot_into=where) == pytest.approx(leakage("eve_intercept_resend"), abs=1e-12)

    @pytest.mark.parametrize("where", [None, "own", "trent"])
    def test_own_measurements_carry_no_information(self, where):
        assert leakage("eve_intercept_resend", cnot_into=where, observe="eve_measurements") == pytest.approx(0.0, abs=1e-12)

    def test_trent_still_detects(self):
        d = enumerate_branches(position_scenario("eve_intercept_resend", 0, observe="detected"))
        assert d[True] > 0

    def test_bad_cnot_target(self):
        with pytest.raises(ValueError):
            EveInterceptResend(cnot_into="bob")

    def test_impostor_authenticator_needs_resend(self):
        with pytest.raises(RuntimeError):
            EveIntercept().impostor_authenticator()


class TestMaliciousTrent:
    @pytest.mark.parametrize("k,want", [(0, 0.0), (1, 0.5)])
    def test_forward_mismatch_per_position(self, k, want):
        d = enumerate_branches(position_scenario("malicious_trent_ghz", k, observe="outcomes"))
        assert sum(p for (f, _), p in d.items() if f) == pytest.approx(want, abs=1e-12)

    def test_all_zero_key_never_detects(self):
        assert sample_ghz_detection("0000", 300, 1) == 0.0

    @pytest.mark.parametrize("key", ["1", "11", "0110", "111"])
    def test_detection_follows_ones_in_key(self, key):
        want = detection_probability(key.count("1"))
        assert sample_ghz_detection(key, 3000, 40 + len(key)) == pytest.approx(want, abs=0.03)

    def test_detection_probability(self):
        assert [detection_probability(n) for n in range(4)] == [0.0, 0.5, 0.75, 0.875]


def test_registry():
    assert set(STRATEGIES) >= {"eve_intercept", "eve_intercept_cnot", "eve_intercept_resend", "malicious_trent_ghz"}
    assert make_strategy("none") is None and make_strategy(None) is None
    assert isinstance(make_strategy("eve_intercept_cnot", local_gate=Gate.Z), EveInterceptCnot)
    with pytest.raises(ValueError):
        make_strategy("bogus")


def test_view_is_deterministic_for_fixed_seed():
    def view():
        sess = Session()
        run_mutual_auth(
            sess, SessionConfig(N=2, v=3), Party.ALICE, AuthKey.from_bits("101"), np.random.default_rng(9), tap=EveInterceptResend()
        )
        return eve_view(sess.transcript, verdicts=True)

    assert view() == view()
