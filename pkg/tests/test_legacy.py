import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdcauth.harness.oracle import enumerate_branches, legacy_attack_scenario, legacy_check_scenario, mutual_information
from qdcauth.legacy import (
    GHZ,
    HZ,
    PLUS_GHZ,
    PLUS_GHZ_CHECK_MISMATCH,
    DeliveryMode,
    LegacyConfig,
    LegacyVariant,
    TrentState,
    infer_bit,
    lee_decode,
    legacy_error_rate,
    legacy_run,
    trent_plus_state_attack,
)
from qdcauth.protocol import AuthKey
from qdcauth.qstate import BellLabel

MODES = list(DeliveryMode)


def test_states_are_normalised():
    assert np.isclose(np.linalg.norm(GHZ), 1) and np.isclose(np.linalg.norm(PLUS_GHZ), 1)
    assert np.count_nonzero(PLUS_GHZ) == 4


def test_hz_maps_plus_basis():
    plus, minus = np.array([1, 1]) / np.sqrt(2), np.array([1, -1]) / np.sqrt(2)
    assert np.allclose(HZ @ plus, [0, 1]) and np.allclose(HZ @ minus, [1, 0])


@pytest.mark.parametrize("variant", list(LegacyVariant))
@pytest.mark.parametrize("mode", MODES)
@settings(max_examples=10, deadline=None)
@given(bits=st.lists(st.integers(0, 1), min_size=1, max_size=8), seed=st.integers(0, 2**32 - 1))
def test_honest_delivery(variant, mode, bits, seed):
    res = legacy_run(LegacyConfig(variant, mode), bits, np.random.default_rng(seed))
    assert res.delivered == bits
    assert res.auth_mismatches == 0 and res.check_mismatches == 0
    assert res.inferred is None


def test_honest_with_custom_keys():
    res = legacy_run(
        LegacyConfig(), [1, 1, 0], np.random.default_rng(0), alice_key=AuthKey.from_bits("1"), bob_key=AuthKey.from_bits("01")
    )
    assert res.delivered == [1, 1, 0]


def test_infer_rule():
    assert [infer_bit(z, x) for z, x in ((0, 0), (1, 1), (0, 1), (1, 0))] == [0, 0, 1, 1]


@pytest.mark.parametrize("mode", MODES)
def test_plus_state_attack_reads_every_bit_exactly(mode):
    dists = {b: enumerate_branches(legacy_attack_scenario(b, mode)) for b in (0, 1)}
    for b, d in dists.items():
        assert {infer_bit(*o) for o in d.support()} == {b}
    assert mutual_information(dists) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("mode", MODES)
def test_plus_state_attack_sampled(mode):
    bits = [int(b) for b in np.random.default_rng(1).integers(0, 2, size=64)]
    assert trent_plus_state_attack(LegacyVariant.ZHANG, mode, bits, np.random.default_rng(2)) == bits


@pytest.mark.parametrize("mode", MODES)
def test_attack_leaks_even_when_checks_flag_it(mode):
    bits = [int(b) for b in np.random.default_rng(5).integers(0, 2, size=64)]
    cfg = LegacyConfig(LegacyVariant.ZHANG, mode, TrentState.PLUS_GHZ, 0.25, 0.25)
    res = legacy_run(cfg, bits, np.random.default_rng(3), trent_attack=True)
    assert res.inferred == bits
    assert res.auth_error_rate > 0 and res.check_error_rate > 0


def test_attack_rejects_lee():
    with pytest.raises(ValueError):
        trent_plus_state_attack(LegacyVariant.LEE, DeliveryMode.PROTOCOL1, [0], np.random.default_rng(0))


def test_plus_state_auth_check_mismatch_exact():
    d = enumerate_branches(legacy_check_scenario)
    assert d[1] == pytest.approx(PLUS_GHZ_CHECK_MISMATCH, abs=1e-12)


def test_plus_state_auth_error_rate_sampled():
    cfg = LegacyConfig(LegacyVariant.ZHANG, DeliveryMode.PROTOCOL1, TrentState.PLUS_GHZ, 0.5, 0.0)
    res = legacy_run(cfg, [0] * 2000, np.random.default_rng(4))
    assert res.auth_checked == 1000
    assert legacy_error_rate(res) == pytest.approx(0.5, abs=0.05)


def test_bad_fraction():
    with pytest.raises(ValueError):
        LegacyConfig(auth_check_fraction=1.0)


def test_transcript_records_relay():
    res = legacy_run(LegacyConfig(mode=DeliveryMode.PROTOCOL2), [1, 0], np.random.default_rng(0))
    relays = [e for e in res.transcript if e.kind == "broadcast" and e.data.get("phase") == "legacy-relay"]
    assert len(relays) == 3


@pytest.mark.parametrize("variant", list(LegacyVariant))
@pytest.mark.parametrize("mode", MODES)
@pytest.mark.parametrize("bit", [0, 1])
def test_decoding_exact_on_every_branch(variant, mode, bit):
    def scenario(sess, rng):
        cfg = LegacyConfig(variant, mode, auth_check_fraction=0.0, message_check_fraction=0.0)
        return tuple(legacy_run(cfg, [bit], rng, session=sess).delivered)

    assert enumerate_branches(scenario).support() == {(bit,)}


def test_lee_decode_rule():
    assert lee_decode(BellLabel.PHI_PLUS, 0) == 0 and lee_decode(BellLabel.PHI_MINUS, 1) == 0
    assert lee_decode(BellLabel.PSI_PLUS, 0) == 1 and lee_decode(BellLabel.PHI_PLUS, 1) == 1
