import csv
import io
import json
from dataclasses import replace

import numpy as np
import pytest

from qdcauth.harness.oracle import (
    SCENARIOS,
    OutcomeDistribution,
    deterministic_scenario,
    enumerate_branches,
    mutual_information,
    swap_scenario,
    zz_scenario,
)
from qdcauth.harness.runner import (
    CSV_FIELDS,
    _keys,
    RunConfig,
    aggregate,
    emit_report,
    hex_to_bits,
    report_text,
    run_trial,
    run_trials,
    trial_rng,
)
from qdcauth.protocol import ConfigError, derive_auth_key
from qdcauth.qstate import BellLabel, CapacityError, Gate


class TestOracle:
    def test_swap_labels_quarter_each(self):
        d = enumerate_branches(swap_scenario)
        assert d.support() == {l.value for l in BellLabel}
        assert all(p == pytest.approx(0.25, abs=1e-12) for _, p in d.items())

    def test_deterministic(self):
        d = enumerate_branches(deterministic_scenario)
        assert len(d) == 1 and next(iter(d.items()))[1] == 1.0

    def test_intercept_zz_key_bit_zero_uniform(self):
        d = enumerate_branches(zz_scenario(BellLabel.PHI_PLUS, 0))
        assert len(d) == 4 and all(p == pytest.approx(0.25, abs=1e-12) for _, p in d.items())

    def test_intercept_zz_key_independent(self):
        d0 = enumerate_branches(zz_scenario(BellLabel.PHI_PLUS, 0))
        assert d0.close_to(enumerate_branches(zz_scenario(BellLabel.PHI_PLUS, 1)))

    def test_sums_to_one(self):
        for name, sc in SCENARIOS.items():
            assert sum(p for _, p in enumerate_branches(sc).items()) == pytest.approx(1.0, abs=1e-12), name

    def test_zero_probability_branches_pruned(self):
        def sc(sess, rng):
            q = sess.reg.new_qubit()
            return sess.reg.measure_z(q, rng)

        assert enumerate_branches(sc).support() == {0}

    def test_sampling_inside_scenario_rejected(self):
        def sc(sess, rng):
            return rng.random()

        with pytest.raises(Exception):
            enumerate_branches(sc)

    def test_cap_exceeded(self):
        def sc(sess, rng):
            qs = [sess.reg.new_qubit() for _ in range(4)]
            sess.reg.apply_gate(Gate.H, qs[0])
            for a, b in zip(qs, qs[1:]):
                sess.reg.apply_cnot(a, b)
            return 0

        with pytest.raises(CapacityError):
            enumerate_branches(sc, max_qubits=3)

    def test_distribution_must_normalise(self):
        with pytest.raises(ValueError):
            OutcomeDistribution({0: 0.5})

    def test_marginal(self):
        d = enumerate_branches(zz_scenario(BellLabel.PHI_PLUS, 0)).marginal(lambda o: o[0])
        assert d[0] == pytest.approx(0.5, abs=1e-12)


class TestMutualInformation:
    def test_identical_is_zero(self):
        d = enumerate_branches(swap_scenario)
        assert mutual_information({0: d, 1: d}) == 0.0

    def test_disjoint_is_one_bit(self):
        a, b = OutcomeDistribution({"x": 1.0}), OutcomeDistribution({"y": 1.0})
        assert mutual_information({0: a, 1: b}) == pytest.approx(1.0, abs=1e-12)

    def test_prior(self):
        a, b = OutcomeDistribution({"x": 1.0}), OutcomeDistribution({"y": 1.0})
        assert mutual_information({0: a, 1: b}, {0: 0.25, 1: 0.75}) == pytest.approx(0.8112781244591328, abs=1e-12)

    def test_mismatched_outcome_spaces(self):
        with pytest.raises(ValueError):
            mutual_information({0: OutcomeDistribution({"x": 1.0}), 1: OutcomeDistribution({(1,): 1.0})})


class TestConfig:
    def test_hex(self):
        assert hex_to_bits("a5") == [1, 0, 1, 0, 0, 1, 0, 1]
        assert hex_to_bits("0x") == []
        with pytest.raises(ConfigError):
            hex_to_bits("zz")

    @pytest.mark.parametrize(
        "kw",
        [
            dict(protocol="bb84"),
            dict(attack="trent_plus_state"),
            dict(trials=0),
            dict(seed=-1),
            dict(v=4, key_length=8),
            dict(N=4, message="ffff"),
            dict(hash_id="md5"),
            dict(initial_bell="Phi"),
            dict(alice_key_bits="012"),
            dict(mappings={"dense": {"00": "I", "01": "I", "10": "Z", "11": "iY"}, "swap": {"00": "I", "01": "Z", "10": "X", "11": "iY"}}),
            dict(conventions={"forward": "h_for_zero"}),
        ],
    )
    def test_validation(self, kw):
        with pytest.raises(ConfigError):
            RunConfig(**kw).validate()

    def test_unknown_field(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"trails": 3})

    def test_round_trip(self, tmp_path):
        cfg = RunConfig(protocol="zhang", attack="trent_plus_state", trials=3)
        p = tmp_path / "c.json"
        p.write_text(json.dumps(cfg.to_dict()))
        assert RunConfig.load(p) == cfg


class TestRunner:
    def test_trial_rng_depends_on_seed_and_index_only(self):
        a = trial_rng(5, 3).integers(0, 2**32, 4)
        assert np.array_equal(a, trial_rng(5, 3).integers(0, 2**32, 4))
        assert not np.array_equal(a, trial_rng(5, 4).integers(0, 2**32, 4))
        assert not np.array_equal(a, trial_rng(6, 3).integers(0, 2**32, 4))

    def test_honest_trials_deliver(self):
        r = run_trials(RunConfig(N=8, v=8, message_bits=8, trials=10, seed=1))
        assert r.aggregates["detection_rate"] == 0.0
        assert r.aggregates["message_delivered_rate"] == 1.0

    def test_dense_honest(self):
        r = run_trials(RunConfig(N=8, v=8, comm_scheme="dense", message_bits=12, trials=5, seed=2))
        assert r.aggregates["message_delivered_rate"] == 1.0

    def test_zhang_attack(self):
        r = run_trials(RunConfig(protocol="zhang", attack="trent_plus_state", message_bits=32, trials=5, seed=3))
        assert r.aggregates["attack_success_rate"] == 1.0
        assert r.aggregates["mi_estimate_bits"] == pytest.approx(1.0, abs=1e-12)

    def test_intercept_detected_and_no_mi(self):
        cfg = RunConfig(attack="eve_intercept", N=4, v=16, key_length=16, message_bits=4, trials=5, seed=4)
        r = run_trials(cfg)
        assert r.aggregates["acceptance_rate"] < 1.0
        assert r.aggregates["mi_estimate_bits"] == pytest.approx(0.0, abs=1e-9)
        assert not any(t["message_delivered"] for t in r.trials if t["detected"])

    def test_fixed_positions_all_zero_key_ghz_passes(self):
        cfg = RunConfig(attack="malicious_trent_ghz", N=2, v=4, alice_key_bits="0000", message_bits=2,
                        fixed_positions=True, trials=20, seed=5)
        assert run_trials(cfg).aggregates["detection_rate"] == 0.0

    def test_counter_advances_per_trial(self):
        cfg = RunConfig(counter=3, key_length=16)
        a0, b0 = _keys(cfg, 0)
        a2, _ = _keys(cfg, 2)
        assert a0 == derive_auth_key("alice", 3, 16) and b0 == derive_auth_key("bob", 3, 16)
        assert a2 == derive_auth_key("alice", 5, 16)

    def test_trial_record(self):
        rec = run_trial(RunConfig(N=2, v=8, message_bits=2), 0)
        assert rec["accepted"] and rec["delivered"] == rec["message"] and len(rec["labels"]) == 2

    def test_aggregates_recompute_from_rows(self):
        r = run_trials(RunConfig(attack="eve_intercept", N=2, v=8, message_bits=2, trials=12, seed=6))
        again = aggregate(r.trials, r.aggregates["mi_estimate_bits"])
        for k, v in r.aggregates.items():
            if isinstance(v, float):
                assert again[k] == pytest.approx(v, abs=1e-12)
            else:
                assert again[k] == v
        freqs = r.aggregates["label_frequencies"]
        assert not freqs or sum(freqs.values()) == pytest.approx(1.0, abs=1e-12)


class TestReports:
    CFG = RunConfig(N=4, v=8, message_bits=4, trials=6, seed=7)

    def test_csv_rows(self, tmp_path):
        r = run_trials(self.CFG)
        p = tmp_path / "r.csv"
        emit_report(r, "csv", p)
        rows = list(csv.reader(io.StringIO(p.read_text())))
        assert len(rows) == self.CFG.trials + 1 and tuple(rows[0]) == CSV_FIELDS

    def test_json_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        emit_report(run_trials(self.CFG), "json", a)
        emit_report(run_trials(self.CFG), "json", b)
        assert a.read_bytes() == b.read_bytes()
        data = json.loads(a.read_text())
        assert set(data) == {"config", "aggregates", "trials"} and "wall_time" not in data["aggregates"]

    def test_parallel_matches_serial(self):
        assert report_text(run_trials(self.CFG, workers=2)) == report_text(run_trials(self.CFG, workers=1))

    def test_timing_opt_in(self):
        assert "wall_time" in json.loads(report_text(run_trials(self.CFG), timing=True))["aggregates"]

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            report_text(run_trials(replace(self.CFG, trials=1)), "xml")
