"""Run configuration, seeded Monte Carlo trials and report emission."""

from __future__ import annotations

import csv
import io
import json
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..adversary import STRATEGIES, make_strategy
from ..legacy import DeliveryMode, LegacyConfig, LegacyVariant, TrentState, legacy_run
from ..protocol.auth import AuthenticationAborted
from ..protocol.comm import run_session
from ..protocol.config import DENSE_MAP, SWAP_MAP, CommScheme, ConfigError, SessionConfig, check_mapping
from ..protocol.keys import HASHES, AuthKey, Convention, derive_auth_key
from ..qstate import BellLabel, Gate, Party

PROTOCOLS = ("mutual_qdc", "lee", "zhang")
ATTACKS = {
    "mutual_qdc": {"none", "eve_intercept", "eve_intercept_cnot", "eve_intercept_resend", "malicious_trent_ghz", "transit_flip"},
    "lee": {"none"},
    "zhang": {"none", "trent_plus_state"},
}


def hex_to_bits(text: str) -> list[int]:
    text = text.strip().lower().removeprefix("0x")
    try:
        raw = bytes.fromhex(text) if text else b""
    except ValueError as exc:
        raise ConfigError(f"message is not valid hex: {text!r}") from exc
    return [(byte >> (7 - i)) & 1 for byte in raw for i in range(8)]


@dataclass
class RunConfig:
    protocol: str = "mutual_qdc"
    attack: str = "none"
    N: int = 16
    v: int = 8
    initial_bell: str = "PhiPlus"
    comm_scheme: str = "swap"
    message: str = ""
    trials: int = 1
    seed: int = 0
    hash_id: str = "shake256"
    conventions: dict = field(default_factory=lambda: {"forward": "h_for_zero", "transform": "h_for_one"})
    mappings: dict = field(
        default_factory=lambda: {
            "dense": {k: g.value for k, g in DENSE_MAP.items()},
            "swap": {k: g.value for k, g in SWAP_MAP.items()},
        }
    )
    # random message length per trial when ``message`` is empty
    message_bits: int = 16
    key_length: int = 8
    alice_id: str = "alice"
    bob_id: str = "bob"
    counter: int = 0
    # explicit Alice key as a bit string; overrides hashing
    alice_key_bits: str = ""
    fixed_positions: bool = False
    error_threshold: int = 0
    dense_check_fraction: float = 0.25
    recovery_table: str = "derived"
    legacy_mode: str = "protocol1"
    legacy_auth_check_fraction: float = 0.25
    legacy_message_check_fraction: float = 0.25

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def key_len(self) -> int:
        return len(self.alice_key_bits) if self.alice_key_bits else self.key_length

    def session_config(self) -> SessionConfig:
        return SessionConfig(
            N=self.N,
            v=self.v,
            initial_bell=BellLabel(self.initial_bell),
            comm_scheme=CommScheme(self.comm_scheme),
            error_threshold=self.error_threshold,
            dense_check_fraction=self.dense_check_fraction,
            forward=Convention(self.conventions["forward"]),
            transform=Convention(self.conventions["transform"]),
            dense_map={k: Gate(g) for k, g in self.mappings["dense"].items()},
            swap_map={k: Gate(g) for k, g in self.mappings["swap"].items()},
            recovery_table=self.recovery_table,
        )

    def legacy_config(self) -> LegacyConfig:
        return LegacyConfig(
            LegacyVariant(self.protocol),
            DeliveryMode(self.legacy_mode),
            TrentState.PLUS_GHZ if self.attack == "trent_plus_state" else TrentState.STANDARD_GHZ,
            self.legacy_auth_check_fraction,
            self.legacy_message_check_fraction,
        )

    def message_length(self) -> int:
        return len(hex_to_bits(self.message)) if self.message else self.message_bits

    def validate(self) -> "RunConfig":
        """Raise :class:`ConfigError` on anything a trial would trip over."""
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}")
        if self.attack not in ATTACKS[self.protocol]:
            raise ConfigError(f"attack {self.attack!r} does not apply to {self.protocol}; choose from {sorted(ATTACKS[self.protocol])}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.hash_id not in HASHES:
            raise ConfigError(f"unknown hash_id {self.hash_id!r}")
        if self.key_len < 1:
            raise ConfigError("key length must be >= 1")
        if self.alice_key_bits and set(self.alice_key_bits) - {"0", "1"}:
            raise ConfigError("alice_key_bits must be a 0/1 string")
        if self.message_length() < 0:
            raise ConfigError("message_bits must be non-negative")
        if set(self.conventions) != {"forward", "transform"}:
            raise ConfigError("conventions needs exactly 'forward' and 'transform'")
        if set(self.mappings) != {"dense", "swap"}:
            raise ConfigError("mappings needs exactly 'dense' and 'swap'")
        try:
            if self.protocol == "mutual_qdc":
                cfg = self.session_config()
                cfg.check_key_length(self.key_len)
                n = self.message_length()
                if n + n % 2 > cfg.capacity():
                    raise ConfigError(f"message of {n} bits exceeds the {cfg.comm_scheme.value} capacity {cfg.capacity()} for N={self.N}")
                for name in ("dense", "swap"):
                    check_mapping({k: Gate(g) for k, g in self.mappings[name].items()}, name)
            else:
                self.legacy_config()
        except ConfigError:
            raise
        except (ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc
        return self


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for trial ``index``; depends only on (seed, index)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(index,))))


def _bits_str(bits) -> str:
    return "".join(str(int(b)) for b in bits)


def _keys(cfg: RunConfig, index: int) -> tuple[AuthKey, AuthKey]:
    counter = cfg.counter + index
    if cfg.alice_key_bits:
        alice = AuthKey.from_bits(cfg.alice_key_bits, cfg.alice_id.encode(), counter)
    else:
        alice = derive_auth_key(cfg.alice_id, counter, cfg.key_length, cfg.hash_id)
    bob = derive_auth_key(cfg.bob_id, counter, cfg.key_len, cfg.hash_id)
    return alice, bob


def run_trial(cfg: RunConfig, index: int) -> dict[str, Any]:
    """One independent trial; returns a flat JSON-ready record."""
    rng = trial_rng(cfg.seed, index)
    message = hex_to_bits(cfg.message) if cfg.message else [int(b) for b in rng.integers(0, 2, cfg.message_bits)]
    rec: dict[str, Any] = {
        "index": index,
        "message": _bits_str(message),
        "accepted": True,
        "detected": False,
        "mismatches": 0,
        "message_delivered": False,
        "delivered": "",
        "attack_inferred_bits": None,
        "attack_success": None,
        "labels": [],
    }
    if cfg.protocol == "mutual_qdc":
        scfg = cfg.session_config()
        alice_key, bob_key = _keys(cfg, index)
        strat = make_strategy(cfg.attack)
        kind = getattr(strat, "kind", None)
        kw = {}
        if kind == "tap":
            kw["tap"] = strat
        elif kind == "transit":
            kw["transit_tap"] = strat
        elif kind == "trent":
            kw["trent_ghz"] = True
        if cfg.fixed_positions:
            # V and V' pinned for Alice so the key bits they cover are known
            kw["positions"] = {Party.ALICE: (list(range(scfg.v)), list(range(scfg.v, 2 * scfg.v)))}
        try:
            res = run_session(scfg, message, rng, alice_key, bob_key, **kw)
        except AuthenticationAborted as exc:
            res = exc.result
            rec["accepted"] = False
            rec["detected"] = True
        if res is not None:
            rec["mismatches"] = res.mismatches
            if res.session_key is not None:
                rec["labels"] = [lab.value for lab in res.session_key.announced]
        if rec["accepted"]:
            rec["delivered"] = _bits_str(res.delivered)
            rec["message_delivered"] = res.delivered == message
    else:
        alice_key, bob_key = _keys(cfg, index)
        lres = legacy_run(cfg.legacy_config(), message, rng, trent_attack=cfg.attack == "trent_plus_state",
                          alice_key=alice_key, bob_key=bob_key)
        rec["mismatches"] = lres.auth_mismatches + lres.check_mismatches
        rec["detected"] = lres.auth_mismatches > cfg.error_threshold or lres.check_mismatches > cfg.error_threshold
        rec["accepted"] = not rec["detected"]
        rec["auth_error_rate"] = lres.auth_error_rate
        rec["delivered"] = _bits_str(lres.delivered)
        rec["message_delivered"] = lres.delivered == message
        if lres.inferred is not None:
            rec["attack_inferred_bits"] = _bits_str(lres.inferred)
            rec["attack_success"] = lres.inferred == message
    return rec


@dataclass
class Report:
    config: dict
    trials: list[dict]
    aggregates: dict
    wall_time: float = 0.0

    def to_dict(self, timing: bool = False) -> dict:
        agg = dict(self.aggregates)
        if timing:
            agg["wall_time"] = self.wall_time
        return {"config": self.config, "aggregates": agg, "trials": self.trials}


def aggregate(trials: list[dict], mi_bits: float | None) -> dict:
    n = len(trials)
    labels = Counter(lab for t in trials for lab in t["labels"])
    total = sum(labels.values())
    attacked = [t for t in trials if t["attack_success"] is not None]
    return {
        "trials": n,
        "detection_rate": sum(t["detected"] for t in trials) / n,
        "acceptance_rate": sum(t["accepted"] for t in trials) / n,
        "message_delivered_rate": sum(t["message_delivered"] for t in trials) / n,
        "attack_success_rate": (sum(t["attack_success"] for t in attacked) / len(attacked)) if attacked else None,
        "mean_mismatches": sum(t["mismatches"] for t in trials) / n,
        "label_frequencies": {lab.value: labels[lab.value] / total for lab in BellLabel} if total else {},
        "mi_estimate_bits": mi_bits,
    }


def exact_mi(cfg: RunConfig) -> float | None:
    """Exact per-position key leakage of the configured attack, from the oracle."""
    from .oracle import enumerate_branches, legacy_attack_scenario, mutual_information, position_scenario

    if cfg.protocol == "zhang" and cfg.attack == "trent_plus_state":
        mode = DeliveryMode(cfg.legacy_mode)
        return mutual_information({b: enumerate_branches(legacy_attack_scenario(b, mode)) for b in (0, 1)})
    if cfg.protocol == "mutual_qdc" and cfg.attack in ("eve_intercept", "eve_intercept_cnot", "eve_intercept_resend"):
        init = BellLabel(cfg.initial_bell)
        return mutual_information({k: enumerate_branches(position_scenario(cfg.attack, k, initial=init)) for k in (0, 1)})
    if cfg.attack == "none":
        return 0.0
    return None


def run_trials(cfg: RunConfig, workers: int = 1) -> Report:
    cfg.validate()
    start = time.perf_counter()
    if workers > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(run_trial, [cfg] * cfg.trials, range(cfg.trials), chunksize=max(1, cfg.trials // (4 * workers))))
    else:
        trials = [run_trial(cfg, i) for i in range(cfg.trials)]
    trials.sort(key=lambda t: t["index"])
    agg = aggregate(trials, exact_mi(cfg))
    return Report(cfg.to_dict(), trials, agg, time.perf_counter() - start)


CSV_FIELDS = ("index", "accepted", "detected", "mismatches", "message_delivered", "message", "delivered",
              "attack_inferred_bits", "attack_success", "labels")


def report_text(r: Report, fmt: str = "json", timing: bool = False) -> str:
    if fmt == "json":
        return json.dumps(r.to_dict(timing), sort_keys=True, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for t in r.trials:
            row = []
            for f in CSV_FIELDS:
                v = t.get(f)
                row.append(" ".join(v) if isinstance(v, list) else ("" if v is None else v))
            w.writerow(row)
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r}")


def emit_report(r: Report, fmt: str, path: str | Path, timing: bool = False) -> None:
    """Write the report. Timing is left out by default so reruns are byte-identical."""
    Path(path).write_text(report_text(r, fmt, timing))
