"""
Acceptance checks shared by ``qdcauth selftest`` and the test suite.

Every check returns a :class:`CheckResult`; none of them raise on a
failed expectation, so a run always reports every line.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..adversary import EveIntercept
from ..legacy import DeliveryMode
from ..protocol.auth import RECOVERY_TABLES, attach_ancilla, recover_pair, run_mutual_auth
from ..protocol.comm import dense_decode, dense_encode, swap_decode, swap_encode
from ..protocol.config import DENSE_MAP, SWAP_MAP, Session, SessionConfig
from ..protocol.keys import AuthKey, keyed_transform
from ..qstate import BellLabel, Gate, Party, Registry, bell_decompose, states_equal_up_to_phase
from .oracle import (
    enumerate_branches,
    legacy_attack_scenario,
    mutual_information,
    position_scenario,
    swap_scenario,
)
from .runner import RunConfig, report_text, run_trials

STAT_TOL = 0.02
EXACT_TOL = 1e-12
STATE_TOL = 1e-10
MI_TOL = 1e-9

R = 1 / math.sqrt(2)
# rows |00>, |01>, |10>, |11>; columns phi+, phi-, psi+, psi-
BELL_TABLE = np.array(
    [
        [R, R, 0, 0],
        [0, 0, R, R],
        [0, 0, R, -R],
        [R, -R, 0, 0],
    ]
)


@dataclass
class CheckResult:
    cid: str
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} criterion {self.cid}: {self.title} | {self.detail} ({self.seconds:.2f}s)"


def _timed(fn: Callable[[], tuple[bool, str]], cid: str, title: str) -> CheckResult:
    t0 = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # report, never crash the run
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return CheckResult(cid, title, ok, detail, time.perf_counter() - t0)


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


# ---- 1 ------------------------------------------------------------------

def check_bell_table() -> tuple[bool, str]:
    t0 = time.perf_counter()
    rows = np.array([bell_decompose(np.eye(4)[i]) for i in range(4)])
    elapsed = time.perf_counter() - t0
    err = float(np.max(np.abs(rows - BELL_TABLE)))
    ok = err <= EXACT_TOL and elapsed < 1e-3
    return ok, f"max |coef - table| = {err:.1e}, {elapsed * 1e3:.3f} ms"


# ---- 2 ------------------------------------------------------------------

def sample_swap_labels(trials: int, seed: int) -> dict[str, float]:
    rng = _rng(seed)
    counts = dict.fromkeys((lab.value for lab in BellLabel), 0)
    for _ in range(trials):
        counts[swap_scenario(Session(), rng)] += 1
    return {k: c / trials for k, c in counts.items()}


def check_swapping(trials: int = 10_000, seed: int = 2) -> tuple[bool, str]:
    t0 = time.perf_counter()
    exact = enumerate_branches(swap_scenario)
    ex_ok = len(exact) == 4 and all(abs(p - 0.25) <= EXACT_TOL for _, p in exact.items())
    freq = sample_swap_labels(trials, seed)
    worst = max(abs(f - 0.25) for f in freq.values())
    elapsed = time.perf_counter() - t0
    ok = ex_ok and worst <= STAT_TOL and elapsed < 5.0
    return ok, f"exact {sorted(exact.probs.values())}, sampled max dev {worst:.4f}, {elapsed:.2f} s"


# ---- 3 ------------------------------------------------------------------

def check_ghz_transform() -> tuple[bool, str]:
    reg = Registry()
    t, a = reg.prepare_bell(BellLabel.PHI_PLUS, Party.TRENT, Party.ALICE)
    anc = attach_ancilla(reg, a)
    keyed_transform(reg, [a, anc], 1)
    keyed_transform(reg, [t], 1)
    amps = reg.state_of([t, a, anc]).amps
    want = np.zeros(8)
    want[[0b000, 0b011, 0b101, 0b110]] = 0.5
    err = float(np.max(np.abs(amps - want)))
    return err <= EXACT_TOL, f"max amplitude error {err:.1e}"


# ---- 4 ------------------------------------------------------------------

def recovery_cases(table: str = "derived") -> list[tuple[BellLabel, int, bool]]:
    """(initial label, ancilla outcome, restored?) for every reachable branch."""

    def scenario(label):
        def run(sess, rng):
            reg = sess.reg
            t, a = reg.prepare_bell(label, Party.TRENT, Party.ALICE)
            anc = attach_ancilla(reg, a)
            keyed_transform(reg, [a, anc], 1)
            keyed_transform(reg, [t], 1)
            m = recover_pair(reg, a, anc, 1, label, rng, table=RECOVERY_TABLES[table])
            ref = Registry()
            r = ref.prepare_bell(label, Party.TRENT, Party.ALICE)
            same = states_equal_up_to_phase(reg.state_of([t, a]), ref.state_of(list(r)), STATE_TOL)
            return m, same

        return run

    out = []
    for label in BellLabel:
        for (m, same), _ in sorted(enumerate_branches(scenario(label)).items()):
            out.append((label, m, same))
    return out


def check_recovery() -> tuple[bool, str]:
    cases = recovery_cases("derived")
    bad = [(lab.value, m) for lab, m, ok in cases if not ok]
    ok = len(cases) == 8 and not bad
    return ok, f"{len(cases) - len(bad)}/{len(cases)} restored" + (f", failing {bad}" if bad else "")


# ---- 5 ------------------------------------------------------------------

def check_honest_completeness(trials: int = 100, seed: int = 5) -> tuple[bool, str]:
    t0 = time.perf_counter()
    worst = []
    for scheme in ("swap", "dense"):
        for label in BellLabel:
            cfg = RunConfig(N=16, v=8, initial_bell=label.value, comm_scheme=scheme, trials=trials, seed=seed, message_bits=16)
            rep = run_trials(cfg)
            good = sum(t["message_delivered"] and t["accepted"] and t["mismatches"] == 0 for t in rep.trials)
            if good != trials:
                worst.append(f"{scheme}/{label.value} {good}/{trials}")
    elapsed = time.perf_counter() - t0
    ok = not worst and elapsed < 10.0
    return ok, (", ".join(worst) or f"8 configs x {trials}/{trials} delivered, 0 mismatches") + f", {elapsed:.2f} s"


# ---- 6 ------------------------------------------------------------------

def check_legacy_attack(trials: int = 100, seed: int = 6) -> tuple[bool, str]:
    rep = run_trials(RunConfig(protocol="zhang", attack="trent_plus_state", trials=trials, seed=seed, message_bits=64))
    rate = rep.aggregates["attack_success_rate"]
    mis = {m: mutual_information({b: enumerate_branches(legacy_attack_scenario(b, m)) for b in (0, 1)}) for m in DeliveryMode}
    ok = rate == 1.0 and all(abs(v - 1.0) <= EXACT_TOL for v in mis.values())
    return ok, f"success rate {rate}, MI " + ", ".join(f"{m.value}={v:.12f}" for m, v in mis.items())


# ---- 7 ------------------------------------------------------------------

def sample_intercept(key_bit: int, trials: int, seed: int) -> float:
    """Sampled reverse-set mismatch rate of one intercepted position."""
    rng = _rng(seed)
    bad = 0
    for _ in range(trials):
        sess = Session()
        res = run_mutual_auth(
            sess, SessionConfig(N=0, v=1), Party.ALICE, AuthKey.from_bits([key_bit]), rng,
            tap=EveIntercept(), forward_positions=[0], reverse_positions=[1],
        )
        bad += res.reverse.mismatches
    return bad / trials


def check_intercept(trials: int = 10_000, seed: int = 7) -> tuple[bool, str]:
    want = {0: 0.5, 1: 0.0}
    exact, sampled, trent = {}, {}, {}
    for k in (0, 1):
        d = enumerate_branches(position_scenario("eve_intercept", k, observe="outcomes"))
        exact[k] = sum(p for (_, r), p in d.items() if r)
        sampled[k] = sample_intercept(k, trials, seed + k)
        trent[k] = enumerate_branches(position_scenario("eve_intercept", k, observe="trent_v"))
    uniform = all(abs(trent[k][(b,)] - 0.5) <= EXACT_TOL for k in (0, 1) for b in (0, 1))
    ok = (
        all(abs(exact[k] - want[k]) <= EXACT_TOL for k in (0, 1))
        and all(abs(sampled[k] - want[k]) <= STAT_TOL for k in (0, 1))
        and uniform
        and trent[0].close_to(trent[1])
    )
    return ok, (
        f"exact P(mismatch|k=0)={exact[0]}, P(mismatch|k=1)={exact[1]}; "
        f"sampled {sampled[0]:.4f}/{sampled[1]:.4f}; Trent's V bit uniform and key-independent: {uniform}"
    )


# ---- 8 ------------------------------------------------------------------

def leakage(attack: str, **kw) -> float:
    return mutual_information({k: enumerate_branches(position_scenario(attack, k, **kw)) for k in (0, 1)})


def check_zero_leakage(attack: str) -> tuple[bool, str]:
    mi = leakage(attack)
    return mi <= MI_TOL, f"I(key bit; Eve's view) = {mi:.3e} bits"


# ---- 9 ------------------------------------------------------------------

def sample_ghz_detection(key: str, trials: int, seed: int) -> float:
    rng = _rng(seed)
    v = len(key)
    cfg = SessionConfig(N=0, v=v)
    hits = 0
    for _ in range(trials):
        res = run_mutual_auth(
            Session(), cfg, Party.ALICE, AuthKey.from_bits(key), rng,
            trent_ghz=True, forward_positions=list(range(v)), reverse_positions=list(range(v, 2 * v)),
        )
        hits += res.detected
    return hits / trials


def check_ghz(key: str = "0110", trials: int = 10_000, seed: int = 9) -> tuple[bool, str]:
    per = {}
    for k in (0, 1):
        d = enumerate_branches(position_scenario("malicious_trent_ghz", k, observe="outcomes"))
        per[k] = sum(p for (f, _), p in d.items() if f)
    n1 = key.count("1")
    want = 1 - 0.5**n1
    got = sample_ghz_detection(key, trials, seed)
    ok = abs(per[1] - 0.5) <= EXACT_TOL and per[0] <= EXACT_TOL and abs(got - want) <= STAT_TOL
    return ok, f"per-position mismatch k=1: {per[1]}, k=0: {per[0]}; detection {got:.4f} vs {want:.4f} (n1={n1})"


# ---- 10 -----------------------------------------------------------------

def dense_table() -> list[tuple[str, BellLabel, bool]]:
    out = []
    for label in BellLabel:
        for bits in DENSE_MAP:

            def run(sess, rng, label=label, bits=bits):
                a, b = sess.reg.prepare_bell(label, Party.ALICE, Party.BOB)
                g = dense_encode(label, bits, DENSE_MAP)
                if g is not Gate.I:
                    sess.reg.apply_gate(g, a)
                return dense_decode(sess.reg, a, b, label, rng, DENSE_MAP)

            d = enumerate_branches(run)
            out.append((bits, label, d.support() == {bits}))
    return out


def swap_table() -> list[tuple[str, BellLabel, BellLabel, bool]]:
    out = []
    for l1 in BellLabel:
        for l2 in BellLabel:
            for bits in SWAP_MAP:

                def run(sess, rng, l1=l1, l2=l2, bits=bits):
                    a1, b1 = sess.reg.prepare_bell(l1, Party.ALICE, Party.BOB)
                    a2, b2 = sess.reg.prepare_bell(l2, Party.ALICE, Party.BOB)
                    _, alice = swap_encode(sess.reg, a1, a2, bits, rng, SWAP_MAP)
                    bob = sess.reg.measure_bell(b1, b2, rng)
                    return swap_decode(bob, alice, l1, l2, SWAP_MAP)

                d = enumerate_branches(run)
                out.append((bits, l1, l2, d.support() == {bits}))
    return out


def check_decode_tables() -> tuple[bool, str]:
    dense = dense_table()
    swap = swap_table()
    nd, ns = sum(r[-1] for r in dense), sum(r[-1] for r in swap)
    return nd == 16 and ns == 64, f"dense {nd}/16, swap {ns}/64 exact on every branch"


# ---- 11 -----------------------------------------------------------------

def check_determinism(workers: int = 2) -> tuple[bool, str]:
    cfg = RunConfig(attack="eve_intercept", trials=40, seed=11, N=8, v=4, key_length=4, message_bits=8)
    a = report_text(run_trials(cfg))
    b = report_text(run_trials(cfg, workers=workers))
    c = report_text(run_trials(cfg))
    return a == b == c, f"serial/parallel/rerun identical: {a == b}/{a == c}, {len(a)} bytes"


CHECKS: list[tuple[str, str, Callable[[], tuple[bool, str]]]] = [
    ("1", "Bell decomposition table", check_bell_table),
    ("2", "entanglement swapping labels", check_swapping),
    ("3", "keyed transform on GHZ", check_ghz_transform),
    ("4", "recovery restores every initial state", check_recovery),
    ("5", "honest completeness", check_honest_completeness),
    ("6", "legacy plus-state attack", check_legacy_attack),
    ("7", "intercept detection", check_intercept),
    ("8a", "zero leakage, eve_intercept", lambda: check_zero_leakage("eve_intercept")),
    ("8b", "zero leakage, eve_intercept_cnot", lambda: check_zero_leakage("eve_intercept_cnot")),
    ("8c", "zero leakage, eve_intercept_resend", lambda: check_zero_leakage("eve_intercept_resend")),
    ("9", "malicious Trent GHZ detection", check_ghz),
    ("10", "communication decode tables", check_decode_tables),
    ("11", "report determinism", check_determinism),
]


def run_check(cid: str) -> CheckResult:
    for c, title, fn in CHECKS:
        if c == cid:
            return _timed(fn, c, title)
    raise KeyError(cid)


def run_all(only: set[str] | None = None) -> list[CheckResult]:
    return [_timed(fn, c, title) for c, title, fn in CHECKS if only is None or c in only]
