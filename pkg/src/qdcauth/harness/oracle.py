"""
Exact branch enumeration.

A scenario is any function ``scenario(session, rng) -> observable`` that
draws all of its randomness through :func:`qdcauth.qstate.draw` (i.e. only
through measurements). :func:`enumerate_branches` reruns it once per
measurement branch with a scripted ``rng`` that follows a fixed prefix of
outcomes and then takes the first outcome with non-zero probability,
queuing the alternatives. The product of the chosen branch probabilities
is the exact probability of that branch.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Callable, Hashable, Mapping

from ..adversary import make_strategy, eve_view
from ..legacy import PLUS_GHZ, DeliveryMode, LegacyConfig, LegacyVariant, TrentState, legacy_run
from ..protocol.auth import attach_ancilla, run_mutual_auth
from ..protocol.config import Session, SessionConfig
from ..protocol.keys import AuthKey, Convention, keyed_code_sequence, keyed_transform
from ..qstate import DEFAULT_MAX_QUBITS, BellLabel, Party

BRANCH_EPS = 1e-14
SUM_TOL = 1e-12

Scenario = Callable[[Session, Any], Hashable]


class _Replay:
    """Scripted rng: follows ``prefix`` then always takes the first live outcome."""

    def __init__(self, prefix: tuple[int, ...]):
        self.prefix = prefix
        self.taken: list[int] = []
        self.prob = 1.0
        self.pending: list[tuple[tuple[int, ...], float]] = []

    def pick(self, probs) -> int:
        depth = len(self.taken)
        live = [i for i, p in enumerate(probs) if p > BRANCH_EPS]
        if depth < len(self.prefix):
            choice = self.prefix[depth]
        else:
            choice = live[0]
            for alt in live[1:]:
                self.pending.append((tuple(self.taken) + (alt,), 0.0))
        self.taken.append(choice)
        self.prob *= float(probs[choice])
        return choice

    def random(self):  # pragma: no cover - guard
        raise RuntimeError("scenario drew a non-measurement random number; it cannot be enumerated")

    def choice(self, *a, **k):  # pragma: no cover - guard
        raise RuntimeError("scenario drew a non-measurement random number; it cannot be enumerated")

    integers = choice


@dataclass(frozen=True)
class OutcomeDistribution:
    probs: Mapping[Hashable, float]

    def __post_init__(self) -> None:
        total = sum(self.probs.values())
        if abs(total - 1.0) > SUM_TOL:
            raise ValueError(f"probabilities sum to {total}, not 1")

    def __getitem__(self, outcome: Hashable) -> float:
        return self.probs.get(outcome, 0.0)

    def __len__(self) -> int:
        return len(self.probs)

    def items(self):
        return self.probs.items()

    def support(self) -> set:
        return set(self.probs)

    def marginal(self, f: Callable[[Hashable], Hashable]) -> "OutcomeDistribution":
        out: dict[Hashable, float] = defaultdict(float)
        for o, p in self.probs.items():
            out[f(o)] += p
        return OutcomeDistribution(dict(out))

    def close_to(self, other: "OutcomeDistribution", tol: float = SUM_TOL) -> bool:
        keys = self.support() | other.support()
        return all(abs(self[k] - other[k]) <= tol for k in keys)


def enumerate_branches(scenario: Scenario, max_qubits: int = DEFAULT_MAX_QUBITS) -> OutcomeDistribution:
    """Exact outcome distribution of ``scenario`` by depth-first replay."""
    dist: dict[Hashable, float] = defaultdict(float)
    stack: list[tuple[int, ...]] = [()]
    while stack:
        prefix = stack.pop()
        src = _Replay(prefix)
        obs = scenario(Session(max_qubits), src)
        dist[obs] += src.prob
        stack.extend(p for p, _ in reversed(src.pending))
    return OutcomeDistribution(dict(dist))


def _entropy(ps) -> float:
    return -sum(p * math.log2(p) for p in ps if p > 0)


def mutual_information(conditionals: Mapping[Hashable, OutcomeDistribution], prior: Mapping[Hashable, float] | None = None) -> float:
    """I(K; O) in bits from exact conditionals ``P(O | K = k)``; uniform prior by default."""
    if not conditionals:
        raise ValueError("need at least one hypothesis")
    kinds = {type(o) for d in conditionals.values() for o in d.support()}
    if len(kinds) > 1:
        raise ValueError("distributions are over mismatched outcome spaces")
    prior = prior or {k: 1 / len(conditionals) for k in conditionals}
    mix: dict[Hashable, float] = defaultdict(float)
    for k, d in conditionals.items():
        for o, p in d.items():
            mix[o] += prior[k] * p
    h_cond = sum(prior[k] * _entropy(d.probs.values()) for k, d in conditionals.items())
    return max(0.0, _entropy(mix.values()) - h_cond)


# ---- scenarios -----------------------------------------------------------

def swap_scenario(sess: Session, rng) -> str:
    """Trent Bell-measures his halves of two phi+ pairs."""
    t1, a = sess.reg.prepare_bell(BellLabel.PHI_PLUS, Party.TRENT, Party.ALICE)
    t2, b = sess.reg.prepare_bell(BellLabel.PHI_PLUS, Party.TRENT, Party.BOB)
    return sess.reg.measure_bell(t1, t2, rng).value


def deterministic_scenario(sess: Session, rng) -> str:
    t, a = sess.reg.prepare_bell(BellLabel.PHI_PLUS, Party.TRENT, Party.ALICE)
    attach_ancilla(sess.reg, a)
    return "done"


def zz_scenario(label: BellLabel, key_bit: int, trent_transform: bool = True) -> Scenario:
    """Z x Z on a T-E pair when the holder of E skips every keyed step.

    Trent codes E with the forward convention and applies his own keyed
    transform to T, which is what an intercepting Eve leaves behind.
    """

    def run(sess: Session, rng):
        t, e = sess.reg.prepare_bell(label, Party.TRENT, Party.EVE)
        key = AuthKey.from_bits([key_bit])
        keyed_code_sequence(sess.reg, [e], key, Convention.H_FOR_ZERO)
        if trent_transform:
            keyed_transform(sess.reg, [t], key_bit)
        return sess.reg.measure_z(t, rng), sess.reg.measure_z(e, rng)

    return run


def position_scenario(
    attack: str | None,
    key_bit: int,
    *,
    initial: BellLabel = BellLabel.PHI_PLUS,
    observe: str = "eve_view",
    verdicts: bool = False,
    **attack_kw,
) -> Scenario:
    """One-position authentication run (N=0, v=1, V={0}, V'={1}).

    ``observe`` selects the observable: ``eve_view``, ``eve_measurements``
    (only Eve's own measurement records), ``trent_v`` (Trent's announced V
    results), ``outcomes`` (forward/reverse mismatch counts) or ``detected``.
    """

    def run(sess: Session, rng):
        cfg = SessionConfig(N=0, v=1, initial_bell=initial)
        strat = make_strategy(attack, **attack_kw)
        tap = strat if getattr(strat, "kind", None) == "tap" else None
        ghz = getattr(strat, "kind", None) == "trent"
        res = run_mutual_auth(
            sess, cfg, Party.ALICE, AuthKey.from_bits([key_bit]), rng,
            tap=tap, trent_ghz=ghz, forward_positions=[0], reverse_positions=[1],
        )
        if observe == "eve_view":
            return eve_view(sess.transcript, verdicts=verdicts)
        if observe == "eve_measurements":
            return tuple(o for o in eve_view(sess.transcript) if o[0] == "m")
        if observe == "trent_v":
            for ev in sess.transcript:
                if ev.kind == "broadcast" and ev.actor == "Trent" and ev.data.get("step") == 6:
                    return tuple(ev.data["results"])
            raise RuntimeError("Trent never announced")
        if observe == "outcomes":
            f = res.forward.mismatches if res.forward else None
            r = res.reverse.mismatches if res.reverse else None
            return f, r
        if observe == "detected":
            return res.detected
        raise ValueError(f"unknown observable {observe!r}")

    return run


def legacy_attack_scenario(bit: int, mode: DeliveryMode = DeliveryMode.PROTOCOL1) -> Scenario:
    """Trent's (z_A, x_T) outcome pair when Alice sends ``bit`` under the plus-state attack."""

    def run(sess: Session, rng):
        cfg = LegacyConfig(LegacyVariant.ZHANG, mode, TrentState.PLUS_GHZ, 0.0, 0.0)
        legacy_run(cfg, [bit], rng, trent_attack=True, session=sess)
        for ev in sess.transcript:
            if ev.kind == "measure" and ev.actor == "Trent" and ev.data.get("basis") == "ZX":
                return tuple(ev.data["outcome"])
        raise RuntimeError("Trent did not measure")

    return run


def legacy_check_scenario(sess: Session, rng) -> int:
    """Whether A and B disagree in Z on one plus-state triple (keyed hiding cancels out)."""
    a, t, b = sess.reg.prepare(PLUS_GHZ, [Party.TRENT] * 3)
    return int(sess.reg.measure_z(a, rng) != sess.reg.measure_z(b, rng))


SCENARIOS: dict[str, Scenario] = {
    "swap": swap_scenario,
    "deterministic": deterministic_scenario,
    "intercept_zz_k0": zz_scenario(BellLabel.PHI_PLUS, 0),
    "intercept_zz_k1": zz_scenario(BellLabel.PHI_PLUS, 1),
    "intercept_trent_v_k0": position_scenario("eve_intercept", 0, observe="trent_v"),
    "intercept_trent_v_k1": position_scenario("eve_intercept", 1, observe="trent_v"),
    "intercept_outcomes_k0": position_scenario("eve_intercept", 0, observe="outcomes"),
    "intercept_outcomes_k1": position_scenario("eve_intercept", 1, observe="outcomes"),
    "ghz_outcomes_k0": position_scenario("malicious_trent_ghz", 0, observe="outcomes"),
    "ghz_outcomes_k1": position_scenario("malicious_trent_ghz", 1, observe="outcomes"),
    "legacy_attack_b0": legacy_attack_scenario(0),
    "legacy_attack_b1": legacy_attack_scenario(1),
    "legacy_plus_check": legacy_check_scenario,
}
