from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from ..channels import ClassicalBroadcast, QuantumChannel, Tap, Transcript
from ..qstate import DEFAULT_MAX_QUBITS, BellLabel, Gate, Party, Registry
from .keys import Convention

BITS = ("00", "01", "10", "11")

# gate order as listed for each scheme: dense (I, X, Z, iY), swap (I, Z, X, iY)
DENSE_MAP = {"00": Gate.I, "01": Gate.X, "10": Gate.Z, "11": Gate.IY}
SWAP_MAP = {"00": Gate.I, "01": Gate.Z, "10": Gate.X, "11": Gate.IY}


class CommScheme(str, Enum):
    DENSE = "dense"
    SWAP = "swap"


class ConfigError(ValueError):
    pass


def check_mapping(mapping: dict[str, Gate], name: str) -> dict[str, Gate]:
    m = {str(k): Gate(v) for k, v in mapping.items()}
    if set(m) != set(BITS):
        raise ConfigError(f"{name} mapping must cover exactly {BITS}")
    if Gate.H in m.values() or len(set(m.values())) != 4:
        raise ConfigError(f"{name} mapping must be a bijection onto I, X, Z, iY")
    return m


@dataclass
class SessionConfig:
    N: int
    v: int
    initial_bell: BellLabel = BellLabel.PHI_PLUS
    comm_scheme: CommScheme = CommScheme.SWAP
    error_threshold: int = 0
    dense_check_fraction: float = 0.25
    forward: Convention = Convention.H_FOR_ZERO
    transform: Convention = Convention.H_FOR_ONE
    dense_map: dict[str, Gate] = field(default_factory=lambda: dict(DENSE_MAP))
    swap_map: dict[str, Gate] = field(default_factory=lambda: dict(SWAP_MAP))
    recovery_table: str = "derived"

    def __post_init__(self) -> None:
        self.initial_bell = BellLabel(self.initial_bell)
        self.comm_scheme = CommScheme(self.comm_scheme)
        self.forward = Convention(self.forward)
        self.transform = Convention(self.transform)
        self.dense_map = check_mapping(self.dense_map, "dense")
        self.swap_map = check_mapping(self.swap_map, "swap")
        if self.N < 0:
            raise ConfigError("N must be non-negative")
        if self.v < 1:
            raise ConfigError("verifying set size v must be >= 1")
        if self.error_threshold < 0:
            raise ConfigError("error_threshold must be non-negative")
        if not 0.0 < self.dense_check_fraction < 1.0:
            raise ConfigError("dense_check_fraction must lie in (0, 1)")
        if self.recovery_table not in ("derived", "published"):
            raise ConfigError("recovery_table must be 'derived' or 'published'")

    @property
    def sequence_length(self) -> int:
        return self.N + 2 * self.v

    def check_key_length(self, length: int) -> None:
        if self.v < length:
            raise ConfigError(f"v={self.v} is shorter than the key length {length}")

    @property
    def dense_checks(self) -> int:
        return math.ceil(self.dense_check_fraction * self.N)

    def capacity(self) -> int:
        """Message bits one session can carry."""
        if self.comm_scheme is CommScheme.DENSE:
            return 2 * (self.N - self.dense_checks)
        return self.N - self.N % 2


class Session:
    """Registry, transcript and public channel shared by one protocol run."""

    def __init__(self, max_qubits: int = DEFAULT_MAX_QUBITS) -> None:
        self.reg = Registry(max_qubits)
        self.transcript = Transcript()
        self.bus = ClassicalBroadcast(self.transcript)

    def channel(self, sender: Party, receiver: Party, tap: Tap | None = None) -> QuantumChannel:
        return QuantumChannel(sender, receiver, self.reg, self.transcript, tap)

    def say(self, sender: Party, **payload) -> None:
        self.bus.broadcast(sender, payload)
