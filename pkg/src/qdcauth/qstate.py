"""
Exact state-vector simulation for small registers of qubits.

Qubits live in a :class:`Registry`, which keeps one joint state per
entanglement group instead of one global vector. Groups merge when a
two-qubit operation spans them and split again whenever a qubit becomes
a pure product factor (after measurements and CNOTs). A protocol session
touches hundreds of Bell pairs, but every group stays at a handful of
qubits.

Every stochastic operation draws from an explicitly passed source. That
source is either a ``numpy.random.Generator`` or any object with a
``pick(probs) -> int`` method; the latter is how the branch enumerator in
:mod:`qdcauth.harness.oracle` walks every measurement outcome exactly.

Basis ordering is big-endian: in a joint state over ``(q0, q1, ...)`` the
first qubit is the most significant bit of the amplitude index.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

NORM_TOL = 1e-10
AMP_TOL = 1e-12
DEFAULT_MAX_QUBITS = 24

_S = 1 / np.sqrt(2)


class Party(str, Enum):
    TRENT = "Trent"
    ALICE = "Alice"
    BOB = "Bob"
    EVE = "Eve"
    UNASSIGNED = "Unassigned"


class Gate(str, Enum):
    """Single-qubit gates used by the protocols."""

    I = "I"  # noqa: E741
    H = "H"
    X = "X"
    Z = "Z"
    IY = "iY"

    @property
    def matrix(self) -> np.ndarray:
        return _GATE_MATRICES[self]

    @property
    def frame(self) -> tuple[int, int]:
        """Pauli frame ``(x, z)``; only defined for the Pauli-type gates."""
        if self is Gate.H:
            raise ValueError("H has no Pauli frame")
        return _GATE_FRAMES[self]

    @classmethod
    def from_frame(cls, frame: tuple[int, int]) -> "Gate":
        return _FRAME_GATES[tuple(frame)]


_GATE_MATRICES = {
    Gate.I: np.eye(2, dtype=complex),
    Gate.H: np.array([[1, 1], [1, -1]], dtype=complex) * _S,
    Gate.X: np.array([[0, 1], [1, 0]], dtype=complex),
    Gate.Z: np.array([[1, 0], [0, -1]], dtype=complex),
    # i*Y, i.e. Z @ X
    Gate.IY: np.array([[0, 1], [-1, 0]], dtype=complex),
}
for _m in _GATE_MATRICES.values():
    _m.setflags(write=False)

_GATE_FRAMES = {Gate.I: (0, 0), Gate.Z: (0, 1), Gate.X: (1, 0), Gate.IY: (1, 1)}
_FRAME_GATES = {f: g for g, f in _GATE_FRAMES.items()}


class BellLabel(str, Enum):
    """The four Bell states, in the order phi+, phi-, psi+, psi-."""

    PHI_PLUS = "PhiPlus"
    PHI_MINUS = "PhiMinus"
    PSI_PLUS = "PsiPlus"
    PSI_MINUS = "PsiMinus"

    @property
    def index(self) -> int:
        return _BELL_ORDER.index(self)

    @property
    def vector(self) -> np.ndarray:
        return BELL_VECTORS[self.index]

    @property
    def frame(self) -> tuple[int, int]:
        """``(x, z)`` such that this state is ``(P_xz ⊗ I)|phi+>`` up to phase."""
        i = self.index
        return (i >> 1, i & 1)

    @classmethod
    def from_frame(cls, frame: tuple[int, int]) -> "BellLabel":
        x, z = frame
        return _BELL_ORDER[2 * x + z]

    def compose(self, other: "BellLabel | Gate") -> "BellLabel":
        """XOR of Pauli frames.

        Applying Pauli ``g`` to either qubit of a pair in state ``self`` gives
        ``self.compose(g)`` up to global phase; the same algebra predicts the
        outcome of entanglement swapping.
        """
        ox, oz = other.frame
        x, z = self.frame
        return BellLabel.from_frame((x ^ ox, z ^ oz))


_BELL_ORDER = list(BellLabel)

BELL_VECTORS = np.array(
    [
        [1, 0, 0, 1],
        [1, 0, 0, -1],
        [0, 1, 1, 0],
        [0, 1, -1, 0],
    ],
    dtype=complex,
) * _S
BELL_VECTORS.setflags(write=False)

# rows are computational |00>,|01>,|10>,|11>; columns phi+, phi-, psi+, psi-
BELL_TABLE = BELL_VECTORS.T.copy()
BELL_TABLE.setflags(write=False)


class CapacityError(RuntimeError):
    """A joint state would exceed the registry's qubit cap."""


class DeadQubitError(KeyError):
    pass


class Qubit:
    """Handle to one simulated qubit. Identity is the registry-unique ``id``."""

    __slots__ = ("id", "owner")

    def __init__(self, id: int, owner: Party = Party.UNASSIGNED):
        self.id = id
        self.owner = Party(owner)

    def __repr__(self) -> str:
        return f"Qubit({self.id}, {self.owner.value})"


@dataclass
class StateVector:
    """Snapshot of a joint state; ``amps[k]`` is the amplitude of basis index ``k``."""

    qubits: tuple[int, ...]
    amps: np.ndarray

    @property
    def n(self) -> int:
        return len(self.qubits)

    def amplitude(self, bits: str) -> complex:
        return complex(self.amps[int(bits, 2)])

    def as_dict(self, tol: float = AMP_TOL) -> dict[str, complex]:
        """Non-zero amplitudes keyed by basis string."""
        return {
            format(k, f"0{self.n}b"): complex(a)
            for k, a in enumerate(self.amps)
            if abs(a) > tol
        }

    def norm(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)


def draw(rng, probs: Sequence[float]) -> int:
    """Sample an outcome index from ``probs`` using ``rng``."""
    pick = getattr(rng, "pick", None)
    if pick is not None:
        return int(pick(list(probs)))
    u = rng.random()
    acc = 0.0
    last = 0
    for i, p in enumerate(probs):
        if p <= 0.0:
            continue
        last = i
        acc += p
        if u < acc:
            return i
    return last


class _Group:
    __slots__ = ("qubits", "psi")

    def __init__(self, qubits: list[Qubit], psi: np.ndarray):
        self.qubits = qubits
        self.psi = psi

    def axis(self, q: Qubit) -> int:
        for i, other in enumerate(self.qubits):
            if other is q:
                return i
        raise DeadQubitError(q.id)


class Registry:
    """Live qubits partitioned into entanglement groups.

    Not thread-safe; give each simulation its own instance.
    """

    def __init__(self, max_qubits: int = DEFAULT_MAX_QUBITS):
        self.max_qubits = max_qubits
        self._next_id = 0
        self._groups: dict[int, _Group] = {}
        self._handles: dict[int, Qubit] = {}

    # -- bookkeeping --------------------------------------------------

    def __len__(self) -> int:
        return len(self._handles)

    def is_live(self, q: Qubit) -> bool:
        return self._handles.get(q.id) is q

    def _lookup(self, q: Qubit) -> _Group:
        if not self.is_live(q):
            raise DeadQubitError(f"qubit {getattr(q, 'id', q)!r} is not live in this registry")
        return self._groups[q.id]

    def _new_handle(self, owner: Party) -> Qubit:
        q = Qubit(self._next_id, owner)
        self._next_id += 1
        self._handles[q.id] = q
        return q

    def _install(self, qubits: list[Qubit], psi: np.ndarray) -> _Group:
        grp = _Group(qubits, psi)
        for q in qubits:
            self._groups[q.id] = grp
        return grp

    def group_of(self, q: Qubit) -> tuple[Qubit, ...]:
        return tuple(self._lookup(q).qubits)

    def groups(self) -> list[tuple[Qubit, ...]]:
        seen: dict[int, _Group] = {}
        for grp in self._groups.values():
            seen.setdefault(id(grp), grp)
        return [tuple(g.qubits) for g in seen.values()]

    def set_owner(self, q: Qubit, owner: Party) -> None:
        self._lookup(q)
        q.owner = Party(owner)

    def discard(self, q: Qubit) -> None:
        """Drop a qubit that is in a product state with everything else."""
        grp = self._lookup(q)
        if len(grp.qubits) != 1:
            raise ValueError(f"qubit {q.id} is still entangled; measure it first")
        del self._groups[q.id]
        del self._handles[q.id]

    def norm_error(self) -> float:
        """Largest normalization drift over all groups."""
        worst = 0.0
        for qs in self.groups():
            psi = self._groups[qs[0].id].psi
            worst = max(worst, abs(float(np.vdot(psi, psi).real) - 1.0))
        return worst

    # -- preparation --------------------------------------------------

    def new_qubit(self, owner: Party = Party.UNASSIGNED) -> Qubit:
        q = self._new_handle(owner)
        self._install([q], np.array([1.0, 0.0], dtype=complex))
        return q

    def prepare(self, amps: Sequence[complex] | np.ndarray, owners: Sequence[Party]) -> tuple[Qubit, ...]:
        """Create ``len(owners)`` fresh qubits in the joint state ``amps``."""
        n = len(owners)
        if n > self.max_qubits:
            raise CapacityError(f"{n} qubits exceeds cap {self.max_qubits}")
        psi = np.asarray(amps, dtype=complex).reshape(-1)
        if psi.size != 2**n:
            raise ValueError(f"need {2**n} amplitudes for {n} qubits, got {psi.size}")
        norm = np.sqrt(np.vdot(psi, psi).real)
        if not np.isfinite(norm) or abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm {norm})")
        qubits = [self._new_handle(o) for o in owners]
        grp = self._install(qubits, psi.reshape((2,) * n).copy())
        self._factor(grp)
        return tuple(qubits)

    def prepare_bell(self, kind: BellLabel, owner_a: Party, owner_b: Party) -> tuple[Qubit, Qubit]:
        a, b = self.prepare(BellLabel(kind).vector, [owner_a, owner_b])
        return a, b

    # -- gates ----------------------------------------------------------

    def apply_gate(self, g: Gate | np.ndarray, q: Qubit) -> None:
        m = Gate(g).matrix if isinstance(g, (Gate, str)) else np.asarray(g, dtype=complex)
        grp = self._lookup(q)
        if len(grp.qubits) == 1:
            grp.psi = m @ grp.psi
            return
        ax = grp.axis(q)
        grp.psi = np.moveaxis(np.tensordot(m, grp.psi, axes=([1], [ax])), 0, ax)

    def _merge(self, a: _Group, b: _Group) -> _Group:
        if a is b:
            return a
        n = len(a.qubits) + len(b.qubits)
        if n > self.max_qubits:
            raise CapacityError(f"joint state of {n} qubits exceeds cap {self.max_qubits}")
        return self._install(a.qubits + b.qubits, np.multiply.outer(a.psi, b.psi))

    def apply_cnot(self, control: Qubit, target: Qubit) -> None:
        if control is target:
            raise ValueError("CNOT control and target must differ")
        grp = self._merge(self._lookup(control), self._lookup(target))
        n = len(grp.qubits)
        ic, it = grp.axis(control), grp.axis(target)
        lo = [slice(None)] * n
        hi = [slice(None)] * n
        lo[ic] = hi[ic] = 1
        lo[it], hi[it] = 0, 1
        lo, hi = tuple(lo), tuple(hi)
        psi = grp.psi.copy()
        psi[lo], psi[hi] = grp.psi[hi], grp.psi[lo]
        grp.psi = psi
        self._factor(grp)

    # -- measurement ------------------------------------------------------

    def measure_z(self, q: Qubit, rng) -> int:
        """Computational-basis measurement with collapse. ``q`` ends up in its own group."""
        grp = self._lookup(q)
        ax = grp.axis(q)
        m = np.moveaxis(grp.psi, ax, 0).reshape(2, -1)
        weights = np.einsum("ij,ij->i", m.conj(), m).real
        probs = weights / weights.sum()
        k = draw(rng, probs)
        rest = m[k] / np.sqrt(weights[k])
        self._split_off([q], np.eye(2, dtype=complex)[k], grp, rest)
        return k

    def measure_x(self, q: Qubit, rng) -> int:
        """{+,-} measurement; 0 means ``|+>``. The qubit is left in the eigenstate."""
        self.apply_gate(Gate.H, q)
        k = self.measure_z(q, rng)
        self.apply_gate(Gate.H, q)
        return k

    def measure_bell(self, q1: Qubit, q2: Qubit, rng) -> BellLabel:
        """Project ``(q1, q2)`` onto the Bell basis; the pair is left in the measured state."""
        if q1 is q2:
            raise ValueError("Bell measurement needs two distinct qubits")
        grp = self._merge(self._lookup(q1), self._lookup(q2))
        a1, a2 = grp.axis(q1), grp.axis(q2)
        m = np.moveaxis(grp.psi, (a1, a2), (0, 1)).reshape(4, -1)
        coeffs = BELL_VECTORS.conj() @ m
        weights = np.einsum("ij,ij->i", coeffs.conj(), coeffs).real
        probs = weights / weights.sum()
        k = draw(rng, probs)
        rest = coeffs[k] / np.sqrt(weights[k])
        self._split_off([q1, q2], BELL_VECTORS[k], grp, rest)
        return _BELL_ORDER[k]

    def _split_off(self, head: list[Qubit], head_state: np.ndarray, grp: _Group, rest: np.ndarray) -> None:
        others = [q for q in grp.qubits if all(q is not h for h in head)]
        self._install(head, head_state.reshape((2,) * len(head)).copy())
        if others:
            rest_grp = self._install(others, rest.reshape((2,) * len(others)))
            self._factor(rest_grp)

    # -- factoring --------------------------------------------------------

    def _factor(self, grp: _Group) -> None:
        """Split every qubit whose Schmidt rank against the rest is 1."""
        while len(grp.qubits) > 1:
            if len(grp.qubits) == 2:
                # for two qubits the Gram determinant is |det psi|^2
                p = grp.psi
                if abs(p[0, 0] * p[1, 1] - p[0, 1] * p[1, 0]) ** 2 > NORM_TOL**2:
                    return
            for ax, q in enumerate(grp.qubits):
                m = np.moveaxis(grp.psi, ax, 0).reshape(2, -1)
                r0 = np.vdot(m[0], m[0]).real
                r1 = np.vdot(m[1], m[1]).real
                cross = np.vdot(m[0], m[1])
                # Gram determinant = s0^2 * s1^2
                if r0 * r1 - abs(cross) ** 2 > NORM_TOL**2:
                    continue
                w = m[0] if r0 >= r1 else m[1]
                w = w / np.sqrt(np.vdot(w, w).real)
                u = m @ w.conj()
                u = u / np.sqrt(np.vdot(u, u).real)
                others = grp.qubits[:ax] + grp.qubits[ax + 1 :]
                self._install([q], u)
                grp = self._install(others, w.reshape((2,) * len(others)))
                break
            else:
                return

    # -- inspection -------------------------------------------------------

    def state_of(self, qubits: Iterable[Qubit]) -> StateVector:
        """Joint state of ``qubits`` in the given order.

        The selection must be a union of whole groups, i.e. not entangled with
        anything outside it.
        """
        qubits = list(qubits)
        wanted = {q.id for q in qubits}
        if len(wanted) != len(qubits):
            raise ValueError("duplicate qubits in selection")
        order: list[Qubit] = []
        psi = np.ones((), dtype=complex)
        seen: set[int] = set()
        for q in qubits:
            grp = self._lookup(q)
            if id(grp) in seen:
                continue
            seen.add(id(grp))
            outside = [o.id for o in grp.qubits if o.id not in wanted]
            if outside:
                raise ValueError(f"selection is entangled with qubits {outside}")
            order.extend(grp.qubits)
            psi = np.multiply.outer(psi, grp.psi)
        perm = [next(i for i, o in enumerate(order) if o is q) for q in qubits]
        psi = np.transpose(psi, perm) if qubits else psi
        return StateVector(tuple(q.id for q in qubits), np.ascontiguousarray(psi).reshape(-1).copy())


def bell_decompose(state: StateVector | np.ndarray) -> np.ndarray:
    """Coefficients of a two-qubit state over (phi+, phi-, psi+, psi-)."""
    amps = state.amps if isinstance(state, StateVector) else np.asarray(state, dtype=complex)
    amps = amps.reshape(-1)
    if amps.size != 4:
        raise ValueError(f"bell_decompose needs exactly 2 qubits, got {amps.size} amplitudes")
    return BELL_VECTORS.conj() @ amps


def states_equal_up_to_phase(a: StateVector, b: StateVector, tol: float = NORM_TOL) -> bool:
    """True iff ``a == exp(i theta) * b`` componentwise within ``tol``."""
    if set(a.qubits) != set(b.qubits) or len(a.qubits) != len(b.qubits):
        raise ValueError("states are over different qubit sets")
    bv = b.amps
    if a.qubits != b.qubits:
        n = b.n
        perm = [b.qubits.index(qid) for qid in a.qubits]
        bv = np.transpose(bv.reshape((2,) * n), perm).reshape(-1)
    overlap = np.vdot(bv, a.amps)
    if abs(overlap) < tol:
        return bool(np.allclose(a.amps, 0, atol=tol) and np.allclose(bv, 0, atol=tol))
    phase = overlap / abs(overlap)
    return bool(np.max(np.abs(a.amps - phase * bv)) <= tol)


def basis_strings(n: int) -> list[str]:
    return ["".join(bits) for bits in itertools.product("01", repeat=n)]
