"""Dense statevector simulation for small RY/CZ circuits.

Conventions: amplitude index ``k`` is the integer whose bit ``i`` is the value
of qubit ``i`` (qubit 0 is the least-significant bit). Outcome bitstrings are
printed with qubit 0 rightmost, i.e. ``format(k, f"0{n}b")``.

All kernels accept arrays of shape ``(..., 2**n)`` so a batch of states can be
pushed through a circuit in one pass.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ArgumentError, ShapeError, SizeError, ValidityError

MAX_QUBITS = 24
GATE_KINDS = ("H", "X", "RY", "CZ", "Sdg")
_SQRT1_2 = 1.0 / math.sqrt(2.0)


def _check_num_qubits(num_qubits: int) -> None:
    if not isinstance(num_qubits, (int, np.integer)) or not 1 <= num_qubits <= MAX_QUBITS:
        raise SizeError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits!r}")


# ---------------------------------------------------------------------------
# Gates and circuits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float = 0.0

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValidityError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        arity = 2 if self.kind == "CZ" else 1
        if len(self.qubits) != arity:
            raise ValidityError(f"{self.kind} acts on {arity} qubit(s), got {self.qubits}")
        if arity == 2 and self.qubits[0] == self.qubits[1]:
            raise ValidityError("CZ targets must be distinct")
        if any(q < 0 for q in self.qubits):
            raise ValidityError(f"negative qubit index in {self.qubits}")


@dataclass
class Circuit:
    """Ordered gate list on ``num_qubits`` qubits."""

    num_qubits: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        _check_num_qubits(self.num_qubits)
        for gate in self.gates:
            self._check_gate(gate)

    def _check_gate(self, gate: Gate) -> None:
        if max(gate.qubits) >= self.num_qubits:
            raise ValidityError(f"gate {gate} out of range for {self.num_qubits} qubits")

    def append(self, gate: Gate) -> "Circuit":
        self._check_gate(gate)
        self.gates.append(gate)
        return self

    def h(self, q: int) -> "Circuit":
        return self.append(Gate("H", (q,)))

    def x(self, q: int) -> "Circuit":
        return self.append(Gate("X", (q,)))

    def ry(self, q: int, angle: float) -> "Circuit":
        return self.append(Gate("RY", (q,), float(angle)))

    def cz(self, a: int, b: int) -> "Circuit":
        return self.append(Gate("CZ", (a, b)))

    def sdg(self, q: int) -> "Circuit":
        return self.append(Gate("Sdg", (q,)))

    def compose(self, other: "Circuit") -> "Circuit":
        if other.num_qubits != self.num_qubits:
            raise ShapeError("cannot compose circuits of different widths")
        return Circuit(self.num_qubits, self.gates + other.gates)

    def inverse(self) -> "Circuit":
        return Circuit(self.num_qubits, inverse_gates(self.gates))

    def __len__(self) -> int:
        return len(self.gates)


def inverse_gates(gates: Sequence[Gate]) -> list[Gate]:
    """Gates implementing the inverse of ``gates`` (Sdg^-1 = Sdg^3)."""
    out: list[Gate] = []
    for gate in reversed(gates):
        if gate.kind == "Sdg":
            out.extend([gate] * 3)
        elif gate.kind == "RY":
            out.append(Gate("RY", gate.qubits, -gate.angle))
        else:
            out.append(gate)
    return out


# ---------------------------------------------------------------------------
# Kernels on raw amplitude arrays, shape (..., 2**n)
# ---------------------------------------------------------------------------


def _split(amps: np.ndarray, num_qubits: int, q: int) -> np.ndarray:
    # view with axes (..., high bits, qubit q, low bits)
    return amps.reshape(amps.shape[:-1] + (1 << (num_qubits - q - 1), 2, 1 << q))


@functools.lru_cache(maxsize=256)
def _both_set_indices(num_qubits: int, a: int, b: int) -> np.ndarray:
    mask = (1 << a) | (1 << b)
    k = np.arange(1 << num_qubits)
    return np.flatnonzero((k & mask) == mask)


def apply_h(amps: np.ndarray, num_qubits: int, q: int) -> None:
    v = _split(amps, num_qubits, q)
    a0 = v[..., 0, :].copy()
    a1 = v[..., 1, :]
    v[..., 0, :] = (a0 + a1) * _SQRT1_2
    v[..., 1, :] = (a0 - a1) * _SQRT1_2


def apply_x(amps: np.ndarray, num_qubits: int, q: int) -> None:
    v = _split(amps, num_qubits, q)
    v[...] = v[..., ::-1, :].copy()


def apply_sdg(amps: np.ndarray, num_qubits: int, q: int) -> None:
    v = _split(amps, num_qubits, q)
    v[..., 1, :] *= -1j


def apply_ry(amps: np.ndarray, num_qubits: int, q: int, angle) -> None:
    """RY(angle) = [[c, -s], [s, c]] with c = cos(angle/2), s = sin(angle/2).

    ``angle`` may be a scalar or an array matching the batch shape of ``amps``.
    """
    angle = np.asarray(angle, dtype=float)
    c = np.cos(angle / 2)[..., None, None]
    s = np.sin(angle / 2)[..., None, None]
    v = _split(amps, num_qubits, q)
    a0 = v[..., 0, :].copy()
    a1 = v[..., 1, :].copy()
    v[..., 0, :] = c * a0 - s * a1
    v[..., 1, :] = s * a0 + c * a1


def apply_cz(amps: np.ndarray, num_qubits: int, a: int, b: int) -> None:
    amps[..., _both_set_indices(num_qubits, a, b)] *= -1


def apply_gate(amps: np.ndarray, num_qubits: int, gate: Gate) -> None:
    """Apply ``gate`` in place to an amplitude array."""
    kind = gate.kind
    if kind == "RY":
        apply_ry(amps, num_qubits, gate.qubits[0], gate.angle)
    elif kind == "CZ":
        apply_cz(amps, num_qubits, *gate.qubits)
    elif kind == "H":
        apply_h(amps, num_qubits, gate.qubits[0])
    elif kind == "X":
        apply_x(amps, num_qubits, gate.qubits[0])
    else:
        apply_sdg(amps, num_qubits, gate.qubits[0])


def apply_gates(amps: np.ndarray, num_qubits: int, gates: Iterable[Gate]) -> np.ndarray:
    for gate in gates:
        apply_gate(amps, num_qubits, gate)
    return amps


# ---------------------------------------------------------------------------
# Statevector
# ---------------------------------------------------------------------------


@dataclass
class Statevector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_num_qubits(self.num_qubits)
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (1 << self.num_qubits,):
            raise ShapeError(
                f"expected {1 << self.num_qubits} amplitudes, got shape {self.amplitudes.shape}"
            )

    @property
    def dim(self) -> int:
        return 1 << self.num_qubits

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def copy(self) -> "Statevector":
        return Statevector(self.num_qubits, self.amplitudes.copy())


def new_zero_state(num_qubits: int) -> Statevector:
    _check_num_qubits(num_qubits)
    amps = np.zeros(1 << num_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return Statevector(num_qubits, amps)


def apply_circuit(state: Statevector, circuit: Circuit) -> Statevector:
    """Return a new state with every gate of ``circuit`` applied in order."""
    if circuit.num_qubits != state.num_qubits:
        raise ShapeError(
            f"circuit has {circuit.num_qubits} qubits but state has {state.num_qubits}"
        )
    amps = state.amplitudes.copy()
    apply_gates(amps, state.num_qubits, circuit.gates)
    return Statevector(state.num_qubits, amps)


def exact_probabilities(state: Statevector) -> np.ndarray:
    amps = state.amplitudes
    return amps.real**2 + amps.imag**2


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def bitstring(outcome: int, num_qubits: int) -> str:
    """Qubit 0 rightmost."""
    return format(int(outcome), f"0{num_qubits}b")


def parse_bitstring(label: str, num_qubits: int | None = None) -> int:
    if num_qubits is not None and len(label) != num_qubits:
        raise ValidityError(f"bitstring {label!r} does not have {num_qubits} bits")
    if not label or set(label) - {"0", "1"}:
        raise ValidityError(f"invalid bitstring {label!r}")
    return int(label, 2)


@dataclass
class CountsMap:
    """Outcome histogram stored as parallel integer arrays.

    ``outcomes`` holds distinct outcome integers (qubit 0 = LSB) in increasing
    order and ``counts`` the matching occurrence numbers.
    """

    num_qubits: int
    outcomes: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        outcomes = np.asarray(self.outcomes, dtype=np.int64).ravel()
        counts = np.asarray(self.counts, dtype=np.int64).ravel()
        if outcomes.shape != counts.shape:
            raise ShapeError("outcomes and counts differ in length")
        if np.any(counts < 0):
            raise ValidityError("counts must be nonnegative")
        if outcomes.size and (outcomes.min() < 0 or outcomes.max() >= (1 << self.num_qubits)):
            raise ValidityError(f"outcome out of range for {self.num_qubits} qubits")
        order = np.argsort(outcomes, kind="stable")
        outcomes, counts = outcomes[order], counts[order]
        if outcomes.size > 1 and np.any(np.diff(outcomes) == 0):
            uniq, inv = np.unique(outcomes, return_inverse=True)
            counts = np.bincount(inv, weights=counts, minlength=uniq.size).astype(np.int64)
            outcomes = uniq
        keep = counts > 0
        self.outcomes = outcomes[keep]
        self.counts = counts[keep]

    @classmethod
    def from_samples(cls, num_qubits: int, samples: np.ndarray) -> "CountsMap":
        uniq, counts = np.unique(np.asarray(samples, dtype=np.int64), return_counts=True)
        return cls(num_qubits, uniq, counts)

    @classmethod
    def from_dict(cls, num_qubits: int, mapping: Mapping[str, int]) -> "CountsMap":
        outcomes = [parse_bitstring(k, num_qubits) for k in mapping]
        return cls(num_qubits, np.array(outcomes, dtype=np.int64), np.array(list(mapping.values())))

    def to_dict(self) -> dict[str, int]:
        return {bitstring(o, self.num_qubits): int(c) for o, c in zip(self.outcomes, self.counts)}

    @property
    def shots(self) -> int:
        return int(self.counts.sum())

    def probabilities(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    def samples(self) -> np.ndarray:
        """Expand to one entry per shot (sorted by outcome)."""
        return np.repeat(self.outcomes, self.counts)

    def merge(self, other: "CountsMap") -> "CountsMap":
        if other.num_qubits != self.num_qubits:
            raise ShapeError("cannot merge counts of different widths")
        return CountsMap(
            self.num_qubits,
            np.concatenate([self.outcomes, other.outcomes]),
            np.concatenate([self.counts, other.counts]),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, CountsMap):
            return NotImplemented
        return (
            self.num_qubits == other.num_qubits
            and np.array_equal(self.outcomes, other.outcomes)
            and np.array_equal(self.counts, other.counts)
        )


def sample_outcomes(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling: one uniform draw per shot."""
    if shots < 1:
        raise ArgumentError(f"shots must be >= 1, got {shots}")
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(shots), side="right")
    return np.minimum(idx, len(probs) - 1).astype(np.int64)


def sample_counts(state: Statevector, shots: int, rng: np.random.Generator) -> CountsMap:
    samples = sample_outcomes(exact_probabilities(state), shots, rng)
    return CountsMap.from_samples(state.num_qubits, samples)


def exact_expectation(state: Statevector, observable) -> float:
    """<psi|O|psi> for a Hermitian :class:`~ctmp_vqe.pauli.Observable`."""
    if observable.num_qubits != state.num_qubits:
        raise ShapeError("observable and state differ in qubit count")
    observable.require_hermitian()
    value = observable.expectation(state.amplitudes)
    if abs(value.imag) > 1e-10:
        raise ValidityError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)
