"""Qubit-wise commuting measurement groups and count-based estimators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, ValidityError
from .pauli import Observable, masks_to_label
from .statevector import Circuit, CountsMap

DiagonalTerms = list[tuple[int, float]]


@dataclass
class MeasurementGroup:
    """Terms sharing one single-qubit measurement basis.

    ``basis`` maps qubit -> "X" | "Y" | "Z" for every qubit the group touches.
    After ``basis_change`` is applied each original term ``(x, z)`` becomes the
    diagonal string on its support, stored in ``diagonal_terms`` as ``(z_mask, weight)``.
    """

    num_qubits: int
    basis: dict[int, str] = field(default_factory=dict)
    terms: list[tuple[int, int, float]] = field(default_factory=list)

    @property
    def diagonal_terms(self) -> DiagonalTerms:
        return [(x | z, w) for x, z, w in self.terms]

    @property
    def basis_change(self) -> Circuit:
        circ = Circuit(self.num_qubits)
        for q in sorted(self.basis):
            if self.basis[q] == "X":
                circ.h(q)
            elif self.basis[q] == "Y":
                circ.sdg(q)
                circ.h(q)
        return circ

    def accepts(self, x: int, z: int) -> bool:
        for q, letter in _letters(x, z):
            current = self.basis.get(q)
            if current is not None and current != letter:
                return False
        return True

    def add(self, x: int, z: int, weight: float) -> None:
        for q, letter in _letters(x, z):
            self.basis[q] = letter
        self.terms.append((x, z, weight))

    def labels(self) -> list[str]:
        return [masks_to_label(self.num_qubits, x, z) for x, z, _ in self.terms]


def _letters(x: int, z: int):
    support = x | z
    q = 0
    while support:
        if support & 1:
            bx, bz = (x >> q) & 1, (z >> q) & 1
            yield q, "Y" if bx and bz else ("X" if bx else "Z")
        support >>= 1
        q += 1


def group_observable(observable: Observable) -> tuple[float, list[MeasurementGroup]]:
    """Greedy first-fit qubit-wise commuting grouping.

    Returns ``(identity_offset, groups)``; the identity term is never measured.
    """
    observable.require_hermitian()
    offset = float(observable.identity_coefficient.real)
    groups: list[MeasurementGroup] = []
    for (x, z), coeff in observable.items():
        if x == 0 and z == 0:
            continue
        for group in groups:
            if group.accepts(x, z):
                group.add(x, z, float(coeff.real))
                break
        else:
            group = MeasurementGroup(observable.num_qubits)
            group.add(x, z, float(coeff.real))
            groups.append(group)
    return offset, groups


def parity_sign(values: np.ndarray) -> np.ndarray:
    """(-1)**popcount(v) as float64."""
    return 1.0 - 2.0 * (np.bitwise_count(values) & 1).astype(np.float64)


def diagonal_values(outcomes: np.ndarray, diagonal_terms: DiagonalTerms) -> np.ndarray:
    """O(x) = sum_t w_t (-1)^{popcount(x & z_t)} evaluated on an outcome array."""
    outcomes = np.asarray(outcomes, dtype=np.int64)
    total = np.zeros(outcomes.shape, dtype=np.float64)
    for z_mask, weight in diagonal_terms:
        if z_mask == 0:
            total += weight
        else:
            total += weight * parity_sign(outcomes & z_mask)
    return total


def expectation_from_counts(counts: CountsMap, diagonal_terms: DiagonalTerms) -> float:
    total = counts.shots
    if total <= 0:
        raise ValidityError("empty counts")
    values = diagonal_values(counts.outcomes, diagonal_terms)
    return float(np.dot(values, counts.counts) / total)


def counts_standard_error(counts: CountsMap, diagonal_terms: DiagonalTerms) -> float:
    """Standard error of the shot-average of O(x)."""
    total = counts.shots
    if total <= 1:
        return 0.0
    values = diagonal_values(counts.outcomes, diagonal_terms)
    mean = np.dot(values, counts.counts) / total
    var = np.dot((values - mean) ** 2, counts.counts) / (total - 1)
    return float(np.sqrt(var / total))


def check_terms_width(num_qubits: int, diagonal_terms: DiagonalTerms) -> None:
    limit = 1 << num_qubits
    for z_mask, _ in diagonal_terms:
        if not 0 <= z_mask < limit:
            raise ShapeError(f"z mask {z_mask:#x} exceeds {num_qubits} qubits")
