"""Symplectic Pauli strings and weighted sums of them.

A Pauli string on ``n`` qubits is stored as two integer bit masks
``(x_mask, z_mask)``; bit ``q`` of each mask describes qubit ``q``:

    (0, 0) -> I,  (1, 0) -> X,  (1, 1) -> Y,  (0, 1) -> Z.

The operator is ``P(x, z) = i**popcount(x & z) * X**x Z**z`` so that ``Y = iXZ``
and a term with real coefficient is the usual tensor product of Paulis.
Labels are written with qubit 0 rightmost, e.g. ``"XIZ"`` is ``Z_0 X_2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ShapeError, SizeError, ValidityError

COEFF_TOL = 1e-12
HERMITIAN_TOL = 1e-10
_PHASES = (1.0, 1j, -1.0, -1j)


def popcount(value: int) -> int:
    return int(value).bit_count()


def _check_masks(num_qubits: int, x_mask: int, z_mask: int) -> None:
    limit = 1 << num_qubits
    if not (0 <= x_mask < limit and 0 <= z_mask < limit):
        raise ValidityError(f"masks ({x_mask:#x}, {z_mask:#x}) exceed {num_qubits} qubits")


def label_to_masks(label: str) -> tuple[int, int]:
    x_mask = z_mask = 0
    n = len(label)
    for pos, char in enumerate(label.upper()):
        q = n - 1 - pos
        if char == "X":
            x_mask |= 1 << q
        elif char == "Y":
            x_mask |= 1 << q
            z_mask |= 1 << q
        elif char == "Z":
            z_mask |= 1 << q
        elif char != "I":
            raise ValidityError(f"invalid Pauli label {label!r}")
    return x_mask, z_mask


def masks_to_label(num_qubits: int, x_mask: int, z_mask: int) -> str:
    chars = []
    for q in reversed(range(num_qubits)):
        x, z = (x_mask >> q) & 1, (z_mask >> q) & 1
        chars.append("IZXY"[x * 2 + z])
    return "".join(chars)


@dataclass(frozen=True)
class PauliTerm:
    num_qubits: int
    x_mask: int
    z_mask: int
    coefficient: complex = 1.0

    def __post_init__(self):
        _check_masks(self.num_qubits, self.x_mask, self.z_mask)
        object.__setattr__(self, "coefficient", complex(self.coefficient))

    @classmethod
    def from_label(cls, label: str, coefficient: complex = 1.0) -> "PauliTerm":
        x_mask, z_mask = label_to_masks(label)
        return cls(len(label), x_mask, z_mask, coefficient)

    @property
    def label(self) -> str:
        return masks_to_label(self.num_qubits, self.x_mask, self.z_mask)

    @property
    def key(self) -> tuple[int, int]:
        return self.x_mask, self.z_mask

    @property
    def support(self) -> int:
        return self.x_mask | self.z_mask

    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    def __mul__(self, other):
        if isinstance(other, PauliTerm):
            return pauli_multiply(self, other)
        return PauliTerm(self.num_qubits, self.x_mask, self.z_mask, self.coefficient * other)

    __rmul__ = __mul__


def pauli_multiply(a: PauliTerm, b: PauliTerm) -> PauliTerm:
    """Product ``a @ b`` of two weighted Pauli strings."""
    if a.num_qubits != b.num_qubits:
        raise ShapeError(f"width mismatch: {a.num_qubits} vs {b.num_qubits}")
    x, z = a.x_mask ^ b.x_mask, a.z_mask ^ b.z_mask
    # X^x1 Z^z1 X^x2 Z^z2 = (-1)^{|z1 & x2|} X^x Z^z, then re-absorb the i^{|x & z|} factors
    power = (
        popcount(a.x_mask & a.z_mask)
        + popcount(b.x_mask & b.z_mask)
        + 2 * popcount(a.z_mask & b.x_mask)
        - popcount(x & z)
    ) % 4
    return PauliTerm(a.num_qubits, x, z, a.coefficient * b.coefficient * _PHASES[power])


class Observable:
    """Immutable weighted sum of Pauli strings, keyed by ``(x_mask, z_mask)``."""

    __slots__ = ("num_qubits", "_terms", "_compiled")

    def __init__(self, num_qubits: int, terms: Mapping[tuple[int, int], complex] | Iterable[PauliTerm] = ()):
        if num_qubits < 1:
            raise SizeError("an observable needs at least one qubit")
        self.num_qubits = int(num_qubits)
        acc: dict[tuple[int, int], complex] = {}
        items = terms.items() if isinstance(terms, Mapping) else ((t.key, t.coefficient) for t in terms)
        for (x_mask, z_mask), coeff in items:
            _check_masks(self.num_qubits, x_mask, z_mask)
            key = (int(x_mask), int(z_mask))
            acc[key] = acc.get(key, 0j) + complex(coeff)
        self._terms = {k: c for k, c in acc.items() if abs(c) >= COEFF_TOL}
        self._compiled = None

    # -- construction -----------------------------------------------------

    @classmethod
    def from_list(cls, pairs: Iterable[tuple[str, complex]]) -> "Observable":
        pairs = list(pairs)
        if not pairs:
            raise ValidityError("from_list needs at least one term to infer the width")
        n = len(pairs[0][0])
        terms = []
        for label, coeff in pairs:
            if len(label) != n:
                raise ShapeError("labels of different widths")
            terms.append(PauliTerm.from_label(label, coeff))
        return cls(n, terms)

    @classmethod
    def identity(cls, num_qubits: int, coefficient: complex = 1.0) -> "Observable":
        return cls(num_qubits, {(0, 0): coefficient})

    @classmethod
    def zero(cls, num_qubits: int) -> "Observable":
        return cls(num_qubits)

    # -- container protocol ----------------------------------------------

    @property
    def terms(self) -> list[PauliTerm]:
        return [PauliTerm(self.num_qubits, x, z, c) for (x, z), c in self._terms.items()]

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def coefficient(self, key: tuple[int, int] | str) -> complex:
        if isinstance(key, str):
            key = label_to_masks(key)
        return self._terms.get(tuple(key), 0j)

    @property
    def identity_coefficient(self) -> complex:
        return self._terms.get((0, 0), 0j)

    def __repr__(self) -> str:
        body = " + ".join(f"({c:.6g})*{masks_to_label(self.num_qubits, x, z)}" for (x, z), c in self._terms.items())
        return f"Observable({self.num_qubits}, {body or '0'})"

    # -- algebra -----------------------------------------------------------

    def _same_width(self, other: "Observable") -> None:
        if other.num_qubits != self.num_qubits:
            raise ShapeError(f"width mismatch: {self.num_qubits} vs {other.num_qubits}")

    def __add__(self, other):
        if isinstance(other, Observable):
            self._same_width(other)
            acc = dict(self._terms)
            for k, c in other._terms.items():
                acc[k] = acc.get(k, 0j) + c
            return Observable(self.num_qubits, acc)
        return self + Observable.identity(self.num_qubits, other)

    __radd__ = __add__

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Observable):
            self._same_width(other)
            acc: dict[tuple[int, int], complex] = {}
            for (xa, za), ca in self._terms.items():
                left = PauliTerm(self.num_qubits, xa, za, ca)
                for (xb, zb), cb in other._terms.items():
                    prod = pauli_multiply(left, PauliTerm(self.num_qubits, xb, zb, cb))
                    acc[prod.key] = acc.get(prod.key, 0j) + prod.coefficient
            return Observable(self.num_qubits, acc)
        if isinstance(other, PauliTerm):
            return self * Observable(self.num_qubits, [other])
        return Observable(self.num_qubits, {k: c * other for k, c in self._terms.items()})

    def __rmul__(self, other):
        if isinstance(other, PauliTerm):
            return Observable(self.num_qubits, [other]) * self
        return self * other

    def adjoint(self) -> "Observable":
        # every Pauli string is Hermitian
        return Observable(self.num_qubits, {k: c.conjugate() for k, c in self._terms.items()})

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return all(abs(c.imag) <= tol for c in self._terms.values())

    def require_hermitian(self, tol: float = HERMITIAN_TOL) -> None:
        if not self.is_hermitian(tol):
            worst = max(abs(c.imag) for c in self._terms.values())
            raise ValidityError(f"observable is not Hermitian (max |Im coeff| = {worst:.3e})")

    def real(self) -> "Observable":
        """Drop imaginary parts (call only after checking Hermiticity)."""
        return Observable(self.num_qubits, {k: c.real for k, c in self._terms.items()})

    def equals(self, other: "Observable", tol: float = 1e-12) -> bool:
        if other.num_qubits != self.num_qubits:
            return False
        keys = set(self._terms) | set(other._terms)
        return all(abs(self._terms.get(k, 0j) - other._terms.get(k, 0j)) <= tol for k in keys)

    # -- action on amplitudes ----------------------------------------------

    def _weights(self) -> list[tuple[int, np.ndarray]]:
        """Per distinct x mask, the diagonal weight vector w_x with O = sum_x X^x diag(w_x)."""
        if self._compiled is not None:
            return self._compiled
        dim = 1 << self.num_qubits
        k = np.arange(dim, dtype=np.int64)
        grouped: dict[int, np.ndarray] = {}
        for (x, z), c in self._terms.items():
            phase = c * _PHASES[popcount(x & z) % 4]
            sign = 1 - 2 * (np.bitwise_count(k & z) & 1).astype(np.float64)
            w = grouped.get(x)
            grouped[x] = phase * sign if w is None else w + phase * sign
        compiled = list(grouped.items())
        if self.num_qubits <= 16:
            self._compiled = compiled
        return compiled

    def apply(self, amps: np.ndarray) -> np.ndarray:
        """``O @ psi`` for amplitude arrays of shape ``(..., 2**n)``."""
        amps = np.asarray(amps)
        if amps.shape[-1] != 1 << self.num_qubits:
            raise ShapeError("amplitude length does not match observable width")
        k = np.arange(amps.shape[-1], dtype=np.int64)
        out = np.zeros(amps.shape, dtype=np.complex128)
        for x, w in self._weights():
            phi = w * amps
            out += phi if x == 0 else phi[..., k ^ x]
        return out

    def expectation(self, amps: np.ndarray) -> complex | np.ndarray:
        """``<psi|O|psi>`` (complex); batched over leading axes."""
        amps = np.asarray(amps)
        out = np.einsum("...k,...k->...", amps.conj(), self.apply(amps))
        return out if out.ndim else complex(out)

    def diagonal_values(self, outcomes: np.ndarray) -> np.ndarray:
        """Value of a diagonal (Z-only) observable on computational basis outcomes."""
        outcomes = np.asarray(outcomes, dtype=np.int64)
        total = np.zeros(outcomes.shape, dtype=np.complex128)
        for (x, z), c in self._terms.items():
            if x:
                raise ValidityError("diagonal_values needs a Z-only observable")
            total += c * (1.0 - 2.0 * (np.bitwise_count(outcomes & z) & 1).astype(np.float64))
        return total

    def to_matrix(self) -> np.ndarray:
        """Dense ``2**n x 2**n`` matrix (test oracle; n <= 12)."""
        if self.num_qubits > 12:
            raise SizeError("dense matrices are limited to 12 qubits")
        dim = 1 << self.num_qubits
        k = np.arange(dim, dtype=np.int64)
        mat = np.zeros((dim, dim), dtype=np.complex128)
        for x, w in self._weights():
            mat[k ^ x, k] += w
        return mat

    # -- serialization -----------------------------------------------------

    def to_json_list(self) -> list[dict]:
        return [
            {
                "pauli_label": masks_to_label(self.num_qubits, x, z),
                "coeff_re": float(c.real),
                "coeff_im": float(c.imag),
            }
            for (x, z), c in self._terms.items()
        ]

    @classmethod
    def from_json_list(cls, entries: list[dict], num_qubits: int | None = None) -> "Observable":
        if not entries:
            if num_qubits is None:
                raise ValidityError("empty observable list needs an explicit num_qubits")
            return cls(num_qubits)
        n = num_qubits or len(entries[0]["pauli_label"])
        terms = []
        for entry in entries:
            label = entry["pauli_label"]
            if len(label) != n:
                raise ShapeError(f"label {label!r} is not {n} qubits wide")
            terms.append(PauliTerm.from_label(label, complex(entry["coeff_re"], entry.get("coeff_im", 0.0))))
        return cls(n, terms)

    def dumps(self) -> str:
        return json.dumps(self.to_json_list(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "Observable":
        return cls.from_json_list(json.loads(text))


def exact_ground_energy(observable: Observable) -> float:
    """Smallest eigenvalue via Lanczos (ARPACK) on the Pauli-action matvec.

    Dimensions of 32 or less go straight to dense diagonalization, where ARPACK's
    Krylov-space requirements are awkward.
    """
    if observable.num_qubits > 12:
        raise SizeError("exact_ground_energy supports at most 12 qubits")
    observable.require_hermitian()
    obs = observable.real()
    dim = 1 << obs.num_qubits
    if dim <= 32:
        return float(np.linalg.eigvalsh(obs.to_matrix())[0])
    op = spla.LinearOperator((dim, dim), matvec=lambda v: obs.apply(v.ravel()), dtype=np.complex128)
    v0 = np.full(dim, 1.0 / np.sqrt(dim), dtype=np.complex128)
    vals = spla.eigsh(op, k=1, which="SA", tol=1e-12, v0=v0, return_eigenvectors=False)
    return float(vals[0])
