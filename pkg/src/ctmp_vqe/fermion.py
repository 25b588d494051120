"""Fermion-to-qubit mappings and the 1-D Fermi-Hubbard Hamiltonian."""

from __future__ import annotations

from functools import lru_cache, reduce

from .errors import SizeError, ValidityError
from .pauli import Observable, PauliTerm

MAPPINGS = ("jordan_wigner", "bravyi_kitaev")


class FenwickTree:
    """Fenwick tree over ``n`` modes, valid for any ``n`` (not only powers of two).

    Node ``n - 1`` is the root. A mode's qubit stores the parity of the
    occupations in its subtree, which is what makes the encoding Bravyi-Kitaev.
    """

    def __init__(self, num_modes: int):
        self.num_modes = num_modes
        self.parent: list[int | None] = [None] * num_modes
        self.children: list[list[int]] = [[] for _ in range(num_modes)]
        if num_modes:
            self._build(0, num_modes - 1, num_modes - 1)

    def _build(self, left: int, right: int, parent: int) -> None:
        # iterative form of the usual recursive split
        stack = [(left, right, parent)]
        while stack:
            left, right, parent = stack.pop()
            if left >= right:
                continue
            pivot = (left + right) >> 1
            self.parent[pivot] = parent
            self.children[parent].append(pivot)
            stack.append((pivot + 1, right, parent))
            stack.append((left, pivot, pivot))

    def update_set(self, j: int) -> list[int]:
        """Ancestors of ``j``: qubits whose stored parity includes mode ``j``."""
        out = []
        node = self.parent[j]
        while node is not None:
            out.append(node)
            node = self.parent[node]
        return out

    def children_set(self, j: int) -> list[int]:
        return list(self.children[j])

    def remainder_set(self, j: int) -> list[int]:
        """Children of ancestors with index below ``j``."""
        return [c for a in self.update_set(j) for c in self.children[a] if c < j]

    def parity_set(self, j: int) -> list[int]:
        """Qubits whose parities sum to the occupation parity of modes ``< j``."""
        return self.remainder_set(j) + self.children_set(j)


def _mask(indices) -> int:
    return reduce(lambda acc, q: acc | (1 << q), indices, 0)


@lru_cache(maxsize=None)
def _majoranas(mode: int, num_modes: int, mapping: str) -> tuple[PauliTerm, PauliTerm]:
    """The two Majorana strings (c, d) with a = (c + i d)/2."""
    bit = 1 << mode
    if mapping == "jordan_wigner":
        below = bit - 1
        c = PauliTerm(num_modes, bit, below)
        d = PauliTerm(num_modes, bit, below | bit)
        return c, d
    tree = FenwickTree(num_modes)
    update = _mask(tree.update_set(mode))
    parity = _mask(tree.parity_set(mode))
    remainder = _mask(tree.remainder_set(mode))
    c = PauliTerm(num_modes, bit | update, parity)
    d = PauliTerm(num_modes, bit | update, bit | remainder)
    return c, d


def map_fermion_op(mode: int, num_modes: int, kind: str, mapping: str = "jordan_wigner") -> Observable:
    """Qubit image of a creation (``kind="raise"``) or annihilation (``"lower"``) operator."""
    if not 0 <= mode < num_modes:
        raise SizeError(f"mode {mode} out of range for {num_modes} modes")
    if mapping not in MAPPINGS:
        raise ValidityError(f"unknown mapping {mapping!r}; choose from {MAPPINGS}")
    if kind not in ("raise", "lower"):
        raise ValidityError(f"kind must be 'raise' or 'lower', got {kind!r}")
    c, d = _majoranas(mode, num_modes, mapping)
    d_coeff = -0.5j if kind == "raise" else 0.5j
    return Observable(num_modes, [c * 0.5, d * d_coeff])


def hubbard_edges(num_sites: int, periodic: bool = True) -> list[tuple[int, int]]:
    """Nearest-neighbour bonds of a 1-D chain.

    The wrap-around bond is only added for three or more sites: for two sites it
    would repeat the single chain bond.
    """
    edges = [(k, k + 1) for k in range(num_sites - 1)]
    if periodic and num_sites >= 3:
        edges.append((num_sites - 1, 0))
    return edges


ORDERINGS = ("interleaved", "blocked")


def spin_orbital(site: int, spin: int, num_sites: int = 0, ordering: str = "interleaved") -> int:
    """Qubit index of (site, spin); spin 0 is up, 1 is down.

    ``interleaved`` puts site k on qubits 2k (up) and 2k+1 (down). ``blocked``
    puts all up orbitals first: site k up on qubit k, down on ``num_sites + k``.
    """
    if ordering == "interleaved":
        return 2 * site + spin
    if ordering == "blocked":
        return spin * num_sites + site
    raise ValueError(f"unknown ordering {ordering!r}; expected one of {ORDERINGS}")


def build_hubbard(
    num_sites: int,
    t: float = 1.0,
    U: float = 2.0,
    periodic: bool = True,
    mapping: str = "bravyi_kitaev",
    ordering: str = "interleaved",
) -> Observable:
    """Fermi-Hubbard Hamiltonian on a 1-D chain, on ``2 * num_sites`` qubits."""
    if num_sites < 1:
        raise SizeError("num_sites must be >= 1")
    n = 2 * num_sites

    def op(site, spin, kind):
        return map_fermion_op(spin_orbital(site, spin, num_sites, ordering), n, kind, mapping)

    ham = Observable.zero(n)
    for j, k in hubbard_edges(num_sites, periodic):
        for spin in (0, 1):
            hop = op(j, spin, "raise") * op(k, spin, "lower")
            ham = ham + (hop + hop.adjoint()) * (-t)
    for k in range(num_sites):
        n_up = op(k, 0, "raise") * op(k, 0, "lower")
        n_down = op(k, 1, "raise") * op(k, 1, "lower")
        ham = ham + (n_up * n_down) * U
    ham.require_hermitian(1e-12)
    return ham.real()
