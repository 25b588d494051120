from collections import Counter

import numpy as np
import pytest

from ctmp_vqe.errors import ValidityError
from ctmp_vqe.fermion import build_hubbard
from ctmp_vqe.grouping import (
    counts_standard_error,
    diagonal_values,
    expectation_from_counts,
    group_observable,
    parity_sign,
)
from ctmp_vqe.pauli import Observable
from ctmp_vqe.statevector import CountsMap, apply_gates


def random_states(rng, n, count):
    psi = rng.normal(size=(count, 1 << n)) + 1j * rng.normal(size=(count, 1 << n))
    return psi / np.linalg.norm(psi, axis=1, keepdims=True)


class TestGrouping:
    def test_commuting_z_terms(self):
        offset, groups = group_observable(Observable.from_list([("IZ", 1.0), ("ZI", 1.0)]))
        assert offset == 0.0
        assert len(groups) == 1
        assert len(groups[0].basis_change) == 0

    def test_x_and_z_on_same_qubit(self):
        _, groups = group_observable(Observable.from_list([("X", 1.0), ("Z", 1.0)]))
        assert len(groups) == 2

    def test_identity_is_offset(self):
        offset, groups = group_observable(Observable.from_list([("II", 2.5), ("XX", 1.0)]))
        assert offset == 2.5
        assert sum(len(g.terms) for g in groups) == 1

    def test_y_basis_change_uses_sdg_then_h(self):
        _, groups = group_observable(Observable.from_list([("Y", 1.0)]))
        assert [g.kind for g in groups[0].basis_change.gates] == ["Sdg", "H"]

    @pytest.mark.parametrize("mapping", ["jordan_wigner", "bravyi_kitaev"])
    def test_completeness(self, mapping):
        obs = build_hubbard(3, mapping=mapping)
        _, groups = group_observable(obs)
        grouped = Counter((x, z) for g in groups for x, z, _ in g.terms)
        expected = Counter(key for key, _ in obs.items() if key != (0, 0))
        assert grouped == expected

    def test_qubit_wise_commuting(self):
        _, groups = group_observable(build_hubbard(3, mapping="bravyi_kitaev"))
        for g in groups:
            for q in range(g.num_qubits):
                letters = set()
                for x, z, _ in g.terms:
                    bx, bz = (x >> q) & 1, (z >> q) & 1
                    if bx or bz:
                        letters.add((bx, bz))
                assert len(letters) <= 1

    def test_rotated_terms_are_diagonal(self):
        # after the basis change, <psi|P|psi> = <psi'|Z_support|psi'> for every term
        rng = np.random.default_rng(12)
        obs = build_hubbard(2, mapping="bravyi_kitaev")
        _, groups = group_observable(obs)
        psi = random_states(rng, 4, 1)[0]
        for g in groups:
            rotated = psi.copy()
            apply_gates(rotated, 4, g.basis_change.gates)
            probs = np.abs(rotated) ** 2
            outcomes = np.arange(16)
            for (x, z, _), (zmask, _) in zip(g.terms, g.diagonal_terms):
                single = Observable(4, {(x, z): 1.0})
                direct = single.expectation(psi).real
                via = float(np.dot(probs, parity_sign(outcomes & zmask)))
                assert via == pytest.approx(direct, abs=1e-12)

    def test_group_sum_matches_exact(self):
        rng = np.random.default_rng(3)
        obs = build_hubbard(2, mapping="jordan_wigner")
        offset, groups = group_observable(obs)
        outcomes = np.arange(16)
        for psi in random_states(rng, 4, 20):
            total = offset
            for g in groups:
                rotated = psi.copy()
                apply_gates(rotated, 4, g.basis_change.gates)
                total += float(np.dot(np.abs(rotated) ** 2, diagonal_values(outcomes, g.diagonal_terms)))
            assert total == pytest.approx(obs.expectation(psi).real, abs=1e-10)


class TestCountsEstimator:
    def test_even_parity(self):
        counts = CountsMap.from_dict(2, {"00": 500, "11": 500})
        assert expectation_from_counts(counts, [(0b11, 1.0)]) == 1.0

    def test_odd_parity(self):
        counts = CountsMap.from_dict(2, {"01": 500, "10": 500})
        assert expectation_from_counts(counts, [(0b11, 1.0)]) == -1.0

    def test_weighted(self):
        counts = CountsMap.from_dict(1, {"0": 750, "1": 250})
        assert expectation_from_counts(counts, [(1, 2.0)]) == pytest.approx(1.0)

    def test_empty_counts(self):
        with pytest.raises(ValidityError):
            expectation_from_counts(CountsMap(1, [], []), [(1, 1.0)])

    def test_standard_error_binomial(self):
        counts = CountsMap.from_dict(1, {"0": 600, "1": 400})
        # sample variance of +-1 values with mean 0.2, divided by shots
        var = (600 * 0.8**2 + 400 * 1.2**2) / 999
        assert counts_standard_error(counts, [(1, 1.0)]) == pytest.approx(np.sqrt(var / 1000))

    def test_parity_sign_dtype(self):
        out = parity_sign(np.array([0, 1, 3, 7], dtype=np.int64))
        assert out.dtype == np.float64
        np.testing.assert_array_equal(out, [1, -1, 1, -1])
