import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ctmp_vqe.errors import ArgumentError, ShapeError, SizeError, ValidityError
from ctmp_vqe.pauli import Observable
from ctmp_vqe.statevector import (
    Circuit,
    CountsMap,
    Gate,
    Statevector,
    apply_circuit,
    apply_gates,
    exact_expectation,
    exact_probabilities,
    new_zero_state,
    sample_counts,
)

S = 1 / math.sqrt(2)

# Dense single-qubit matrices used as an independent oracle for the kernels.
H_M = np.array([[1, 1], [1, -1]]) * S
X_M = np.array([[0, 1], [1, 0]])
SDG_M = np.diag([1, -1j])


def ry_m(a):
    c, s = math.cos(a / 2), math.sin(a / 2)
    return np.array([[c, -s], [s, c]])


def lift(m, q, n):
    out = np.array([[1.0]])
    for k in reversed(range(n)):
        out = np.kron(out, m if k == q else np.eye(2))
    return out


def dense_gate(g, n):
    if g.kind == "CZ":
        a, b = g.qubits
        d = np.array([-1.0 if (x >> a) & 1 and (x >> b) & 1 else 1.0 for x in range(1 << n)])
        return np.diag(d)
    m = {"H": H_M, "X": X_M, "Sdg": SDG_M}.get(g.kind)
    if m is None:
        m = ry_m(g.angle)
    return lift(m, g.qubits[0], n)


def random_circuit(rng, n, depth):
    circ = Circuit(n)
    for _ in range(depth):
        kind = rng.choice(["H", "X", "RY", "CZ", "Sdg"] if n > 1 else ["H", "X", "RY", "Sdg"])
        if kind == "CZ":
            a, b = rng.choice(n, 2, replace=False)
            circ.cz(int(a), int(b))
        elif kind == "RY":
            circ.ry(int(rng.integers(n)), float(rng.uniform(-4, 4)))
        else:
            getattr(circ, kind.lower())(int(rng.integers(n)))
    return circ


class TestZeroState:
    def test_one_qubit(self):
        np.testing.assert_array_equal(new_zero_state(1).amplitudes, [1, 0])

    def test_two_qubits(self):
        np.testing.assert_array_equal(new_zero_state(2).amplitudes, [1, 0, 0, 0])

    @pytest.mark.parametrize("n", [0, 25, -1])
    def test_out_of_range(self, n):
        with pytest.raises(SizeError):
            new_zero_state(n)


class TestGates:
    def test_hadamard(self):
        out = apply_circuit(new_zero_state(1), Circuit(1).h(0))
        np.testing.assert_allclose(out.amplitudes, [S, S], atol=1e-15)

    def test_ry_zero_is_identity(self):
        rng = np.random.default_rng(3)
        psi = rng.normal(size=8) + 1j * rng.normal(size=8)
        psi /= np.linalg.norm(psi)
        out = apply_circuit(Statevector(3, psi), Circuit(3).ry(1, 0.0))
        np.testing.assert_array_equal(out.amplitudes, psi)

    def test_cz_on_11(self):
        out = apply_circuit(Statevector(2, [0, 0, 0, 1]), Circuit(2).cz(0, 1))
        np.testing.assert_array_equal(out.amplitudes, [0, 0, 0, -1])

    def test_x_flips_only_its_qubit(self):
        out = apply_circuit(new_zero_state(3), Circuit(3).x(1))
        assert np.argmax(np.abs(out.amplitudes)) == 0b010

    def test_width_mismatch(self):
        with pytest.raises(ShapeError):
            apply_circuit(new_zero_state(2), Circuit(3).h(0))

    def test_invalid_gates(self):
        with pytest.raises(ValidityError):
            Gate("CZ", (1, 1))
        with pytest.raises(ValidityError):
            Gate("T", (0,))
        with pytest.raises(ValidityError):
            Circuit(2).h(2)

    def test_kernels_match_dense_matrices(self):
        rng = np.random.default_rng(11)
        for n in (1, 2, 3, 4):
            for _ in range(20):
                circ = random_circuit(rng, n, 12)
                psi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
                psi /= np.linalg.norm(psi)
                expected = psi.copy()
                for g in circ.gates:
                    expected = dense_gate(g, n) @ expected
                got = apply_circuit(Statevector(n, psi), circ).amplitudes
                np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_batched_kernels(self):
        rng = np.random.default_rng(5)
        circ = random_circuit(rng, 3, 30)
        batch = rng.normal(size=(4, 8)) + 0j
        single = [apply_circuit(Statevector(3, b / np.linalg.norm(b)), circ).amplitudes for b in batch]
        normed = batch / np.linalg.norm(batch, axis=1, keepdims=True)
        apply_gates(normed, 3, circ.gates)
        np.testing.assert_allclose(normed, single, atol=1e-13)


class TestProperties:
    def test_norm_preservation_random_circuits(self):
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(1000):
            n = int(rng.integers(1, 7))
            circ = random_circuit(rng, n, int(rng.integers(1, 51)))
            out = apply_circuit(new_zero_state(n), circ)
            worst = max(worst, abs(out.norm_squared() - 1))
        assert worst < 1e-9

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 5), depth=st.integers(0, 30))
    def test_inverse_restores_state(self, seed, n, depth):
        rng = np.random.default_rng(seed)
        circ = random_circuit(rng, n, depth)
        psi = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        psi /= np.linalg.norm(psi)
        there = apply_circuit(Statevector(n, psi), circ)
        back = apply_circuit(there, circ.inverse())
        np.testing.assert_allclose(back.amplitudes, psi, atol=1e-10)


class TestProbabilities:
    def test_plus(self):
        plus = apply_circuit(new_zero_state(1), Circuit(1).h(0))
        np.testing.assert_allclose(exact_probabilities(plus), [0.5, 0.5])

    def test_zero(self):
        np.testing.assert_array_equal(exact_probabilities(new_zero_state(1)), [1, 0])

    def test_bell(self):
        bell = Statevector(2, np.array([S, 0, 0, S]))
        np.testing.assert_allclose(exact_probabilities(bell), [0.5, 0, 0, 0.5])


class TestSampling:
    def test_deterministic_outcome(self):
        counts = sample_counts(new_zero_state(1), 100, np.random.default_rng(0))
        assert counts.to_dict() == {"0": 100}

    def test_plus_frequencies(self):
        plus = apply_circuit(new_zero_state(1), Circuit(1).h(0))
        counts = sample_counts(plus, 10**6, np.random.default_rng(1))
        freq = counts.probabilities()
        np.testing.assert_allclose(freq, [0.5, 0.5], atol=5e-3)

    def test_same_seed_same_counts(self):
        plus = apply_circuit(new_zero_state(3), Circuit(3).h(0).h(1).ry(2, 0.7))
        a = sample_counts(plus, 5000, np.random.default_rng(9))
        b = sample_counts(plus, 5000, np.random.default_rng(9))
        assert a == b

    def test_zero_shots(self):
        with pytest.raises(ArgumentError):
            sample_counts(new_zero_state(1), 0, np.random.default_rng(0))

    def test_chi_square_consistency(self):
        rng = np.random.default_rng(77)
        for n in (1, 2, 3, 4):
            state = apply_circuit(new_zero_state(n), random_circuit(rng, n, 25))
            probs = exact_probabilities(state)
            counts = sample_counts(state, 10**5, rng)
            observed = np.zeros(1 << n)
            observed[counts.outcomes] = counts.counts
            keep = probs > 1e-12
            assert observed[~keep].sum() == 0
            expected = probs[keep] * 10**5
            expected *= observed[keep].sum() / expected.sum()
            if keep.sum() > 1:
                assert stats.chisquare(observed[keep], expected).pvalue > 0.001

    def test_counts_merge_is_summation(self):
        a = CountsMap.from_dict(2, {"00": 3, "11": 1})
        b = CountsMap.from_dict(2, {"11": 2, "01": 5})
        assert a.merge(b).to_dict() == {"00": 3, "01": 5, "11": 3}
        assert a.merge(b) == b.merge(a)


class TestExpectation:
    def test_z_on_zero(self):
        assert exact_expectation(new_zero_state(1), Observable.from_list([("Z", 1.0)])) == pytest.approx(1.0)

    def test_x_on_plus(self):
        plus = apply_circuit(new_zero_state(1), Circuit(1).h(0))
        assert exact_expectation(plus, Observable.from_list([("X", 1.0)])) == pytest.approx(1.0)

    def test_non_hermitian_rejected(self):
        with pytest.raises(ValidityError):
            exact_expectation(new_zero_state(1), Observable.from_list([("X", 1j)]))
