import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from ctmp_vqe.ctmp import (
    CtmpModel,
    GeneratorTerm,
    SignedAccumulator,
    apply_readout_noise,
    apply_readout_noise_batch,
    compute_gamma,
    default_num_samples,
    dense_generator,
    dense_mitigated_expectation,
    mitigate_expectation,
    noisy_counts,
    random_model,
)
from ctmp_vqe.errors import ArgumentError, SizeError, StaleModelError, ValidityError
from ctmp_vqe.grouping import expectation_from_counts
from ctmp_vqe.statevector import CountsMap

# Transition written out by hand for each kind: (source bits, target bits) on
# (qubits[0], qubits[1]); used to build G independently of the package kernels.
HAND_PATTERNS = {
    "single_excite": ((0,), (1,)),
    "single_decay": ((1,), (0,)),
    "pair_excite": ((0, 0), (1, 1)),
    "pair_decay": ((1, 1), (0, 0)),
    "exchange_01_10": ((0, 1), (1, 0)),
    "exchange_10_01": ((1, 0), (0, 1)),
}


def hand_generator(model):
    n = model.num_qubits
    dim = 1 << n
    gen = np.zeros((dim, dim))
    for term in model.terms:
        src, dst = HAND_PATTERNS[term.kind]
        for x in range(dim):
            if all(((x >> q) & 1) == b for q, b in zip(term.qubits, src)):
                y = x
                for q, b in zip(term.qubits, dst):
                    y = (y & ~(1 << q)) | (b << q)
                gen[y, x] += term.rate
                gen[x, x] -= term.rate
    return gen


def empirical_columns(model, samples, rng):
    n = model.num_qubits
    dim = 1 << n
    cols = np.zeros((dim, dim))
    for x in range(dim):
        out = apply_readout_noise_batch(np.full(samples, x), model, rng)
        cols[:, x] = np.bincount(out, minlength=dim) / samples
    return cols


class TestTerms:
    def test_rate_must_be_nonnegative(self):
        with pytest.raises(ValidityError):
            GeneratorTerm("single_decay", (0,), -0.1)

    def test_arity(self):
        with pytest.raises(ValidityError):
            GeneratorTerm("pair_decay", (0,), 0.1)
        with pytest.raises(ValidityError):
            GeneratorTerm("pair_decay", (1, 1), 0.1)

    def test_exchange_direction_follows_reordering(self):
        # 01 -> 10 on (3, 1) means qubit 3 goes 0 -> 1 and qubit 1 goes 1 -> 0,
        # which is 10 -> 01 when read on (1, 3)
        term = GeneratorTerm("exchange_01_10", (3, 1), 0.2)
        assert term.qubits == (1, 3)
        assert term.kind == "exchange_10_01"
        m = CtmpModel(4, [term])
        np.testing.assert_array_equal(dense_generator(m), hand_generator(CtmpModel(4, [term])))
        x = 0b0010  # qubit 1 set, qubit 3 clear
        assert dense_generator(m)[0b1000, x] == pytest.approx(0.2)

    def test_duplicate_terms_rejected(self):
        with pytest.raises(ValidityError):
            CtmpModel(2, [GeneratorTerm("single_decay", (0,), 0.1), GeneratorTerm("single_decay", (0,), 0.2)])

    def test_out_of_range(self):
        with pytest.raises(ValidityError):
            CtmpModel(2, [GeneratorTerm("single_decay", (2,), 0.1)])


class TestDenseGenerator:
    def test_empty(self):
        np.testing.assert_array_equal(dense_generator(CtmpModel(2)), np.zeros((4, 4)))

    def test_single_decay(self):
        r = 0.17
        gen = dense_generator(CtmpModel(1, [GeneratorTerm("single_decay", (0,), r)]))
        np.testing.assert_allclose(gen, [[0, r], [0, -r]])

    def test_matches_hand_construction(self):
        rng = np.random.default_rng(1)
        for n in (1, 2, 3, 4):
            model = random_model(n, rng, 0.0, 0.1)
            np.testing.assert_allclose(dense_generator(model), hand_generator(model), atol=1e-15)

    def test_column_sums_zero(self):
        model = random_model(5, np.random.default_rng(2), 0.0, 0.2)
        np.testing.assert_allclose(dense_generator(model).sum(axis=0), 0, atol=1e-12)

    def test_exponential_is_stochastic(self):
        rng = np.random.default_rng(3)
        for n in range(1, 9):
            a = expm(dense_generator(random_model(n, rng, 0.0, 0.05)))
            assert a.min() > -1e-9
            np.testing.assert_allclose(a.sum(axis=0), 1, atol=1e-9)

    def test_size_limit(self):
        with pytest.raises(SizeError):
            dense_generator(CtmpModel(11))


class TestGamma:
    def test_single_qubit(self):
        model = CtmpModel(1, [GeneratorTerm("single_excite", (0,), 0.1), GeneratorTerm("single_decay", (0,), 0.3)])
        assert compute_gamma(model, "exact") == pytest.approx(0.3)
        assert compute_gamma(model, "upper_bound") == pytest.approx(0.3)

    def test_empty(self):
        assert compute_gamma(CtmpModel(3), "exact") == 0.0
        assert compute_gamma(CtmpModel(3), "upper_bound") == 0.0

    def test_exact_is_max_escape_and_bound_dominates(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            n = int(rng.integers(1, 11))
            model = random_model(n, rng, 0.0, 0.1)
            exact = compute_gamma(model, "exact")
            assert compute_gamma(model, "upper_bound") >= exact - 1e-12
            if n <= 8:
                assert exact == pytest.approx(-np.diag(hand_generator(model)).min())

    def test_exact_limit(self):
        with pytest.raises(SizeError):
            compute_gamma(CtmpModel(17), "exact")

    def test_default_mode_switches_above_16(self):
        model = CtmpModel(17, [GeneratorTerm("single_decay", (q,), 0.01) for q in range(17)])
        assert model.gamma == pytest.approx(0.17)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6))
    def test_gamma_bounds_every_escape_rate(self, seed, n):
        model = random_model(n, np.random.default_rng(seed), 0.0, 0.3)
        escapes = model.escape_rates(np.arange(1 << n))
        assert escapes.max() <= model.gamma + 1e-12


class TestNoise:
    def test_zero_rates_identity(self):
        model = CtmpModel(3, [GeneratorTerm("single_decay", (q,), 0.0) for q in range(3)])
        rng = np.random.default_rng(0)
        for label in ("000", "101", "111"):
            assert apply_readout_noise(label, model, rng) == label

    def test_single_decay_frequency(self):
        r = 0.2
        model = CtmpModel(1, [GeneratorTerm("single_decay", (0,), r)])
        trials = 10**6
        out = apply_readout_noise_batch(np.ones(trials, dtype=np.int64), model, np.random.default_rng(5))
        p = 1 - math.exp(-r)
        sigma = math.sqrt(p * (1 - p) / trials)
        assert abs(np.mean(out == 0) - p) < 3 * sigma

    def test_transition_matrix_matches_exponential(self):
        rng = np.random.default_rng(6)
        for _ in range(3):
            model = random_model(3, rng, 0.0, 0.05)
            emp = empirical_columns(model, 2 * 10**5, rng)
            exact = expm(hand_generator(model))
            tv = 0.5 * np.abs(emp - exact).sum(axis=0)
            assert tv.max() < 0.01

    def test_noisy_counts_preserves_shots(self):
        counts = CountsMap.from_dict(2, {"00": 700, "11": 300})
        out = noisy_counts(counts, random_model(2, np.random.default_rng(7)), np.random.default_rng(8))
        assert out.shots == 1000

    def test_seeded_determinism(self):
        model = random_model(3, np.random.default_rng(9), 0.0, 0.1)
        a = apply_readout_noise_batch(np.arange(8).repeat(100), model, np.random.default_rng(10))
        b = apply_readout_noise_batch(np.arange(8).repeat(100), model, np.random.default_rng(10))
        np.testing.assert_array_equal(a, b)


class TestModel:
    def test_json_round_trip_recomputes_gamma(self):
        model = random_model(3, np.random.default_rng(11))
        text = model.dumps()
        assert "gamma" not in text
        back = CtmpModel.loads(text)
        assert back.rates_dict() == model.rates_dict()
        assert back.gamma == pytest.approx(model.gamma)

    def test_stale_after_mutation(self):
        model = CtmpModel(2, [GeneratorTerm("single_decay", (0,), 0.1)])
        model.terms.append(GeneratorTerm("pair_excite", (0, 1), 0.5))
        assert model.is_stale()
        counts = CountsMap.from_dict(2, {"00": 10})
        with pytest.raises(StaleModelError):
            mitigate_expectation(counts, model, [(1, 1.0)], 10, np.random.default_rng(0))
        model.refresh_gamma()
        mitigate_expectation(counts, model, [(1, 1.0)], 10, np.random.default_rng(0))

    def test_restrict(self):
        model = random_model(4, np.random.default_rng(13))
        sub = model.restrict([2, 3])
        assert sub.num_qubits == 2
        assert sub.rate("pair_decay", (0, 1)) == model.rate("pair_decay", (2, 3))
        assert sub.rate("single_excite", (1,)) == model.rate("single_excite", (3,))
        assert len(sub.terms) == 2 * 2 + 4

    def test_default_num_samples(self):
        model = CtmpModel(1, [GeneratorTerm("single_decay", (0,), 0.25)])
        assert default_num_samples(model, 1000) == math.ceil(math.e) * 1000


class TestMitigation:
    def test_identity_observable(self):
        model = random_model(3, np.random.default_rng(14), 0.0, 0.05)
        counts = CountsMap.from_dict(3, {"000": 400, "011": 300, "111": 300})
        for seed in range(5):
            est, err = mitigate_expectation(counts, model, [(0, 1.0)], 10**5, np.random.default_rng(seed))
            assert abs(est - 1.0) < 3 * err

    def test_zero_model_returns_raw(self):
        model = CtmpModel(2, [GeneratorTerm("pair_decay", (0, 1), 0.0)])
        counts = CountsMap.from_dict(2, {"00": 400, "01": 100, "11": 500})
        est, _ = mitigate_expectation(counts, model, [(0b01, 1.0), (0b11, 0.5)])
        assert est == expectation_from_counts(counts, [(0b01, 1.0), (0b11, 0.5)])

    def test_matches_dense_inverse_small(self):
        rng = np.random.default_rng(15)
        model = random_model(2, rng, 0.01, 0.08)
        counts = CountsMap.from_dict(2, {"00": 4000, "01": 1000, "10": 2500, "11": 2500})
        terms = [(0b01, 1.0), (0b11, -0.7)]
        expected = dense_mitigated_expectation(counts, model, terms)
        # independent oracle: invert exp(G) directly instead of using exp(-G)
        p = counts.probabilities()
        q = np.linalg.solve(expm(hand_generator(model)), np.bincount(counts.outcomes, p, 4))
        values = np.array([sum(w * (-1) ** bin(x & z).count("1") for z, w in terms) for x in range(4)])
        assert expected == pytest.approx(values @ q, abs=1e-12)
        est, err = mitigate_expectation(counts, model, terms, 2 * 10**6, rng)
        assert abs(est - expected) < 4 * err

    def test_unbiased_over_repeated_runs(self):
        rng = np.random.default_rng(16)
        model = random_model(3, rng, 0.0, 0.04)
        counts = noisy_counts(CountsMap.from_dict(3, {"000": 5000, "101": 5000}), model, rng)
        terms = [(0b001, 1.0), (0b110, 0.5)]
        expected = dense_mitigated_expectation(counts, model, terms)
        runs = np.array([mitigate_expectation(counts, model, terms, 20000, rng)[0] for _ in range(50)])
        spread = runs.std(ddof=1) / math.sqrt(runs.size)
        assert abs(runs.mean() - expected) < 3 * spread

    def test_needs_rng_and_positive_samples(self):
        model = random_model(1, np.random.default_rng(17), 0.01, 0.05)
        counts = CountsMap.from_dict(1, {"0": 10})
        with pytest.raises(ValidityError):
            mitigate_expectation(counts, model, [(1, 1.0)], 10)
        with pytest.raises(ArgumentError):
            mitigate_expectation(counts, model, [(1, 1.0)], 0, np.random.default_rng(0))


class TestAccumulator:
    def test_merge_equals_single_pass(self):
        rng = np.random.default_rng(18)
        values = rng.normal(size=1000)
        whole = SignedAccumulator()
        whole.add(values)
        a, b = SignedAccumulator(), SignedAccumulator()
        a.add(values[:300])
        b.add(values[300:])
        merged = a.merge(b)
        assert merged.count == whole.count
        assert merged.mean == pytest.approx(whole.mean)
        assert merged.std_error == pytest.approx(values.std(ddof=1) / math.sqrt(1000))
