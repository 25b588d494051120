import itertools

import numpy as np
import pytest

from ctmp_vqe.characterization import group_by_key, group_rates, qubit_distance, summarize_quartiles
from ctmp_vqe.profiles import boeblingen_graph, default_noise_profile, generate_default_profile


class TestBundledData:
    def test_graph_shape(self):
        g = boeblingen_graph()
        assert g.num_qubits == 20
        dists = [qubit_distance(g, i, j) for i, j in itertools.combinations(range(20), 2)]
        assert min(dists) == 1
        assert max(dists) == 7

    def test_profile_is_reproducible(self):
        assert default_noise_profile().dumps() == generate_default_profile().dumps()

    def test_profile_term_count(self):
        model = default_noise_profile()
        assert len(model.single_terms()) == 40
        assert len(model.pair_terms()) == 4 * 190

    @pytest.mark.parametrize("n", [2, 4, 8])
    def test_gamma_grows_with_width(self, n):
        gamma = default_noise_profile().restrict(range(n)).gamma
        assert 0.03 * n < gamma < 0.07 * n

    def test_medians_decay_with_distance(self):
        model = default_noise_profile()
        summary = summarize_quartiles(group_by_key(group_rates(model, boeblingen_graph())))
        for kind in ("excite", "exchange"):
            medians = [summary[(kind, d)].median for d in range(1, 8)]
            assert all(a >= b for a, b in zip(medians, medians[1:]))
        decay = [summary[("decay", d)].median for d in range(1, 8)]
        assert decay[0] > decay[-1]
        assert np.isfinite(decay).all()
