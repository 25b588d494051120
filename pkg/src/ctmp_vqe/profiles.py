"""Bundled device graph and the default "boeblingen-like" noise profile.

The edge list is transcribed by hand from a published drawing of the 20-qubit
ibmq_boeblingen layout and should be treated as best-effort. The noise profile is
synthetic: rates are drawn once from ``generate_default_profile`` and committed,
so experiments run against a fixed file rather than a fresh draw.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .characterization import CouplingGraph, qubit_distance
from .ctmp import CtmpModel, GeneratorTerm

GRAPH_FILE = "boeblingen_graph.json"
PROFILE_FILE = "default_noise_profile.json"
PROFILE_SEED = 20200917

# (base rate at distance 1, per-hop decay factor). Decay stays nearly flat with
# distance while excitation and exchange fall off, as observed on the device.
PAIR_PROFILE = {
    "pair_decay": (2.0e-3, 0.92),
    "pair_excite": (1.2e-3, 0.65),
    "exchange_01_10": (8.0e-4, 0.65),
    "exchange_10_01": (8.0e-4, 0.65),
}
SINGLE_PROFILE = {
    "single_decay": (0.03, 0.05),
    "single_excite": (0.02, 0.035),
}
JITTER_SIGMA = 0.35


def _read_data(name: str) -> str:
    return resources.files("ctmp_vqe").joinpath("data").joinpath(name).read_text()


def boeblingen_graph() -> CouplingGraph:
    return CouplingGraph.loads(_read_data(GRAPH_FILE))


def default_noise_profile() -> CtmpModel:
    return CtmpModel.loads(_read_data(PROFILE_FILE))


def generate_default_profile(graph: CouplingGraph | None = None, seed: int = PROFILE_SEED) -> CtmpModel:
    """Draw the synthetic profile: 1-qubit rates of a few percent and pair rates
    ``base * decay**(distance - 1)`` with log-normal jitter."""
    graph = graph or boeblingen_graph()
    n = graph.num_qubits
    rng = np.random.default_rng(seed)
    terms = []
    for q in range(n):
        for kind, (low, high) in SINGLE_PROFILE.items():
            terms.append(GeneratorTerm(kind, (q,), round(float(rng.uniform(low, high)), 6)))
    for i in range(n):
        for j in range(i + 1, n):
            d = qubit_distance(graph, i, j)
            for kind, (base, decay) in PAIR_PROFILE.items():
                jitter = float(rng.lognormal(0.0, JITTER_SIGMA))
                rate = base * decay ** (d - 1) * jitter
                terms.append(GeneratorTerm(kind, (i, j), round(rate, 8)))
    return CtmpModel(n, terms)


def write_default_profile(path) -> None:
    model = generate_default_profile()
    with open(path, "w") as fh:
        fh.write(model.dumps())
        fh.write("\n")

