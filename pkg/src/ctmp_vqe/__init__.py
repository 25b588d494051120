"""CTMP readout-error simulation, calibration and mitigation, with Hubbard VQE experiments.

Names are resolved lazily so ``import ctmp_vqe.cli`` does not load numpy before
the command line has had a chance to cap library thread pools.
"""

from importlib import import_module

_EXPORTS = {
    "statevector": [
        "Gate", "Circuit", "Statevector", "CountsMap", "new_zero_state", "apply_circuit",
        "exact_probabilities", "sample_outcomes", "sample_counts", "exact_expectation",
        "bitstring", "parse_bitstring",
    ],
    "pauli": ["PauliTerm", "Observable", "pauli_multiply", "exact_ground_energy"],
    "fermion": ["FenwickTree", "map_fermion_op", "build_hubbard", "hubbard_edges", "spin_orbital"],
    "grouping": ["MeasurementGroup", "group_observable", "expectation_from_counts"],
    "ctmp": [
        "GeneratorTerm", "CtmpModel", "compute_gamma", "dense_generator", "random_model",
        "apply_readout_noise", "apply_readout_noise_batch", "noisy_counts", "mitigate_expectation",
        "dense_mitigated_expectation", "SignedAccumulator",
    ],
    "calibration": [
        "CalibrationSet", "calibration_state_labels", "minimal_calibration_labels",
        "simulate_calibration", "pair_assignment_matrix", "matrix_log", "fit_ctmp",
        "fit_ctmp_with_report", "FitReport",
    ],
    "vqe": [
        "AnsatzSpec", "build_ansatz", "EvaluationConfig", "evaluate_objective",
        "gradient_parameter_shift", "find_minimum", "sweep_objective", "standard_configs",
        "random_sampling_experiment", "hubbard_ground_energy",
    ],
    "characterization": [
        "CouplingGraph", "RateRecord", "qubit_distance", "group_rates", "group_by_key",
        "summarize_quartiles", "compare_models", "UNREACHABLE",
    ],
    "profiles": ["boeblingen_graph", "default_noise_profile"],
    "errors": [
        "CtmpVqeError", "SizeError", "ShapeError", "ValidityError", "IncompleteCalibrationError",
        "FitError", "StaleModelError", "ConfigError", "ArgumentError",
    ],
}
_WHERE = {name: module for module, names in _EXPORTS.items() for name in names}

__all__ = sorted(_WHERE)


def __getattr__(name):
    module = _WHERE.get(name)
    if module is None:
        raise AttributeError(f"module 'ctmp_vqe' has no attribute {name!r}")
    value = getattr(import_module(f".{module}", __name__), name)
    globals()[name] = value
    return value


def __dir__():
    return __all__
