"""VQE objective evaluation under readout noise, with and without CTMP mitigation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .ctmp import CtmpModel, apply_readout_noise_batch, mitigate_expectation
from .errors import ConfigError, ShapeError, ValidityError
from .fermion import build_hubbard
from .grouping import MeasurementGroup, counts_standard_error, expectation_from_counts, group_observable
from .pauli import Observable, exact_ground_energy
from .statevector import Circuit, CountsMap, apply_gates, apply_cz, apply_ry, sample_outcomes

MODES = ("noiseless_exact", "noiseless_sampled", "unmitigated", "mitigated")
SHOTS_PER_QUBIT = 8192


@dataclass(frozen=True)
class AnsatzSpec:
    """|+>^n followed by ``reps`` layers of [RY on every qubit, CZ chain]."""

    num_qubits: int
    reps: int = 6

    @property
    def num_parameters(self) -> int:
        return self.reps * self.num_qubits

    def chain(self) -> list[tuple[int, int]]:
        return [(q, q + 1) for q in range(self.num_qubits - 1)]


def build_ansatz(spec: AnsatzSpec, theta: Sequence[float]) -> Circuit:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.num_parameters,):
        raise ShapeError(f"expected {spec.num_parameters} parameters, got {theta.shape}")
    circ = Circuit(spec.num_qubits)
    for q in range(spec.num_qubits):
        circ.h(q)
    for rep in range(spec.reps):
        for q in range(spec.num_qubits):
            circ.ry(q, theta[rep * spec.num_qubits + q])
        for a, b in spec.chain():
            circ.cz(a, b)
    return circ


def ansatz_amplitudes(spec: AnsatzSpec, thetas: np.ndarray) -> np.ndarray:
    """Batched ansatz states: ``thetas`` of shape (..., d) -> amplitudes (..., 2**n)."""
    thetas = np.asarray(thetas, dtype=float)
    if thetas.shape[-1] != spec.num_parameters:
        raise ShapeError(f"expected {spec.num_parameters} parameters, got {thetas.shape[-1]}")
    n = spec.num_qubits
    amps = np.full(thetas.shape[:-1] + (1 << n,), (1 << n) ** -0.5, dtype=np.complex128)
    for rep in range(spec.reps):
        for q in range(n):
            apply_ry(amps, n, q, thetas[..., rep * n + q])
        for a, b in spec.chain():
            apply_cz(amps, n, a, b)
    return amps


@dataclass
class EvaluationConfig:
    mode: str = "noiseless_exact"
    shots: int = 0
    noise_model: CtmpModel | None = None
    mitigation_model: CtmpModel | None = None
    seed: int = 0
    mitigation_samples: int | None = None

    def validate(self, num_qubits: int | None = None) -> None:
        problems = []
        if self.mode not in MODES:
            problems.append(f"mode: must be one of {MODES}, got {self.mode!r}")
        if self.mode != "noiseless_exact" and self.shots < 1:
            problems.append("shots: must be >= 1 for sampled modes")
        if self.mode in ("unmitigated", "mitigated") and self.noise_model is None:
            problems.append(f"noise_model: required for mode {self.mode}")
        if self.mode == "mitigated" and self.mitigation_model is None:
            problems.append("mitigation_model: required for mode mitigated")
        if num_qubits is not None:
            for name in ("noise_model", "mitigation_model"):
                model = getattr(self, name)
                if model is not None and model.num_qubits != num_qubits:
                    problems.append(f"{name}: has {model.num_qubits} qubits, observable has {num_qubits}")
        if problems:
            raise ConfigError(problems)


def _stream(seed: int, key: tuple[int, ...]) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def _group_states(spec: AnsatzSpec, theta: np.ndarray, groups: list[MeasurementGroup]) -> list[np.ndarray]:
    base = ansatz_amplitudes(spec, theta)
    out = []
    for group in groups:
        amps = base.copy()
        apply_gates(amps, spec.num_qubits, group.basis_change.gates)
        out.append(amps)
    return out


def evaluate_objective(
    theta: Sequence[float],
    observable: Observable,
    config: EvaluationConfig,
    spec: AnsatzSpec | None = None,
    task_key: tuple[int, ...] = (),
) -> tuple[float, float]:
    """Energy estimate ``(value, std_error)`` at ``theta``.

    Random streams are derived from ``config.seed`` and ``task_key`` per
    measurement group and stage (sampling, noise, mitigation), so modes sharing a
    seed see identical shot samples and identical noisy counts.
    """
    n = observable.num_qubits
    spec = spec or AnsatzSpec(n)
    if spec.num_qubits != n:
        raise ShapeError("ansatz and observable differ in qubit count")
    config.validate(n)
    theta = np.asarray(theta, dtype=float)
    if config.mode == "noiseless_exact":
        value = observable.expectation(ansatz_amplitudes(spec, theta))
        return float(value.real), 0.0

    offset, groups = group_observable(observable)
    value, var = offset, 0.0
    for g, (group, amps) in enumerate(zip(groups, _group_states(spec, theta, groups))):
        probs = amps.real**2 + amps.imag**2
        shots = sample_outcomes(probs, config.shots, _stream(config.seed, task_key + (g, 0)))
        if config.mode in ("unmitigated", "mitigated"):
            shots = apply_readout_noise_batch(shots, config.noise_model, _stream(config.seed, task_key + (g, 1)))
        counts = CountsMap.from_samples(n, shots)
        terms = group.diagonal_terms
        if config.mode == "mitigated":
            est, err = mitigate_expectation(
                counts,
                config.mitigation_model,
                terms,
                config.mitigation_samples,
                _stream(config.seed, task_key + (g, 2)),
            )
        else:
            est, err = expectation_from_counts(counts, terms), counts_standard_error(counts, terms)
        value += est
        var += err**2
    return float(value), math.sqrt(var)


def _exact_batch(observable: Observable, spec: AnsatzSpec, thetas: np.ndarray) -> np.ndarray:
    return np.real(observable.expectation(ansatz_amplitudes(spec, thetas)))


def _shifted(theta: np.ndarray) -> np.ndarray:
    d = theta.size
    shift = np.eye(d) * (math.pi / 2)
    return np.concatenate([theta + shift, theta - shift])


def gradient_parameter_shift(
    theta: Sequence[float],
    observable: Observable,
    config: EvaluationConfig | None = None,
    spec: AnsatzSpec | None = None,
    task_key: tuple[int, ...] = (),
) -> np.ndarray:
    """df/dtheta_k = [f(theta + pi/2 e_k) - f(theta - pi/2 e_k)] / 2."""
    theta = np.asarray(theta, dtype=float)
    spec = spec or AnsatzSpec(observable.num_qubits)
    config = config or EvaluationConfig()
    d = theta.size
    if config.mode == "noiseless_exact":
        config.validate(observable.num_qubits)
        vals = _exact_batch(observable, spec, _shifted(theta))
        return (vals[:d] - vals[d:]) / 2
    points = _shifted(theta)
    vals = np.array(
        [evaluate_objective(p, observable, config, spec, task_key + (idx,))[0] for idx, p in enumerate(points)]
    )
    return (vals[:d] - vals[d:]) / 2


@dataclass
class MinimizeResult:
    theta: np.ndarray
    value: float
    restart_values: list[float] = field(default_factory=list)
    iterations: list[int] = field(default_factory=list)


def _descend(observable, spec, theta, max_iter, grad_tol):
    """Gradient descent with Armijo backtracking; the step doubles after each accepted move."""
    f = float(_exact_batch(observable, spec, theta))
    step = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        grad = gradient_parameter_shift(theta, observable, spec=spec)
        gnorm2 = float(grad @ grad)
        if gnorm2 < grad_tol**2:
            break
        step = min(step * 2.0, 1e3)
        while True:
            cand = theta - step * grad
            fc = float(_exact_batch(observable, spec, cand))
            if fc <= f - 1e-4 * step * gnorm2 or step < 1e-12:
                break
            step *= 0.5
        if fc > f:
            break
        theta, f = cand, fc
    return theta, f, it


def find_minimum(
    observable: Observable,
    spec: AnsatzSpec | None = None,
    restarts: int = 20,
    seed: int = 0,
    max_iter: int = 2000,
    grad_tol: float = 1e-5,
) -> MinimizeResult:
    """Best of ``restarts`` exact-objective descents from uniform random starts."""
    spec = spec or AnsatzSpec(observable.num_qubits)
    observable.require_hermitian()
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    best = None
    result = MinimizeResult(np.empty(0), math.inf)
    for _ in range(restarts):
        start = rng.uniform(0.0, 2 * math.pi, spec.num_parameters)
        theta, f, iters = _descend(observable, spec, start, max_iter, grad_tol)
        result.restart_values.append(f)
        result.iterations.append(iters)
        if best is None or f < best[1]:
            best = (theta, f)
    result.theta, result.value = best
    return result


@dataclass
class SweepResult:
    s_values: np.ndarray
    energies: dict[str, np.ndarray]
    std_errors: dict[str, np.ndarray]
    direction: np.ndarray

    def rows(self) -> list[dict]:
        names = list(self.energies)
        out = []
        for idx, s in enumerate(self.s_values):
            row = {"s": float(s)}
            for name in names:
                row[name] = float(self.energies[name][idx])
            for name in names:
                row[f"{name}_std_error"] = float(self.std_errors[name][idx])
            out.append(row)
        return out


def default_s_grid() -> np.ndarray:
    return np.linspace(-2.0, 2.0, 41)


def standard_configs(
    num_qubits: int,
    noise_model: CtmpModel,
    mitigation_model: CtmpModel | None = None,
    seed: int = 0,
    shots: int | None = None,
    mitigation_samples: int | None = None,
) -> dict[str, EvaluationConfig]:
    """All four evaluation modes at ``SHOTS_PER_QUBIT * n`` shots unless overridden.

    Wider models are restricted to the first ``num_qubits`` qubits.
    """
    shots = shots or SHOTS_PER_QUBIT * num_qubits
    noise = noise_model.restrict(range(num_qubits)) if noise_model.num_qubits != num_qubits else noise_model
    mit = mitigation_model or noise_model
    mit = mit.restrict(range(num_qubits)) if mit.num_qubits != num_qubits else mit
    return {
        "noiseless_exact": EvaluationConfig("noiseless_exact"),
        "noiseless_sampled": EvaluationConfig("noiseless_sampled", shots, seed=seed),
        "unmitigated": EvaluationConfig("unmitigated", shots, noise, None, seed),
        "mitigated": EvaluationConfig("mitigated", shots, noise, mit, seed, mitigation_samples),
    }


def sweep_direction(dim: int, direction_seed: int) -> np.ndarray:
    phi = np.random.default_rng(np.random.SeedSequence(direction_seed)).standard_normal(dim)
    return phi / np.linalg.norm(phi)


def sweep_objective(
    theta0: Sequence[float],
    direction_seed: int,
    s_grid: Sequence[float],
    observable: Observable,
    configs: Mapping[str, EvaluationConfig],
    spec: AnsatzSpec | None = None,
) -> SweepResult:
    """Evaluate every config along ``theta0 + s * phi`` with a random unit direction ``phi``."""
    s_grid = np.asarray(s_grid, dtype=float)
    if s_grid.size == 0:
        raise ValidityError("s_grid must be nonempty")
    theta0 = np.asarray(theta0, dtype=float)
    spec = spec or AnsatzSpec(observable.num_qubits)
    phi = sweep_direction(theta0.size, direction_seed)
    energies = {name: np.empty(s_grid.size) for name in configs}
    errors = {name: np.empty(s_grid.size) for name in configs}
    for idx, s in enumerate(s_grid):
        theta = theta0 + s * phi
        for name, config in configs.items():
            energies[name][idx], errors[name][idx] = evaluate_objective(theta, observable, config, spec, (idx,))
    return SweepResult(s_grid, energies, errors, phi)


@dataclass
class SamplingResult:
    rows: list[dict]
    summary: list[dict]


def random_sampling_experiment(
    num_sites: Sequence[int],
    samples_per_size: int,
    noise_model: CtmpModel,
    mitigation_model: CtmpModel | None = None,
    seed: int = 0,
    shots_per_qubit: int = SHOTS_PER_QUBIT,
    reps: int = 6,
    mapping: str = "bravyi_kitaev",
    t: float = 1.0,
    U: float = 2.0,
    mitigation_samples: int | None = None,
    ordering: str = "interleaved",
) -> SamplingResult:
    """Energy errors at uniformly random parameters, with and without mitigation.

    ``noise_model`` / ``mitigation_model`` may be wider than a given instance;
    they are restricted to its first ``2 * sites`` qubits. The mitigation model
    defaults to the noise model.
    """
    if samples_per_size < 2:
        raise ValidityError("samples_per_size must be >= 2")
    mitigation_model = mitigation_model or noise_model
    rows, summary = [], []
    for size_index, sites in enumerate(num_sites):
        ham = build_hubbard(sites, t, U, periodic=True, mapping=mapping, ordering=ordering)
        n = ham.num_qubits
        spec = AnsatzSpec(n, reps)
        noise = noise_model.restrict(range(n)) if noise_model.num_qubits != n else noise_model
        mit = mitigation_model.restrict(range(n)) if mitigation_model.num_qubits != n else mitigation_model
        shots = shots_per_qubit * n
        configs = {
            "unmitigated": EvaluationConfig("unmitigated", shots, noise, None, seed, None),
            "mitigated": EvaluationConfig("mitigated", shots, noise, mit, seed, mitigation_samples),
        }
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(size_index,)))
        thetas = rng.uniform(0.0, 2 * math.pi, (samples_per_size, spec.num_parameters))
        errs = {name: [] for name in configs}
        for idx, theta in enumerate(thetas):
            exact = float(_exact_batch(ham, spec, theta))
            row = {"num_sites": sites, "num_qubits": n, "sample_index": idx, "exact": exact}
            for name, config in configs.items():
                value, err = evaluate_objective(theta, ham, config, spec, (size_index, idx))
                row[name] = value
                row[f"{name}_error"] = value - exact
                row[f"{name}_std_error"] = err
                errs[name].append(value - exact)
            rows.append(row)
        std_unmit = float(np.std(errs["unmitigated"], ddof=1))
        std_mit = float(np.std(errs["mitigated"], ddof=1))
        summary.append(
            {
                "num_sites": sites,
                "num_qubits": n,
                "samples": samples_per_size,
                "shots": shots,
                "gamma": mit.gamma,
                "std_unmitigated": std_unmit,
                "std_mitigated": std_mit,
                "reduction_ratio": std_unmit / std_mit if std_mit > 0 else math.inf,
            }
        )
    return SamplingResult(rows, summary)


def hubbard_ground_energy(
    num_sites: int,
    t: float = 1.0,
    U: float = 2.0,
    mapping: str = "bravyi_kitaev",
    ordering: str = "interleaved",
) -> float:
    return exact_ground_energy(build_hubbard(num_sites, t, U, True, mapping, ordering))
