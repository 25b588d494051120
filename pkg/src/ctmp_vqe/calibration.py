"""Calibration circuits, calibration data, and CTMP rate fitting."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .ctmp import KIND_PATTERNS, CtmpModel, GeneratorTerm, apply_readout_noise_batch
from .errors import FitError, IncompleteCalibrationError, ShapeError, ValidityError
from .statevector import CountsMap, parse_bitstring

BIT_ORDERS = ("qubit0_rightmost", "qubit0_leftmost")
# index of a 2-bit pattern "ab" (a = first qubit) is 2a + b
_PATTERN = {"00": 0, "01": 1, "10": 2, "11": 3}
_LOG_EIG_FLOOR = 1e-8
_EIGVEC_COND_LIMIT = 1e8


def calibration_state_labels(num_qubits: int) -> list[str]:
    """All n-bit strings of Hamming weight <= 2, sorted lexicographically."""
    if num_qubits < 1:
        raise ValidityError("num_qubits must be >= 1")
    values = {0}
    values.update(1 << q for q in range(num_qubits))
    values.update((1 << a) | (1 << b) for a, b in itertools.combinations(range(num_qubits), 2))
    return sorted(format(v, f"0{num_qubits}b") for v in values)


def minimal_calibration_labels(num_qubits: int) -> list[str]:
    """A complete set of at most n + 2 labels: all-zeros, all-ones and the weight-1 strings.

    Every qubit pair sees input 00 (all-zeros), 11 (all-ones) and both 01 and
    10 (the two weight-1 strings on that pair).
    """
    if num_qubits < 1:
        raise ValidityError("num_qubits must be >= 1")
    labels = ["0" * num_qubits, "1" * num_qubits]
    labels += [format(1 << q, f"0{num_qubits}b") for q in range(num_qubits)]
    return list(dict.fromkeys(labels))


@dataclass
class CalibrationSet:
    num_qubits: int
    shots: int
    records: list[tuple[str, CountsMap]] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for label, counts in self.records:
            parse_bitstring(label, self.num_qubits)
            if label in seen:
                raise ValidityError(f"duplicate calibration label {label}")
            seen.add(label)
            if counts.num_qubits != self.num_qubits:
                raise ShapeError(f"counts for {label} have the wrong width")
            if counts.shots > self.shots:
                raise ValidityError(f"counts for {label} exceed the declared {self.shots} shots")

    @property
    def labels(self) -> list[str]:
        return [label for label, _ in self.records]

    def to_json_dict(self) -> dict:
        return {
            "num_qubits": self.num_qubits,
            "shots": self.shots,
            "results": [{"label": label, "counts": counts.to_dict()} for label, counts in self.records],
            "bit_order": "qubit0_rightmost",
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "CalibrationSet":
        try:
            n = int(data["num_qubits"])
            shots = int(data["shots"])
            order = data.get("bit_order", "qubit0_rightmost")
            results = data["results"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidityError(f"malformed calibration file: {exc}") from exc
        if order not in BIT_ORDERS:
            raise ValidityError(f"unknown bit_order {order!r}")

        def fix(s: str) -> str:
            return s[::-1] if order == "qubit0_leftmost" else s

        records = []
        for entry in results:
            counts = {fix(k): int(v) for k, v in entry["counts"].items()}
            records.append((fix(entry["label"]), CountsMap.from_dict(n, counts)))
        return cls(n, shots, records)

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "CalibrationSet":
        return cls.from_json_dict(json.loads(text))


def simulate_calibration(
    model: CtmpModel,
    shots: int,
    seed: int | np.random.SeedSequence,
    labels: list[str] | None = None,
) -> CalibrationSet:
    """Noisy calibration data for ``labels`` (default: the weight-<=2 set).

    Preparing ``|label>`` with X gates yields a basis state, so every ideal shot
    reads ``label``; each shot is then passed through the readout channel. Each
    label gets its own sub-stream of ``seed``.
    """
    n = model.num_qubits
    if shots < 1:
        raise ValidityError("shots must be >= 1")
    labels = calibration_state_labels(n) if labels is None else labels
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    records = []
    for label, child in zip(labels, seq.spawn(len(labels))):
        ideal = np.full(shots, parse_bitstring(label, n), dtype=np.int64)
        noisy = apply_readout_noise_batch(ideal, model, np.random.default_rng(child))
        records.append((label, CountsMap.from_samples(n, noisy)))
    return CalibrationSet(n, shots, records)


# ---------------------------------------------------------------------------
# Pair assignment matrices
# ---------------------------------------------------------------------------


def _pair_pattern(values: np.ndarray | int, i: int, j: int):
    return 2 * ((values >> i) & 1) + ((values >> j) & 1)


def pair_count_matrix(cal: CalibrationSet, i: int, j: int) -> np.ndarray:
    """Raw pooled counts C[out_pattern, in_pattern] on qubits (i, j)."""
    if i == j or not (0 <= i < cal.num_qubits and 0 <= j < cal.num_qubits):
        raise ValidityError(f"invalid qubit pair ({i}, {j})")
    mat = np.zeros((4, 4))
    for label, counts in cal.records:
        col = _pair_pattern(int(label, 2), i, j)
        mat[:, col] += np.bincount(_pair_pattern(counts.outcomes, i, j), weights=counts.counts, minlength=4)
    return mat


def pair_assignment_matrix(cal: CalibrationSet, i: int, j: int) -> np.ndarray:
    """Empirical 4x4 assignment matrix of qubits (i, j), pooled over prepared labels.

    Entry ``[out, in]`` uses pattern index ``2 * x_i + x_j``; columns sum to one.
    """
    mat = pair_count_matrix(cal, i, j)
    totals = mat.sum(axis=0)
    missing = [p for p, idx in _PATTERN.items() if totals[idx] == 0]
    if missing:
        raise IncompleteCalibrationError(
            f"calibration is incomplete for pair ({i}, {j}): no prepared input pattern(s) {', '.join(missing)}"
        )
    return mat / totals


def _single_assignment_matrix(cal: CalibrationSet, q: int) -> np.ndarray:
    mat = np.zeros((2, 2))
    for label, counts in cal.records:
        col = (int(label, 2) >> q) & 1
        mat[:, col] += np.bincount((counts.outcomes >> q) & 1, weights=counts.counts, minlength=2)
    totals = mat.sum(axis=0)
    if np.any(totals == 0):
        raise IncompleteCalibrationError(f"calibration is incomplete for qubit {q}: needs inputs 0 and 1")
    return mat / totals


def matrix_log(mat: np.ndarray, where: str = "") -> tuple[np.ndarray, dict]:
    """Principal logarithm via eigendecomposition.

    Fails when an eigenvalue is (near) zero or has a negative real part. Falls
    back to the Schur-based ``scipy.linalg.logm`` when the eigenvector basis is
    ill-conditioned (near-defective matrix).
    """
    vals, vecs = np.linalg.eig(mat)
    diag = {
        "min_eigenvalue_modulus": float(np.abs(vals).min()),
        "min_eigenvalue_real": float(vals.real.min()),
    }
    if np.any(np.abs(vals) < _LOG_EIG_FLOOR) or np.any(vals.real < 0):
        raise FitError(f"matrix logarithm undefined for {where or 'matrix'}: eigenvalues {np.round(vals, 6)}")
    cond = float(np.linalg.cond(vecs))
    diag["eigenvector_condition"] = cond
    if cond > _EIGVEC_COND_LIMIT:
        from scipy.linalg import logm

        log = logm(mat)
        diag["method"] = "schur"
    else:
        log = vecs @ np.diag(np.log(vals.astype(complex))) @ np.linalg.inv(vecs)
        diag["method"] = "eig"
    diag["max_imag"] = float(np.abs(np.imag(log)).max())
    return np.real(log), diag


def _clip_generator(log: np.ndarray) -> tuple[np.ndarray, float]:
    off = ~np.eye(log.shape[0], dtype=bool)
    clipped = log.copy()
    negative = off & (clipped < 0)
    mass = float(-clipped[negative].sum())
    clipped[negative] = 0.0
    return clipped, mass


@dataclass
class FitReport:
    pairs: dict[tuple[int, int], dict] = field(default_factory=dict)
    singles: dict[int, dict] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "pairs": [{"qubits": list(k), **v} for k, v in sorted(self.pairs.items())],
            "singles": [{"qubit": k, **v} for k, v in sorted(self.singles.items())],
        }


def fit_ctmp(cal: CalibrationSet, cross_talk_correction: bool = True) -> CtmpModel:
    return fit_ctmp_with_report(cal, cross_talk_correction)[0]


def fit_ctmp_with_report(cal: CalibrationSet, cross_talk_correction: bool = True) -> tuple[CtmpModel, FitReport]:
    """Fit single- and two-qubit generator rates from calibration data.

    For every pair the pooled 4x4 assignment matrix is log-transformed and its
    negative off-diagonal entries clipped. Two-qubit rates are read directly
    from the generator entries. The single-qubit rate of qubit ``i`` is the mean
    over partners ``j`` and partner bits ``b`` of the ``(0b -> 1b)`` (or
    ``(1b -> 0b)``) entry.

    With ``cross_talk_correction`` each such entry is first reduced by the
    first-order contribution of the fitted pair terms coupling ``i`` to a third
    qubit ``k``: in the (i, j) marginal those terms flip ``x_i`` alone, at a rate
    weighted by how often the pooled inputs had ``x_k`` in the term's source
    state.
    """
    n = cal.num_qubits
    report = FitReport()
    if n == 1:
        log, diag = matrix_log(_single_assignment_matrix(cal, 0), "qubit 0")
        gen, mass = _clip_generator(log)
        report.singles[0] = {**diag, "clipped_mass": mass}
        terms = [
            GeneratorTerm("single_excite", (0,), gen[1, 0]),
            GeneratorTerm("single_decay", (0,), gen[0, 1]),
        ]
        return CtmpModel(1, terms), report

    gens: dict[tuple[int, int], np.ndarray] = {}
    pair_terms: list[GeneratorTerm] = []
    for i, j in itertools.combinations(range(n), 2):
        log, diag = matrix_log(pair_assignment_matrix(cal, i, j), f"pair ({i}, {j})")
        gen, mass = _clip_generator(log)
        gens[(i, j)] = gen
        report.pairs[(i, j)] = {**diag, "clipped_mass": mass}
        p = _PATTERN
        pair_terms += [
            GeneratorTerm("pair_excite", (i, j), gen[p["11"], p["00"]]),
            GeneratorTerm("pair_decay", (i, j), gen[p["00"], p["11"]]),
            GeneratorTerm("exchange_01_10", (i, j), gen[p["10"], p["01"]]),
            GeneratorTerm("exchange_10_01", (i, j), gen[p["01"], p["10"]]),
        ]
    pair_rates = {t.key: t.rate for t in pair_terms}
    labels = np.array([int(label, 2) for label in cal.labels], dtype=np.int64)
    shots = np.array([counts.shots for _, counts in cal.records], dtype=np.float64)

    single_terms = []
    for i in range(n):
        samples = {0: [], 1: []}  # source bit of qubit i -> rate estimates
        for j in range(n):
            if j == i:
                continue
            a, b = (i, j) if i < j else (j, i)
            gen = gens[(a, b)]
            for partner in (0, 1):
                for src in (0, 1):
                    frm = _pattern_index(i, src, j, partner, a)
                    to = _pattern_index(i, 1 - src, j, partner, a)
                    est = gen[to, frm]
                    if cross_talk_correction:
                        est -= _third_party_rate(labels, shots, pair_rates, i, j, src, partner)
                    samples[src].append(est)
        excite = max(0.0, float(np.mean(samples[0])))
        decay = max(0.0, float(np.mean(samples[1])))
        report.singles[i] = {
            "excite_spread": float(np.std(samples[0])),
            "decay_spread": float(np.std(samples[1])),
        }
        single_terms += [
            GeneratorTerm("single_excite", (i,), excite),
            GeneratorTerm("single_decay", (i,), decay),
        ]
    return CtmpModel(n, single_terms + pair_terms), report


def _pattern_index(i: int, xi: int, j: int, xj: int, first: int) -> int:
    return 2 * xi + xj if first == i else 2 * xj + xi


def _third_party_rate(labels, shots, pair_rates, i: int, j: int, src: int, partner: int) -> float:
    """First-order rate at which pair terms on (i, k), k != j, flip x_i away from ``src``.

    ``labels``/``shots`` describe the calibration records; only records prepared
    with ``(x_i, x_j) = (src, partner)`` enter the pooled column, and each term
    is weighted by the share of those shots whose label has ``x_k`` in the
    term's source state.
    """
    pooled = (((labels >> i) & 1) == src) & (((labels >> j) & 1) == partner)
    weight = shots[pooled]
    if weight.sum() == 0:
        return 0.0
    pooled_labels = labels[pooled]
    total = 0.0
    for (kind, (a, b)), rate in pair_rates.items():
        if rate == 0.0 or i not in (a, b) or j in (a, b):
            continue
        k = b if a == i else a
        source = KIND_PATTERNS[kind][0]
        bit_i, bit_k = (int(source[0]), int(source[1])) if a == i else (int(source[1]), int(source[0]))
        if bit_i != src:
            continue
        share = weight[((pooled_labels >> k) & 1) == bit_k].sum() / weight.sum()
        total += rate * share
    return total
