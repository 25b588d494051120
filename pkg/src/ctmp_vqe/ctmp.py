"""Continuous-time Markov process (CTMP) model of correlated readout error.

The assignment matrix is modelled as ``A = exp(G)`` with ``G = sum_i r_i G_i``
and ``G_i = |b><a| - |a><a|`` for a readout transition ``a -> b`` acting on one
qubit or a pair of qubits.

Two-bit patterns are written ``"ab"`` where ``a`` is the bit of the *first*
listed qubit and ``b`` the bit of the second. Pair terms are stored with the
smaller qubit first; an exchange term given in the other order is flipped to
the opposite exchange direction.

Matrices use the (row = target, column = source) convention throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ArgumentError, ShapeError, SizeError, StaleModelError, ValidityError
from .grouping import DiagonalTerms, check_terms_width, counts_standard_error, diagonal_values, expectation_from_counts
from .statevector import CountsMap, bitstring, parse_bitstring

# kind -> (source pattern, target pattern)
KIND_PATTERNS = {
    "single_excite": ("0", "1"),
    "single_decay": ("1", "0"),
    "pair_excite": ("00", "11"),
    "pair_decay": ("11", "00"),
    "exchange_01_10": ("01", "10"),
    "exchange_10_01": ("10", "01"),
}
SINGLE_KINDS = ("single_excite", "single_decay")
PAIR_KINDS = ("pair_excite", "pair_decay", "exchange_01_10", "exchange_10_01")
_SWAPPED = {"exchange_01_10": "exchange_10_01", "exchange_10_01": "exchange_01_10"}

EXACT_GAMMA_MAX_QUBITS = 16
DENSE_MAX_QUBITS = 10
MAX_DEFAULT_SAMPLES = 10**8
_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class GeneratorTerm:
    kind: str
    qubits: tuple[int, ...]
    rate: float

    def __post_init__(self):
        if self.kind not in KIND_PATTERNS:
            raise ValidityError(f"unknown generator kind {self.kind!r}")
        qubits = tuple(int(q) for q in self.qubits)
        arity = len(KIND_PATTERNS[self.kind][0])
        if len(qubits) != arity:
            raise ValidityError(f"{self.kind} needs {arity} qubit(s), got {qubits}")
        if arity == 2:
            if qubits[0] == qubits[1]:
                raise ValidityError(f"{self.kind} needs two distinct qubits, got {qubits}")
            if qubits[0] > qubits[1]:
                qubits = (qubits[1], qubits[0])
                object.__setattr__(self, "kind", _SWAPPED.get(self.kind, self.kind))
        if any(q < 0 for q in qubits):
            raise ValidityError(f"negative qubit index in {qubits}")
        rate = float(self.rate)
        if not rate >= 0.0 or not math.isfinite(rate):
            raise ValidityError(f"rate must be finite and >= 0, got {self.rate!r}")
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "rate", rate)

    @property
    def key(self) -> tuple[str, tuple[int, ...]]:
        return self.kind, self.qubits

    @property
    def is_pair(self) -> bool:
        return len(self.qubits) == 2

    def masks(self) -> tuple[int, int, int]:
        """``(mask, source, flip)``: the term applies to x iff ``x & mask == source``."""
        src, dst = KIND_PATTERNS[self.kind]
        mask = source = flip = 0
        for q, a, b in zip(self.qubits, src, dst):
            mask |= 1 << q
            source |= int(a) << q
            if a != b:
                flip |= 1 << q
        return mask, source, flip


@dataclass
class _TermArrays:
    mask: np.ndarray
    source: np.ndarray
    flip: np.ndarray
    rate: np.ndarray


class CtmpModel:
    """Generator terms with nonnegative rates plus the cached bound ``gamma``.

    ``gamma`` is computed at construction; if ``terms`` is later modified the
    model reports itself stale and refuses to be used for mitigation until
    :meth:`refresh_gamma` is called.
    """

    def __init__(self, num_qubits: int, terms: Iterable[GeneratorTerm] = (), gamma_mode: str | None = None):
        if num_qubits < 1:
            raise SizeError("a model needs at least one qubit")
        self.num_qubits = int(num_qubits)
        self.terms: list[GeneratorTerm] = []
        seen = set()
        for term in terms:
            if max(term.qubits) >= self.num_qubits:
                raise ValidityError(f"term {term} out of range for {self.num_qubits} qubits")
            if term.key in seen:
                raise ValidityError(f"duplicate term {term.key}")
            seen.add(term.key)
            self.terms.append(term)
        self.gamma_mode = gamma_mode
        self.refresh_gamma(gamma_mode)

    # -- bookkeeping -------------------------------------------------------

    def _fingerprint(self):
        return tuple(self.terms)

    def refresh_gamma(self, mode: str | None = None) -> float:
        self.gamma = compute_gamma(self, mode)
        self._gamma_key = self._fingerprint()
        self._arrays = None
        return self.gamma

    def is_stale(self) -> bool:
        return self._fingerprint() != self._gamma_key

    def check_current(self) -> None:
        if self.is_stale():
            raise StaleModelError("model terms changed since gamma was computed; call refresh_gamma()")

    def arrays(self) -> _TermArrays:
        self.check_current()
        if self._arrays is None:
            self._arrays = _term_arrays(self.terms)
        return self._arrays

    # -- queries -----------------------------------------------------------

    def rate(self, kind: str, qubits: Sequence[int]) -> float:
        probe = GeneratorTerm(kind, tuple(qubits), 0.0)
        for term in self.terms:
            if term.key == probe.key:
                return term.rate
        return 0.0

    def rates_dict(self) -> dict[tuple[str, tuple[int, ...]], float]:
        return {t.key: t.rate for t in self.terms}

    def single_terms(self) -> list[GeneratorTerm]:
        return [t for t in self.terms if not t.is_pair]

    def pair_terms(self) -> list[GeneratorTerm]:
        return [t for t in self.terms if t.is_pair]

    def escape_rates(self, states: np.ndarray) -> np.ndarray:
        """Gamma(x) = -<x|G|x>, the total outflow rate of each state."""
        states = np.asarray(states, dtype=np.int64)
        arr = _term_arrays(self.terms)
        out = np.empty(states.shape, dtype=np.float64)
        flat, dest = states.ravel(), out.reshape(-1)
        step = max(1, _CHUNK_ELEMENTS // max(1, arr.rate.size))
        for start in range(0, flat.size, step):
            block = flat[start:start + step]
            match = (block[:, None] & arr.mask) == arr.source
            dest[start:start + step] = match @ arr.rate
        return out

    def restrict(self, qubits: Sequence[int]) -> "CtmpModel":
        """Sub-model on ``qubits``, relabelled ``0..len(qubits)-1`` in the given order."""
        index = {q: i for i, q in enumerate(qubits)}
        terms = [
            GeneratorTerm(t.kind, tuple(index[q] for q in t.qubits), t.rate)
            for t in self.terms
            if all(q in index for q in t.qubits)
        ]
        return CtmpModel(len(qubits), terms)

    def scaled(self, factor: float) -> "CtmpModel":
        return CtmpModel(self.num_qubits, [GeneratorTerm(t.kind, t.qubits, t.rate * factor) for t in self.terms])

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "num_qubits": self.num_qubits,
            "terms": [{"kind": t.kind, "qubits": list(t.qubits), "rate": t.rate} for t in self.terms],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "CtmpModel":
        try:
            n = int(data["num_qubits"])
            terms = [GeneratorTerm(e["kind"], tuple(e["qubits"]), e["rate"]) for e in data["terms"]]
        except (KeyError, TypeError) as exc:
            raise ValidityError(f"malformed model file: {exc}") from exc
        return cls(n, terms)

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "CtmpModel":
        return cls.from_json_dict(json.loads(text))

    def __repr__(self) -> str:
        return f"CtmpModel(num_qubits={self.num_qubits}, terms={len(self.terms)}, gamma={self.gamma:.4g})"


def _term_arrays(terms: Sequence[GeneratorTerm]) -> _TermArrays:
    masks = np.array([t.masks() for t in terms], dtype=np.int64).reshape(-1, 3)
    rates = np.array([t.rate for t in terms], dtype=np.float64)
    keep = rates > 0
    return _TermArrays(masks[keep, 0], masks[keep, 1], masks[keep, 2], rates[keep])


def compute_gamma(model: CtmpModel, mode: str | None = None) -> float:
    """Noise-strength bound gamma.

    ``"exact"`` enumerates all 2**n strings (n <= 16) and returns max Gamma(x).
    ``"upper_bound"`` sums per-qubit and per-pair maxima and is never below the
    exact value. ``None`` picks exact when enumerable.
    """
    n = model.num_qubits
    if mode is None:
        mode = "exact" if n <= EXACT_GAMMA_MAX_QUBITS else "upper_bound"
    if mode == "exact":
        if n > EXACT_GAMMA_MAX_QUBITS:
            raise SizeError(f"exact gamma limited to {EXACT_GAMMA_MAX_QUBITS} qubits; use mode='upper_bound'")
        if not model.terms:
            return 0.0
        return float(model.escape_rates(np.arange(1 << n, dtype=np.int64)).max())
    if mode != "upper_bound":
        raise ValidityError(f"unknown gamma mode {mode!r}")
    # each group's terms have mutually exclusive source patterns, so a state
    # matches at most one of them
    groups: dict[tuple[int, ...], dict[str, float]] = {}
    for t in model.terms:
        src = KIND_PATTERNS[t.kind][0]
        slot = groups.setdefault(t.qubits, {})
        slot[src] = slot.get(src, 0.0) + t.rate
    return float(sum(max(slot.values()) for slot in groups.values()))


def dense_generator(model: CtmpModel) -> np.ndarray:
    """G as a dense 2**n x 2**n matrix (oracle; n <= 10)."""
    n = model.num_qubits
    if n > DENSE_MAX_QUBITS:
        raise SizeError(f"dense generator limited to {DENSE_MAX_QUBITS} qubits")
    dim = 1 << n
    x = np.arange(dim, dtype=np.int64)
    gen = np.zeros((dim, dim))
    for term in model.terms:
        mask, source, flip = term.masks()
        src = x[(x & mask) == source]
        np.add.at(gen, (src ^ flip, src), term.rate)
        np.add.at(gen, (src, src), -term.rate)
    return gen


def random_model(
    num_qubits: int,
    rng: np.random.Generator,
    low: float = 0.0,
    high: float = 0.05,
    kinds: Sequence[str] = tuple(KIND_PATTERNS),
) -> CtmpModel:
    """Model with every allowed term present and rates uniform in [low, high]."""
    terms = []
    for q in range(num_qubits):
        for kind in SINGLE_KINDS:
            if kind in kinds:
                terms.append(GeneratorTerm(kind, (q,), rng.uniform(low, high)))
    for i in range(num_qubits):
        for j in range(i + 1, num_qubits):
            for kind in PAIR_KINDS:
                if kind in kinds:
                    terms.append(GeneratorTerm(kind, (i, j), rng.uniform(low, high)))
    return CtmpModel(num_qubits, terms)


# ---------------------------------------------------------------------------
# Markov-chain kernels
# ---------------------------------------------------------------------------


def _pick_terms(states: np.ndarray, arr: _TermArrays, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """For each state, the matching term whose cumulative-rate interval holds ``target``.

    Returns ``(jumped, flips)``: whether ``target < Gamma(x)`` and the XOR mask to apply.
    """
    match = (states[:, None] & arr.mask) == arr.source
    cum = np.cumsum(match * arr.rate, axis=1)
    total = cum[:, -1]
    jumped = targets < total
    idx = np.count_nonzero(cum[jumped] <= targets[jumped, None], axis=1)
    np.minimum(idx, arr.rate.size - 1, out=idx)
    flips = np.zeros(states.shape, dtype=np.int64)
    flips[jumped] = arr.flip[idx]
    return jumped, flips


def _chunks(total: int, width: int):
    step = max(1, _CHUNK_ELEMENTS // max(1, width))
    for start in range(0, total, step):
        yield slice(start, min(total, start + step))


def apply_readout_noise_batch(states: np.ndarray, model: CtmpModel, rng: np.random.Generator) -> np.ndarray:
    """Sample each entry of ``states`` through ``exp(G)`` by simulating the CTMP for unit time."""
    states = np.array(states, dtype=np.int64, copy=True).ravel()
    arr = model.arrays()
    if arr.rate.size == 0 or states.size == 0:
        return states
    for sl in _chunks(states.size, arr.rate.size):
        x = states[sl]
        active = np.arange(x.size)
        clock = np.zeros(x.size)
        while active.size:
            cur = x[active]
            match = (cur[:, None] & arr.mask) == arr.source
            escape = match @ arr.rate
            live = escape > 0
            active, cur, escape = active[live], cur[live], escape[live]
            clock_a = clock[active] + rng.standard_exponential(active.size) / escape
            live = clock_a <= 1.0
            active, cur, escape, clock_a = active[live], cur[live], escape[live], clock_a[live]
            if not active.size:
                break
            clock[active] = clock_a
            targets = rng.random(active.size) * escape
            _, flips = _pick_terms(cur, arr, np.minimum(targets, np.nextafter(escape, 0)))
            x[active] = cur ^ flips
        states[sl] = x
    return states


def apply_readout_noise(ideal: str, model: CtmpModel, rng: np.random.Generator) -> str:
    """Noisy readout of one ideal outcome bitstring (qubit 0 rightmost)."""
    value = parse_bitstring(ideal, model.num_qubits)
    return bitstring(apply_readout_noise_batch(np.array([value]), model, rng)[0], model.num_qubits)


def noisy_counts(counts: CountsMap, model: CtmpModel, rng: np.random.Generator) -> CountsMap:
    """Pass every shot of ``counts`` through the readout channel."""
    if counts.num_qubits != model.num_qubits:
        raise ShapeError("counts and model differ in qubit count")
    return CountsMap.from_samples(counts.num_qubits, apply_readout_noise_batch(counts.samples(), model, rng))


def default_num_samples(model: CtmpModel, total_shots: int) -> int:
    return int(min(MAX_DEFAULT_SAMPLES, math.ceil(math.exp(4.0 * model.gamma)) * total_shots))


@dataclass
class SignedAccumulator:
    """Running (sum, sum of squares, count); merges additively across workers."""

    total: float = 0.0
    total_sq: float = 0.0
    count: int = 0

    def add(self, values: np.ndarray) -> None:
        self.total += float(values.sum())
        self.total_sq += float(np.dot(values, values))
        self.count += int(values.size)

    def merge(self, other: "SignedAccumulator") -> "SignedAccumulator":
        return SignedAccumulator(self.total + other.total, self.total_sq + other.total_sq, self.count + other.count)

    @property
    def mean(self) -> float:
        return self.total / self.count

    @property
    def std_error(self) -> float:
        if self.count < 2:
            return float("inf")
        var = (self.total_sq - self.count * self.mean**2) / (self.count - 1)
        return math.sqrt(max(var, 0.0) / self.count)


def mitigate_expectation(
    counts: CountsMap,
    model: CtmpModel,
    diagonal_terms: DiagonalTerms,
    num_samples: int | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[float, float]:
    """Signed Monte-Carlo estimate of ``sum_x O(x) (A^-1 p)(x)`` from noisy counts.

    With ``B = I + G/gamma``, ``A^-1 = exp(2 gamma) sum_k (-1)^k Pois_gamma(k) B^k``.
    Each sample draws ``x`` from the counts, ``k ~ Poisson(gamma)``, walks ``k``
    steps of the ``B`` chain and scores ``(-1)^k exp(2 gamma) O(x_k)``.

    Returns ``(estimate, standard_error)``.
    """
    if counts.num_qubits != model.num_qubits:
        raise ShapeError("counts and model differ in qubit count")
    check_terms_width(model.num_qubits, diagonal_terms)
    model.check_current()
    if counts.shots <= 0:
        raise ValidityError("empty counts")
    gamma = model.gamma
    if gamma == 0.0:
        return expectation_from_counts(counts, diagonal_terms), counts_standard_error(counts, diagonal_terms)
    if rng is None:
        raise ValidityError("mitigation needs an explicit random generator")
    if num_samples is None:
        num_samples = default_num_samples(model, counts.shots)
    if num_samples < 1:
        raise ArgumentError("num_samples must be >= 1")

    arr = model.arrays()
    scale = math.exp(2.0 * gamma)
    cdf = np.cumsum(counts.counts, dtype=np.float64)
    cdf /= cdf[-1]
    acc = SignedAccumulator()
    for sl in _chunks(num_samples, max(arr.rate.size, 8)):
        size = sl.stop - sl.start
        pick = np.minimum(np.searchsorted(cdf, rng.random(size), side="right"), cdf.size - 1)
        x = counts.outcomes[pick]
        k = rng.poisson(gamma, size)
        for step in range(1, int(k.max(initial=0)) + 1):
            active = np.flatnonzero(k >= step)
            cur = x[active]
            # one uniform decides both stay-vs-jump and which generator fires
            _, flips = _pick_terms(cur, arr, rng.random(active.size) * gamma)
            x[active] = cur ^ flips
        sign = 1.0 - 2.0 * (k & 1)
        acc.add(sign * scale * diagonal_values(x, diagonal_terms))
    return acc.mean, acc.std_error


def dense_mitigated_expectation(counts: CountsMap, model: CtmpModel, diagonal_terms: DiagonalTerms) -> float:
    """Oracle value ``sum_x O(x) (exp(-G) p)(x)`` for the empirical distribution ``p``."""
    from scipy.linalg import expm

    dim = 1 << model.num_qubits
    p = np.zeros(dim)
    p[counts.outcomes] = counts.probabilities()
    q = expm(-dense_generator(model)) @ p
    return float(diagonal_values(np.arange(dim), diagonal_terms) @ q)
