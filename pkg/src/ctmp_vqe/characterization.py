"""Group fitted readout-error rates by device distance and summarize them."""

from __future__ import annotations

import csv
import io
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ctmp import CtmpModel
from .errors import ArgumentError, SizeError, ValidityError

UNREACHABLE = -1
"""Distance marker for qubit pairs in different connected components."""

REPORT_KINDS = {
    "pair_excite": "excite",
    "pair_decay": "decay",
    "exchange_01_10": "exchange",
    "exchange_10_01": "exchange",
    "single_excite": "single_excite",
    "single_decay": "single_decay",
}


@dataclass
class CouplingGraph:
    """Undirected device connectivity."""

    num_qubits: int
    edges: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self):
        if self.num_qubits < 1:
            raise SizeError("coupling graph needs at least one qubit")
        seen = set()
        clean = []
        for edge in self.edges:
            i, j = (int(v) for v in edge)
            if i == j:
                raise ValidityError(f"self-loop on qubit {i}")
            if not (0 <= i < self.num_qubits and 0 <= j < self.num_qubits):
                raise ValidityError(f"edge ({i}, {j}) out of range for {self.num_qubits} qubits")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValidityError(f"duplicate edge {key}")
            seen.add(key)
            clean.append(key)
        self.edges = clean
        self._adjacency = [[] for _ in range(self.num_qubits)]
        for i, j in clean:
            self._adjacency[i].append(j)
            self._adjacency[j].append(i)
        self._distances: dict[int, list[int]] = {}

    def neighbors(self, q: int) -> list[int]:
        return list(self._adjacency[q])

    def distances_from(self, source: int) -> list[int]:
        """BFS edge counts from ``source``; UNREACHABLE where no path exists."""
        if source not in self._distances:
            dist = [UNREACHABLE] * self.num_qubits
            dist[source] = 0
            queue = deque([source])
            while queue:
                u = queue.popleft()
                for v in self._adjacency[u]:
                    if dist[v] == UNREACHABLE:
                        dist[v] = dist[u] + 1
                        queue.append(v)
            self._distances[source] = dist
        return self._distances[source]

    def to_json_dict(self) -> dict:
        return {"num_qubits": self.num_qubits, "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "CouplingGraph":
        return cls(int(data["num_qubits"]), [tuple(e) for e in data["edges"]])

    @classmethod
    def loads(cls, text: str) -> "CouplingGraph":
        return cls.from_json_dict(json.loads(text))

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


def qubit_distance(graph: CouplingGraph, i: int, j: int) -> int:
    """Shortest-path edge count between two distinct qubits, or UNREACHABLE."""
    n = graph.num_qubits
    if not (0 <= i < n and 0 <= j < n):
        raise ArgumentError(f"qubits ({i}, {j}) out of range for {n} qubits")
    if i == j:
        raise ArgumentError(f"distance needs two distinct qubits, got {i} twice")
    return graph.distances_from(i)[j]


@dataclass(frozen=True)
class RateRecord:
    kind: str
    qubits: tuple[int, ...]
    distance: int | None
    rate: float

    @property
    def is_pair(self) -> bool:
        return len(self.qubits) == 2


def _sort_key(record: RateRecord):
    distance = record.distance if record.distance is not None else 0
    if distance == UNREACHABLE:
        distance = float("inf")
    return record.kind, distance, record.qubits


def group_rates(model: CtmpModel, graph: CouplingGraph, include_singles: bool = False) -> list[RateRecord]:
    """One record per pair term, tagged with its graph distance.

    The two exchange directions share the reporting kind ``exchange``. Single-qubit
    terms carry no distance and are only listed when ``include_singles`` is set.
    """
    if model.num_qubits != graph.num_qubits:
        raise SizeError(f"model has {model.num_qubits} qubits but graph has {graph.num_qubits}")
    records = []
    for term in model.terms:
        if term.is_pair:
            i, j = term.qubits
            records.append(RateRecord(REPORT_KINDS[term.kind], term.qubits, qubit_distance(graph, i, j), term.rate))
        elif include_singles:
            records.append(RateRecord(REPORT_KINDS[term.kind], term.qubits, None, term.rate))
    records.sort(key=_sort_key)
    return records


def group_by_key(records: Iterable[RateRecord]) -> dict[tuple[str, int | None], list[float]]:
    groups: dict[tuple[str, int | None], list[float]] = {}
    for rec in sorted(records, key=_sort_key):
        groups.setdefault((rec.kind, rec.distance), []).append(rec.rate)
    return groups


@dataclass(frozen=True)
class QuartileSummary:
    q1: float | None
    median: float | None
    q3: float | None
    count: int
    zeros: int


def quartiles(rates: Sequence[float]) -> QuartileSummary:
    """Linear-interpolation quartiles over the nonzero rates; zeros are only counted."""
    values = np.asarray(rates, dtype=float)
    nonzero = values[values > 0.0]
    zeros = int(values.size - nonzero.size)
    if nonzero.size == 0:
        return QuartileSummary(None, None, None, int(values.size), zeros)
    q1, med, q3 = np.percentile(nonzero, [25.0, 50.0, 75.0])
    return QuartileSummary(float(q1), float(med), float(q3), int(values.size), zeros)


def summarize_quartiles(groups: Mapping) -> dict:
    """Per-key quartile summary of a ``{key: rates}`` mapping."""
    return {key: quartiles(rates) for key, rates in groups.items()}


def records_csv(records: Sequence[RateRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["kind", "distance", "qubit_i", "qubit_j", "rate"])
    for rec in records:
        qj = rec.qubits[1] if rec.is_pair else ""
        writer.writerow([rec.kind, _distance_text(rec.distance), rec.qubits[0], qj, repr(rec.rate)])
    return buf.getvalue()


def summary_csv(summary: Mapping[tuple[str, int | None], QuartileSummary]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["kind", "distance", "q1", "median", "q3", "count", "zeros"])
    for (kind, distance), s in summary.items():
        writer.writerow([kind, _distance_text(distance), _num(s.q1), _num(s.median), _num(s.q3), s.count, s.zeros])
    return buf.getvalue()


def _distance_text(distance: int | None) -> str:
    if distance is None:
        return ""
    return "unreachable" if distance == UNREACHABLE else str(distance)


def _num(value: float | None) -> str:
    return "" if value is None else repr(value)


@dataclass
class ModelComparison:
    name: str
    locality: str
    rates: list[float]
    median: float | None


def compare_models(models: Mapping[str, CtmpModel]) -> list[ModelComparison]:
    """Nonzero rates of each model split into 1-qubit and 2-qubit listings."""
    if not models:
        raise ArgumentError("compare_models needs at least one model")
    table = []
    for name, model in models.items():
        for locality, terms in (("1-qubit", model.single_terms()), ("2-qubit", model.pair_terms())):
            rates = sorted(t.rate for t in terms if t.rate > 0.0)
            median = float(np.median(rates)) if rates else None
            table.append(ModelComparison(name, locality, rates, median))
    return table


def comparison_csv(table: Sequence[ModelComparison]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "locality", "rate"])
    for row in table:
        for rate in row.rates:
            writer.writerow([row.name, row.locality, repr(rate)])
    return buf.getvalue()


def comparison_summary_csv(table: Sequence[ModelComparison]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "locality", "count", "median"])
    for row in table:
        writer.writerow([row.name, row.locality, len(row.rates), _num(row.median)])
    return buf.getvalue()
