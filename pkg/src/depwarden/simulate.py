"""Cost model for horizontal fragmentation of a synthetic fact table.

A fact table of ``fact_rows`` rows carries a fragmentation key with
``key_cardinality`` distinct values.  A plan assigns each key value to a
fragment; a query names the key values it needs and the planner scans
every fragment holding one of them.  Response cost is

    overhead * fragments_touched + rows_scanned / scan_rate

in abstract model time, while maintenance effort grows linearly with the
number of fragments, ``M(F) = m0 + m1 * F``.  Sweeping F exposes the
compromise between faster queries and harder upkeep.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np


class SimulationError(ValueError):
    code = "SimulationError"


class InvalidSpec(SimulationError):
    code = "InvalidSpec"


class FragmentCountOutOfRange(SimulationError):
    code = "FragmentCountOutOfRange"


class InvalidRange(SimulationError):
    code = "InvalidRange"


class InvalidQuery(SimulationError):
    code = "InvalidQuery"


DEFAULT_OVERHEAD = 10.0
DEFAULT_SCAN_RATE = 1000.0
DEFAULT_M0 = 10.0
DEFAULT_M1 = 1.0


class Method(enum.Enum):
    HASH = "hash"
    RANGE = "range"


@dataclass(frozen=True)
class SchemaSpec:
    fact_rows: int
    key_cardinality: int
    seed: int = 0
    distribution: str = "uniform"

    def __post_init__(self):
        for name in ("fact_rows", "key_cardinality", "seed"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise InvalidSpec(f"{name} must be an integer, got {value!r}")
        if self.fact_rows < 1 or self.key_cardinality < 1:
            raise InvalidSpec("fact_rows and key_cardinality must be at least 1")
        if self.key_cardinality > self.fact_rows:
            raise InvalidSpec("key_cardinality cannot exceed fact_rows")
        if self.distribution != "uniform":
            raise InvalidSpec(f"unsupported distribution {self.distribution!r}; only 'uniform'")

    @classmethod
    def from_dict(cls, doc: dict) -> "SchemaSpec":
        if not isinstance(doc, dict):
            raise InvalidSpec("schema spec must be a JSON object")
        extra = set(doc) - {"fact_rows", "key_cardinality", "seed", "distribution"}
        if extra:
            raise InvalidSpec(f"unknown schema keys {sorted(extra)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from None


@dataclass(frozen=True, eq=False)
class Schema:
    spec: SchemaSpec
    keys: np.ndarray    # key value of every fact row
    counts: np.ndarray  # rows per key value

    @property
    def fact_rows(self) -> int:
        return self.spec.fact_rows

    @property
    def key_cardinality(self) -> int:
        return self.spec.key_cardinality


def build_schema(spec: SchemaSpec) -> Schema:
    rng = np.random.default_rng(spec.seed)
    keys = rng.integers(0, spec.key_cardinality, size=spec.fact_rows)
    keys.setflags(write=False)
    counts = np.bincount(keys, minlength=spec.key_cardinality)
    counts.setflags(write=False)
    return Schema(spec, keys, counts)


@dataclass(frozen=True)
class FragmentationPlan:
    method: Method
    fragment_count: int
    assignment: tuple[int, ...]  # key value -> fragment id

    def fragment_of(self, value: int) -> int:
        return self.assignment[value]


def _range_blocks(cardinality: int, fragments: int) -> list[int]:
    # Blocks of ceil(C/F) values; tail blocks shrink just enough that every
    # fragment keeps at least one value.
    size = math.ceil(cardinality / fragments)
    out = []
    remaining = cardinality
    for i in range(fragments):
        take = min(size, remaining - (fragments - i - 1))
        out.extend([i] * take)
        remaining -= take
    return out


def make_plan(schema: Schema, method: Method | str, fragment_count: int) -> FragmentationPlan:
    method = Method(method)
    c = schema.key_cardinality
    if not 1 <= fragment_count <= c:
        raise FragmentCountOutOfRange(f"fragment count {fragment_count} outside [1, {c}]")
    if method is Method.HASH:
        assignment = [v % fragment_count for v in range(c)]
    else:
        assignment = _range_blocks(c, fragment_count)
    return FragmentationPlan(method, fragment_count, tuple(assignment))


@dataclass(frozen=True)
class Query:
    id: str
    key_values: frozenset = frozenset()  # empty: every key value
    extra_selectivity: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "key_values", frozenset(self.key_values))
        if not 0 < self.extra_selectivity <= 1:
            raise InvalidQuery(f"{self.id}: extra_selectivity must lie in (0, 1]")

    @classmethod
    def from_dict(cls, doc: dict) -> "Query":
        if not isinstance(doc, dict) or "id" not in doc:
            raise InvalidQuery("each query needs an 'id'")
        extra = set(doc) - {"id", "key_values", "extra_selectivity"}
        if extra:
            raise InvalidQuery(f"{doc['id']}: unknown keys {sorted(extra)}")
        values = doc.get("key_values", [])
        if not isinstance(values, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in values):
            raise InvalidQuery(f"{doc['id']}: key_values must be a list of integers")
        sel = doc.get("extra_selectivity", 1.0)
        if not isinstance(sel, (int, float)) or isinstance(sel, bool):
            raise InvalidQuery(f"{doc['id']}: extra_selectivity must be a number")
        return cls(str(doc["id"]), frozenset(values), float(sel))


def load_workload(text: str) -> list[Query]:
    doc = json.loads(text)
    if not isinstance(doc, list):
        raise InvalidQuery("workload must be a JSON list of queries")
    return [Query.from_dict(q) for q in doc]


@dataclass(frozen=True)
class CostParams:
    overhead: float = DEFAULT_OVERHEAD
    scan_rate: float = DEFAULT_SCAN_RATE

    def __post_init__(self):
        if self.overhead < 0 or self.scan_rate <= 0:
            raise SimulationError("overhead must be >= 0 and scan_rate > 0")


@dataclass(frozen=True)
class CostEstimate:
    fragments_touched: int
    rows_scanned: int
    response_cost: float


def _scope(schema: Schema, query: Query) -> Iterable[int]:
    c = schema.key_cardinality
    bad = [v for v in query.key_values if not 0 <= v < c]
    if bad:
        raise InvalidQuery(f"{query.id}: key values {sorted(bad)} outside [0, {c})")
    return query.key_values or range(c)


def scaled_rows(selectivity: float, rows: int) -> int:
    # decimal reading of the float so 0.7 * 100 is 70, not 71
    return math.ceil(Fraction(repr(selectivity)) * rows)


def query_cost(schema: Schema, plan: FragmentationPlan, query: Query,
               params: CostParams = CostParams()) -> CostEstimate:
    touched = {plan.assignment[v] for v in _scope(schema, query)}
    in_touched = [plan.assignment[v] in touched for v in range(schema.key_cardinality)]
    rows = int(schema.counts[np.asarray(in_touched)].sum())
    scanned = scaled_rows(query.extra_selectivity, rows)
    cost = params.overhead * len(touched) + scanned / params.scan_rate
    return CostEstimate(len(touched), scanned, cost)


def maintainability_cost(plan: FragmentationPlan | int, m0: float = DEFAULT_M0, m1: float = DEFAULT_M1) -> float:
    if m0 < 0 or m1 < 0:
        raise SimulationError("m0 and m1 must be non-negative")
    f = plan if isinstance(plan, int) else plan.fragment_count
    return m0 + m1 * f


@dataclass(frozen=True)
class SweepRow:
    fragment_count: int
    avg_cost: float
    avg_rows_scanned: float
    maintainability: float
    norm_cost: float
    norm_maintainability: float
    objective: float


@dataclass(frozen=True)
class SweepReport:
    method: Method
    weights: tuple[float, float]
    rows: tuple[SweepRow, ...]
    recommendation: int | None

    def row(self, fragment_count: int) -> SweepRow:
        return next(r for r in self.rows if r.fragment_count == fragment_count)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["F", "avg_cost", "M", "norm_cost", "norm_M", "J"])
        for r in self.rows:
            writer.writerow([
                r.fragment_count, _fmt(r.avg_cost), _fmt(r.maintainability),
                _fmt(r.norm_cost), _fmt(r.norm_maintainability), _fmt(r.objective),
            ])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "method": self.method.value,
            "weights": {"w_ar": self.weights[0], "w_m": self.weights[1]},
            "rows": [
                {
                    "F": r.fragment_count,
                    "avg_cost": r.avg_cost,
                    "avg_rows_scanned": r.avg_rows_scanned,
                    "M": r.maintainability,
                    "norm_cost": r.norm_cost,
                    "norm_M": r.norm_maintainability,
                    "J": r.objective,
                }
                for r in self.rows
            ],
            "recommendation": self.recommendation,
        }


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _normalize(value: float, base: float) -> float:
    return 1.0 if base == 0 else value / base


def sweep(
    schema: Schema,
    workload: Sequence[Query],
    method: Method | str,
    fragment_counts: Iterable[int],
    weights: tuple[float, float] = (1.0, 1.0),
    params: CostParams = CostParams(),
    m0: float = DEFAULT_M0,
    m1: float = DEFAULT_M1,
    workers: int = 1,
) -> SweepReport:
    method = Method(method)
    counts = sorted(set(fragment_counts))
    if not workload:
        raise InvalidRange("workload is empty")
    if not counts or counts[0] != 1:
        raise InvalidRange("fragment range must include F=1 (the unfragmented baseline)")
    if counts[-1] > schema.key_cardinality:
        raise InvalidRange(f"fragment range exceeds key cardinality {schema.key_cardinality}")
    w_ar, w_m = weights
    if w_ar < 0 or w_m < 0 or (w_ar == 0 and w_m == 0):
        raise InvalidRange("weights must be non-negative and not both zero")
    for q in workload:
        _scope(schema, q)

    def evaluate(f):
        plan = make_plan(schema, method, f)
        estimates = [query_cost(schema, plan, q, params) for q in workload]
        avg_cost = sum(e.response_cost for e in estimates) / len(estimates)
        avg_rows = sum(e.rows_scanned for e in estimates) / len(estimates)
        return f, avg_cost, avg_rows, maintainability_cost(plan, m0, m1)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(evaluate, counts))
    else:
        results = [evaluate(f) for f in counts]
    results.sort()

    _, base_cost, _, base_m = results[0]
    rows = []
    for f, avg_cost, avg_rows, m in results:
        nc = _normalize(avg_cost, base_cost)
        nm = _normalize(m, base_m)
        rows.append(SweepRow(f, avg_cost, avg_rows, m, nc, nm, w_ar * nc + w_m * nm))
    report = SweepReport(method, (w_ar, w_m), tuple(rows), None)
    return SweepReport(method, (w_ar, w_m), tuple(rows), recommend(report))


def recommend(report: SweepReport, max_cost: float = math.inf, max_m: float = math.inf) -> int | None:
    """Fragment count minimizing J among rows within tolerance; None when nothing qualifies."""
    feasible = [r for r in report.rows if r.avg_cost <= max_cost and r.maintainability <= max_m]
    if not feasible:
        return None
    best = min(feasible, key=lambda r: (r.objective, r.fragment_count))
    return best.fragment_count
