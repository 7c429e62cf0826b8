"""Softgoal interdependency graphs and label propagation.

Contribution links run from a contributing softgoal to the softgoal it
affects; decompositions run from children to their parent.  Evaluation
walks the resulting DAG in topological order, leaves first.

Rule table (child value ``v`` on the numeric scale -2..+2):

    make   v
    help   sign(v) * min(|v|, 1)
    hurt  -sign(v) * min(|v|, 1)
    break -v

An And decomposition yields the minimum of its children, Or the maximum.
A node combines all incoming values by taking the strongest positive
``pos`` and the strongest negative ``neg``: +2 against -2 is a Conflict,
otherwise the larger magnitude wins, and an exact tie of weak values
(+1/-1) is Undecided with a weak-conflict diagnostic.  Conflicts feed 0
downstream.
"""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .catalog import AttributeGroup, Catalog, CatalogRef, Layer, UnknownReference, load_catalog


class SigError(ValueError):
    code = "SigError"


class CycleDetected(SigError):
    code = "CycleDetected"

    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("cycle detected: " + " -> ".join(self.cycle))


class DanglingReference(SigError):
    code = "DanglingReference"


class DuplicateId(SigError):
    code = "DuplicateId"


class DoubleDecomposition(SigError):
    code = "DoubleDecomposition"


class InvalidSoftgoal(SigError):
    code = "InvalidSoftgoal"


class NotALeaf(SigError):
    code = "NotALeaf"


class NotARoot(SigError):
    code = "NotARoot"


class SoftgoalKind(enum.Enum):
    NFR_GOAL = "goal"
    OPERATIONALIZATION = "op"
    CLAIM = "claim"


class LinkKind(enum.Enum):
    MAKE = "make"
    HELP = "help"
    HURT = "hurt"
    BREAK = "break"


class DecompositionMode(enum.Enum):
    AND = "and"
    OR = "or"


class Label(enum.Enum):
    DENIED = -2
    WEAKLY_DENIED = -1
    UNDECIDED = 0
    WEAKLY_SATISFICED = 1
    SATISFICED = 2
    CONFLICT = "conflict"

    @property
    def is_conflict(self) -> bool:
        return self is Label.CONFLICT

    @property
    def numeric(self) -> int:
        """Value fed downstream; a conflict contributes nothing."""
        return 0 if self is Label.CONFLICT else self.value

    @classmethod
    def from_value(cls, value: int) -> "Label":
        return cls(value)


@dataclass(frozen=True)
class Softgoal:
    id: str
    kind: SoftgoalKind
    layer: Layer | None = None
    catalog_ref: CatalogRef | None = None
    attribute: AttributeGroup | None = None


@dataclass(frozen=True)
class ContributionLink:
    source: str
    target: str
    kind: LinkKind

    def sort_key(self):
        return (self.source, self.target, self.kind.value)


@dataclass(frozen=True)
class Decomposition:
    parent: str
    children: tuple[str, ...]
    mode: DecompositionMode = DecompositionMode.AND

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class SigGraph:
    """Validated, canonically ordered graph.  Build with :func:`build_graph`."""

    softgoals: tuple[Softgoal, ...]
    links: tuple[ContributionLink, ...]
    decompositions: tuple[Decomposition, ...]
    _nodes: dict = field(default_factory=dict, compare=False, repr=False)
    _incoming: dict = field(default_factory=dict, compare=False, repr=False)
    _decomp: dict = field(default_factory=dict, compare=False, repr=False)
    _outgoing: dict = field(default_factory=dict, compare=False, repr=False)
    _order: tuple = field(default=(), compare=False, repr=False)

    def node(self, node_id: str) -> Softgoal:
        return self._nodes[node_id]

    def __contains__(self, node_id):
        return node_id in self._nodes

    @property
    def ids(self) -> list[str]:
        return [g.id for g in self.softgoals]

    @property
    def topological_order(self) -> tuple[str, ...]:
        return self._order

    def incoming_links(self, node_id: str) -> list[ContributionLink]:
        return self._incoming[node_id]

    def decomposition_of(self, node_id: str) -> Decomposition | None:
        return self._decomp.get(node_id)

    def has_incoming(self, node_id: str) -> bool:
        return bool(self._incoming[node_id]) or node_id in self._decomp

    def has_outgoing(self, node_id: str) -> bool:
        return bool(self._outgoing[node_id])

    def successors(self, node_id: str) -> list[str]:
        return list(self._outgoing[node_id])

    @property
    def leaves(self) -> list[str]:
        return [g.id for g in self.softgoals if not self.has_incoming(g.id)]

    @property
    def roots(self) -> list[str]:
        return [
            g.id for g in self.softgoals
            if g.kind is SoftgoalKind.NFR_GOAL and not self.has_outgoing(g.id)
        ]

    @property
    def operationalizations(self) -> list[str]:
        return [g.id for g in self.softgoals if g.kind is SoftgoalKind.OPERATIONALIZATION]

    def reaches(self, source: str, target: str) -> bool:
        stack, seen = [source], {source}
        while stack:
            n = stack.pop()
            if n == target:
                return True
            for s in self.successors(n):
                if s not in seen:
                    seen.add(s)
                    stack.append(s)
        return False


def build_graph(
    softgoals: Iterable[Softgoal],
    links: Iterable[ContributionLink] = (),
    decompositions: Iterable[Decomposition] = (),
    catalog: Catalog | None = None,
) -> SigGraph:
    softgoals = list(softgoals)
    links = list(links)
    decompositions = list(decompositions)
    catalog = catalog or load_catalog()

    nodes: dict[str, Softgoal] = {}
    for g in softgoals:
        if g.id in nodes:
            raise DuplicateId(f"duplicate softgoal id {g.id!r}")
        if not g.id:
            raise InvalidSoftgoal("softgoal id must be non-empty")
        if g.kind is SoftgoalKind.NFR_GOAL and g.attribute is None:
            raise InvalidSoftgoal(f"goal {g.id!r} carries no attribute group")
        if g.catalog_ref is not None:
            ref = g.catalog_ref
            try:
                catalog.resolve(ref.layer, ref.parameter, ref.sub_parameter)
            except UnknownReference as exc:
                raise InvalidSoftgoal(f"softgoal {g.id!r}: {exc}") from exc
            if g.layer is not None and g.layer is not ref.layer:
                raise InvalidSoftgoal(f"softgoal {g.id!r}: layer differs from its catalog reference")
        nodes[g.id] = g

    incoming: dict[str, list[ContributionLink]] = {i: [] for i in nodes}
    outgoing: dict[str, list[str]] = {i: [] for i in nodes}
    unique_links = sorted(set(links), key=ContributionLink.sort_key)
    for l in unique_links:
        for end in (l.source, l.target):
            if end not in nodes:
                raise DanglingReference(f"link {l.source} -{l.kind.value}-> {l.target}: unknown node {end!r}")
        if l.source == l.target:
            raise CycleDetected([l.source, l.source])
        incoming[l.target].append(l)
        outgoing[l.source].append(l.target)

    decomp: dict[str, Decomposition] = {}
    for d in decompositions:
        if d.parent not in nodes:
            raise DanglingReference(f"decomposition parent {d.parent!r} is unknown")
        if d.parent in decomp:
            raise DoubleDecomposition(f"{d.parent!r} is decomposed more than once")
        if not d.children:
            raise InvalidSoftgoal(f"decomposition of {d.parent!r} has no children")
        if len(set(d.children)) != len(d.children):
            raise InvalidSoftgoal(f"decomposition of {d.parent!r} repeats a child")
        for c in d.children:
            if c not in nodes:
                raise DanglingReference(f"decomposition of {d.parent!r}: unknown child {c!r}")
            if c == d.parent:
                raise CycleDetected([c, c])
            outgoing[c].append(d.parent)
        decomp[d.parent] = d

    order = _toposort(nodes, outgoing)

    graph = SigGraph(
        softgoals=tuple(nodes[i] for i in sorted(nodes)),
        links=tuple(unique_links),
        decompositions=tuple(sorted(decomp.values(), key=lambda d: d.parent)),
    )
    object.__setattr__(graph, "_nodes", nodes)
    object.__setattr__(graph, "_incoming", incoming)
    object.__setattr__(graph, "_decomp", decomp)
    object.__setattr__(graph, "_outgoing", outgoing)
    object.__setattr__(graph, "_order", order)
    return graph


def _toposort(nodes, outgoing) -> tuple[str, ...]:
    indeg = {i: 0 for i in nodes}
    for src, targets in outgoing.items():
        for t in targets:
            indeg[t] += 1
    heap = [i for i, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        n = heapq.heappop(heap)
        order.append(n)
        for t in outgoing[n]:
            indeg[t] -= 1
            if indeg[t] == 0:
                heapq.heappush(heap, t)
    if len(order) != len(nodes):
        raise CycleDetected(_find_cycle(nodes, outgoing))
    return tuple(order)


def _find_cycle(nodes, outgoing) -> list[str]:
    color = {i: 0 for i in nodes}
    stack: list[str] = []

    def visit(n):
        color[n] = 1
        stack.append(n)
        for t in sorted(outgoing[n]):
            if color[t] == 1:
                return stack[stack.index(t):] + [t]
            if color[t] == 0:
                found = visit(t)
                if found:
                    return found
        stack.pop()
        color[n] = 2
        return None

    for n in sorted(nodes):
        if color[n] == 0:
            found = visit(n)
            if found:
                return found
    return []


# -- propagation ---------------------------------------------------------------


_LABELS = {label.value: label for label in Label if not label.is_conflict}
_LABELS[None] = Label.CONFLICT


def _sign(v: int) -> int:
    return (v > 0) - (v < 0)


def contribution(kind: LinkKind, value: int) -> int:
    if kind is LinkKind.MAKE:
        return value
    if kind is LinkKind.BREAK:
        return -value
    weak = _sign(value) * min(abs(value), 1)
    return weak if kind is LinkKind.HELP else -weak


def combine(inputs: Iterable[int]) -> Label:
    """Fold incoming values into one label (order-free)."""
    values = list(inputs)
    pos = max((v for v in values if v > 0), default=0)
    neg = min((v for v in values if v < 0), default=0)
    if pos == 2 and neg == -2:
        return Label.CONFLICT
    if pos != -neg:
        return Label(pos if pos > -neg else neg)
    return Label.UNDECIDED


@dataclass(frozen=True)
class ConflictRecord:
    node: str
    evidence: tuple[tuple[str, int], ...]
    weak: bool = False
    absorbed_from: tuple[str, ...] = ()

    def describe(self) -> str:
        if self.absorbed_from:
            return f"{self.node}: conflicting input from {', '.join(self.absorbed_from)} counted as undecided"
        ev = ", ".join(f"{src}={val:+d}" for src, val in self.evidence)
        kind = "weak conflict" if self.weak else "conflict"
        return f"{self.node}: {kind} ({ev})"


@dataclass(frozen=True)
class Labeling:
    labels: Mapping[str, Label]
    diagnostics: tuple[ConflictRecord, ...] = ()

    def __getitem__(self, node_id: str) -> Label:
        return self.labels[node_id]

    @property
    def conflicts(self) -> list[str]:
        return [n for n, l in self.labels.items() if l.is_conflict]


def propagate(graph: SigGraph, initial: Mapping[str, Label | int] | None = None) -> Labeling:
    initial = dict(initial or {})
    start: dict[str, int] = {}
    for node_id, label in initial.items():
        if node_id not in graph:
            raise DanglingReference(f"initial label for unknown node {node_id!r}")
        if graph.has_incoming(node_id):
            raise NotALeaf(f"{node_id!r} has incoming edges; only leaves take initial labels")
        value = label.value if isinstance(label, Label) else label
        if value not in _LABELS or value is None:
            raise ValueError(f"initial label for {node_id!r} must be numeric, got {label!r}")
        start[node_id] = value

    # Work on plain ints (None marks a conflict) and build evidence strings
    # only for nodes that end up with a diagnostic.
    values: dict[str, int | None] = {}
    diagnostics: list[ConflictRecord] = []
    for node_id in graph.topological_order:
        links = graph.incoming_links(node_id)
        d = graph.decomposition_of(node_id)
        if not links and d is None:
            values[node_id] = start.get(node_id, 0)
            continue
        inputs = []
        absorbed = []
        for link in links:
            v = values[link.source]
            if v is None:
                absorbed.append(link.source)
                v = 0
            inputs.append(contribution(link.kind, v))
        if d is not None:
            child_values = []
            for c in d.children:
                v = values[c]
                if v is None:
                    absorbed.append(c)
                    v = 0
                child_values.append(v)
            inputs.append(min(child_values) if d.mode is DecompositionMode.AND else max(child_values))
        if absorbed:
            diagnostics.append(ConflictRecord(node_id, (), absorbed_from=tuple(sorted(set(absorbed)))))
        pos = max(max(inputs), 0)
        neg = min(min(inputs), 0)
        if pos == 2 and neg == -2:
            values[node_id] = None
            diagnostics.append(ConflictRecord(node_id, _evidence(links, d, inputs)))
        elif pos == -neg:
            values[node_id] = 0
            if pos:
                diagnostics.append(ConflictRecord(node_id, _evidence(links, d, inputs), weak=True))
        else:
            values[node_id] = pos if pos > -neg else neg

    labels = {i: _LABELS[values[i]] for i in graph.ids}
    return Labeling(labels, tuple(diagnostics))


def _evidence(links, d, inputs) -> tuple[tuple[str, int], ...]:
    names = [f"{l.source}/{l.kind.value}" for l in links]
    if d is not None:
        names.append(f"{d.mode.value}({','.join(d.children)})")
    return tuple(zip(names, inputs))


def _path_effect(graph: SigGraph, source: str, root: str) -> tuple[int, tuple[ConflictRecord, ...]]:
    if source not in graph:
        raise DanglingReference(f"unknown node {source!r}")
    if root not in graph:
        raise DanglingReference(f"unknown node {root!r}")
    if graph.has_incoming(source):
        raise NotALeaf(f"{source!r} is not a leaf")
    if root not in graph.roots:
        raise NotARoot(f"{root!r} is not a root")
    labeling = propagate(graph, {source: Label.SATISFICED})
    label = labeling[root]
    diags = tuple(d for d in labeling.diagnostics if d.node == root) if label.is_conflict else ()
    return label.numeric, diags


def path_effect(graph: SigGraph, source: str, root: str) -> int:
    """Root value when only ``source`` is satisficed (all other leaves undecided)."""
    return _path_effect(graph, source, root)[0]


@dataclass(frozen=True)
class TradeoffEntry:
    operationalization: str
    effects: Mapping[str, int]


@dataclass(frozen=True)
class TradeoffReport:
    entries: tuple[TradeoffEntry, ...]
    diagnostics: tuple[ConflictRecord, ...] = ()

    def __len__(self):
        return len(self.entries)


def effect_table(graph: SigGraph) -> tuple[dict[str, dict[str, int]], tuple[ConflictRecord, ...]]:
    """path_effect for every leaf operationalization against every root."""
    roots = graph.roots
    table: dict[str, dict[str, int]] = {}
    diags: list[ConflictRecord] = []
    for op in graph.operationalizations:
        if graph.has_incoming(op):
            continue
        labeling = propagate(graph, {op: Label.SATISFICED})
        row = {}
        for r in roots:
            label = labeling[r]
            row[r] = label.numeric
            if label.is_conflict:
                diags.extend(d for d in labeling.diagnostics if d.node == r)
        table[op] = row
    return table, tuple(diags)


def detect_tradeoffs(graph: SigGraph) -> TradeoffReport:
    table, diags = effect_table(graph)
    entries = [
        TradeoffEntry(op, row)
        for op, row in sorted(table.items())
        if any(v > 0 for v in row.values()) and any(v < 0 for v in row.values())
    ]
    return TradeoffReport(tuple(entries), diags)
