"""Merge per-attribute SIGs into one graph and tabulate cross-attribute effects.

Operationalizations citing the same catalog reference (layer, parameter,
sub-parameter) become one node named after the reference slug, so a
technique shared by several attributes shows all of its consequences in
one place.  Goals and claims keep their ids; ids that clash between sigs
are qualified with the attribute name.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping

from .catalog import GROUP_ORDER, AttributeGroup
from .dsl import DependabilityModel
from .sig import (
    ConflictRecord,
    ContributionLink,
    Decomposition,
    SigError,
    SigGraph,
    Softgoal,
    SoftgoalKind,
    build_graph,
    effect_table,
)


class MergeConflict(SigError):
    code = "MergeConflict"


@dataclass(frozen=True)
class IntegratedModel:
    name: str
    graph: SigGraph
    # node id -> attribute groups whose sig contributed the node
    provenance: Mapping[str, tuple[AttributeGroup, ...]]
    # node id -> (attribute, original id) pairs
    origins: Mapping[str, tuple[tuple[AttributeGroup, str], ...]]


class RowClass(enum.Enum):
    HARMONIOUS = "harmonious"
    CONFLICTING = "conflicting"
    ADVERSE = "adverse"
    INERT = "inert"


def classify(values) -> RowClass:
    values = list(values)
    pos = any(v > 0 for v in values)
    neg = any(v < 0 for v in values)
    if pos and neg:
        return RowClass.CONFLICTING
    if neg:
        return RowClass.ADVERSE
    if pos:
        return RowClass.HARMONIOUS
    return RowClass.INERT


@dataclass(frozen=True)
class TradeoffMatrix:
    rows: tuple[str, ...]
    columns: tuple[str, ...]
    column_attributes: Mapping[str, AttributeGroup]
    cells: Mapping[tuple[str, str], int]
    diagnostics: tuple[ConflictRecord, ...] = ()

    def row(self, op: str) -> dict[str, int]:
        return {c: self.cells[(op, c)] for c in self.columns}

    def classification(self, op: str) -> RowClass:
        return classify(self.row(op).values())

    def by_attribute(self, op: str) -> dict[AttributeGroup, int]:
        """Row keyed by attribute; only meaningful with one root per attribute."""
        return {self.column_attributes[c]: v for c, v in self.row(op).items()}

    def to_dict(self) -> dict:
        return {
            "columns": [
                {"id": c, "attribute": self.column_attributes[c].ident} for c in self.columns
            ],
            "rows": [
                {
                    "id": op,
                    "effects": self.row(op),
                    "class": self.classification(op).value,
                }
                for op in self.rows
            ],
            "diagnostics": [d.describe() for d in self.diagnostics],
        }

    def format_text(self) -> str:
        header = ["operationalization"] + list(self.columns) + ["class"]
        body = [
            [op] + [f"{self.cells[(op, c)]:+d}" for c in self.columns] + [self.classification(op).value]
            for op in self.rows
        ]
        widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
        lines = []
        for r in [header] + body:
            cells = [r[0].ljust(widths[0])]
            cells += [v.rjust(w) for v, w in zip(r[1:-1], widths[1:-1])]
            cells.append(r[-1].ljust(widths[-1]))
            lines.append("  ".join(cells).rstrip())
        return "\n".join(lines) + "\n"


def integrate(model: DependabilityModel) -> IntegratedModel:
    groups = sorted(model.sigs, key=GROUP_ORDER.__getitem__)

    # ids that appear in more than one sig and are not merged by reference
    owners: dict[str, set] = {}
    for group in groups:
        for g in model.sigs[group].softgoals:
            if not _merges(g):
                owners.setdefault(g.id, set()).add(group)

    rename: dict[tuple[AttributeGroup, str], str] = {}
    nodes: dict[str, Softgoal] = {}
    provenance: dict[str, list[AttributeGroup]] = {}
    origins: dict[str, list[tuple[AttributeGroup, str]]] = {}
    by_ref: dict = {}

    for group in groups:
        graph = model.sigs[group]
        for g in graph.softgoals:
            if g.catalog_ref is not None and g.id not in graph.roots:
                other = by_ref.get(g.catalog_ref)
                if other is not None and other.kind is not g.kind:
                    raise MergeConflict(
                        f"{g.catalog_ref} is a {other.kind.value} in one sig and a {g.kind.value} in another"
                    )
                by_ref.setdefault(g.catalog_ref, g)
            if _merges(g):
                new_id = g.catalog_ref.slug
                node = Softgoal(new_id, g.kind, g.catalog_ref.layer, g.catalog_ref, None)
            else:
                new_id = g.id if len(owners[g.id]) == 1 else f"{group.ident}.{g.id}"
                node = Softgoal(new_id, g.kind, g.layer, g.catalog_ref, g.attribute)
            existing = nodes.get(new_id)
            if existing is not None and existing != node:
                raise MergeConflict(f"node {new_id!r} would merge incompatible softgoals")
            nodes[new_id] = node
            rename[(group, g.id)] = new_id
            if group not in provenance.setdefault(new_id, []):
                provenance[new_id].append(group)
            origins.setdefault(new_id, []).append((group, g.id))

    links = set()
    decomps: dict[str, Decomposition] = {}
    for group in groups:
        graph = model.sigs[group]
        for l in graph.links:
            links.add(ContributionLink(rename[(group, l.source)], rename[(group, l.target)], l.kind))
        for d in graph.decompositions:
            parent = rename[(group, d.parent)]
            children = tuple(dict.fromkeys(rename[(group, c)] for c in d.children))
            if parent in decomps and decomps[parent] != Decomposition(parent, children, d.mode):
                raise MergeConflict(f"merged node {parent!r} has two different decompositions")
            decomps[parent] = Decomposition(parent, children, d.mode)

    merged = build_graph(nodes.values(), links, decomps.values())
    return IntegratedModel(
        model.name,
        merged,
        {k: tuple(v) for k, v in sorted(provenance.items())},
        {k: tuple(v) for k, v in sorted(origins.items())},
    )


def _merges(g: Softgoal) -> bool:
    return g.kind is SoftgoalKind.OPERATIONALIZATION and g.catalog_ref is not None


def tradeoff_matrix(integrated: IntegratedModel) -> TradeoffMatrix:
    graph = integrated.graph
    table, diags = effect_table(graph)
    root_attr = {r: graph.node(r).attribute for r in graph.roots}
    columns = tuple(sorted(root_attr, key=lambda r: (GROUP_ORDER[root_attr[r]], r)))
    rows = tuple(sorted(table))
    cells = {(op, c): table[op][c] for op in rows for c in columns}
    return TradeoffMatrix(rows, columns, root_attr, cells, diags)
