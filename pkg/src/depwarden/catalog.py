"""Layered dependability parameter taxonomy for data warehouse systems.

The catalog maps every (layer, attribute group) pair to the ordered list of
parameters that influence that attribute in that layer.  Strings are kept
exactly as published, typos included ("mi structured", "hard disc",
"loading Frequency"); a small alias table accepts the usual spellings.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping


class CatalogError(ValueError):
    pass


class Layer(enum.Enum):
    DATA_SOURCE = "ds"
    ETL = "etl"
    DATA_WAREHOUSE = "dw"
    RESTITUTION = "restitution"

    @property
    def ident(self) -> str:
        return self.value

    @classmethod
    def from_ident(cls, ident: str) -> "Layer":
        for layer in cls:
            if layer.value == ident:
                return layer
        raise KeyError(ident)


class AttributeGroup(enum.Enum):
    AVAILABILITY_RELIABILITY = "availability_reliability"
    MAINTAINABILITY = "maintainability"
    SECURITY = "security"

    @property
    def ident(self) -> str:
        return self.value

    @classmethod
    def from_ident(cls, ident: str) -> "AttributeGroup":
        for group in cls:
            if group.value == ident:
                return group
        raise KeyError(ident)


LAYER_ORDER = {layer: i for i, layer in enumerate(Layer)}
GROUP_ORDER = {group: i for i, group in enumerate(AttributeGroup)}


@dataclass(frozen=True)
class Parameter:
    name: str
    sub_parameters: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.name:
            raise CatalogError("parameter name must be non-empty")
        if len(set(self.sub_parameters)) != len(self.sub_parameters):
            raise CatalogError(f"duplicate sub-parameter in {self.name!r}")


@dataclass(frozen=True)
class CatalogRef:
    """A resolved, canonical pointer into the catalog.

    Carries no attribute group: "Optimization" in the data warehouse is the
    same technique whichever attribute cites it.
    """

    layer: Layer
    parameter: str
    sub_parameter: str | None = None

    def sort_key(self):
        return (LAYER_ORDER[self.layer], self.parameter, self.sub_parameter or "")

    @property
    def slug(self) -> str:
        """Dotted identifier form used in model files, e.g. ``dw.optimization.index``."""
        parts = [self.layer.ident, slugify(self.parameter)]
        if self.sub_parameter is not None:
            parts.append(slugify(self.sub_parameter))
        return ".".join(parts)

    def __str__(self):
        if self.sub_parameter is None:
            return f"{self.layer.ident}:{self.parameter}"
        return f"{self.layer.ident}:{self.parameter}.{self.sub_parameter}"


class UnknownReference(CatalogError):
    def __init__(self, message, layer, group, name, suggestion=None):
        super().__init__(message)
        self.layer = layer
        self.group = group
        self.name = name
        self.suggestion = suggestion


class UnknownParameter(UnknownReference):
    code = "UnknownParameter"


class UnknownSubParameter(UnknownReference):
    code = "UnknownSubParameter"


def slugify(name: str) -> str:
    return "_".join(name.lower().split())


def normalize(name: str) -> str:
    return " ".join(name.lower().replace("_", " ").replace("-", " ").split())


def edit_distance(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


SUGGESTION_DISTANCE = 2

# normalized spelling -> canonical string
ALIASES = {
    "semi structured": "mi structured",
    "semistructured": "mi structured",
    "semi-structured": "mi structured",
    "unstructured": "not structured",
    "hard disk": "hard disc",
    "harddisk": "hard disc",
    "loading frequency": "loading Frequency",
    "materialized view": "view",
    "partitioning": "fragmentation",
}


def _p(name, *subs):
    return Parameter(name, tuple(subs))


_STRUCTURATION = ("structured", "mi structured", "not structured")
_OPTIMIZATION = ("index", "fragmentation", "view", "parallelism")
_DATA_QUALITY = ("redundant", "missing", "incomplete", "mistaken")
_USER_MANAGEMENT = ("authentication", "permission", "quotas", "audit", "hierarchy")
_RESTORATION = ("recovery management", "exception management")
_RESTITUTION_TYPE = (
    "Ad hoc query", "parameterizable query", "dashboard", "cube OLAP", "Data Mining",
)

_AR = AttributeGroup.AVAILABILITY_RELIABILITY
_MA = AttributeGroup.MAINTAINABILITY
_SE = AttributeGroup.SECURITY

_EMBEDDED = {
    (Layer.DATA_SOURCE, _AR): (
        _p("Structuration", *_STRUCTURATION),
        _p("Volumetric", "transaction frequency", "recording number"),
        _p("Optimization", *_OPTIMIZATION),
        _p("Data Quality", *_DATA_QUALITY),
        _p("Support", "hard disc", "communication"),
        _p("Replication"),
    ),
    (Layer.DATA_SOURCE, _MA): (
        _p("Documentation", "schema", "metadata"),
        _p("Structuration", *_STRUCTURATION),
        _p("Optimization", *_OPTIMIZATION),
        _p("Support", "hard disc", "communication"),
    ),
    (Layer.DATA_SOURCE, _SE): (
        _p("User Management", *_USER_MANAGEMENT),
        _p("Data", "integrity", "authenticity", "completeness", "locking"),
        _p("Support", "firewall", "encryption", "replication"),
    ),
    (Layer.ETL, _AR): (
        _p("Data Quality", *_DATA_QUALITY),
        _p("Periodicity", "batch", "real time", "cycle refreshment"),
        _p(
            "Cleaning",
            "consolidation", "formatting", "restructuration", "normalization",
            "double elimination", "aberrant values elimination", "missing values",
        ),
        _p("Complexity", "data size", "calculation rules", "DS number"),
        _p("Support", "RAM", "temporary storage", "communication"),
    ),
    (Layer.ETL, _MA): (
        _p(
            "Metadata",
            "source", "destination", "cleaning operations", "management rules", "constraints",
        ),
        _p("Modularity", "interdependence transformations", "subsystems decomposition"),
        _p("Complexity", "calculation rules", "DS number"),
        _p("Restoration", *_RESTORATION),
    ),
    (Layer.ETL, _SE): (
        _p("Intrusion Management", "firewall", "encryption", "codification", "access control"),
        _p("Audit", "data", "transformation"),
        _p("Restoration", *_RESTORATION),
    ),
    (Layer.DATA_WAREHOUSE, _AR): (
        _p("Schema", "star", "snowflake", "constellation"),
        _p("Volumetric", "recording number", "access frequency", "granularity"),
        _p("Complexity", "fact number", "dimension number", "hierarchy number"),
        _p("Replication"),
        _p("Optimization", *_OPTIMIZATION),
        _p("Support", "hard disc", "communication"),
        _p("loading Frequency"),
    ),
    (Layer.DATA_WAREHOUSE, _MA): (
        _p("Documentation", "metadata", "schema", "dimension"),
        _p("Architecture", "centralized", "distributed", "consolidation Data Mart"),
        _p("Complexity", "dependence dimensions", "granularity"),
        _p("Optimization", *_OPTIMIZATION),
        _p("Support", "hard disc", "warm maintenance", "cold maintenance"),
    ),
    (Layer.DATA_WAREHOUSE, _SE): (
        _p("User Management", *_USER_MANAGEMENT),
        _p("Data Management", "integrity", "authenticity", "completeness", "locking"),
        _p("Support", "Firewall", "encryption", "replication"),
    ),
    (Layer.RESTITUTION, _AR): (
        _p("Type", *_RESTITUTION_TYPE),
        _p("Volumetric", "data size"),
        _p("Complexity", "axis number", "transformation", "granularity"),
        _p("Support", "RAM", "Communication"),
    ),
    (Layer.RESTITUTION, _MA): (
        _p("Type", *_RESTITUTION_TYPE),
        _p("Documentation", "metadata", "applications", "indicators", "calculation rules"),
        _p("Modularity", "interdependence", "parallelism"),
        _p("Complexity", "Axis number", "transformation", "granularity"),
    ),
    (Layer.RESTITUTION, _SE): (
        _p("User Management", *_USER_MANAGEMENT),
        _p("Data Management", "integrity", "validity", "privacy"),
        _p("Support", "firewall", "encryption"),
    ),
}


def _match(candidate: str, names: Iterable[str]) -> str | None:
    """Exact canonical match first, then case-insensitive normalized/alias match."""
    names = list(names)
    if candidate in names:
        return candidate
    norm = normalize(candidate)
    norm = normalize(ALIASES.get(norm, norm))
    for name in names:
        if normalize(name) == norm:
            return name
    return None


def nearest(candidate: str, names: Iterable[str]) -> str | None:
    """Closest name within SUGGESTION_DISTANCE edits, first one wins on ties."""
    norm = normalize(candidate)
    best = None
    best_d = SUGGESTION_DISTANCE + 1
    for name in names:
        d = edit_distance(norm, normalize(name))
        if d < best_d:
            best, best_d = name, d
    return best


class Catalog:
    """Immutable view over the embedded taxonomy."""

    def __init__(self, entries: Mapping[tuple[Layer, AttributeGroup], tuple[Parameter, ...]]):
        self._entries = MappingProxyType(dict(entries))

    @property
    def entries(self) -> Mapping[tuple[Layer, AttributeGroup], tuple[Parameter, ...]]:
        return self._entries

    def __len__(self):
        return len(self._entries)

    def lookup(self, layer: Layer, group: AttributeGroup) -> tuple[Parameter, ...]:
        return self._entries[(layer, group)]

    def parameter_names(self, layer: Layer, group: AttributeGroup) -> list[str]:
        return [p.name for p in self.lookup(layer, group)]

    def layer_names(self, layer: Layer) -> list[str]:
        """Every parameter and sub-parameter name of a layer, in catalog order, deduplicated."""
        seen = {}
        for group in AttributeGroup:
            for p in self.lookup(layer, group):
                seen.setdefault(p.name)
                for s in p.sub_parameters:
                    seen.setdefault(s)
        return list(seen)

    def validate_reference(
        self,
        layer: Layer,
        group: AttributeGroup,
        parameter: str,
        sub_parameter: str | None = None,
    ) -> CatalogRef:
        """Resolve a reference within one (layer, group) entry.

        Returns the canonical reference; raises UnknownParameter or
        UnknownSubParameter carrying the entry context and a suggestion.
        """
        params = self.lookup(layer, group)
        name = _match(parameter, [p.name for p in params])
        if name is None:
            pool = [p.name for p in params] + [s for p in params for s in p.sub_parameters]
            suggestion = nearest(parameter, pool)
            raise UnknownParameter(
                _unknown_message("parameter", parameter, layer, group, suggestion),
                layer, group, parameter, suggestion,
            )
        if sub_parameter is None:
            return CatalogRef(layer, name)
        param = next(p for p in params if p.name == name)
        sub = _match(sub_parameter, param.sub_parameters)
        if sub is None:
            suggestion = nearest(sub_parameter, param.sub_parameters)
            raise UnknownSubParameter(
                _unknown_message(f"sub-parameter of {name!r}", sub_parameter, layer, group, suggestion),
                layer, group, sub_parameter, suggestion,
            )
        return CatalogRef(layer, name, sub)

    def resolve(self, layer: Layer, parameter: str, sub_parameter: str | None = None) -> CatalogRef:
        """Resolve a reference against every attribute group of ``layer``.

        Models cite a technique from whichever attribute lists it; an
        operationalization shared by several attributes (fragmentation under
        Security, say) only needs to exist somewhere in its layer.
        """
        subs = []
        found = False
        for group in AttributeGroup:
            try:
                ref = self.validate_reference(layer, group, parameter, sub_parameter)
            except UnknownSubParameter:
                found = True
                name = _match(parameter, self.parameter_names(layer, group))
                param = next(p for p in self.lookup(layer, group) if p.name == name)
                subs.extend(s for s in param.sub_parameters if s not in subs)
            except UnknownParameter:
                pass
            else:
                return self._canonical(ref)
        if found:
            suggestion = nearest(sub_parameter, subs)
            raise UnknownSubParameter(
                _unknown_message(f"sub-parameter of {parameter!r}", sub_parameter, layer, None, suggestion),
                layer, None, sub_parameter, suggestion,
            )
        suggestion = nearest(parameter, self.layer_names(layer))
        raise UnknownParameter(
            _unknown_message("parameter", parameter, layer, None, suggestion),
            layer, None, parameter, suggestion,
        )

    def _canonical(self, ref: CatalogRef) -> CatalogRef:
        # The same sub-parameter is sometimes capitalized differently across
        # groups ("axis number" / "Axis number"); the first spelling wins.
        if ref.sub_parameter is None:
            return ref
        norm = normalize(ref.sub_parameter)
        for group in AttributeGroup:
            for p in self.lookup(ref.layer, group):
                if p.name != ref.parameter:
                    continue
                for sub in p.sub_parameters:
                    if normalize(sub) == norm:
                        return CatalogRef(ref.layer, ref.parameter, sub)
        return ref

    def groups_citing(self, ref: CatalogRef) -> list[AttributeGroup]:
        out = []
        for group in AttributeGroup:
            for p in self.lookup(ref.layer, group):
                if p.name == ref.parameter and (
                    ref.sub_parameter is None or ref.sub_parameter in p.sub_parameters
                ):
                    out.append(group)
        return out

    def common_parameters(self, layer: Layer, groups: Iterable[AttributeGroup]) -> set[str]:
        groups = list(groups)
        if not groups:
            raise ValueError("groups must be non-empty")
        result = set(self.parameter_names(layer, groups[0]))
        for g in groups[1:]:
            result &= set(self.parameter_names(layer, g))
        return result

    def to_json(self) -> str:
        doc = {
            "schema_version": 1,
            "layers": {
                layer.ident: {
                    group.ident: [
                        {"name": p.name, "sub_parameters": list(p.sub_parameters)}
                        for p in self.lookup(layer, group)
                    ]
                    for group in AttributeGroup
                }
                for layer in Layer
            },
        }
        return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _unknown_message(what, name, layer, group, suggestion):
    where = layer.ident if group is None else f"{layer.ident}/{group.ident}"
    msg = f"unknown {what} {name!r} in {where}"
    if suggestion is not None:
        msg += f"; did you mean {suggestion!r}"
        parent = _parent_of(layer, group, suggestion) if what == "parameter" else None
        msg += f" (under {parent!r})?" if parent else "?"
    return msg


def _parent_of(layer, group, sub):
    groups = list(AttributeGroup) if group is None else [group]
    for g in groups:
        for p in _EMBEDDED[(layer, g)]:
            if sub in p.sub_parameters:
                return p.name
    return None


_CATALOG = Catalog(_EMBEDDED)


def load_catalog() -> Catalog:
    return _CATALOG
