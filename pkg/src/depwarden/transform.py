"""Lower an integrated model to platform-independent tactics, then to a
platform-specific document.

Platform knowledge lives entirely in profile files (``*.pdm.json``); code
only knows the platform-neutral mapping from catalog references to tactic
kinds.  A profile looks like::

    {
      "schema_version": 1,
      "name": "generic-relational",
      "capabilities": {"dw": ["Fragmentation", "Indexing"]},
      "templates": {"Fragmentation": "PARTITION {table} INTO {fragment_count}"},
      "limits": {"fragment_count": 64}
    }
"""

from __future__ import annotations

import enum
import hashlib
import json
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .catalog import CatalogRef, Layer
from .integration import IntegratedModel, TradeoffMatrix


class TransformError(ValueError):
    code = "TransformError"


class SelectionMismatch(TransformError):
    code = "SelectionMismatch"


class InvalidSetting(TransformError):
    code = "InvalidSetting"


class ProfileError(TransformError):
    code = "ProfileError"


class ProfileSyntax(ProfileError):
    code = "ProfileSyntax"


class UnknownTacticKind(ProfileError):
    code = "UnknownTacticKind"


class PlaceholderMismatch(ProfileError):
    code = "PlaceholderMismatch"


class TacticKind(enum.Enum):
    INDEXING = "Indexing"
    FRAGMENTATION = "Fragmentation"
    MATERIALIZED_VIEW = "MaterializedView"
    PARALLELISM = "Parallelism"
    REPLICATION = "Replication"
    USER_MANAGEMENT = "UserManagement"
    ENCRYPTION = "Encryption"
    AUDIT_TRAIL = "AuditTrail"
    DOCUMENTATION_PLAN = "DocumentationPlan"
    BACKUP_RESTORE = "BackupRestore"


_ALL_LAYERS = frozenset(Layer)
_STORAGE_LAYERS = frozenset({Layer.DATA_SOURCE, Layer.DATA_WAREHOUSE})

ADMISSIBLE_LAYERS: Mapping[TacticKind, frozenset] = {
    TacticKind.INDEXING: _STORAGE_LAYERS,
    TacticKind.FRAGMENTATION: _STORAGE_LAYERS,
    TacticKind.MATERIALIZED_VIEW: _STORAGE_LAYERS,
    TacticKind.PARALLELISM: _STORAGE_LAYERS | {Layer.RESTITUTION},
    TacticKind.REPLICATION: _STORAGE_LAYERS,
    TacticKind.USER_MANAGEMENT: _STORAGE_LAYERS | {Layer.RESTITUTION},
    TacticKind.ENCRYPTION: _ALL_LAYERS,
    TacticKind.AUDIT_TRAIL: _ALL_LAYERS,
    TacticKind.DOCUMENTATION_PLAN: _ALL_LAYERS,
    TacticKind.BACKUP_RESTORE: _ALL_LAYERS,
}

# (parameter, sub-parameter or "*") -> tactic kind; "*" also matches a bare parameter
TACTIC_MAP: Mapping[tuple[str, str], TacticKind] = {
    ("Optimization", "fragmentation"): TacticKind.FRAGMENTATION,
    ("Optimization", "index"): TacticKind.INDEXING,
    ("Optimization", "view"): TacticKind.MATERIALIZED_VIEW,
    ("Optimization", "parallelism"): TacticKind.PARALLELISM,
    ("Replication", "*"): TacticKind.REPLICATION,
    ("Support", "replication"): TacticKind.REPLICATION,
    ("User Management", "*"): TacticKind.USER_MANAGEMENT,
    ("Support", "encryption"): TacticKind.ENCRYPTION,
    ("Intrusion Management", "encryption"): TacticKind.ENCRYPTION,
    ("Audit", "*"): TacticKind.AUDIT_TRAIL,
    ("Documentation", "*"): TacticKind.DOCUMENTATION_PLAN,
    ("Restoration", "*"): TacticKind.BACKUP_RESTORE,
    ("Support", "warm maintenance"): TacticKind.BACKUP_RESTORE,
    ("Support", "cold maintenance"): TacticKind.BACKUP_RESTORE,
}

COMMON_FIELDS = ("tactic", "tactic_id", "layer", "source", "ref")

# per-kind parameter names, all required
TACTIC_PARAMETERS: Mapping[TacticKind, tuple[str, ...]] = {
    TacticKind.INDEXING: ("table", "index_name"),
    TacticKind.FRAGMENTATION: ("table", "method", "fragment_count"),
    TacticKind.MATERIALIZED_VIEW: ("table", "view_name"),
    TacticKind.PARALLELISM: ("degree",),
    TacticKind.REPLICATION: ("table", "replicas"),
    TacticKind.USER_MANAGEMENT: ("aspect",),
    TacticKind.ENCRYPTION: ("scope",),
    TacticKind.AUDIT_TRAIL: ("scope",),
    TacticKind.DOCUMENTATION_PLAN: ("reference",),
    TacticKind.BACKUP_RESTORE: ("strategy",),
}

# values computed at render time from the parameters
DERIVED_FIELDS: Mapping[TacticKind, tuple[str, ...]] = {
    TacticKind.FRAGMENTATION: ("fragments",),
}

INTEGER_PARAMETERS = frozenset({"fragment_count", "degree", "replicas"})
FRAGMENT_METHODS = ("hash", "range")


def tactic_for(ref: CatalogRef | None) -> TacticKind | None:
    if ref is None:
        return None
    if ref.sub_parameter is not None and (ref.parameter, ref.sub_parameter) in TACTIC_MAP:
        kind = TACTIC_MAP[(ref.parameter, ref.sub_parameter)]
    else:
        kind = TACTIC_MAP.get((ref.parameter, "*"))
    if kind is not None and ref.layer not in ADMISSIBLE_LAYERS[kind]:
        return None
    return kind


def allowed_placeholders(kind: TacticKind) -> frozenset[str]:
    return frozenset(COMMON_FIELDS) | set(TACTIC_PARAMETERS[kind]) | set(DERIVED_FIELDS.get(kind, ()))


def _default_parameters(kind: TacticKind, source: str, ref: CatalogRef | None) -> dict:
    stem = source.replace(".", "_")
    sub = ref.sub_parameter if ref is not None and ref.sub_parameter else None
    defaults = {
        TacticKind.INDEXING: {"table": "fact", "index_name": f"idx_{stem}"},
        TacticKind.FRAGMENTATION: {"table": "fact", "method": "hash", "fragment_count": 10},
        TacticKind.MATERIALIZED_VIEW: {"table": "fact", "view_name": f"mv_{stem}"},
        TacticKind.PARALLELISM: {"degree": 4},
        TacticKind.REPLICATION: {"table": "fact", "replicas": 2},
        TacticKind.USER_MANAGEMENT: {"aspect": sub or "all"},
        TacticKind.ENCRYPTION: {"scope": "at_rest"},
        TacticKind.AUDIT_TRAIL: {"scope": sub or "all"},
        TacticKind.DOCUMENTATION_PLAN: {"reference": str(ref) if ref is not None else source},
        TacticKind.BACKUP_RESTORE: {"strategy": sub or "recovery management"},
    }
    return defaults[kind]


@dataclass(frozen=True)
class TacticInstance:
    id: str
    kind: TacticKind
    layer: Layer
    source: str
    origins: tuple[str, ...]
    ref: str
    parameters: Mapping[str, object]
    mapped: bool = True

    def __post_init__(self):
        if self.layer not in ADMISSIBLE_LAYERS[self.kind]:
            raise TransformError(f"{self.kind.value} is not admissible at layer {self.layer.ident}")
        missing = set(TACTIC_PARAMETERS[self.kind]) - set(self.parameters)
        if missing:
            raise TransformError(f"{self.id}: missing parameters {sorted(missing)}")

    def context(self) -> dict:
        ctx = {
            "tactic": self.kind.value,
            "tactic_id": self.id,
            "layer": self.layer.ident,
            "source": self.source,
            "ref": self.ref,
        }
        ctx.update(self.parameters)
        return ctx


@dataclass(frozen=True)
class Decision:
    operationalization: str
    chosen: bool
    rationale: str


@dataclass(frozen=True)
class PimModel:
    source_model: str
    tactics: tuple[TacticInstance, ...]
    decisions: tuple[Decision, ...]


def _coerce(name, value):
    if name in INTEGER_PARAMETERS:
        try:
            number = int(value)
        except (TypeError, ValueError):
            raise InvalidSetting(f"{name} must be an integer, got {value!r}") from None
        if number < 1:
            raise InvalidSetting(f"{name} must be at least 1, got {number}")
        return number
    if name == "method" and value not in FRAGMENT_METHODS:
        raise InvalidSetting(f"method must be one of {FRAGMENT_METHODS}, got {value!r}")
    return str(value)


def _rationale(matrix: TradeoffMatrix, op: str) -> str:
    cells = " ".join(f"{c}={v:+d}" for c, v in matrix.row(op).items())
    return f"{cells} [{matrix.classification(op).value}]"


def cim_to_pim(
    integrated: IntegratedModel,
    matrix: TradeoffMatrix,
    selections: Mapping[str, bool],
    settings: Mapping[str, Mapping[str, object]] | None = None,
) -> PimModel:
    settings = settings or {}
    unknown = sorted(set(selections) - set(matrix.rows))
    missing = sorted(set(matrix.rows) - set(selections))
    if unknown or missing:
        parts = []
        if unknown:
            parts.append(f"unknown operationalizations {unknown}")
        if missing:
            parts.append(f"no decision for {missing}")
        raise SelectionMismatch("; ".join(parts))
    stray = sorted(set(settings) - {op for op in matrix.rows if selections[op]})
    if stray:
        raise InvalidSetting(f"settings given for operationalizations not chosen: {stray}")

    tactics = []
    decisions = []
    for op in matrix.rows:
        chosen = bool(selections[op])
        decisions.append(Decision(op, chosen, _rationale(matrix, op)))
        if not chosen:
            continue
        node = integrated.graph.node(op)
        ref = node.catalog_ref
        kind = tactic_for(ref)
        mapped = kind is not None
        if kind is None:
            kind = TacticKind.DOCUMENTATION_PLAN
        layer = ref.layer if ref is not None else (node.layer or Layer.DATA_WAREHOUSE)
        params = _default_parameters(kind, op, ref)
        for key, value in (settings.get(op) or {}).items():
            if key not in TACTIC_PARAMETERS[kind]:
                raise InvalidSetting(
                    f"{op}: {kind.value} has no parameter {key!r} (valid: {', '.join(TACTIC_PARAMETERS[kind])})"
                )
            params[key] = _coerce(key, value)
        origins = tuple(f"{g.ident}/{orig}" for g, orig in integrated.origins.get(op, ()))
        tactics.append(TacticInstance(
            id=f"{kind.value}:{op}",
            kind=kind,
            layer=layer,
            source=op,
            origins=origins,
            ref=ref.slug if ref is not None else "",
            parameters=dict(sorted(params.items())),
            mapped=mapped,
        ))
    return PimModel(integrated.name, tuple(tactics), tuple(decisions))


# -- platform profiles -------------------------------------------------------------


@dataclass(frozen=True)
class PlatformProfile:
    name: str
    capabilities: Mapping[Layer, frozenset]
    templates: Mapping[TacticKind, str]
    limits: Mapping[str, int] = field(default_factory=dict)

    def supports(self, kind: TacticKind, layer: Layer) -> bool:
        return kind in self.capabilities.get(layer, frozenset())


def _placeholders(template: str, where: str) -> set[str]:
    names = set()
    try:
        parsed = list(string.Formatter().parse(template))
    except ValueError as exc:
        raise ProfileSyntax(f"{where}: malformed template ({exc})") from None
    for _, name, spec, conversion in parsed:
        if name is None:
            continue
        if not name or spec or conversion or not name.isidentifier():
            raise ProfileSyntax(f"{where}: placeholders must be plain {{name}} fields, got {{{name}}}")
        names.add(name)
    return names


def _tactic_kind(name, where):
    try:
        return TacticKind(name)
    except ValueError:
        raise UnknownTacticKind(f"{where}: unknown tactic kind {name!r}") from None


def parse_platform_profile(doc: object, where: str = "<profile>") -> PlatformProfile:
    if not isinstance(doc, dict):
        raise ProfileSyntax(f"{where}: top level must be an object")
    extra = set(doc) - {"schema_version", "name", "capabilities", "templates", "limits"}
    if extra:
        raise ProfileSyntax(f"{where}: unknown keys {sorted(extra)}")
    if doc.get("schema_version", 1) != 1:
        raise ProfileSyntax(f"{where}: unsupported schema_version {doc.get('schema_version')!r}")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ProfileSyntax(f"{where}: 'name' must be a non-empty string")

    caps_doc = doc.get("capabilities", {})
    if not isinstance(caps_doc, dict):
        raise ProfileSyntax(f"{where}: 'capabilities' must be an object")
    capabilities = {}
    for layer_id, kinds in caps_doc.items():
        try:
            layer = Layer.from_ident(layer_id)
        except KeyError:
            raise ProfileSyntax(f"{where}: unknown layer {layer_id!r}") from None
        if not isinstance(kinds, list) or not all(isinstance(k, str) for k in kinds):
            raise ProfileSyntax(f"{where}: capabilities for {layer_id!r} must be a list of names")
        resolved = frozenset(_tactic_kind(k, where) for k in kinds)
        for kind in resolved:
            if layer not in ADMISSIBLE_LAYERS[kind]:
                raise ProfileSyntax(f"{where}: {kind.value} is not admissible at layer {layer_id!r}")
        capabilities[layer] = resolved

    templates_doc = doc.get("templates", {})
    if not isinstance(templates_doc, dict):
        raise ProfileSyntax(f"{where}: 'templates' must be an object")
    templates = {}
    for kind_name, template in templates_doc.items():
        kind = _tactic_kind(kind_name, where)
        if not isinstance(template, str):
            raise ProfileSyntax(f"{where}: template for {kind_name} must be a string")
        unknown = _placeholders(template, f"{where}: {kind_name}") - allowed_placeholders(kind)
        if unknown:
            raise PlaceholderMismatch(
                f"{where}: template for {kind_name} uses unknown placeholders "
                + ", ".join("{" + u + "}" for u in sorted(unknown))
            )
        templates[kind] = template

    for layer, kinds in capabilities.items():
        for kind in kinds:
            if kind not in templates:
                raise ProfileSyntax(f"{where}: {kind.value} is supported but has no template")

    limits_doc = doc.get("limits", {})
    if not isinstance(limits_doc, dict):
        raise ProfileSyntax(f"{where}: 'limits' must be an object")
    limits = {}
    for key, value in limits_doc.items():
        if key not in INTEGER_PARAMETERS:
            raise ProfileSyntax(f"{where}: limit {key!r} does not name a numeric tactic parameter")
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise ProfileSyntax(f"{where}: limit {key!r} must be a positive integer")
        limits[key] = value

    return PlatformProfile(name, capabilities, templates, limits)


def load_platform_profile(path) -> PlatformProfile:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ProfileSyntax(f"{path}: invalid JSON ({exc})") from None
    return parse_platform_profile(doc, str(path))


# -- PSM -----------------------------------------------------------------------------


@dataclass(frozen=True)
class PsmSection:
    index: int
    tactic_id: str
    status: str  # "generated" or "manual"
    text: str
    action: Mapping[str, object]


@dataclass(frozen=True)
class PsmDocument:
    source_model: str
    profile: str
    sections: tuple[PsmSection, ...]
    digest: str

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "header": {
                "source_model": self.source_model,
                "profile": self.profile,
                "digest": self.digest,
                "section_count": len(self.sections),
            },
            "sections": [_section_dict(s) for s in self.sections],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    def to_text(self) -> str:
        lines = [
            f"# PSM for model {self.source_model} on platform {self.profile}",
            f"# digest: {self.digest}",
            f"# sections: {len(self.sections)}",
        ]
        for s in self.sections:
            a = s.action
            lines.append("")
            lines.append(f"[{s.index}] {s.tactic_id} ({s.status})")
            lines.append(f"    trace: {a['source']} <- {', '.join(a['origins']) or '-'}")
            for w in a["warnings"]:
                lines.append(f"    warning: {w}")
            lines.extend("    " + t if t else "" for t in s.text.split("\n"))
        return "\n".join(lines) + "\n"


def _section_dict(s: PsmSection) -> dict:
    return {"index": s.index, "tactic_id": s.tactic_id, "status": s.status, "text": s.text,
            "action": dict(s.action)}


def _digest(sections) -> str:
    body = json.dumps([_section_dict(s) for s in sections], sort_keys=True,
                      separators=(",", ":"), ensure_ascii=False)
    return "sha256:" + hashlib.sha256(body.encode("utf-8")).hexdigest()


def _derived(kind: TacticKind, params: Mapping[str, object]) -> dict:
    if kind is TacticKind.FRAGMENTATION:
        return {"fragments": ", ".join(f"f{i}" for i in range(int(params["fragment_count"])))}
    return {}


def pim_to_psm(pim: PimModel, profile: PlatformProfile) -> PsmDocument:
    sections = []
    for index, tactic in enumerate(pim.tactics, 1):
        params = dict(tactic.parameters)
        warnings = []
        for key, cap in sorted(profile.limits.items()):
            if key in params and int(params[key]) > cap:
                warnings.append(f"{key} {params[key]} exceeds platform limit {cap}; clamped to {cap}")
                params[key] = cap
        if not tactic.mapped:
            warnings.append(f"no tactic maps reference {tactic.ref or tactic.source!r}; documented only")
        supported = profile.supports(tactic.kind, tactic.layer)
        if supported:
            ctx = tactic.context()
            ctx.update(params)
            ctx.update(_derived(tactic.kind, params))
            text = profile.templates[tactic.kind].format_map(ctx)
            status = "generated"
        else:
            settings = ", ".join(f"{k}={v}" for k, v in params.items())
            text = (f"MANUAL ACTION REQUIRED: platform {profile.name} has no {tactic.kind.value} "
                    f"support at layer {tactic.layer.ident} ({settings})")
            status = "manual"
        action = {
            "action": "apply" if supported else "manual",
            "tactic": tactic.kind.value,
            "tactic_id": tactic.id,
            "layer": tactic.layer.ident,
            "source": tactic.source,
            "origins": list(tactic.origins),
            "ref": tactic.ref,
            "parameters": params,
            "warnings": warnings,
        }
        sections.append(PsmSection(index, tactic.id, status, text, action))
    return PsmDocument(pim.source_model, profile.name, tuple(sections), _digest(sections))


def render_psm(doc: PsmDocument, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, content in (("psm.txt", doc.to_text()), ("psm.json", doc.to_json())):
        path = out_dir / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(content)
        written.append(path)
    return written
