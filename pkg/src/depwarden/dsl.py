"""Text format for dependability models (``.dwm`` files).

Example::

    # integrated view of the three attributes
    model fig7
    layer dw
    meta author "design team"

    sig availability_reliability {
      goal availability_reliability
      op fragmentation ref dw.optimization.fragmentation
      fragmentation -help-> availability_reliability
    }

Statements end at a newline or ``;``.  Inside a ``sig`` block:

    goal <id> [layer <layer>] [ref <layer>.<parameter>[.<sub>]]
    op <id> [layer <layer>] [ref ...]
    claim <id> [layer <layer>] [ref ...]
    <source> -make|-help|-hurt|-break-> <target>
    and(<parent>: <child>, ...)      or(<parent>: <child>, ...)

Parsing never raises on bad input; every problem becomes a
:class:`Diagnostic` with a source span.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from typing import Mapping

from .catalog import (
    GROUP_ORDER,
    LAYER_ORDER,
    AttributeGroup,
    Catalog,
    CatalogRef,
    Layer,
    UnknownReference,
    load_catalog,
    nearest,
)
from .sig import (
    ContributionLink,
    Decomposition,
    DecompositionMode,
    LinkKind,
    SigError,
    SigGraph,
    Softgoal,
    SoftgoalKind,
    build_graph,
)


class Severity(enum.Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Span:
    line: int
    column: int
    end_line: int
    end_column: int

    def __str__(self):
        return f"{self.line}:{self.column}"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    span: Span | None
    code: str
    message: str
    suggestion: str | None = None

    @property
    def is_error(self) -> bool:
        return self.severity is Severity.ERROR

    def format(self, path: str = "<input>") -> str:
        where = f"{path}:{self.span}" if self.span else path
        text = f"{where}: {self.severity.value}[{self.code}]: {self.message}"
        if self.suggestion is not None:
            text += f" (did you mean {self.suggestion!r}?)"
        return text


@dataclass(frozen=True)
class DependabilityModel:
    name: str
    target_layers: frozenset
    sigs: Mapping[AttributeGroup, SigGraph]
    metadata: Mapping[str, str] = field(default_factory=dict)
    # (attribute, node id) -> Span; filled by the parser, ignored by equality
    spans: Mapping = field(default_factory=dict, compare=False, repr=False)


class ParseError(ValueError):
    """Raised by :func:`load_model` when a source has errors."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        errors = [d for d in self.diagnostics if d.is_error]
        super().__init__(errors[0].format() if errors else "invalid model")


# -- lexer -----------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<arrow>-[A-Za-z_]*->)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*)
  | (?P<punct>[{}():,;])
    """,
    re.VERBOSE,
)

IDENT_RE = re.compile(r"[a-z_][a-z0-9_]*\Z")


@dataclass
class _Token:
    kind: str
    text: str
    span: Span


def _position_map(text):
    starts = [0]
    for i, ch in enumerate(text):
        if ch == "\n":
            starts.append(i + 1)
    return starts


class _Source:
    def __init__(self, text):
        self.text = text
        self.line_starts = _position_map(text)

    def pos(self, offset):
        lo, hi = 0, len(self.line_starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.line_starts[mid] <= offset:
                lo = mid
            else:
                hi = mid - 1
        return lo + 1, offset - self.line_starts[lo] + 1

    def span(self, start, end):
        line, col = self.pos(start)
        end_line, end_col = self.pos(max(start, end))
        return Span(line, col, end_line, end_col)

    def end_span(self):
        return self.span(len(self.text), len(self.text))


def _tokenize(src: _Source, diags: list[Diagnostic]) -> list[_Token]:
    tokens = []
    text = src.text
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            end = pos + 1
            while end < len(text) and _TOKEN_RE.match(text, end) is None:
                end += 1
            diags.append(_error(src.span(pos, end), "SyntaxError",
                                f"unexpected character {text[pos]!r}"))
            pos = end
            continue
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, m.group(), src.span(m.start(), m.end())))
        pos = m.end()
    tokens.append(_Token("eof", "", src.end_span()))
    return tokens


def _error(span, code, message, suggestion=None):
    return Diagnostic(Severity.ERROR, span, code, message, suggestion)


def _warning(span, code, message, suggestion=None):
    return Diagnostic(Severity.WARNING, span, code, message, suggestion)


# -- syntax ------------------------------------------------------------------------


@dataclass
class _NodeDecl:
    kind: SoftgoalKind
    id: str
    span: Span
    layer: tuple[str, Span] | None = None
    ref: tuple[str, Span] | None = None


@dataclass
class _LinkDecl:
    source: str
    target: str
    kind: LinkKind
    span: Span


@dataclass
class _DecompDecl:
    mode: DecompositionMode
    parent: str
    children: list[str]
    span: Span


@dataclass
class _SigDecl:
    attribute: str
    span: Span
    nodes: list = field(default_factory=list)
    links: list = field(default_factory=list)
    decomps: list = field(default_factory=list)


class _Fail(Exception):
    pass


_NODE_KEYWORDS = {"goal": SoftgoalKind.NFR_GOAL, "op": SoftgoalKind.OPERATIONALIZATION,
                  "claim": SoftgoalKind.CLAIM}
_LINK_KINDS = {f"-{k.value}->": k for k in LinkKind}


class _Parser:
    def __init__(self, tokens, diags):
        self.tokens = tokens
        self.i = 0
        self.diags = diags
        self.models: list[tuple[str, Span]] = []
        self.layers: list[tuple[str, Span]] = []
        self.meta: list[tuple[str, str, Span]] = []
        self.sigs: list[_SigDecl] = []

    @property
    def tok(self):
        return self.tokens[self.i]

    def peek(self, n=1):
        return self.tokens[min(self.i + n, len(self.tokens) - 1)]

    def advance(self):
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def fail(self, tok, message, code="SyntaxError", suggestion=None):
        self.diags.append(_error(tok.span, code, message, suggestion))
        raise _Fail

    def expect_punct(self, ch):
        if self.tok.kind == "punct" and self.tok.text == ch:
            return self.advance()
        self.fail(self.tok, f"expected {ch!r}, found {_describe(self.tok)}")

    def expect_ident(self, what):
        t = self.tok
        if t.kind != "name":
            self.fail(t, f"expected {what}, found {_describe(t)}")
        if not IDENT_RE.match(t.text):
            suggestion = t.text.lower().replace(".", "_")
            self.fail(t, f"{what} {t.text!r} must be a lowercase snake_case identifier",
                      suggestion=suggestion if IDENT_RE.match(suggestion) else None)
        return self.advance()

    def at_end_of_statement(self):
        t = self.tok
        return t.kind in ("newline", "eof") or (t.kind == "punct" and t.text in ";}")

    def end_statement(self):
        if not self.at_end_of_statement():
            self.fail(self.tok, f"unexpected {_describe(self.tok)} at end of statement")
        if self.tok.kind == "newline" or (self.tok.kind == "punct" and self.tok.text == ";"):
            self.advance()

    def recover(self, in_sig):
        while True:
            t = self.tok
            if t.kind == "eof":
                return
            if t.kind == "newline" or (t.kind == "punct" and t.text == ";"):
                self.advance()
                return
            if in_sig and t.kind == "punct" and t.text == "}":
                return
            self.advance()

    def parse(self):
        while self.tok.kind != "eof":
            t = self.tok
            if t.kind == "newline" or (t.kind == "punct" and t.text == ";"):
                self.advance()
                continue
            try:
                self.statement()
            except _Fail:
                self.recover(in_sig=False)

    def statement(self):
        t = self.tok
        if t.kind != "name":
            self.fail(t, f"expected a declaration, found {_describe(t)}")
        if t.text == "model":
            self.advance()
            name = self.expect_ident("model name")
            self.models.append((name.text, name.span))
            self.end_statement()
        elif t.text == "layer":
            self.advance()
            name = self.expect_ident("layer")
            self.layers.append((name.text, name.span))
            self.end_statement()
        elif t.text == "meta":
            self.advance()
            key = self.expect_ident("metadata key")
            if self.tok.kind != "string":
                self.fail(self.tok, f"expected a quoted string, found {_describe(self.tok)}")
            raw = self.advance()
            try:
                value = json.loads(raw.text)
            except ValueError:
                self.fail(raw, "invalid escape in string literal")
            self.meta.append((key.text, value, key.span))
            self.end_statement()
        elif t.text == "sig":
            self.sig_block()
        else:
            suggestion = nearest(t.text, ["model", "layer", "meta", "sig"])
            self.fail(t, f"unknown declaration {t.text!r}", suggestion=suggestion)

    def sig_block(self):
        self.advance()
        attr = self.expect_ident("attribute")
        sig = _SigDecl(attr.text, attr.span)
        self.expect_punct("{")
        self.sigs.append(sig)
        while True:
            t = self.tok
            if t.kind == "eof":
                self.fail(t, f"unterminated sig block {sig.attribute!r}: expected '}}'")
            if t.kind == "newline" or (t.kind == "punct" and t.text == ";"):
                self.advance()
                continue
            if t.kind == "punct" and t.text == "}":
                self.advance()
                break
            try:
                self.sig_statement(sig)
            except _Fail:
                self.recover(in_sig=True)
        self.end_statement()

    def sig_statement(self, sig):
        t = self.tok
        if t.kind != "name":
            self.fail(t, f"expected a softgoal, link or decomposition, found {_describe(t)}")
        nxt = self.peek()
        if nxt.kind == "arrow":
            src = self.expect_ident("softgoal id")
            arrow = self.advance()
            kind = _LINK_KINDS.get(arrow.text)
            if kind is None:
                inner = arrow.text[1:-2]
                self.fail(arrow, f"unknown link kind {inner!r}",
                          suggestion=nearest(inner, [k.value for k in LinkKind]))
            dst = self.expect_ident("softgoal id")
            sig.links.append(_LinkDecl(src.text, dst.text, kind, _join(src.span, dst.span)))
            self.end_statement()
        elif t.text in _NODE_KEYWORDS:
            self.advance()
            node_id = self.expect_ident("softgoal id")
            decl = _NodeDecl(_NODE_KEYWORDS[t.text], node_id.text, node_id.span)
            if self.tok.kind == "name" and self.tok.text == "layer":
                self.advance()
                layer = self.expect_ident("layer")
                decl.layer = (layer.text, layer.span)
            if self.tok.kind == "name" and self.tok.text == "ref":
                self.advance()
                ref = self.tok
                if ref.kind != "name":
                    self.fail(ref, f"expected a catalog reference, found {_describe(ref)}")
                self.advance()
                decl.ref = (ref.text, ref.span)
            sig.nodes.append(decl)
            self.end_statement()
        elif t.text in ("and", "or") and nxt.kind == "punct" and nxt.text == "(":
            self.advance()
            self.advance()
            parent = self.expect_ident("parent id")
            self.expect_punct(":")
            children = [self.expect_ident("child id").text]
            while self.tok.kind == "punct" and self.tok.text == ",":
                self.advance()
                children.append(self.expect_ident("child id").text)
            close = self.expect_punct(")")
            sig.decomps.append(_DecompDecl(DecompositionMode(t.text), parent.text, children,
                                           _join(t.span, close.span)))
            self.end_statement()
        else:
            words = list(_NODE_KEYWORDS) + ["and", "or"]
            self.fail(t, f"unknown statement {t.text!r}", suggestion=nearest(t.text, words))


def _describe(tok):
    if tok.kind == "eof":
        return "end of input"
    if tok.kind == "newline":
        return "end of line"
    return repr(tok.text)


def _join(a: Span, b: Span) -> Span:
    return Span(a.line, a.column, b.end_line, b.end_column)


# -- semantics -------------------------------------------------------------------


def _lookup_ident(enum_cls, text):
    try:
        return enum_cls.from_ident(text)
    except KeyError:
        return None


def _resolve_ref(text, span, catalog, diags) -> CatalogRef | None:
    parts = text.split(".")
    if len(parts) not in (2, 3):
        diags.append(_error(span, "SyntaxError",
                            f"catalog reference {text!r} must look like <layer>.<parameter>[.<sub>]"))
        return None
    layer = _lookup_ident(Layer, parts[0])
    if layer is None:
        diags.append(_error(span, "UnknownLayer", f"unknown layer {parts[0]!r}",
                            nearest(parts[0], [l.ident for l in Layer])))
        return None
    try:
        return catalog.resolve(layer, parts[1], parts[2] if len(parts) == 3 else None)
    except UnknownReference as exc:
        diags.append(_error(span, exc.code, _strip_hint(exc), exc.suggestion))
        return None


def _strip_hint(exc):
    # the suggestion travels in its own field; keep only the placement note
    text = str(exc)
    head, _, hint = text.partition("; did you mean ")
    if "(under " in hint:
        parent = hint[hint.index("(under ") + 7:].rstrip(")?")
        head += f"; the closest name is a sub-parameter of {parent}"
    return head


def _build_sig(sig: _SigDecl, group, declared_layers, catalog, diags, spans):
    errors_before = sum(d.is_error for d in diags)
    nodes: dict[str, Softgoal] = {}
    for decl in sig.nodes:
        if decl.id in nodes:
            diags.append(_error(decl.span, "DuplicateId",
                                f"softgoal {decl.id!r} declared twice in sig {sig.attribute!r}"))
            continue
        layer = None
        if decl.layer is not None:
            layer = _lookup_ident(Layer, decl.layer[0])
            if layer is None:
                diags.append(_error(decl.layer[1], "UnknownLayer", f"unknown layer {decl.layer[0]!r}",
                                    nearest(decl.layer[0], [l.ident for l in Layer])))
        ref = None
        if decl.ref is not None:
            ref = _resolve_ref(decl.ref[0], decl.ref[1], catalog, diags)
            if ref is not None:
                if layer is not None and layer is not ref.layer:
                    diags.append(_error(decl.layer[1], "LayerMismatch",
                                        f"layer {layer.ident!r} differs from reference layer {ref.layer.ident!r}"))
                layer = ref.layer
        if layer is not None and layer not in declared_layers:
            diags.append(_warning(decl.span, "UndeclaredLayer",
                                  f"softgoal {decl.id!r} sits in layer {layer.ident!r}, "
                                  "which the model does not declare"))
        attribute = group if decl.kind is SoftgoalKind.NFR_GOAL else None
        nodes[decl.id] = Softgoal(decl.id, decl.kind, layer, ref, attribute)
        spans[(group, decl.id)] = decl.span

    def check_ids(ids, span):
        ok = True
        for i in ids:
            if i not in nodes:
                diags.append(_error(span, "DanglingReference", f"unknown softgoal {i!r}",
                                    nearest(i, nodes)))
                ok = False
        return ok

    links = []
    for l in sig.links:
        if not check_ids([l.source, l.target], l.span):
            continue
        if l.source == l.target:
            diags.append(_error(l.span, "CycleDetected", f"{l.source!r} contributes to itself"))
            continue
        links.append(ContributionLink(l.source, l.target, l.kind))

    decomps = []
    seen_parents = set()
    for d in sig.decomps:
        if not check_ids([d.parent] + d.children, d.span):
            continue
        if d.parent in seen_parents:
            diags.append(_error(d.span, "DoubleDecomposition", f"{d.parent!r} is decomposed more than once"))
            continue
        if len(set(d.children)) != len(d.children):
            diags.append(_error(d.span, "SyntaxError", f"decomposition of {d.parent!r} repeats a child"))
            continue
        if d.parent in d.children:
            diags.append(_error(d.span, "CycleDetected", f"{d.parent!r} is its own child"))
            continue
        seen_parents.add(d.parent)
        decomps.append(Decomposition(d.parent, tuple(d.children), d.mode))

    if sum(d.is_error for d in diags) > errors_before:
        return None
    try:
        return build_graph(nodes.values(), links, decomps, catalog)
    except SigError as exc:
        span = sig.span
        cycle = getattr(exc, "cycle", None)
        if cycle:
            for l in sig.links:
                if l.source == cycle[0]:
                    span = l.span
                    break
        diags.append(_error(span, exc.code, str(exc)))
        return None


def parse_model(text: str | bytes, catalog: Catalog | None = None) -> tuple[DependabilityModel | None, list[Diagnostic]]:
    catalog = catalog or load_catalog()
    diags: list[Diagnostic] = []
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            prefix = _Source(bytes(text[:exc.start]).decode("utf-8", "replace"))
            offset = len(prefix.text)
            diags.append(_error(prefix.span(offset, offset), "EncodingError",
                                f"invalid UTF-8 byte at offset {exc.start}"))
            return None, diags
    if text.startswith("\ufeff"):
        text = text[1:]

    src = _Source(text)
    tokens = _tokenize(src, diags)
    parser = _Parser(tokens, diags)
    parser.parse()

    name = None
    if not parser.models:
        diags.append(_error(Span(1, 1, 1, 1), "MissingModel", "no 'model <name>' declaration"))
    else:
        name = parser.models[0][0]
        for _, span in parser.models[1:]:
            diags.append(_error(span, "DuplicateModel", "more than one 'model' declaration"))

    layers = set()
    for ident, span in parser.layers:
        layer = _lookup_ident(Layer, ident)
        if layer is None:
            diags.append(_error(span, "UnknownLayer", f"unknown layer {ident!r}",
                                nearest(ident, [l.ident for l in Layer])))
        elif layer in layers:
            diags.append(_warning(span, "DuplicateLayer", f"layer {ident!r} declared twice"))
        else:
            layers.add(layer)

    metadata = {}
    for key, value, span in parser.meta:
        if key in metadata:
            diags.append(_error(span, "DuplicateMeta", f"metadata key {key!r} set twice"))
        metadata[key] = value

    sigs = {}
    spans = {}
    for sig in parser.sigs:
        group = _lookup_ident(AttributeGroup, sig.attribute)
        if group is None:
            diags.append(_error(sig.span, "UnknownAttribute", f"unknown attribute {sig.attribute!r}",
                                nearest(sig.attribute, [g.ident for g in AttributeGroup])))
            continue
        if group in sigs:
            diags.append(_error(sig.span, "DuplicateSig", f"second sig for {sig.attribute!r}"))
            continue
        spans[(group, None)] = sig.span
        graph = _build_sig(sig, group, layers, catalog, diags, spans)
        sigs[group] = graph
    if not parser.sigs and not any(d.is_error for d in diags):
        diags.append(_error(src.end_span(), "NoSig", "model declares no sig"))

    diags.sort(key=lambda d: (d.span.line, d.span.column) if d.span else (0, 0))
    if any(d.is_error for d in diags):
        return None, diags
    model = DependabilityModel(name, frozenset(layers), sigs, metadata, spans)
    return model, diags


def load_model(path, catalog: Catalog | None = None) -> DependabilityModel:
    with open(path, "rb") as fh:
        model, diags = parse_model(fh.read(), catalog)
    if model is None:
        raise ParseError(diags)
    return model


# -- serialization ------------------------------------------------------------------


def serialize_model(model: DependabilityModel) -> str:
    out = [f"model {model.name}"]
    for layer in sorted(model.target_layers, key=LAYER_ORDER.__getitem__):
        out.append(f"layer {layer.ident}")
    for key in sorted(model.metadata):
        out.append(f"meta {key} {json.dumps(model.metadata[key], ensure_ascii=False)}")
    for group in sorted(model.sigs, key=GROUP_ORDER.__getitem__):
        graph = model.sigs[group]
        out.append("")
        out.append(f"sig {group.ident} {{")
        for g in graph.softgoals:
            line = f"  {g.kind.value} {g.id}"
            if g.catalog_ref is not None:
                line += f" ref {g.catalog_ref.slug}"
            elif g.layer is not None:
                line += f" layer {g.layer.ident}"
            out.append(line)
        for l in graph.links:
            out.append(f"  {l.source} -{l.kind.value}-> {l.target}")
        for d in graph.decompositions:
            out.append(f"  {d.mode.value}({d.parent}: {', '.join(d.children)})")
        out.append("}")
    return "\n".join(out) + "\n"


# -- validation ---------------------------------------------------------------------


def validate_model(model: DependabilityModel, catalog: Catalog | None = None) -> list[Diagnostic]:
    """Re-check catalog references and report structural smells."""
    catalog = catalog or load_catalog()
    diags: list[Diagnostic] = []
    for group in sorted(model.sigs, key=GROUP_ORDER.__getitem__):
        graph = model.sigs[group]
        refs_seen: dict[CatalogRef, str] = {}
        for g in graph.softgoals:
            span = model.spans.get((group, g.id))
            if g.catalog_ref is not None:
                ref = g.catalog_ref
                try:
                    catalog.resolve(ref.layer, ref.parameter, ref.sub_parameter)
                except UnknownReference as exc:
                    diags.append(_error(span, exc.code, f"{group.ident}/{g.id}: {_strip_hint(exc)}",
                                        exc.suggestion))
                if ref in refs_seen:
                    diags.append(_warning(span, "DuplicateCatalogRef",
                                          f"{group.ident}/{g.id} cites {ref} like {refs_seen[ref]!r}"))
                else:
                    refs_seen[ref] = g.id
            isolated = not graph.has_incoming(g.id) and not graph.has_outgoing(g.id)
            if isolated and len(graph.softgoals) > 1:
                diags.append(_warning(span, "OrphanNode", f"{group.ident}/{g.id} has no links"))
            elif g.kind is SoftgoalKind.OPERATIONALIZATION and not isolated:
                if not any(graph.reaches(g.id, r) for r in graph.roots):
                    diags.append(_warning(span, "UnusedOperationalization",
                                          f"{group.ident}/{g.id} contributes to no root goal"))
    return diags
