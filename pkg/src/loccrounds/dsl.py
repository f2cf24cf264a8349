"""Text format for protocol trees (.locc files).

    protocol "name" {
      registers { A: alice dim 6; B: bob dim 6; a: alice dim 2; b: bob dim 2; }
      resource bell(a, b);
      round 1 by bob {
        outcome B1 = proj[B:0,1,2, b:0] + proj[B:3,4,5, b:1] => round 2 by alice { ... }
        outcome B2 = complement => identify 7;
      }
    }

A ket is a level `3` or a two-level superposition `(1+2)` / `(1-2)`.
`complement` stands for the identity minus the outcomes listed before it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .qalg import LayoutError, Party, Register, RegisterLayout
from .states import Ket
from .protocol.model import (Leaf, Measurement, Outcome, ProjTerm, ProtocolTree, Round,
                             path_str)

KEYWORDS = {"protocol", "registers", "resource", "bell", "round", "by", "alice", "bob",
            "outcome", "identify", "fail", "complement", "proj", "dim"}
INDENT = "  "


class DslError(Exception):
    def __init__(self, message, line=0, col=0, expected=()):
        self.line, self.col = line, col
        self.expected = tuple(sorted(expected))
        self.message = message
        super().__init__(f"{line}:{col}: {message}")


class ParseError(DslError):
    pass


class SemanticError(DslError):
    pass


class SerializeError(ValueError):
    pass


class LintError(ValueError):
    pass


@dataclass(frozen=True)
class Token:
    kind: str  # "kw", "name", "int", "string", "sym", "eof"
    value: str
    line: int
    col: int
    end: int  # offset just past the token

    def describe(self) -> str:
        if self.kind == "eof":
            return "end of input"
        return repr(self.value)


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"[^"\n]*")
  | (?P<int>[0-9]+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>=>|[{}()\[\]:;,+\-=])
""", re.VERBOSE)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            ch = text[pos]
            if ch == '"':
                raise ParseError("unterminated string", line, col)
            raise ParseError(f"unexpected character {ch!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind == "name" and value in KEYWORDS:
            kind = "kw"
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, value, line, col, m.end()))
        nl = value.count("\n")
        if nl:
            line += nl
            line_start = pos + value.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1, pos))
    return tokens


@dataclass
class ProtocolSource:
    text: str
    filename: str
    tree: ProtocolTree
    spans: dict = field(default_factory=dict)  # path -> (line, col) of the round / leaf


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0
        self.spans: dict = {}

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k=1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def fail(self, expected):
        t = self.tok
        exp = ", ".join(sorted(expected))
        raise ParseError(f"expected {exp}, found {t.describe()}", t.line, t.col, expected)

    def at(self, *values) -> bool:
        t = self.tok
        return t.kind in ("kw", "sym") and t.value in values

    def expect(self, value) -> Token:
        if not self.at(value):
            self.fail({repr(value)})
        t = self.tok
        self.i += 1
        return t

    def expect_kind(self, kind, what) -> Token:
        if self.tok.kind != kind:
            self.fail({what})
        t = self.tok
        self.i += 1
        return t

    def integer(self) -> tuple[int, Token]:
        t = self.expect_kind("int", "INT")
        return int(t.value), t

    # grammar -----------------------------------------------------------

    def protocol(self) -> ProtocolTree:
        self.expect("protocol")
        name = self.expect_kind("string", "STRING").value[1:-1]
        self.expect("{")
        layout = self.registers()
        resources = []
        while self.at("resource"):
            resources.append(self.resource(layout))
        if self.at("round"):
            root = self.round(layout, (), 0)
        elif self.at("identify", "fail"):
            root = self.leaf(())
        else:
            self.fail({"'resource'", "'round'", "'identify'", "'fail'"})
        self.expect("}")
        if self.tok.kind != "eof":
            self.fail({"end of input"})
        return ProtocolTree(name, layout, root, tuple(resources))

    def registers(self) -> RegisterLayout:
        self.expect("registers")
        self.expect("{")
        regs, seen = [], {}
        while True:
            t = self.expect_kind("name", "NAME")
            self.expect(":")
            if not self.at("alice", "bob"):
                self.fail({"'alice'", "'bob'"})
            party = Party.parse(self.tok.value)
            self.i += 1
            self.expect("dim")
            dim, dt = self.integer()
            self.expect(";")
            if t.value in seen:
                raise SemanticError(f"register {t.value} declared twice", t.line, t.col)
            if dim < 2:
                raise SemanticError(f"register {t.value} needs dim >= 2", dt.line, dt.col)
            seen[t.value] = True
            regs.append(Register(t.value, party, dim))
            if self.at("}"):
                break
            if self.tok.kind != "name":
                self.fail({"NAME", "'}'"})
        self.expect("}")
        return RegisterLayout(tuple(regs))

    def resource(self, layout) -> tuple[str, str]:
        self.expect("resource")
        self.expect("bell")
        self.expect("(")
        a = self.expect_kind("name", "NAME")
        self.expect(",")
        b = self.expect_kind("name", "NAME")
        self.expect(")")
        self.expect(";")
        for t in (a, b):
            if t.value not in layout:
                raise SemanticError(f"unknown register {t.value}", t.line, t.col)
        return a.value, b.value

    def round(self, layout, path, parent_index) -> Round:
        start = self.expect("round")
        index, it = self.integer()
        self.expect("by")
        if not self.at("alice", "bob"):
            self.fail({"'alice'", "'bob'"})
        party = Party.parse(self.tok.value)
        self.i += 1
        self.expect("{")
        outcomes, children = [], {}
        self.spans[path] = (start.line, start.col)
        while True:
            self.expect("outcome")
            name = self.expect_kind("name", "NAME")
            if name.value in children:
                raise SemanticError(f"duplicate outcome label {name.value}", name.line, name.col)
            self.expect("=")
            if self.at("complement"):
                ct = self.tok
                self.i += 1
                if not outcomes:
                    raise SemanticError("complement cannot be the first outcome", ct.line, ct.col)
                outcome = Outcome(name.value, (), complement=True)
            else:
                terms = [self.term(layout)]
                while self.at("+"):
                    self.i += 1
                    terms.append(self.term(layout))
                outcome = Outcome(name.value, tuple(terms))
            self.expect("=>")
            sub = path + (name.value,)
            if self.at("round"):
                child = self.round(layout, sub, index)
            elif self.at("identify", "fail"):
                child = self.leaf(sub)
            else:
                self.fail({"'round'", "'identify'", "'fail'"})
            outcomes.append(outcome)
            children[name.value] = child
            if self.at("}"):
                break
            if not self.at("outcome"):
                self.fail({"'outcome'", "'}'"})
        self.expect("}")
        meas = Measurement.build(layout, party, outcomes)
        return Round(index, meas, children)

    def leaf(self, path) -> Leaf:
        t = self.tok
        self.spans[path] = (t.line, t.col)
        if self.at("fail"):
            self.i += 1
            self.expect(";")
            return Leaf(None)
        self.expect("identify")
        label, _ = self.integer()
        self.expect(";")
        return Leaf(label)

    def term(self, layout) -> ProjTerm:
        self.expect("proj")
        self.expect("[")
        factors = [self.projspec(layout)]
        while self.at(","):
            self.i += 1
            factors.append(self.projspec(layout))
        self.expect("]")
        names = [n for n, _ in factors]
        if len(set(names)) != len(names):
            t = self.tokens[self.i - 1]
            raise SemanticError("register listed twice in one proj[...]", t.line, t.col)
        return ProjTerm(tuple(factors))

    def projspec(self, layout):
        t = self.expect_kind("name", "NAME")
        if t.value not in layout:
            raise SemanticError(f"unknown register {t.value}", t.line, t.col)
        dim = layout.register(t.value).dim
        self.expect(":")
        kets = [self.ket(dim)]
        # a comma continues the ket list unless a new "NAME :" spec follows
        while self.at(",") and (self.peek().kind == "int" or self.peek().value == "("):
            self.i += 1
            kets.append(self.ket(dim))
        return t.value, tuple(kets)

    def ket(self, dim) -> Ket:
        t = self.tok
        if self.at("("):
            self.i += 1
            a, _ = self.integer()
            if not self.at("+", "-"):
                self.fail({"'+'", "'-'"})
            sign = 1 if self.tok.value == "+" else -1
            self.i += 1
            b, _ = self.integer()
            self.expect(")")
            if a >= b:
                raise SemanticError(f"superposition ({a}{'+' if sign > 0 else '-'}{b}) needs "
                                    "the smaller level first", t.line, t.col)
            levels = (a, b)
            ket = Ket(a, b, sign)
        elif self.tok.kind == "int":
            a, _ = self.integer()
            levels = (a,)
            ket = Ket(a)
        else:
            self.fail({"INT", "'('"})
        if max(levels) >= dim:
            raise SemanticError(f"level {max(levels)} exceeds register dim {dim}", t.line, t.col)
        return ket


def parse_source(text: str, filename: str = "<string>") -> ProtocolSource:
    p = _Parser(text)
    try:
        tree = p.protocol()
    except LayoutError as exc:  # e.g. an invalid register name
        t = p.tok
        raise SemanticError(str(exc), t.line, t.col) from None
    return ProtocolSource(text, filename, tree, p.spans)


def parse(text: str) -> ProtocolTree:
    return parse_source(text).tree


# serialization -------------------------------------------------------------

def _term_text(term: ProjTerm) -> str:
    specs = [f"{reg}:" + ",".join(str(k) for k in kets) for reg, kets in term.factors]
    return "proj[" + ", ".join(specs) + "]"


def _outcome_text(o: Outcome, path) -> str:
    if o.raw is not None:
        raise SerializeError(f"outcome {o.label} at {path_str(path)} is a raw matrix, "
                             "not a sum of ket projectors")
    if o.complement:
        return "complement"
    if not o.terms:
        raise SerializeError(f"outcome {o.label} at {path_str(path)} has no terms")
    return " + ".join(_term_text(t) for t in o.terms)


def _node_lines(node, depth, path) -> list[str]:
    pad = INDENT * depth
    if isinstance(node, Leaf):
        return ["fail;" if node.label is None else f"identify {node.label};"]
    meas = node.measurement.canonical()
    lines = [f"round {node.index} by {meas.party.value} {{"]
    for o in meas.outcomes:
        sub = path + (o.label,)
        child = node.children.get(o.label)
        if child is None:
            raise SerializeError(f"outcome {o.label} at {path_str(path)} has no child")
        head = f"{pad}{INDENT}outcome {o.label} = {_outcome_text(o, path)} => "
        body = _node_lines(child, depth + 1, sub)
        lines.append(head + body[0])
        lines.extend(body[1:])
    lines.append(f"{pad}}}")
    return lines


def serialize(tree: ProtocolTree) -> str:
    out = [f'protocol "{tree.name}" {{', f"{INDENT}registers {{"]
    for r in tree.layout.registers:
        out.append(f"{INDENT * 2}{r.name}: {r.party.value} dim {r.dim};")
    out.append(f"{INDENT}}}")
    for a, b in tree.resources:
        out.append(f"{INDENT}resource bell({a}, {b});")
    body = _node_lines(tree.root, 1, ())
    out.append(INDENT + body[0])
    out.extend(body[1:])
    out.append("}")
    return "\n".join(out) + "\n"


def canonical(tree: ProtocolTree) -> ProtocolTree:
    """The tree as it reads back after serialization."""
    return parse(serialize(tree))


# lint ----------------------------------------------------------------------

def lint(tree: ProtocolTree, report=None) -> list[str]:
    """Warnings for a tree; pass a RunReport to also flag leaves no input reaches."""
    warnings = []
    for path, node in tree.nodes():
        if not isinstance(node, Round):
            continue
        labels = node.measurement.labels
        dup = sorted({l for l in labels if labels.count(l) > 1})
        if dup:
            raise LintError(f"duplicate outcome label {dup[0]} at {path_str(path)}")
        if node.measurement.canonical() != node.measurement:
            warnings.append(f"{path_str(path)}: outcomes not in canonical order")
        kids = [node.children.get(l) for l in labels]
        if kids and all(isinstance(k, Leaf) and k.label is None for k in kids if k is not None):
            warnings.append(f"{path_str(path)}: every outcome leads to fail")
    if report is not None:
        for path, node in tree.nodes():
            if isinstance(node, Leaf) and report.node_mass.get(path, 0.0) <= 1e-12:
                warnings.append(f"{path_str(path)}: unreachable leaf")
    return warnings
