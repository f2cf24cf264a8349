"""Protocol trees: measurements built from ket projectors, rounds and leaves."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from ..qalg import LocalOperator, Party, RegisterLayout, LayoutError
from ..states import Ket

COMPLETENESS_TOL = 1e-9


def as_ket(k) -> Ket:
    if isinstance(k, Ket):
        return k
    if isinstance(k, (int, np.integer)):
        return Ket(int(k))
    if isinstance(k, tuple) and len(k) == 3:
        return Ket(*k)
    raise TypeError(f"cannot read {k!r} as a ket")


@dataclass(frozen=True)
class ProjTerm:
    """Tensor product over registers of sums of ket projectors; identity elsewhere."""

    factors: tuple[tuple[str, tuple[Ket, ...]], ...]

    @classmethod
    def of(cls, **regs) -> "ProjTerm":
        """ProjTerm.of(B=[0, 1, 2], b=[0]); kets may be ints, Ket or (a, b, sign)."""
        items = []
        for name, kets in regs.items():
            if isinstance(kets, (int, Ket, np.integer)):
                kets = [kets]
            items.append((name, tuple(as_ket(k) for k in kets)))
        return cls(tuple(items))

    @property
    def registers(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.factors)

    def kets(self, register: str) -> tuple[Ket, ...] | None:
        for n, ks in self.factors:
            if n == register:
                return ks
        return None

    def ordered(self, layout: RegisterLayout) -> "ProjTerm":
        return ProjTerm(tuple(sorted(self.factors, key=lambda f: layout.index(f[0]))))

    def matrix(self, acting: tuple[str, ...], layout: RegisterLayout) -> np.ndarray:
        out = np.ones((1, 1), dtype=complex)
        for reg in self.registers:
            if reg not in acting:
                raise LayoutError(f"term mentions {reg} outside acting registers {acting}")
        for reg in acting:
            dim = layout.register(reg).dim
            kets = self.kets(reg)
            if kets is None:
                f = np.eye(dim, dtype=complex)
            else:
                vs = np.array([k.vector(dim) for k in kets])
                f = vs.T @ vs.conj()
            out = np.kron(out, f)
        return out

    def flipped(self, registers) -> "ProjTerm":
        """Swap |0> and |1> on the given qubit registers."""
        regs = set(registers)

        def flip(k: Ket) -> Ket:
            if k.b is None:
                return Ket(1 - k.a) if k.a in (0, 1) else k
            return k  # |0±1> maps to ±|0±1>, the same ray
        return ProjTerm(tuple((n, tuple(flip(k) for k in ks) if n in regs else ks)
                              for n, ks in self.factors))

    def __str__(self):
        parts = [f"{n}:" + ",".join(str(k) for k in ks) for n, ks in self.factors]
        return "proj[" + ", ".join(parts) + "]"


@dataclass(frozen=True)
class Outcome:
    """One measurement outcome: a sum of ProjTerms, the complement, or a raw matrix."""

    label: str
    terms: tuple[ProjTerm, ...] = ()
    complement: bool = False
    raw: np.ndarray | None = field(default=None, compare=False)

    @property
    def is_symbolic(self) -> bool:
        return self.raw is None

    def flipped(self, registers) -> "Outcome":
        return Outcome(self.label, tuple(t.flipped(registers) for t in self.terms),
                       self.complement, self.raw)

    def describe(self) -> str:
        if self.raw is not None:
            return "<matrix>"
        if self.complement:
            return "complement"
        return " + ".join(str(t) for t in self.terms)


def label_key(label: str):
    """Natural sort key: B2 < B10, A5pp < A5pm."""
    return [(0, int(tok), "") if tok.isdigit() else (1, 0, tok)
            for tok in re.findall(r"\d+|\D+", label)]


@dataclass(frozen=True)
class Measurement:
    party: Party
    acting_registers: tuple[str, ...]
    outcomes: tuple[Outcome, ...]

    def __post_init__(self):
        object.__setattr__(self, "party", Party.parse(self.party))
        object.__setattr__(self, "acting_registers", tuple(self.acting_registers))
        object.__setattr__(self, "outcomes", tuple(self.outcomes))

    @classmethod
    def build(cls, layout: RegisterLayout, party, outcomes, registers=None) -> "Measurement":
        """Acting registers default to every register mentioned, in layout order."""
        if registers is None:
            seen = {r for o in outcomes for t in o.terms for r in t.registers}
            if not seen:
                seen = set(layout.party_registers(party))
            registers = [n for n in layout.names if n in seen]
        outcomes = [Outcome(o.label, tuple(t.ordered(layout) for t in o.terms), o.complement, o.raw)
                    for o in outcomes]
        return cls(party, tuple(registers), tuple(outcomes))

    @property
    def labels(self) -> list[str]:
        return [o.label for o in self.outcomes]

    def dim(self, layout: RegisterLayout) -> int:
        return int(np.prod([layout.register(r).dim for r in self.acting_registers]))

    def matrices(self, layout: RegisterLayout) -> list[np.ndarray]:
        n = self.dim(layout)
        mats = []
        for o in self.outcomes:
            if o.raw is not None:
                m = np.asarray(o.raw, dtype=complex)
            elif o.complement:
                m = np.eye(n, dtype=complex) - sum(mats, np.zeros((n, n), dtype=complex))
            else:
                m = sum((t.matrix(self.acting_registers, layout) for t in o.terms),
                        np.zeros((n, n), dtype=complex))
            mats.append(m)
        return mats

    def operators(self, layout: RegisterLayout) -> list[LocalOperator]:
        return [LocalOperator(self.acting_registers, m, layout) for m in self.matrices(layout)]

    def canonical(self) -> "Measurement":
        """Outcomes in natural label order with a trailing complement kept last."""
        outs = list(self.outcomes)
        if any(o.complement for o in outs[:-1]):
            return self
        tail = [outs.pop()] if outs and outs[-1].complement else []
        outs.sort(key=lambda o: label_key(o.label))
        return Measurement(self.party, self.acting_registers, tuple(outs + tail))

    def flipped(self, registers) -> "Measurement":
        return Measurement(self.party, self.acting_registers,
                           tuple(o.flipped(registers) for o in self.outcomes))


@dataclass(frozen=True)
class Leaf:
    label: int | None  # None means "fail"

    @property
    def name(self) -> str:
        return "fail" if self.label is None else str(self.label)


@dataclass(frozen=True)
class Round:
    index: int
    measurement: Measurement
    children: dict = field(default_factory=dict, hash=False)


Node = Union[Round, Leaf]


@dataclass(frozen=True)
class ProtocolTree:
    name: str
    layout: RegisterLayout
    root: Node
    resources: tuple[tuple[str, str], ...] = ()

    def nodes(self):
        """Yield (path, node) pairs depth first; a path is a tuple of outcome labels."""
        stack = [((), self.root)]
        while stack:
            path, node = stack.pop()
            yield path, node
            if isinstance(node, Round):
                for lab in reversed(node.measurement.labels):
                    if lab in node.children:
                        stack.append((path + (lab,), node.children[lab]))


def path_str(path) -> str:
    return "/".join(path) if path else "<root>"


def rounds(tree_or_node) -> int:
    node = tree_or_node.root if isinstance(tree_or_node, ProtocolTree) else tree_or_node
    if isinstance(node, Leaf):
        return 0
    return 1 + max((rounds(c) for c in node.children.values()), default=0)


def validate(tree: ProtocolTree, tol: float = COMPLETENESS_TOL) -> list[str]:
    """All structural and completeness violations, as readable strings."""
    out = []
    layout = tree.layout
    for a, b in tree.resources:
        for n, party in ((a, Party.ALICE), (b, Party.BOB)):
            if n not in layout:
                out.append(f"resource register {n} not declared")
            elif layout.register(n).party is not party or layout.register(n).dim != 2:
                out.append(f"resource register {n} must be a {party.value} qubit")

    def visit(node, path, parent_index):
        where = path_str(path)
        if isinstance(node, Leaf):
            return
        if not isinstance(node, Round):
            out.append(f"{where}: unknown node type {type(node).__name__}")
            return
        if node.index <= parent_index:
            out.append(f"{where}: round index {node.index} does not increase past {parent_index}")
        meas = node.measurement
        labels = meas.labels
        dup = sorted({l for l in labels if labels.count(l) > 1})
        for l in dup:
            out.append(f"{where}: duplicate outcome {l}")
        for l in labels:
            if l not in node.children:
                out.append(f"{where}: orphan outcome {l}")
        for l in node.children:
            if l not in labels:
                out.append(f"{where}: child {l} has no outcome")
        if meas.outcomes and meas.outcomes[0].complement:
            out.append(f"{where}: complement cannot be the first outcome")
        ok = True
        for r in meas.acting_registers:
            if r not in layout:
                out.append(f"{where}: unknown register {r}")
                ok = False
            elif layout.register(r).party is not meas.party:
                out.append(f"{where}: register {r} is not owned by {meas.party.value}")
        if ok:
            try:
                mats = meas.matrices(layout)
                n = meas.dim(layout)
                total = sum((m.conj().T @ m for m in mats), np.zeros((n, n), dtype=complex))
                err = float(np.linalg.norm(total - np.eye(n)))
                if err >= tol:
                    out.append(f"{where}: completeness violated (|sum M^dag M - I| = {err:.3g})")
            except (ValueError, LayoutError) as exc:
                out.append(f"{where}: bad operator ({exc})")
        for l, child in node.children.items():
            visit(child, path + (l,), node.index)

    visit(tree.root, (), 0)
    return out
