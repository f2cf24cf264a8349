"""The d x d orthogonal product-state families and Bell-pair resources."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .qalg import (Party, Register, RegisterLayout, StateVector, LayoutError,
                   numerical_rank, tensor)

SQRT_HALF = 1 / np.sqrt(2)


@dataclass(frozen=True)
class Ket:
    """|a> when b is None, otherwise (|a> + sign|b>)/sqrt(2) with a < b."""

    a: int
    b: int | None = None
    sign: int = 1

    def __post_init__(self):
        if self.a < 0 or (self.b is not None and self.b < 0):
            raise ValueError("ket indices must be non-negative")
        if self.b is None:
            if self.sign != 1:
                raise ValueError("single kets carry no sign")
        else:
            if self.b <= self.a:
                raise ValueError(f"superposition ket needs a < b, got ({self.a},{self.b})")
            if self.sign not in (1, -1):
                raise ValueError("sign must be +1 or -1")

    def sort_key(self):
        return (self.a, -1 if self.b is None else self.b, -self.sign)

    @property
    def levels(self) -> tuple[int, ...]:
        return (self.a,) if self.b is None else (self.a, self.b)

    @property
    def is_basis(self) -> bool:
        return self.b is None

    def vector(self, dim: int) -> np.ndarray:
        if max(self.levels) >= dim:
            raise ValueError(f"ket {self} does not fit in dimension {dim}")
        v = np.zeros(dim, dtype=complex)
        if self.b is None:
            v[self.a] = 1
        else:
            v[self.a] = SQRT_HALF
            v[self.b] = self.sign * SQRT_HALF
        return v

    def partner(self) -> "Ket":
        """The orthogonal ket on the same two levels."""
        if self.b is None:
            raise ValueError("basis ket has no ± partner")
        return Ket(self.a, self.b, -self.sign)

    def __str__(self):
        if self.b is None:
            return str(self.a)
        return f"({self.a}{'+' if self.sign > 0 else '-'}{self.b})"

    @classmethod
    def parse(cls, text: str) -> "Ket":
        t = text.strip()
        if t.startswith("("):
            body = t[1:-1]
            op = "+" if "+" in body else "-"
            a, b = body.split(op)
            return cls(int(a), int(b), 1 if op == "+" else -1)
        return cls(int(t))


def pm(a: int, sign: int = 1) -> Ket:
    """The ket |a ± (a+1)>."""
    return Ket(a, a + 1, sign)


@dataclass(frozen=True)
class KetExpr:
    register: str
    ket: Ket

    @property
    def terms(self) -> list[tuple[int, int]]:
        k = self.ket
        return [(k.a, 1)] if k.b is None else [(k.a, 1), (k.b, k.sign)]

    def __str__(self):
        return f"|{self.ket}>_{self.register}"


@dataclass(frozen=True, eq=False)
class FamilyState:
    label: int
    vector: StateVector
    source: tuple[KetExpr, KetExpr] | None = None

    def describe(self) -> str:
        if self.source is None:
            return f"phi{self.label}"
        return f"phi{self.label} = " + " ".join(str(k) for k in self.source)


@dataclass(frozen=True, eq=False)
class StateFamily:
    d: int
    layout: RegisterLayout
    states: tuple[FamilyState, ...]

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    @property
    def labels(self) -> list[int]:
        return [s.label for s in self.states]

    def by_label(self, label: int) -> FamilyState:
        for s in self.states:
            if s.label == label:
                return s
        raise KeyError(label)

    def matrix(self) -> np.ndarray:
        """States stacked as rows."""
        return np.array([s.vector.amplitudes for s in self.states])

    def replace(self, label: int, vector: StateVector) -> "StateFamily":
        states = tuple(FamilyState(s.label, vector, None) if s.label == label else s
                       for s in self.states)
        return StateFamily(self.d, self.layout, states)

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "registers": self.layout.to_json(),
            "states": [
                {"label": s.label,
                 "amplitudes": [[float(z.real), float(z.imag)] for z in s.vector.amplitudes]}
                for s in self.states
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "StateFamily":
        layout = RegisterLayout.from_json(data["registers"])
        states = []
        for item in data["states"]:
            amps = np.array([complex(re, im) for re, im in item["amplitudes"]])
            states.append(FamilyState(int(item["label"]), StateVector(layout, amps)))
        return cls(int(data["d"]), layout, tuple(states))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def load(cls, path) -> "StateFamily":
        return cls.from_json(json.loads(Path(path).read_text()))


def plain_layout(d: int) -> RegisterLayout:
    return RegisterLayout.of(("A", Party.ALICE, d), ("B", Party.BOB, d))


def _make_state(layout, label, ka: Ket, kb: Ket) -> FamilyState:
    d = layout.register("A").dim
    vec = StateVector.product(layout, {"A": ka.vector(d), "B": kb.vector(d)})
    return FamilyState(label, vec, (KetExpr("A", ka), KetExpr("B", kb)))


def _shell(d: int) -> list[tuple[Ket, Ket]]:
    """Outer layer of family(d): rows/columns 0 and 1 as (A-ket, B-ket) pairs."""
    if d == 2:
        return [(Ket(0), pm(0, 1)), (Ket(0), pm(0, -1)), (Ket(1), Ket(0)), (Ket(1), Ket(1))]
    out = []
    for i in range(0, d - 1, 2):
        out += [(Ket(0), pm(i, s)) for s in (1, -1)]
    for i in range(1, d - 2, 2):
        out += [(pm(i, s), Ket(0)) for s in (1, -1)]
    out.append((Ket(d - 1), Ket(0)))
    for i in range(1, d - 2, 2):
        out += [(Ket(1), pm(i, s)) for s in (1, -1)]
    out.append((Ket(1), Ket(d - 1)))
    for i in range(2, d - 1, 2):
        out += [(pm(i, s), Ket(1)) for s in (1, -1)]
    return out


def _shift(k: Ket, by: int) -> Ket:
    return Ket(k.a + by, None if k.b is None else k.b + by, k.sign)


def family_kets(d: int) -> list[tuple[Ket, Ket]]:
    """(A-ket, B-ket) pairs of family(d), in label order."""
    if d < 2 or d % 2:
        raise ValueError(f"d must be a positive even integer, got {d}")
    if d == 2:
        return _shell(2)
    inner_part = [(_shift(ka, 2), _shift(kb, 2)) for ka, kb in family_kets(d - 2)]
    return _shell(d) + inner_part


def family(d: int) -> StateFamily:
    layout = plain_layout(d)
    states = tuple(_make_state(layout, i + 1, ka, kb)
                   for i, (ka, kb) in enumerate(family_kets(d)))
    return StateFamily(d, layout, states)


# The 36 states of the 6 x 6 set, written out one by one.
_D6 = [
    (1, Ket(0), pm(0)), (2, Ket(0), pm(0, -1)),
    (3, Ket(0), pm(2)), (4, Ket(0), pm(2, -1)),
    (5, Ket(0), pm(4)), (6, Ket(0), pm(4, -1)),
    (7, pm(1), Ket(0)), (8, pm(1, -1), Ket(0)),
    (9, pm(3), Ket(0)), (10, pm(3, -1), Ket(0)),
    (11, Ket(5), Ket(0)),
    (12, Ket(1), pm(1)), (13, Ket(1), pm(1, -1)),
    (14, Ket(1), pm(3)), (15, Ket(1), pm(3, -1)),
    (16, Ket(1), Ket(5)),
    (17, pm(2), Ket(1)), (18, pm(2, -1), Ket(1)),
    (19, pm(4), Ket(1)), (20, pm(4, -1), Ket(1)),
    (21, Ket(2), pm(2)), (22, Ket(2), pm(2, -1)),
    (23, Ket(2), pm(4)), (24, Ket(2), pm(4, -1)),
    (25, pm(3), Ket(2)), (26, pm(3, -1), Ket(2)),
    (27, Ket(5), Ket(2)),
    (28, Ket(3), pm(3)), (29, Ket(3), pm(3, -1)),
    (30, Ket(3), Ket(5)),
    (31, pm(4), Ket(3)), (32, pm(4, -1), Ket(3)),
    (33, Ket(4), pm(4)), (34, Ket(4), pm(4, -1)),
    (35, Ket(5), Ket(4)),
    (36, Ket(5), Ket(5)),
]


def family_d6_explicit() -> StateFamily:
    layout = plain_layout(6)
    return StateFamily(6, layout, tuple(_make_state(layout, lab, ka, kb) for lab, ka, kb in _D6))


def bell_pair(names: tuple[str, str] = ("a", "b")) -> StateVector:
    a, b = names
    if a == b:
        raise LayoutError("Bell pair registers need distinct names")
    layout = RegisterLayout((Register(a, Party.ALICE, 2), Register(b, Party.BOB, 2)))
    return StateVector(layout, np.array([1, 0, 0, 1]) * SQRT_HALF, normalized=True)


def attach_resource(fam: StateFamily, resources) -> StateFamily:
    resources = list(resources)
    if not resources:
        return fam
    layout = fam.layout
    for r in resources:
        layout = layout.concat(r.layout)
    states = []
    for s in fam.states:
        v = s.vector
        for r in resources:
            v = tensor(v, r)
        states.append(FamilyState(s.label, v, s.source))
    return StateFamily(fam.d, layout, tuple(states))


def with_bells(fam: StateFamily, pairs) -> StateFamily:
    return attach_resource(fam, [bell_pair(p) for p in pairs])


@dataclass(frozen=True)
class BasisReport:
    max_offdiag: float
    gram_rank: int
    is_basis: bool
    n_states: int


def verify_orthonormal_basis(fam: StateFamily, tol: float = 1e-10) -> BasisReport:
    m = fam.matrix()
    norms = np.linalg.norm(m, axis=1)
    m = m / norms[:, None]
    g = m.conj() @ m.T
    off = np.abs(g - np.diag(np.diag(g)))
    max_off = float(off.max()) if len(fam) > 1 else 0.0
    rank = numerical_rank(m)
    block = fam.layout.register("A").dim * fam.layout.register("B").dim
    return BasisReport(max_off, rank, rank == block and max_off < tol, len(fam))
