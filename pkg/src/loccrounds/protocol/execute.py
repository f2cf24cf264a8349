"""Run a protocol tree on a state family and collect leaf statistics."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from ..qalg import LayoutError, apply_local
from ..states import StateFamily
from .model import Leaf, ProtocolTree

PRUNE = 1e-12
SUCCESS_TOL = 1e-9


@dataclass
class RunReport:
    success_probability: float
    max_rounds: int
    per_state: dict[int, dict[str, float]]
    max_branch_overlap: float = 0.0
    node_mass: dict[tuple[str, ...], float] = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.success_probability >= 1 - SUCCESS_TOL

    def to_json(self) -> dict:
        per = []
        for label in sorted(self.per_state):
            leaves = self.per_state[label]
            per.append({"label": label,
                        "leaves": [{"leaf": k, "prob": leaves[k]} for k in sorted(leaves, key=_leaf_key)]})
        return {"success_probability": self.success_probability,
                "max_rounds": self.max_rounds,
                "per_state": per}

    def max_difference(self, other: "RunReport") -> float:
        """Largest gap between leaf probabilities of two reports."""
        worst = abs(self.success_probability - other.success_probability)
        for label in set(self.per_state) | set(other.per_state):
            a = self.per_state.get(label, {})
            b = other.per_state.get(label, {})
            for k in set(a) | set(b):
                worst = max(worst, abs(a.get(k, 0.0) - b.get(k, 0.0)))
        return worst


def _leaf_key(name: str):
    return (1, 0) if name == "fail" else (0, int(name))


def execute(tree: ProtocolTree, fam: StateFamily, prune: float = PRUNE) -> RunReport:
    """Propagate every input state through the tree at once.

    Branch probabilities are squared norms of the projected (unit-norm)
    inputs.  At every round node the surviving states are also checked for
    pairwise orthogonality; the worst normalized overlap is reported.
    """
    if fam.layout != tree.layout:
        raise LayoutError(f"family layout {fam.layout.names} does not match "
                          f"protocol layout {tree.layout.names}")
    layout = tree.layout
    labels = fam.labels
    vecs = fam.matrix()
    vecs = vecs / np.linalg.norm(vecs, axis=1)[:, None]
    per_state: dict[int, dict[str, float]] = {l: defaultdict(float) for l in labels}
    node_mass: dict[tuple[str, ...], float] = {}
    stats = {"depth": 0, "overlap": 0.0}
    op_cache: dict[int, list] = {}

    def walk(node, idx, v, path, depth):
        weights = np.sum(np.abs(v) ** 2, axis=1)
        node_mass[path] = node_mass.get(path, 0.0) + float(weights.sum())
        if isinstance(node, Leaf):
            stats["depth"] = max(stats["depth"], depth)
            for i, w in zip(idx, weights):
                per_state[labels[i]][node.name] += float(w)
            return
        if len(idx) > 1:
            u = v / np.sqrt(weights)[:, None]
            g = np.abs(u.conj() @ u.T)
            np.fill_diagonal(g, 0)
            stats["overlap"] = max(stats["overlap"], float(g.max()))
        ops = op_cache.get(id(node))
        if ops is None:
            ops = node.measurement.operators(layout)
            op_cache[id(node)] = ops
        for outcome, op in zip(node.measurement.outcomes, ops):
            post = apply_local(op, v)
            w = np.sum(np.abs(post) ** 2, axis=1)
            keep = w > prune
            if not keep.any():
                continue
            child = node.children.get(outcome.label)
            sub_path = path + (outcome.label,)
            if child is None:
                child = Leaf(None)
            walk(child, [i for i, k in zip(idx, keep) if k], post[keep], sub_path, depth + 1)

    walk(tree.root, list(range(len(labels))), vecs, (), 0)
    per_state = {l: dict(d) for l, d in per_state.items()}
    success = min((per_state[l].get(str(l), 0.0) for l in labels), default=0.0)
    return RunReport(success, stats["depth"], per_state, stats["overlap"], node_mass)
