"""Relaxed real-valued loss built from a normalized formula.

Per-atom losses over the constraint value ``p``:

  ``p = 0``   ->  ``max(|p| - eps, 0)``
  ``p < 0``   ->  ``max(p, -eps)``
  ``p <= 0``  ->  ``max(p, 0)``

Conjunction aggregates children by sum, disjunction by minimum.  Any model
of the formula therefore scores ``<= 0``; the slack ``eps`` widens the
zero set of equality atoms so descent can stop near roots instead of
having to hit them pointwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import NonFiniteInput
from .terms import And, AtomNode, Formula, Or, Relation, Term

AtomKind = Relation  # mirrors Atom.relation one-to-one


@dataclass(frozen=True)
class AggLeaf:
    atom_id: int


@dataclass(frozen=True)
class AggSum:
    children: tuple["AggNode", ...]


@dataclass(frozen=True)
class AggMin:
    children: tuple["AggNode", ...]


AggNode = Union[AggLeaf, AggSum, AggMin]


@dataclass(frozen=True)
class LossAtom:
    atom_id: int
    kind: AtomKind
    poly: Term


@dataclass(frozen=True)
class LossSpec:
    """Atoms plus the aggregation tree mirroring the formula shape."""

    atoms: tuple[LossAtom, ...]
    agg: AggNode
    epsilon: float

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)


def build_loss(f: Formula, epsilon: float) -> LossSpec:
    """Structure-preserving translation: atom -> leaf, and -> sum, or -> min."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    atoms: list[LossAtom] = []

    def walk(node: Formula) -> AggNode:
        if isinstance(node, AtomNode):
            atom_id = len(atoms)
            atoms.append(LossAtom(atom_id, node.atom.relation, node.atom.poly))
            return AggLeaf(atom_id)
        children = tuple(walk(c) for c in node.children)
        return AggSum(children) if isinstance(node, And) else AggMin(children)

    agg = walk(f)
    return LossSpec(atoms=tuple(atoms), agg=agg, epsilon=float(epsilon))


# --------------------------------------------------------------------------
# Scalar primitives


def atom_loss_value(kind: AtomKind, p: float, epsilon: float) -> float:
    if not math.isfinite(p):
        raise NonFiniteInput(f"constraint value is not finite: {p!r}")
    if kind is Relation.EQ:
        return max(abs(p) - epsilon, 0.0)
    if kind is Relation.LT:
        return max(p, -epsilon)
    return max(p, 0.0)


def atom_loss_subgrad_factor(kind: AtomKind, p: float, epsilon: float) -> float:
    """Scalar ``s`` with ``d(loss)/dx = s * d(p)/dx``.

    At the exact kink the flat branch wins, so a satisfied constraint never
    pushes the iterate.
    """
    if not math.isfinite(p):
        raise NonFiniteInput(f"constraint value is not finite: {p!r}")
    if kind is Relation.EQ:
        if abs(p) > epsilon:
            return math.copysign(1.0, p)
        return 0.0
    if kind is Relation.LT:
        return 1.0 if p > -epsilon else 0.0
    return 1.0 if p > 0.0 else 0.0


# --------------------------------------------------------------------------
# Vectorized forms used by the search engine.  ``P`` holds raw constraint
# values, shape [batch x num_atoms], column i belongs to atom_id i.


def atom_loss_matrix(spec: LossSpec, P: np.ndarray) -> np.ndarray:
    out = np.empty_like(P)
    eps = spec.epsilon
    for a in spec.atoms:
        col = P[:, a.atom_id]
        if a.kind is Relation.EQ:
            out[:, a.atom_id] = np.maximum(np.abs(col) - eps, 0.0)
        elif a.kind is Relation.LT:
            out[:, a.atom_id] = np.maximum(col, -eps)
        else:
            out[:, a.atom_id] = np.maximum(col, 0.0)
    return out


def atom_subgrad_matrix(spec: LossSpec, P: np.ndarray) -> np.ndarray:
    out = np.zeros_like(P)
    eps = spec.epsilon
    for a in spec.atoms:
        col = P[:, a.atom_id]
        if a.kind is Relation.EQ:
            out[:, a.atom_id] = np.where(np.abs(col) > eps, np.sign(col), 0.0)
        elif a.kind is Relation.LT:
            out[:, a.atom_id] = (col > -eps).astype(P.dtype)
        else:
            out[:, a.atom_id] = (col > 0.0).astype(P.dtype)
    return out


def aggregate(spec: LossSpec, atom_losses: np.ndarray) -> np.ndarray:
    """Total loss per sample."""
    total, _ = aggregate_with_weights(spec, atom_losses, want_weights=False)
    return total


def aggregate_with_weights(
    spec: LossSpec, atom_losses: np.ndarray, want_weights: bool = True
) -> tuple[np.ndarray, np.ndarray | None]:
    """Total loss plus the per-atom aggregation weight of each sample.

    Sum nodes pass their weight to every child; min nodes route it to the
    argmin child only, ties broken by lowest child index (np.argmin's
    first-hit rule).
    """
    batch = atom_losses.shape[0]
    values: dict[int, np.ndarray] = {}

    def value_of(node: AggNode) -> np.ndarray:
        if isinstance(node, AggLeaf):
            return atom_losses[:, node.atom_id]
        child_vals = np.stack([value_of(c) for c in node.children], axis=1)
        values[id(node)] = child_vals
        if isinstance(node, AggSum):
            return child_vals.sum(axis=1)
        return child_vals.min(axis=1)

    total = value_of(spec.agg)
    if not want_weights:
        return total, None

    weights = np.zeros((batch, spec.num_atoms), dtype=atom_losses.dtype)

    def route(node: AggNode, w: np.ndarray) -> None:
        if isinstance(node, AggLeaf):
            weights[:, node.atom_id] += w
            return
        if isinstance(node, AggSum):
            for child in node.children:
                route(child, w)
            return
        child_vals = values[id(node)]
        pick = np.argmin(child_vals, axis=1)
        for j, child in enumerate(node.children):
            route(child, w * (pick == j))

    route(spec.agg, np.ones(batch, dtype=atom_losses.dtype))
    return total, weights


# --------------------------------------------------------------------------
# Strategy seam: alternative per-atom loss definitions can be slotted in by
# providing another LossFunctions instance; only the relaxed default ships.


@dataclass(frozen=True)
class LossFunctions:
    name: str
    value: Callable[[AtomKind, float, float], float]
    subgrad_factor: Callable[[AtomKind, float, float], float]
    value_matrix: Callable[[LossSpec, np.ndarray], np.ndarray]
    subgrad_matrix: Callable[[LossSpec, np.ndarray], np.ndarray]


DEFAULT_LOSS = LossFunctions(
    name="epsilon-relaxed",
    value=atom_loss_value,
    subgrad_factor=atom_loss_subgrad_factor,
    value_matrix=atom_loss_matrix,
    subgrad_matrix=atom_subgrad_matrix,
)
