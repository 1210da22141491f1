"""Term and formula ASTs for polynomial constraints over the reals.

Terms are polynomial expressions with exact rational constants.  Two formula
layers exist: the raw layer produced by the parser (which still contains
``>``, ``>=`` and ``not``) and the normalized layer used everywhere else,
where every constraint has the shape ``p ~ 0`` with ``~`` one of ``=``,
``<``, ``<=`` and no negations remain.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterator, Sequence, Union

from .errors import MissingVariable

# --------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Const:
    value: Fraction


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Sum:
    terms: tuple["Term", ...]


@dataclass(frozen=True)
class Product:
    terms: tuple["Term", ...]


@dataclass(frozen=True)
class Negate:
    term: "Term"


Term = Union[Const, Var, Sum, Product, Negate]

ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


def const(value) -> Const:
    return Const(Fraction(value))


def is_zero_const(t: Term) -> bool:
    return isinstance(t, Const) and t.value == 0


def neg(t: Term) -> Term:
    """Negate a term, folding constants and double negations."""
    if isinstance(t, Const):
        return Const(-t.value)
    if isinstance(t, Negate):
        return t.term
    return Negate(t)


def sub(a: Term, b: Term) -> Term:
    """a - b, keeping the tree small when one side is the literal zero."""
    if is_zero_const(b):
        return a
    if is_zero_const(a):
        return neg(b)
    return Sum((a, neg(b)))


def term_variables(t: Term) -> set[int]:
    if isinstance(t, Const):
        return set()
    if isinstance(t, Var):
        return {t.index}
    if isinstance(t, Negate):
        return term_variables(t.term)
    out: set[int] = set()
    for child in t.terms:
        out |= term_variables(child)
    return out


def remap_vars(t: Term, offset: int) -> Term:
    """Shift every variable ordinal by ``offset``."""
    if isinstance(t, Const):
        return t
    if isinstance(t, Var):
        return Var(t.index + offset)
    if isinstance(t, Negate):
        return Negate(remap_vars(t.term, offset))
    children = tuple(remap_vars(c, offset) for c in t.terms)
    return Sum(children) if isinstance(t, Sum) else Product(children)


def eval_term_exact(t: Term, values: Sequence[Fraction]) -> Fraction:
    """Evaluate a term with exact rational arithmetic."""
    if isinstance(t, Const):
        return t.value
    if isinstance(t, Var):
        if t.index >= len(values):
            raise MissingVariable(f"no value for variable #{t.index}")
        return values[t.index]
    if isinstance(t, Negate):
        return -eval_term_exact(t.term, values)
    if isinstance(t, Sum):
        acc = Fraction(0)
        for child in t.terms:
            acc += eval_term_exact(child, values)
        return acc
    acc = Fraction(1)
    for child in t.terms:
        acc *= eval_term_exact(child, values)
    return acc


# --------------------------------------------------------------------------
# Raw formulas (parser output, pre-normalization)

RAW_RELATIONS = ("=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class RawAtom:
    lhs: Term
    rhs: Term
    rel: str  # one of RAW_RELATIONS


@dataclass(frozen=True)
class RawNot:
    child: "RawFormula"


@dataclass(frozen=True)
class RawAnd:
    children: tuple["RawFormula", ...]


@dataclass(frozen=True)
class RawOr:
    children: tuple["RawFormula", ...]


RawFormula = Union[RawAtom, RawNot, RawAnd, RawOr]


# --------------------------------------------------------------------------
# Normalized formulas


class Relation(Enum):
    EQ = "="
    LT = "<"
    LE = "<="


@dataclass(frozen=True)
class Atom:
    """A constraint ``poly ~ 0``."""

    poly: Term
    relation: Relation


@dataclass(frozen=True)
class AtomNode:
    atom: Atom


@dataclass(frozen=True)
class And:
    children: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    children: tuple["Formula", ...]


Formula = Union[AtomNode, And, Or]


def iter_atoms(f: Formula) -> Iterator[Atom]:
    """Yield atoms in left-to-right tree order."""
    if isinstance(f, AtomNode):
        yield f.atom
        return
    for child in f.children:
        yield from iter_atoms(child)


def atom_holds_exact(atom: Atom, values: Sequence[Fraction]) -> bool:
    v = eval_term_exact(atom.poly, values)
    if atom.relation is Relation.EQ:
        return v == 0
    if atom.relation is Relation.LT:
        return v < 0
    return v <= 0


def eval_bool_exact(f: Formula, values: Sequence[Fraction]) -> bool:
    """Exact truth value of a normalized formula at a rational point."""
    if isinstance(f, AtomNode):
        return atom_holds_exact(f.atom, values)
    if isinstance(f, And):
        return all(eval_bool_exact(c, values) for c in f.children)
    return any(eval_bool_exact(c, values) for c in f.children)
