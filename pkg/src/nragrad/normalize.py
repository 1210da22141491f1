"""Rewriting of raw formulas into negation-free ``p ~ 0`` form.

Rewrite rules:
  * ``a ~ b``       becomes ``(a - b) ~ 0`` (``a > b`` and ``a >= b`` flip
    to ``(b - a) < 0`` and ``(b - a) <= 0`` so only ``=``, ``<``, ``<=``
    survive);
  * ``not``         is pushed through ``and``/``or`` by De Morgan and
    eliminated at atoms: ``not(p < 0)`` -> ``-p <= 0``, ``not(p <= 0)`` ->
    ``-p < 0``, ``not(p = 0)`` -> ``(p < 0) or (-p < 0)``.

The rewrite preserves the model set exactly.
"""

from __future__ import annotations

from .terms import (
    And,
    Atom,
    AtomNode,
    Formula,
    Negate,
    Or,
    RawAnd,
    RawAtom,
    RawFormula,
    RawNot,
    RawOr,
    Relation,
    neg,
    sub,
)

_DIRECT = {"=": Relation.EQ, "<": Relation.LT, "<=": Relation.LE}
_FLIPPED = {">": Relation.LT, ">=": Relation.LE}


def _atom(raw: RawAtom, negated: bool) -> Formula:
    if raw.rel in _FLIPPED:
        poly = sub(raw.rhs, raw.lhs)
        rel = _FLIPPED[raw.rel]
    else:
        poly = sub(raw.lhs, raw.rhs)
        rel = _DIRECT[raw.rel]
    if not negated:
        return AtomNode(Atom(poly, rel))
    if rel is Relation.LT:
        return AtomNode(Atom(neg(poly), Relation.LE))
    if rel is Relation.LE:
        return AtomNode(Atom(neg(poly), Relation.LT))
    return Or((AtomNode(Atom(poly, Relation.LT)), AtomNode(Atom(neg(poly), Relation.LT))))


def _norm(raw: RawFormula, negated: bool) -> Formula:
    if isinstance(raw, RawAtom):
        return _atom(raw, negated)
    if isinstance(raw, RawNot):
        return _norm(raw.child, not negated)
    children = tuple(_norm(c, negated) for c in raw.children)
    if isinstance(raw, RawAnd):
        return Or(children) if negated else And(children)
    return And(children) if negated else Or(children)


def normalize(raw: RawFormula) -> Formula:
    """Normalize a raw formula; total on any parser output."""
    return _norm(raw, negated=False)


def check_normalized(f: Formula) -> None:
    """Walk the tree and assert the post-normalization grammar holds."""
    if isinstance(f, AtomNode):
        assert isinstance(f.atom.relation, Relation)
        _check_term(f.atom.poly)
        return
    assert isinstance(f, (And, Or)) and len(f.children) >= 1
    for child in f.children:
        check_normalized(child)


def _check_term(t) -> None:
    from .terms import Const, Product, Sum, Var

    assert isinstance(t, (Const, Var, Sum, Product, Negate)), f"bad node {t!r}"
    if isinstance(t, (Sum, Product)):
        for child in t.terms:
            _check_term(child)
    elif isinstance(t, Negate):
        _check_term(t.term)
