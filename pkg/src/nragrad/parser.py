"""Reader and printer for the supported SMT-LIB 2 subset.

Supported commands: ``set-logic``, ``set-info``, ``declare-fun`` /
``declare-const`` (zero-arity Real), ``assert``, ``check-sat``,
``get-model``, ``exit``.  Terms may use ``and or not = < <= > >= + - * /
let distinct`` plus numerals, decimals and rational literals.  Anything
else is a hard error; silently skipping commands could change the meaning
of the formula.

Division is folded away at parse time: the divisor must be a nonzero
numeric constant, so every parsed term is a polynomial with exact rational
coefficients.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

from .errors import (
    NonConstantDivisor,
    SmtParseError,
    SortError,
    UnknownSymbol,
    UnsupportedCommand,
)
from .normalize import normalize
from .terms import (
    And,
    AtomNode,
    Const,
    Formula,
    Negate,
    Or,
    Product,
    RawAnd,
    RawAtom,
    RawFormula,
    RawNot,
    RawOr,
    Relation,
    Sum,
    Term,
    Var,
)

_NUMERAL_RE = re.compile(r"^-?[0-9]+$")
_DECIMAL_RE = re.compile(r"^-?[0-9]+\.[0-9]+$")


@dataclass
class ParsedProblem:
    """A parsed script: declared variables plus the normalized conjunction
    of all assertions."""

    variables: list[str]
    formula: Formula
    metadata: dict[str, str] = field(default_factory=dict)
    declared_logic: str = ""
    raw_formula: RawFormula | None = None

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    def var_index(self, name: str) -> int:
        return self.variables.index(name)


# --------------------------------------------------------------------------
# Tokenizer and s-expression reader


def _tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            tokens.append(c)
            i += 1
        elif c == '"':
            j = i + 1
            while j < n:
                if text[j] == '"':
                    if j + 1 < n and text[j + 1] == '"':  # doubled quote escape
                        j += 2
                        continue
                    break
                j += 1
            if j >= n:
                raise SmtParseError("unterminated string literal")
            tokens.append(text[i : j + 1])
            i = j + 1
        elif c == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise SmtParseError("unterminated quoted symbol")
            tokens.append(text[i : j + 1])
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in ' \t\r\n();"|':
                j += 1
            tokens.append(text[i:j])
            i = j
    return tokens


SExpr = Union[str, list]


def _read_sexprs(tokens: list[str]) -> list[SExpr]:
    exprs: list[SExpr] = []
    stack: list[list] = []
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if not stack:
                raise SmtParseError("unbalanced ')'")
            done = stack.pop()
            (stack[-1] if stack else exprs).append(done)
        else:
            (stack[-1] if stack else exprs).append(tok)
    if stack:
        raise SmtParseError("unbalanced '('")
    return exprs


def _sexpr_str(sx: SExpr) -> str:
    if isinstance(sx, str):
        return sx
    return "(" + " ".join(_sexpr_str(c) for c in sx) + ")"


# --------------------------------------------------------------------------
# Term parsing

_RELS = ("=", "<", "<=", ">", ">=")
Node = Union[Term, RawFormula]


def _parse_literal(tok: str) -> Fraction | None:
    if _NUMERAL_RE.match(tok):
        return Fraction(int(tok))
    if _DECIMAL_RE.match(tok):
        sign = -1 if tok.startswith("-") else 1
        body = tok.lstrip("-")
        whole, frac = body.split(".")
        return sign * Fraction(int(whole + frac), 10 ** len(frac))
    return None


class _TermReader:
    def __init__(self, variables: dict[str, int]):
        self.variables = variables

    def parse(self, sx: SExpr, env: dict[str, Node]) -> Node:
        if isinstance(sx, str):
            lit = _parse_literal(sx)
            if lit is not None:
                return Const(lit)
            if sx in env:
                return env[sx]
            if sx in self.variables:
                return Var(self.variables[sx])
            raise UnknownSymbol(sx)
        if not sx:
            raise SmtParseError("empty application")
        head = sx[0]
        if not isinstance(head, str):
            raise SmtParseError(f"bad application head: {_sexpr_str(sx)}")
        args = sx[1:]
        if head == "let":
            return self._parse_let(args, env)
        if head in ("and", "or"):
            children = tuple(self._formula(a, env) for a in args)
            if not children:
                raise SmtParseError(f"'{head}' needs at least one argument")
            return RawAnd(children) if head == "and" else RawOr(children)
        if head == "not":
            if len(args) != 1:
                raise SmtParseError("'not' takes exactly one argument")
            return RawNot(self._formula(args[0], env))
        if head in _RELS:
            return self._relation(head, args, env)
        if head == "distinct":
            return self._distinct(args, env)
        if head in ("+", "*"):
            terms = tuple(self._term(a, env) for a in args)
            if not terms:
                raise SmtParseError(f"'{head}' needs at least one argument")
            if len(terms) == 1:
                return terms[0]
            return Sum(terms) if head == "+" else Product(terms)
        if head == "-":
            return self._minus(args, env)
        if head == "/":
            return self._divide(args, env)
        raise UnknownSymbol(head)

    def _term(self, sx: SExpr, env: dict[str, Node]) -> Term:
        node = self.parse(sx, env)
        if isinstance(node, (RawAtom, RawNot, RawAnd, RawOr)):
            raise SortError(f"expected a Real term, got a formula: {_sexpr_str(sx)}")
        return node

    def _formula(self, sx: SExpr, env: dict[str, Node]) -> RawFormula:
        node = self.parse(sx, env)
        if not isinstance(node, (RawAtom, RawNot, RawAnd, RawOr)):
            raise SortError(f"expected a formula, got a Real term: {_sexpr_str(sx)}")
        return node

    def _relation(self, rel: str, args: list, env: dict[str, Node]) -> RawFormula:
        if len(args) < 2:
            raise SmtParseError(f"'{rel}' needs at least two arguments")
        terms = [self.parse(a, env) for a in args]
        if any(isinstance(t, (RawAtom, RawNot, RawAnd, RawOr)) for t in terms):
            raise SortError(f"'{rel}' over formulas is not supported")
        pairs = [RawAtom(terms[i], terms[i + 1], rel) for i in range(len(terms) - 1)]
        return pairs[0] if len(pairs) == 1 else RawAnd(tuple(pairs))

    def _distinct(self, args: list, env: dict[str, Node]) -> RawFormula:
        if len(args) < 2:
            raise SmtParseError("'distinct' needs at least two arguments")
        terms = [self._term(a, env) for a in args]
        nots = [
            RawNot(RawAtom(terms[i], terms[j], "="))
            for i in range(len(terms))
            for j in range(i + 1, len(terms))
        ]
        return nots[0] if len(nots) == 1 else RawAnd(tuple(nots))

    def _minus(self, args: list, env: dict[str, Node]) -> Term:
        if not args:
            raise SmtParseError("'-' needs at least one argument")
        terms = [self._term(a, env) for a in args]
        if len(terms) == 1:
            t = terms[0]
            # Fold so that printed literals like (- 5) round-trip to Const(-5).
            if isinstance(t, Const):
                return Const(-t.value)
            return Negate(t)
        rest = tuple(Negate(t) if not isinstance(t, Const) else Const(-t.value) for t in terms[1:])
        return Sum((terms[0],) + rest)

    def _divide(self, args: list, env: dict[str, Node]) -> Term:
        if len(args) < 2:
            raise SmtParseError("'/' needs at least two arguments")
        numer = self._term(args[0], env)
        scale = Fraction(1)
        for a in args[1:]:
            d = self._term(a, env)
            if not isinstance(d, Const) or d.value == 0:
                raise NonConstantDivisor(f"divisor must be a nonzero constant: {_sexpr_str(a)}")
            scale /= d.value
        if isinstance(numer, Const):
            return Const(numer.value * scale)
        if scale == 1:
            return numer
        return Product((Const(scale), numer))

    def _parse_let(self, args: list, env: dict[str, Node]) -> Node:
        if len(args) != 2 or not isinstance(args[0], list):
            raise SmtParseError("malformed 'let'")
        # Bindings are evaluated in the outer scope (parallel let) and
        # inlined by substitution; no sharing is kept at the AST level.
        new_env = dict(env)
        for binding in args[0]:
            if not (isinstance(binding, list) and len(binding) == 2 and isinstance(binding[0], str)):
                raise SmtParseError("malformed 'let' binding")
            new_env[binding[0]] = self.parse(binding[1], env)
        return self.parse(args[1], new_env)


# --------------------------------------------------------------------------
# Script interpretation


def parse_script(text: str) -> ParsedProblem:
    """Parse a script and return the normalized conjunction of its asserts."""
    exprs = _read_sexprs(_tokenize(text))
    variables: dict[str, int] = {}
    metadata: dict[str, str] = {}
    logic = ""
    assertions: list[RawFormula] = []
    reader = _TermReader(variables)

    for sx in exprs:
        if not isinstance(sx, list) or not sx or not isinstance(sx[0], str):
            raise SmtParseError(f"expected a command, got {_sexpr_str(sx)}")
        cmd = sx[0]
        if cmd == "set-logic":
            if len(sx) != 2 or not isinstance(sx[1], str):
                raise SmtParseError("malformed set-logic")
            logic = sx[1]
        elif cmd == "set-info":
            if len(sx) < 2 or not isinstance(sx[1], str) or not sx[1].startswith(":"):
                raise SmtParseError("malformed set-info")
            metadata[sx[1]] = " ".join(_sexpr_str(a) for a in sx[2:])
        elif cmd in ("declare-fun", "declare-const"):
            _declare(cmd, sx[1:], variables)
        elif cmd == "assert":
            if len(sx) != 2:
                raise SmtParseError("malformed assert")
            node = reader.parse(sx[1], {})
            if not isinstance(node, (RawAtom, RawNot, RawAnd, RawOr)):
                raise SortError("assert body must be a formula")
            assertions.append(node)
        elif cmd in ("check-sat", "get-model", "exit"):
            pass
        else:
            raise UnsupportedCommand(cmd)

    if not assertions:
        raise SmtParseError("script contains no assertions")
    raw = assertions[0] if len(assertions) == 1 else RawAnd(tuple(assertions))
    return ParsedProblem(
        variables=[name for name, _ in sorted(variables.items(), key=lambda kv: kv[1])],
        formula=normalize(raw),
        metadata=metadata,
        declared_logic=logic,
        raw_formula=raw,
    )


def _declare(cmd: str, args: list, variables: dict[str, int]) -> None:
    if cmd == "declare-fun":
        if len(args) != 3 or not isinstance(args[0], str):
            raise SmtParseError("malformed declare-fun")
        name, params, sort = args
        if not isinstance(params, list) or params:
            raise SortError(f"'{name}': only zero-arity declarations are supported")
    else:
        if len(args) != 2 or not isinstance(args[0], str):
            raise SmtParseError("malformed declare-const")
        name, sort = args
    if sort != "Real":
        raise SortError(f"'{name}': only sort Real is supported, got {_sexpr_str(sort)}")
    if name in variables:
        raise SmtParseError(f"duplicate declaration of '{name}'")
    variables[name] = len(variables)


# --------------------------------------------------------------------------
# Printing (round-trips through parse_script)


def format_fraction(fr: Fraction) -> str:
    """Render an exact rational as a numeral, a decimal, or ``(/ p q)``."""
    if fr < 0:
        return f"(- {format_fraction(-fr)})"
    if fr.denominator == 1:
        return str(fr.numerator)
    den = fr.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den == 1:
        k = max(twos, fives)
        scaled = fr.numerator * 10**k // fr.denominator
        digits = str(scaled).rjust(k + 1, "0")
        return f"{digits[:-k]}.{digits[-k:]}"
    return f"(/ {fr.numerator} {fr.denominator})"


def format_term(t: Term, names: list[str]) -> str:
    if isinstance(t, Const):
        return format_fraction(t.value)
    if isinstance(t, Var):
        return names[t.index]
    if isinstance(t, Negate):
        return f"(- {format_term(t.term, names)})"
    op = "+" if isinstance(t, Sum) else "*"
    return "(" + op + " " + " ".join(format_term(c, names) for c in t.terms) + ")"


def format_formula(f: Formula, names: list[str]) -> str:
    if isinstance(f, AtomNode):
        return f"({f.atom.relation.value} {format_term(f.atom.poly, names)} 0)"
    op = "and" if isinstance(f, And) else "or"
    return "(" + op + " " + " ".join(format_formula(c, names) for c in f.children) + ")"


def print_problem(p: ParsedProblem, extra_asserts: list[str] | None = None) -> str:
    """Render a problem back to the supported subset as a single assert."""
    lines = []
    if p.declared_logic:
        lines.append(f"(set-logic {p.declared_logic})")
    for key, value in p.metadata.items():
        lines.append(f"(set-info {key} {value})" if value else f"(set-info {key})")
    for name in p.variables:
        lines.append(f"(declare-fun {name} () Real)")
    lines.append(f"(assert {format_formula(p.formula, p.variables)})")
    for extra in extra_asserts or []:
        lines.append(extra)
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"
