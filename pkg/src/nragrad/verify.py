"""Sound checking of search candidates.

Candidates only become a sat answer through one of three exact routes:

  * formulas without equality atoms are checked directly with arbitrary
    precision rationals built from the candidate's binary64 coordinates;
  * a lone equality plus per-variable bounds can be replaced by a doubled
    problem asking for one point with negative and one with positive
    polynomial value inside the same (connected) bound region; exact sign
    checks on both witnesses then certify a root in between;
  * everything else is delegated to a user-configured external solver on
    a copy of the problem restricted to a small box around the candidate.

Floating point appears nowhere on these paths.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Sequence, Union

from .compiler import to_monomials
from .errors import NotEligible, ProtocolError, SpawnFailure
from .parser import ParsedProblem, format_fraction, print_problem
from .terms import (
    And,
    Atom,
    AtomNode,
    Formula,
    Relation,
    Term,
    atom_holds_exact,
    eval_bool_exact,
    eval_term_exact,
    iter_atoms,
    neg,
    remap_vars,
)


class VerificationPath(Enum):
    EXACT_INEQUALITY = "exact_inequality"
    NEEDS_EXTERNAL = "needs_external"
    SIGN_PAIR_ELIGIBLE = "sign_pair_eligible"


@dataclass(frozen=True)
class Verified:
    model: tuple[Fraction, ...]


@dataclass(frozen=True)
class Spurious:
    pass


@dataclass(frozen=True)
class NeedsExternal:
    query: str


@dataclass(frozen=True)
class ExternalSat:
    model_text: str


@dataclass(frozen=True)
class ExternalUnsatOrUnknown:
    reason: str


@dataclass(frozen=True)
class SatByIVT:
    lower_witness: tuple[Fraction, ...]
    upper_witness: tuple[Fraction, ...]


VerificationOutcome = Union[
    Verified, Spurious, NeedsExternal, ExternalSat, ExternalUnsatOrUnknown, SatByIVT
]


def exact_assignment(values: Sequence[float]) -> tuple[Fraction, ...]:
    """Exact rationals from binary64 coordinates (no rounding)."""
    return tuple(Fraction(float(v)) for v in values)


# --------------------------------------------------------------------------
# Classification


def _conjunct_atoms(f: Formula) -> list[Atom] | None:
    """Atoms of a pure conjunction tree, or None if any disjunction occurs."""
    if isinstance(f, AtomNode):
        return [f.atom]
    if not isinstance(f, And):
        return None
    out: list[Atom] = []
    for child in f.children:
        sub = _conjunct_atoms(child)
        if sub is None:
            return None
        out.extend(sub)
    return out


def _is_interval_bound(poly: Term, num_vars: int) -> bool:
    """True for polynomials of shape ``a*x + c`` with a single variable."""
    try:
        rows = to_monomials(poly, num_vars, cap=8)
    except Exception:
        return False
    var = None
    has_linear = False
    for _, exps in rows:
        degree = sum(exps)
        if degree == 0:
            continue
        if degree != 1:
            return False
        v = exps.index(1)
        if var is not None and var != v:
            return False
        var = v
        has_linear = True
    return has_linear


def classify(p: ParsedProblem) -> VerificationPath:
    """Pick the cheapest sound verification route for a problem.

    No equality atoms at all allows direct exact checking.  A conjunction
    of exactly one equality plus per-variable interval bounds is eligible
    for the sign-pair transformation (the bound region is a box, hence
    connected, which the root argument needs).  Everything else requires
    an external solver.
    """
    atoms = list(iter_atoms(p.formula))
    if not any(a.relation is Relation.EQ for a in atoms):
        return VerificationPath.EXACT_INEQUALITY
    conj = _conjunct_atoms(p.formula)
    if conj is None:
        return VerificationPath.NEEDS_EXTERNAL
    eq_atoms = [a for a in conj if a.relation is Relation.EQ]
    rest = [a for a in conj if a.relation is not Relation.EQ]
    if len(eq_atoms) == 1 and all(_is_interval_bound(a.poly, p.num_vars) for a in rest):
        return VerificationPath.SIGN_PAIR_ELIGIBLE
    return VerificationPath.NEEDS_EXTERNAL


# --------------------------------------------------------------------------
# Exact inequality route


def check_exact(assignment: Sequence[float], f: Formula) -> Verified | Spurious:
    """Exact truth of an equality-free formula at the candidate point."""
    if any(a.relation is Relation.EQ for a in iter_atoms(f)):
        raise ValueError("check_exact requires a formula without equality atoms")
    model = exact_assignment(assignment)
    return Verified(model) if eval_bool_exact(f, model) else Spurious()


# --------------------------------------------------------------------------
# External route


def emit_bounded_query(p: ParsedProblem, assignment: Sequence[float], delta) -> str:
    """The original problem plus a ±delta box around the candidate."""
    delta = Fraction(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    center = exact_assignment(assignment)
    bounds = []
    for name, c in zip(p.variables, center):
        lo, hi = c - delta, c + delta
        bounds.append(f"(assert (<= {format_fraction(lo)} {name}))")
        bounds.append(f"(assert (<= {name} {format_fraction(hi)}))")
    query = replace(p, declared_logic=p.declared_logic or "QF_NRA")
    return print_problem(query, extra_asserts=bounds)


def run_external(
    command: str | Sequence[str], query: str, timeout: float
) -> ExternalSat | ExternalUnsatOrUnknown:
    """Run a user-configured solver on the query and parse its verdict.

    ``{query}`` in the command template is replaced by a temp-file path;
    without it the query is piped to stdin.  The first ``sat`` / ``unsat``
    / ``unknown`` token of stdout decides; a timeout counts as unknown.
    """
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    tmp: Path | None = None
    try:
        if any("{query}" in a for a in argv):
            with tempfile.NamedTemporaryFile(
                "w", suffix=".smt2", delete=False, encoding="utf-8"
            ) as fh:
                fh.write(query)
                tmp = Path(fh.name)
            argv = [a.replace("{query}", str(tmp)) for a in argv]
            stdin_text = None
        else:
            stdin_text = query
        try:
            proc = subprocess.run(
                argv, input=stdin_text, capture_output=True, text=True, timeout=timeout
            )
        except FileNotFoundError as e:
            raise SpawnFailure(f"cannot run verifier: {e}") from e
        except PermissionError as e:
            raise SpawnFailure(f"cannot run verifier: {e}") from e
        except subprocess.TimeoutExpired:
            return ExternalUnsatOrUnknown("timeout")
        lines = proc.stdout.splitlines()
        for idx, line in enumerate(lines):
            token = line.strip()
            if token == "sat":
                return ExternalSat("\n".join(lines[idx + 1 :]).strip())
            if token in ("unsat", "unknown"):
                return ExternalUnsatOrUnknown(token)
        raise ProtocolError(
            f"no sat/unsat/unknown in verifier output: {proc.stdout[:200]!r} "
            f"(stderr: {proc.stderr[:200]!r})"
        )
    finally:
        if tmp is not None:
            tmp.unlink(missing_ok=True)


# --------------------------------------------------------------------------
# Sign-pair route


@dataclass
class SignPairProblem:
    """A single-equality problem with every variable duplicated.

    The first half of the variables is the copy that must make the root
    polynomial negative, the second half the positive copy; every interval
    bound applies to both copies.
    """

    base: ParsedProblem
    problem: ParsedProblem
    root_poly: Term
    bound_atoms: list[Atom]

    @property
    def num_base_vars(self) -> int:
        return self.base.num_vars


def interval_transform(p: ParsedProblem) -> SignPairProblem:
    if classify(p) is not VerificationPath.SIGN_PAIR_ELIGIBLE:
        raise NotEligible("problem is not a single equality over interval bounds")
    atoms = _conjunct_atoms(p.formula)
    assert atoms is not None
    root = next(a.poly for a in atoms if a.relation is Relation.EQ)
    bound_atoms = [a for a in atoms if a.relation is not Relation.EQ]

    n = p.num_vars
    taken = set(p.variables)

    def fresh(name: str, suffix: str) -> str:
        candidate = name + suffix
        while candidate in taken:
            candidate += "_"
        taken.add(candidate)
        return candidate

    under_names = [fresh(v, "_under") for v in p.variables]
    over_names = [fresh(v, "_over") for v in p.variables]

    children: list[Formula] = [
        AtomNode(Atom(root, Relation.LT)),
        AtomNode(Atom(neg(remap_vars(root, n)), Relation.LT)),
    ]
    for atom in bound_atoms:
        children.append(AtomNode(atom))
        children.append(AtomNode(Atom(remap_vars(atom.poly, n), atom.relation)))

    doubled = ParsedProblem(
        variables=under_names + over_names,
        formula=And(tuple(children)),
        metadata=dict(p.metadata),
        declared_logic=p.declared_logic,
    )
    return SignPairProblem(base=p, problem=doubled, root_poly=root, bound_atoms=bound_atoms)


def check_sign_pair(
    assignment: Sequence[float], sp: SignPairProblem
) -> SatByIVT | Spurious:
    """Exact sign and bound checks on both halves of a doubled candidate."""
    n = sp.num_base_vars
    values = exact_assignment(assignment)
    if len(values) != 2 * n:
        raise ValueError(f"expected {2 * n} coordinates, got {len(values)}")
    under, over = values[:n], values[n:]
    if not eval_term_exact(sp.root_poly, under) < 0:
        return Spurious()
    if not eval_term_exact(sp.root_poly, over) > 0:
        return Spurious()
    for atom in sp.bound_atoms:
        if not atom_holds_exact(atom, under) or not atom_holds_exact(atom, over):
            return Spurious()
    return SatByIVT(lower_witness=under, upper_witness=over)
