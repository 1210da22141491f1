"""Compilation of constraint polynomials into a sparse monomial form.

Every atom's polynomial is distributed into a table of rows
``coeff * prod_i x_i^(e_i)``.  Evaluation then runs in three grouped
passes over the whole batch: build per-variable power columns up to the
maximum needed exponent, gather-and-multiply the powers each monomial
needs (at most one pass per distinct variable slot in a row), and
segment-sum rows into their owning atoms.  Derivatives reuse the same
power columns at exponent ``e - 1`` so nothing ever divides by a
coordinate that may sit at zero.

Atoms whose expansion would exceed the row cap are kept on a tree
interpreter instead; values and gradients for those fall back to batched
recursion over the original term.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import CapExceeded, MissingVariable, ShapeMismatch
from .loss import LossSpec
from .terms import Const, Negate, Product, Sum, Term, Var

DEFAULT_EXPANSION_CAP = 100_000

ExpKey = tuple[int, ...]


def to_monomials(
    p: Term, num_vars: int, cap: int = DEFAULT_EXPANSION_CAP
) -> list[tuple[Fraction, ExpKey]]:
    """Expand a polynomial term into ``(coeff, exponent row)`` pairs.

    Like monomials are merged and zero coefficients dropped, so the result
    is empty for the zero polynomial.  Raises CapExceeded if the expansion
    would grow past ``cap`` rows; callers route such atoms to the tree
    interpreter.
    """
    zero = (0,) * num_vars

    def expand(t: Term) -> dict[ExpKey, Fraction]:
        if isinstance(t, Const):
            return {zero: t.value} if t.value != 0 else {}
        if isinstance(t, Var):
            if t.index >= num_vars:
                raise MissingVariable(f"variable #{t.index} out of range")
            key = list(zero)
            key[t.index] = 1
            return {tuple(key): Fraction(1)}
        if isinstance(t, Negate):
            return {k: -c for k, c in expand(t.term).items()}
        if isinstance(t, Sum):
            acc: dict[ExpKey, Fraction] = {}
            for child in t.terms:
                for k, c in expand(child).items():
                    v = acc.get(k, Fraction(0)) + c
                    if v == 0:
                        acc.pop(k, None)
                    else:
                        acc[k] = v
                if len(acc) > cap:
                    raise CapExceeded(f"monomial expansion exceeded {cap} rows")
            return acc
        acc = {zero: Fraction(1)}
        for child in t.terms:
            rhs = expand(child)
            nxt: dict[ExpKey, Fraction] = {}
            for ka, ca in acc.items():
                for kb, cb in rhs.items():
                    k = tuple(a + b for a, b in zip(ka, kb))
                    v = nxt.get(k, Fraction(0)) + ca * cb
                    if v == 0:
                        nxt.pop(k, None)
                    else:
                        nxt[k] = v
                if len(nxt) > cap:
                    raise CapExceeded(f"monomial expansion exceeded {cap} rows")
            acc = nxt
        return acc

    rows = expand(p)
    return [(rows[k], k) for k in sorted(rows.keys())]


@dataclass(frozen=True)
class MonomialTable:
    """Flattened monomials of all compiled atoms.

    Coefficients are rounded from exact rationals to float64 exactly once,
    here; rows owned by the same atom occupy a contiguous index range.
    """

    coeffs: np.ndarray  # float64 [n_rows]
    exponents: np.ndarray  # int64 [n_rows x num_vars], nonnegative
    owner: np.ndarray  # int64 [n_rows], nondecreasing atom ids
    num_vars: int
    num_atoms: int

    @property
    def num_rows(self) -> int:
        return len(self.coeffs)


@dataclass(frozen=True)
class PowerPlan:
    """Shared power slots: slot ``base[v] + (e - 1)`` holds ``x_v^e``.

    The entry arrays hold one record per nonzero exponent of the table in
    (row, variable) order; ``position_groups`` regroups them by their
    ordinal inside the row so evaluation can multiply all first factors,
    then all second factors, and so on.
    """

    max_exp: np.ndarray  # int64 [num_vars]
    slot_base: np.ndarray  # int64 [num_vars], -1 for unused variables
    num_slots: int
    entry_row: np.ndarray  # int64 [n_entries]
    entry_var: np.ndarray
    entry_exp: np.ndarray
    entry_slot: np.ndarray
    position_groups: tuple[tuple[np.ndarray, np.ndarray], ...] = field(repr=False)
    row_start: np.ndarray = field(repr=False)  # int64 [n_rows + 1]


def plan_powers(table: MonomialTable) -> PowerPlan:
    """Plan per-variable power precomputation for a table.

    Deterministic given the table: entries list nonzero exponents row by
    row, variables in ascending order.
    """
    max_exp = table.exponents.max(axis=0) if table.num_rows else np.zeros(table.num_vars, np.int64)
    max_exp = max_exp.astype(np.int64)
    slot_base = np.full(table.num_vars, -1, dtype=np.int64)
    total = 0
    for v in range(table.num_vars):
        if max_exp[v] > 0:
            slot_base[v] = total
            total += int(max_exp[v])

    rows, entry_vars = np.nonzero(table.exponents)
    exps = table.exponents[rows, entry_vars].astype(np.int64)
    slots = slot_base[entry_vars] + exps - 1

    row_start = np.zeros(table.num_rows + 1, dtype=np.int64)
    np.add.at(row_start, rows + 1, 1)
    row_start = np.cumsum(row_start)

    # Group the k-th entry of every row together (rows are already sorted).
    groups: list[tuple[np.ndarray, np.ndarray]] = []
    counts = np.diff(row_start)
    max_len = int(counts.max()) if len(counts) else 0
    for k in range(max_len):
        has_k = counts > k
        idx = row_start[:-1][has_k] + k
        groups.append((np.nonzero(has_k)[0].astype(np.int64), idx.astype(np.int64)))

    return PowerPlan(
        max_exp=max_exp,
        slot_base=slot_base,
        num_slots=total,
        entry_row=rows.astype(np.int64),
        entry_var=entry_vars.astype(np.int64),
        entry_exp=exps,
        entry_slot=slots.astype(np.int64),
        position_groups=tuple(groups),
        row_start=row_start,
    )


def plan_multiplication_counts(table: MonomialTable, plan: PowerPlan) -> tuple[int, int]:
    """(planned, naive) multiplications per batch row.

    Planned: power-column construction beyond the first power, plus one
    multiply per gathered factor.  Naive evaluates each monomial by
    repeated multiplication of its variables into the coefficient.
    """
    planned = int(np.maximum(plan.max_exp - 1, 0).sum()) + len(plan.entry_row)
    naive = int(plan.entry_exp.sum())
    return planned, naive


@dataclass(frozen=True)
class CompiledLoss:
    """A loss specification lowered to table + plan, ready for batch eval."""

    spec: LossSpec
    num_vars: int
    table: MonomialTable
    plan: PowerPlan
    fallback: dict[int, Term]  # atom_id -> original polynomial
    atom_row_start: np.ndarray  # int64 [num_atoms + 1] segments into table rows

    @property
    def num_atoms(self) -> int:
        return self.spec.num_atoms


def compile_loss(
    spec: LossSpec, num_vars: int, cap: int = DEFAULT_EXPANSION_CAP
) -> CompiledLoss:
    coeffs: list[float] = []
    exp_rows: list[ExpKey] = []
    owner: list[int] = []
    fallback: dict[int, Term] = {}
    for atom in spec.atoms:
        try:
            rows = to_monomials(atom.poly, num_vars, cap)
        except CapExceeded:
            fallback[atom.atom_id] = atom.poly
            continue
        for c, k in rows:
            coeffs.append(float(c))
            exp_rows.append(k)
            owner.append(atom.atom_id)
    table = MonomialTable(
        coeffs=np.asarray(coeffs, dtype=np.float64),
        exponents=(
            np.asarray(exp_rows, dtype=np.int64)
            if exp_rows
            else np.zeros((0, num_vars), np.int64)
        ),
        owner=np.asarray(owner, dtype=np.int64),
        num_vars=num_vars,
        num_atoms=spec.num_atoms,
    )
    atom_row_start = np.zeros(spec.num_atoms + 1, dtype=np.int64)
    np.add.at(atom_row_start, table.owner + 1, 1)
    atom_row_start = np.cumsum(atom_row_start)
    return CompiledLoss(
        spec=spec,
        num_vars=num_vars,
        table=table,
        plan=plan_powers(table),
        fallback=fallback,
        atom_row_start=atom_row_start,
    )


# --------------------------------------------------------------------------
# Batched evaluation


def _check_batch(c: CompiledLoss, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != c.num_vars:
        raise ShapeMismatch(f"expected [batch x {c.num_vars}] matrix, got {X.shape}")
    return X


def _power_columns(c: CompiledLoss, X: np.ndarray) -> np.ndarray:
    """[batch x (1 + num_slots)]; column 0 is the constant 1."""
    plan = c.plan
    PW = np.empty((X.shape[0], 1 + plan.num_slots), dtype=np.float64)
    PW[:, 0] = 1.0
    for v in range(c.num_vars):
        m = int(plan.max_exp[v])
        if m == 0:
            continue
        base = 1 + int(plan.slot_base[v])
        col = X[:, v]
        PW[:, base] = col
        for e in range(1, m):
            np.multiply(PW[:, base + e - 1], col, out=PW[:, base + e])
    return PW


def _row_values(c: CompiledLoss, PW: np.ndarray, batch: int) -> np.ndarray:
    table, plan = c.table, c.plan
    row_vals = np.empty((batch, table.num_rows), dtype=np.float64)
    row_vals[:] = table.coeffs
    for rows_k, entry_idx in plan.position_groups:
        row_vals[:, rows_k] *= PW[:, 1 + plan.entry_slot[entry_idx]]
    return row_vals


def eval_compiled(c: CompiledLoss, X: np.ndarray) -> np.ndarray:
    """Per-atom constraint values, shape [batch x num_atoms].

    Reduction runs in fixed (atom, row) order, so identical inputs give
    bitwise-identical outputs.
    """
    X = _check_batch(c, X)
    batch = X.shape[0]
    P = np.zeros((batch, c.num_atoms), dtype=np.float64)
    if c.table.num_rows:
        PW = _power_columns(c, X)
        row_vals = _row_values(c, PW, batch)
        starts = c.atom_row_start
        nonempty = np.nonzero(np.diff(starts) > 0)[0]
        if len(nonempty):
            sums = np.add.reduceat(row_vals, starts[nonempty], axis=1)
            P[:, nonempty] = sums
    for atom_id, poly in c.fallback.items():
        P[:, atom_id] = eval_tree_batch(poly, X)
    return P


def grad_compiled(c: CompiledLoss, X: np.ndarray, atom_factors: np.ndarray) -> np.ndarray:
    """Gradient of ``sum_atoms factor_atom * p_atom``, shape [batch x vars].

    For a monomial ``coeff * prod x_i^(e_i)`` the partial wrt ``x_j`` uses
    the power column at ``e_j - 1`` and the product of every other factor
    (prefix times suffix), never a division.
    """
    X = _check_batch(c, X)
    batch = X.shape[0]
    atom_factors = np.asarray(atom_factors, dtype=np.float64)
    if atom_factors.shape != (batch, c.num_atoms):
        raise ShapeMismatch(
            f"expected factors [{batch} x {c.num_atoms}], got {atom_factors.shape}"
        )
    G = np.zeros((batch, c.num_vars), dtype=np.float64)
    table, plan = c.table, c.plan
    if table.num_rows:
        PW = _power_columns(c, X)
        n_entries = len(plan.entry_row)
        prefix = np.empty((batch, n_entries), dtype=np.float64)
        suffix = np.empty((batch, n_entries), dtype=np.float64)
        run = np.empty((batch, table.num_rows), dtype=np.float64)
        run[:] = 1.0
        for rows_k, entry_idx in plan.position_groups:
            prefix[:, entry_idx] = run[:, rows_k]
            run[:, rows_k] *= PW[:, 1 + plan.entry_slot[entry_idx]]
        run[:] = 1.0
        for rows_k, entry_idx in reversed(plan.position_groups):
            suffix[:, entry_idx] = run[:, rows_k]
            run[:, rows_k] *= PW[:, 1 + plan.entry_slot[entry_idx]]

        deriv_col = np.where(
            plan.entry_exp == 1, 0, 1 + plan.slot_base[plan.entry_var] + plan.entry_exp - 2
        )
        row_weight = table.coeffs * 1.0  # [n_rows]
        contrib = (
            prefix
            * suffix
            * PW[:, deriv_col]
            * (plan.entry_exp * row_weight[plan.entry_row])
            * atom_factors[:, table.owner[plan.entry_row]]
        )
        for v in range(c.num_vars):
            sel = np.nonzero(plan.entry_var == v)[0]
            if len(sel):
                G[:, v] = contrib[:, sel].sum(axis=1)
    for atom_id, poly in c.fallback.items():
        accumulate_tree_gradient(poly, X, atom_factors[:, atom_id], G)
    return G


# --------------------------------------------------------------------------
# Tree interpreter (reference oracle and expansion-cap fallback)


def eval_tree(p: Term, x: Sequence[float]) -> float:
    """Plain recursive float evaluation at a single point."""
    if isinstance(p, Const):
        return float(p.value)
    if isinstance(p, Var):
        if p.index >= len(x):
            raise MissingVariable(f"no value for variable #{p.index}")
        return float(x[p.index])
    if isinstance(p, Negate):
        return -eval_tree(p.term, x)
    if isinstance(p, Sum):
        acc = 0.0
        for child in p.terms:
            acc += eval_tree(child, x)
        return acc
    acc = 1.0
    for child in p.terms:
        acc *= eval_tree(child, x)
    return acc


def eval_tree_batch(p: Term, X: np.ndarray) -> np.ndarray:
    """Recursive evaluation vectorized over the batch dimension."""
    if isinstance(p, Const):
        return np.full(X.shape[0], float(p.value))
    if isinstance(p, Var):
        if p.index >= X.shape[1]:
            raise MissingVariable(f"no value for variable #{p.index}")
        return X[:, p.index].copy()
    if isinstance(p, Negate):
        return -eval_tree_batch(p.term, X)
    if isinstance(p, Sum):
        acc = eval_tree_batch(p.terms[0], X)
        for child in p.terms[1:]:
            acc += eval_tree_batch(child, X)
        return acc
    acc = eval_tree_batch(p.terms[0], X)
    for child in p.terms[1:]:
        acc *= eval_tree_batch(child, X)
    return acc


def accumulate_tree_gradient(p: Term, X: np.ndarray, seed: np.ndarray, G: np.ndarray) -> None:
    """Reverse-mode sweep over the term tree; adds ``seed * dp/dx`` into G.

    Product nodes distribute via prefix/suffix partial products so a zero
    coordinate never forces a division.
    """
    if isinstance(p, Const):
        return
    if isinstance(p, Var):
        G[:, p.index] += seed
        return
    if isinstance(p, Negate):
        accumulate_tree_gradient(p.term, X, -seed, G)
        return
    if isinstance(p, Sum):
        for child in p.terms:
            accumulate_tree_gradient(child, X, seed, G)
        return
    vals = [eval_tree_batch(child, X) for child in p.terms]
    n = len(vals)
    prefix = np.ones_like(seed)
    prefixes = []
    for i in range(n):
        prefixes.append(prefix)
        prefix = prefix * vals[i]
    suffix = np.ones_like(seed)
    for i in range(n - 1, -1, -1):
        accumulate_tree_gradient(p.terms[i], X, seed * prefixes[i] * suffix, G)
        suffix = suffix * vals[i]
