"""Satisfiability search for quantifier-free nonlinear real arithmetic.

Formulas are compiled into a relaxed real-valued loss, minimized by
batched projected gradient descent, and every candidate answer is checked
soundly (exact rational arithmetic or an external solver) before anything
is reported sat.
"""

from .bench import BenchRecord, SolveResult, run_bench, solve_problem
from .compiler import (
    CompiledLoss,
    MonomialTable,
    PowerPlan,
    compile_loss,
    eval_compiled,
    eval_tree,
    eval_tree_batch,
    grad_compiled,
    plan_powers,
    to_monomials,
)
from .engine import (
    BatchState,
    Candidate,
    SearchConfig,
    SearchOutcome,
    SearchStatus,
    init_batch,
    project,
    search,
    step,
)
from .generators import KissingConfig, MboGenConfig, gen_kissing, gen_mbo
from .loss import (
    AtomKind,
    LossSpec,
    atom_loss_subgrad_factor,
    atom_loss_value,
    build_loss,
)
from .normalize import normalize
from .parser import ParsedProblem, parse_script, print_problem
from .terms import (
    And,
    Atom,
    AtomNode,
    Const,
    Formula,
    Negate,
    Or,
    Product,
    Relation,
    Sum,
    Term,
    Var,
    eval_bool_exact,
)
from .verify import (
    ExternalSat,
    ExternalUnsatOrUnknown,
    NeedsExternal,
    SatByIVT,
    SignPairProblem,
    Spurious,
    VerificationOutcome,
    VerificationPath,
    Verified,
    check_exact,
    check_sign_pair,
    classify,
    emit_bounded_query,
    interval_transform,
    run_external,
)

__version__ = "0.1.0"

__all__ = [
    "And",
    "Atom",
    "AtomKind",
    "AtomNode",
    "BatchState",
    "BenchRecord",
    "Candidate",
    "CompiledLoss",
    "Const",
    "ExternalSat",
    "ExternalUnsatOrUnknown",
    "Formula",
    "KissingConfig",
    "LossSpec",
    "MboGenConfig",
    "MonomialTable",
    "NeedsExternal",
    "Negate",
    "Or",
    "ParsedProblem",
    "PowerPlan",
    "Product",
    "Relation",
    "SatByIVT",
    "SearchConfig",
    "SearchOutcome",
    "SearchStatus",
    "SignPairProblem",
    "SolveResult",
    "Spurious",
    "Sum",
    "Term",
    "Var",
    "VerificationOutcome",
    "VerificationPath",
    "Verified",
    "atom_loss_subgrad_factor",
    "atom_loss_value",
    "build_loss",
    "check_exact",
    "check_sign_pair",
    "classify",
    "compile_loss",
    "emit_bounded_query",
    "eval_bool_exact",
    "eval_compiled",
    "eval_tree",
    "eval_tree_batch",
    "gen_kissing",
    "gen_mbo",
    "grad_compiled",
    "init_batch",
    "interval_transform",
    "normalize",
    "parse_script",
    "plan_powers",
    "print_problem",
    "project",
    "run_bench",
    "run_external",
    "search",
    "solve_problem",
    "step",
    "to_monomials",
]
