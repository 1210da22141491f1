"""Batched projected gradient-descent search for satisfying assignments.

A batch of assignments is sampled uniformly inside a box, stepped with
Adam on the compiled loss, and clamped back into the box after every
update.  Samples whose loss drops to the candidate threshold are emitted
for sound verification; the search itself never declares sat.  Rejected
or duplicate candidates are restarted from fresh random points, and a
whole round is resampled when no new candidate shows up for long enough.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .compiler import CompiledLoss, compile_loss
from .errors import NonFiniteLoss
from .loss import DEFAULT_LOSS, LossFunctions, aggregate_with_weights, build_loss
from .terms import Formula

DEDUP_GRID = 1e-6


@dataclass
class SearchConfig:
    batch_size: int = 10_000
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epsilon: float = 1e-4
    box: tuple[float, float] | Sequence[tuple[float, float]] = (-1.0, 1.0)
    max_iters_per_round: int = 5_000
    max_rounds: int | None = None
    wall_timeout: float = 600.0
    seed: int = 0
    deterministic: bool = True
    candidate_threshold: float = 0.0
    tighten_box_from_bounds: bool = False
    progress_every: int = 100

    def validate(self) -> None:
        if self.batch_size < 1 or self.lr <= 0:
            raise ValueError("batch_size and lr must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        pairs = [self.box] if self._is_scalar_box() else list(self.box)
        for lo, hi in pairs:
            if not lo < hi:
                raise ValueError(f"box interval [{lo}, {hi}] is empty")

    def _is_scalar_box(self) -> bool:
        return (
            isinstance(self.box, tuple)
            and len(self.box) == 2
            and not isinstance(self.box[0], (tuple, list))
        )

    def _box_pairs(self, num_vars: int) -> list[tuple[float, float]]:
        if self._is_scalar_box():
            lo, hi = self.box
            return [(float(lo), float(hi))] * num_vars
        pairs = [(float(lo), float(hi)) for lo, hi in self.box]
        if len(pairs) != num_vars:
            raise ValueError(f"box has {len(pairs)} intervals for {num_vars} variables")
        return pairs

    def box_arrays(self, num_vars: int) -> tuple[np.ndarray, np.ndarray]:
        pairs = self._box_pairs(num_vars)
        lo = np.array([p[0] for p in pairs])
        hi = np.array([p[1] for p in pairs])
        if not np.all(lo < hi):
            raise ValueError("every box interval must satisfy lo < hi")
        return lo, hi


@dataclass
class BatchState:
    X: np.ndarray  # [batch x vars], always inside the box
    m: np.ndarray
    v: np.ndarray
    t: int
    best_loss: np.ndarray  # per-sample running minimum
    rng: np.random.Generator
    lo: np.ndarray
    hi: np.ndarray


@dataclass
class Candidate:
    assignment: np.ndarray
    loss: float
    per_atom: np.ndarray  # raw constraint values, one per atom
    round: int
    iter: int


class SearchStatus(Enum):
    CANDIDATE_FOUND = "candidate_found"
    EXHAUSTED = "exhausted"
    TIMED_OUT = "timed_out"


@dataclass
class SearchStats:
    iterations: int = 0
    rounds: int = 0
    wall_s: float = 0.0
    emitted: int = 0
    best_loss: float = math.inf
    trajectory: list[tuple[int, int, float]] = field(default_factory=list)


@dataclass
class SearchOutcome:
    status: SearchStatus
    candidates: list[Candidate]
    stats: SearchStats


def init_batch(cfg: SearchConfig, num_vars: int, rng: np.random.Generator | None = None) -> BatchState:
    """Uniform initial assignments inside the box; moments start at zero."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.box_arrays(num_vars)
    X = rng.uniform(lo, hi, size=(cfg.batch_size, num_vars))
    return BatchState(
        X=X,
        m=np.zeros_like(X),
        v=np.zeros_like(X),
        t=0,
        best_loss=np.full(cfg.batch_size, math.inf),
        rng=rng,
        lo=lo,
        hi=hi,
    )


def project(X: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Componentwise clamp into the box; idempotent."""
    return np.clip(X, lo, hi)


def _resample_rows(state: BatchState, rows: np.ndarray) -> None:
    state.X[rows] = state.rng.uniform(state.lo, state.hi, size=(len(rows), state.X.shape[1]))
    state.m[rows] = 0.0
    state.v[rows] = 0.0
    state.best_loss[rows] = math.inf


def step(
    state: BatchState,
    compiled: CompiledLoss,
    cfg: SearchConfig,
    loss_fns: LossFunctions = DEFAULT_LOSS,
) -> np.ndarray:
    """One Adam step on every sample; returns the loss at the pre-step X.

    Samples with a non-finite loss are resampled in place (their loss is
    reported as +inf); NonFiniteLoss is raised only when the entire batch
    is non-finite, which means resampling cannot help either.
    """
    from .compiler import eval_compiled, grad_compiled

    P = eval_compiled(compiled, state.X)
    atom_losses = loss_fns.value_matrix(compiled.spec, P)
    total, weights = aggregate_with_weights(compiled.spec, atom_losses)
    bad = ~np.isfinite(total)
    if bad.all():
        raise NonFiniteLoss("every sample produced a non-finite loss")
    factors = weights * loss_fns.subgrad_matrix(compiled.spec, P)
    if bad.any():
        factors[bad] = 0.0
        _resample_rows(state, np.nonzero(bad)[0])
        total = total.copy()
        total[bad] = math.inf
    G = grad_compiled(compiled, state.X, factors)
    if bad.any():
        G[bad] = 0.0

    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    state.m = b1 * state.m + (1.0 - b1) * G
    state.v = b2 * state.v + (1.0 - b2) * (G * G)
    m_hat = state.m / (1.0 - b1**state.t)
    v_hat = state.v / (1.0 - b2**state.t)
    state.X = project(state.X - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps), state.lo, state.hi)
    state.best_loss = np.minimum(state.best_loss, total)
    return total


def search(
    problem,
    cfg: SearchConfig,
    on_candidate: Callable[[Candidate], bool] | None = None,
    on_progress: Callable[[dict], None] | None = None,
    loss_fns: LossFunctions = DEFAULT_LOSS,
    compiled: CompiledLoss | None = None,
) -> SearchOutcome:
    """Run rounds of batched descent until a candidate is accepted.

    ``on_candidate`` decides what happens with each emitted candidate:
    return True to accept it and stop the search (the default accepts the
    first candidate).  Rejected candidates restart their sample from a
    fresh random point.  The search only ever reports candidates; calling
    code owns the sound sat/unsat-style verdict.
    """
    cfg.validate()
    if not hasattr(problem, "formula"):
        problem = problem.problem  # sign-pair wrapper
    formula: Formula = problem.formula
    num_vars = len(problem.variables)
    if compiled is None:
        compiled = compile_loss(build_loss(formula, cfg.epsilon), num_vars)

    box_cfg = cfg
    if cfg.tighten_box_from_bounds:
        box_cfg = _with_tightened_box(cfg, formula, num_vars)

    rng = np.random.default_rng(cfg.seed)
    stats = SearchStats()
    seen: set[tuple[int, ...]] = set()
    accepted: list[Candidate] = []
    start = time.monotonic()
    deadline = start + cfg.wall_timeout
    status = SearchStatus.EXHAUSTED

    round_no = 0
    stop = False
    while not stop:
        if cfg.max_rounds is not None and round_no >= cfg.max_rounds:
            status = SearchStatus.EXHAUSTED
            break
        round_no += 1
        stats.rounds = round_no
        state = init_batch(box_cfg, num_vars, rng)
        iters_since_new = 0
        it = 0
        while iters_since_new < cfg.max_iters_per_round and not stop:
            if time.monotonic() >= deadline:
                status = SearchStatus.TIMED_OUT
                stop = True
                break
            it += 1
            stats.iterations += 1
            X_eval = state.X.copy()
            total = step(state, compiled, cfg, loss_fns)
            finite = total[np.isfinite(total)]
            if len(finite):
                stats.best_loss = min(stats.best_loss, float(finite.min()))
            hits = np.nonzero(total <= cfg.candidate_threshold)[0]
            new_candidate = False
            if len(hits):
                hits = hits[np.argsort(total[hits], kind="stable")]
                from .compiler import eval_compiled

                for i in hits:
                    key = tuple(np.round(X_eval[i] / DEDUP_GRID).astype(np.int64).tolist())
                    if key not in seen:
                        seen.add(key)
                        new_candidate = True
                        cand = Candidate(
                            assignment=X_eval[i].copy(),
                            loss=float(total[i]),
                            per_atom=eval_compiled(compiled, X_eval[i : i + 1])[0],
                            round=round_no,
                            iter=it,
                        )
                        stats.emitted += 1
                        ok = on_candidate(cand) if on_candidate is not None else True
                        if ok:
                            accepted.append(cand)
                            status = SearchStatus.CANDIDATE_FOUND
                            stop = True
                            break
                    # Restart this sample: the point was either a duplicate
                    # or failed verification downstream.
                    _resample_rows(state, np.array([i]))
                if stop:
                    break
            iters_since_new = 0 if new_candidate else iters_since_new + 1
            if it % cfg.progress_every == 0:
                stats.trajectory.append((round_no, it, stats.best_loss))
                if on_progress is not None:
                    on_progress(
                        {
                            "round": round_no,
                            "iter": it,
                            "total_iters": stats.iterations,
                            "min_loss": float(finite.min()) if len(finite) else math.inf,
                            "best_loss": stats.best_loss,
                            "emitted": stats.emitted,
                        }
                    )

    stats.wall_s = time.monotonic() - start
    return SearchOutcome(status=status, candidates=accepted, stats=stats)


def _with_tightened_box(cfg: SearchConfig, formula: Formula, num_vars: int):
    from dataclasses import replace

    lo, hi = cfg.box_arrays(num_vars)
    lo2, hi2 = extract_bounds(formula, num_vars, lo, hi)
    return replace(cfg, box=list(zip(lo2.tolist(), hi2.tolist())))


def extract_bounds(
    formula: Formula, num_vars: int, lo: np.ndarray, hi: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Tighten the sampling box using top-level atoms of shape ``a*x + c ~ 0``.

    The atoms stay in the loss; this only narrows where initial samples and
    projections live.  Bounds that would empty an interval are ignored.
    """
    from .compiler import to_monomials
    from .terms import And, AtomNode, Relation

    lo, hi = lo.copy(), hi.copy()

    def visit(node) -> None:
        if isinstance(node, And):
            for child in node.children:
                visit(child)
            return
        if not isinstance(node, AtomNode):
            return  # disjunctions do not force anything
        shape = _univariate_linear(node.atom.poly, num_vars)
        if shape is None:
            return
        var, a, c = shape
        bound = -c / a
        if node.atom.relation is Relation.EQ:
            new_lo, new_hi = max(lo[var], bound), min(hi[var], bound)
        elif a > 0:
            new_lo, new_hi = lo[var], min(hi[var], bound)
        else:
            new_lo, new_hi = max(lo[var], bound), hi[var]
        if new_lo < new_hi:
            lo[var], hi[var] = new_lo, new_hi

    def _univariate_linear(poly, nv):
        try:
            rows = to_monomials(poly, nv, cap=8)
        except Exception:
            return None
        var, a, c = None, 0.0, 0.0
        for coeff, exps in rows:
            degree = sum(exps)
            if degree == 0:
                c = float(coeff)
            elif degree == 1:
                v = exps.index(1)
                if var is not None and var != v:
                    return None
                var, a = v, float(coeff)
            else:
                return None
        if var is None or a == 0.0:
            return None
        return var, a, c

    visit(formula)
    return lo, hi
