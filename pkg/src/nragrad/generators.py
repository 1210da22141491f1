"""Benchmark instance generators.

Both generators emit plain SMT-LIB 2 text that round-trips through this
package's own frontend, and both are deterministic functions of their
config (same seed, same bytes).
"""

from __future__ import annotations

import random
from dataclasses import dataclass

H_VARS = ("h1", "h2", "h3", "h4", "h5", "h6")
J_VAR = "j2"


@dataclass(frozen=True)
class MboGenConfig:
    """Single-root instances: a random sum of signed monomial products over
    positive variables.

    Each of ``products`` summands multiplies an integer coefficient with
    ``degree`` sampled h-variables (so the h-exponents of every product sum
    to exactly ``degree``), and with probability ``j2_prob`` an extra
    ``j2^k`` factor, k uniform in 1..degree.  Coefficients are uniform in
    [coeff_lo, coeff_hi] and flip sign with probability ``neg_prob``.
    """

    products: int
    degree: int
    j2_prob: float = 0.4
    coeff_lo: int = 1
    coeff_hi: int = 20
    neg_prob: float = 0.2
    seed: int = 0
    exp_scheme: str = "multinomial"  # or "composition"

    def validate(self) -> None:
        if self.products < 1 or self.degree < 1:
            raise ValueError("products and degree must be positive")
        if not (0 <= self.j2_prob <= 1 and 0 <= self.neg_prob <= 1):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.coeff_lo < 1 or self.coeff_hi < self.coeff_lo:
            raise ValueError("need 1 <= coeff_lo <= coeff_hi")
        if self.exp_scheme not in ("multinomial", "composition"):
            raise ValueError(f"unknown exp_scheme {self.exp_scheme!r}")


@dataclass(frozen=True)
class SampledProduct:
    coeff: int
    h_exponents: tuple[int, ...]  # one per H_VARS entry, sums to degree
    j2_exponent: int  # 0 when absent


def _sample_exponents(rng: random.Random, degree: int, scheme: str) -> tuple[int, ...]:
    counts = [0] * len(H_VARS)
    if scheme == "multinomial":
        # degree independent uniform picks of a variable index
        for _ in range(degree):
            counts[rng.randrange(len(H_VARS))] += 1
    else:
        # uniform over weak compositions of degree into six parts
        bars = sorted(rng.sample(range(degree + len(H_VARS) - 1), len(H_VARS) - 1))
        prev = -1
        for i, b in enumerate(bars):
            counts[i] = b - prev - 1
            prev = b
        counts[-1] = degree + len(H_VARS) - 2 - prev
    return tuple(counts)


def sample_products(cfg: MboGenConfig) -> list[SampledProduct]:
    cfg.validate()
    rng = random.Random(cfg.seed)
    out = []
    for _ in range(cfg.products):
        h_exps = _sample_exponents(rng, cfg.degree, cfg.exp_scheme)
        j2_exp = 0
        if rng.random() < cfg.j2_prob:
            j2_exp = rng.randint(1, cfg.degree)
        coeff = rng.randint(cfg.coeff_lo, cfg.coeff_hi)
        if rng.random() < cfg.neg_prob:
            coeff = -coeff
        out.append(SampledProduct(coeff, h_exps, j2_exp))
    return out


def _product_text(p: SampledProduct) -> str:
    factors = [f"(- {-p.coeff})" if p.coeff < 0 else str(p.coeff)]
    for name, e in zip(H_VARS, p.h_exponents):
        factors.extend([name] * e)
    factors.extend([J_VAR] * p.j2_exponent)
    return "(* " + " ".join(factors) + ")"


def gen_mbo(cfg: MboGenConfig) -> str:
    """One `sum of products = 0` assertion plus positivity for every
    variable that appears."""
    products = sample_products(cfg)
    used = [
        name
        for i, name in enumerate(H_VARS)
        if any(p.h_exponents[i] > 0 for p in products)
    ]
    if any(p.j2_exponent > 0 for p in products):
        used.append(J_VAR)

    lines = [
        f"; random sum-of-products instance: products={cfg.products} degree={cfg.degree}",
        f"; j2_prob={cfg.j2_prob} coeff=[{cfg.coeff_lo},{cfg.coeff_hi}] "
        f"neg_prob={cfg.neg_prob} seed={cfg.seed} scheme={cfg.exp_scheme}",
        "(set-logic QF_NRA)",
        "(set-info :status unknown)",
    ]
    lines += [f"(declare-fun {name} () Real)" for name in used]
    terms = [_product_text(p) for p in products]
    poly = terms[0] if len(terms) == 1 else "(+ " + " ".join(terms) + ")"
    lines.append(f"(assert (= {poly} 0))")
    lines += [f"(assert (> {name} 0))" for name in used]
    lines.append("(check-sat)")
    lines.append("(exit)")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class KissingConfig:
    """Place ``points`` points on the unit sphere in ``dims`` dimensions
    with pairwise squared distance at least one."""

    points: int
    dims: int

    def validate(self) -> None:
        if self.points < 1 or self.dims < 1:
            raise ValueError("points and dims must be positive")


def gen_kissing(cfg: KissingConfig) -> str:
    cfg.validate()
    names = [[f"x_{n}_{d}" for d in range(cfg.dims)] for n in range(cfg.points)]
    lines = [
        f"; unit-sphere point placement: points={cfg.points} dims={cfg.dims}",
        "(set-logic QF_NRA)",
        "(set-info :status unknown)",
    ]
    for row in names:
        lines += [f"(declare-fun {v} () Real)" for v in row]

    def sq_norm(row):
        sq = [f"(* {v} {v})" for v in row]
        return sq[0] if len(sq) == 1 else "(+ " + " ".join(sq) + ")"

    for row in names:
        lines.append(f"(assert (= {sq_norm(row)} 1))")
    for m in range(cfg.points):
        for n in range(m + 1, cfg.points):
            diffs = [f"(- {a} {b})" for a, b in zip(names[m], names[n])]
            sq = [f"(* {d} {d})" for d in diffs]
            dist = sq[0] if len(sq) == 1 else "(+ " + " ".join(sq) + ")"
            lines.append(f"(assert (>= {dist} 1))")
    lines.append("(check-sat)")
    lines.append("(exit)")
    return "\n".join(lines) + "\n"
