"""Minkowski question-mark function, Conway box function, and the measure dPsi.

Ground truth for Phi = Psi^{-1} on dyadics is the Stern ratio
``Phi(m / 2**N) = s(m) / s(m + 2**N)``; Psi on rationals is found by walking
down the Stern-Brocot tree.  Integrals against mu = dPsi are computed by
pulling back to Lebesgue measure: ``int f dmu = int_0^1 f(Phi(u)) du``.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .stern import stern, stern_table

# Denjoy's alternating series sums to Psi/2; see psi_series.
DENJOY_SCALE = 2

MAX_QUADRATURE_DEPTH = 22


class EvaluationError(ArithmeticError):
    """An integrand returned a non-finite value at a quadrature node."""


@dataclass(frozen=True)
class DyadicPoint:
    m: int
    N: int

    def __post_init__(self):
        if self.N < 0 or not 0 <= self.m <= (1 << self.N):
            raise ValueError(f"invalid dyadic point {self.m}/2^{self.N}")

    @property
    def value(self) -> Fraction:
        return Fraction(self.m, 1 << self.N)

    @classmethod
    def from_fraction(cls, x: Fraction) -> "DyadicPoint":
        x = Fraction(x)
        q = x.denominator
        if q & (q - 1):
            raise ValueError(f"{x} is not dyadic")
        return cls(x.numerator, q.bit_length() - 1)

    def __str__(self):
        return f"{self.m}/2^{self.N}"


def phi_dyadic(p: DyadicPoint) -> Fraction:
    """Conway box function at a dyadic point, exactly."""
    return Fraction(stern(p.m), stern(p.m + (1 << p.N)))


def _check_unit(x) -> Fraction:
    x = Fraction(x)
    if not 0 <= x <= 1:
        raise ValueError(f"{x} lies outside [0, 1]")
    return x


def psi_rational(x) -> Fraction:
    """Question-mark function at a rational in [0, 1], as an exact dyadic.

    Descends the Stern-Brocot tree (mediants of the current bracket) while
    bisecting the dyadic bracket in step.
    """
    x = _check_unit(x)
    if x == 0 or x == 1:
        return x
    a, b, c, d = 0, 1, 1, 1  # bracket a/b < x < c/d
    lo, width = Fraction(0), Fraction(1)
    while True:
        width /= 2
        mid = lo + width
        p, q = a + c, b + d
        med = Fraction(p, q)
        if x == med:
            return mid
        if x < med:
            c, d = p, q
        else:
            a, b = p, q
            lo = mid


def continued_fraction(x) -> tuple[int, ...]:
    """Partial quotients (a_1, a_2, ...) of x = [0; a_1, a_2, ...] in [0, 1].

    Canonical form: the last quotient is >= 2 unless x = 1.
    """
    x = _check_unit(x)
    p, q = x.numerator, x.denominator
    out = []
    while p:
        a, r = divmod(q, p)
        out.append(a)
        p, q = r, p
    return tuple(out)


def from_continued_fraction(cf: Sequence[int]) -> Fraction:
    x = Fraction(0)
    for a in reversed(cf):
        x = 1 / (a + x)
    return x


def golden_cf() -> Iterator[int]:
    """[0; 1, 1, 1, ...] = 1/phi."""
    while True:
        yield 1


def psi_series(cf: Iterable[int], tol: float = 1e-15, depth: int | None = None) -> float:
    """Question-mark function from partial quotients via Denjoy's series.

    The bare alternating series gives Psi(1/2) = 1/4 whereas the tree
    construction forces 1/2; every tested rational agrees after multiplying
    by ``DENJOY_SCALE``.  The sum stops once 2**-(a_1 + ... + a_D) < tol (the
    tail bound of an alternating series with decreasing terms) or after
    ``depth`` quotients.
    """
    total = 0.0
    exponent = 0
    sign = 1.0
    for i, a in enumerate(cf):
        if a < 1:
            raise ValueError("partial quotients must be positive")
        if depth is not None and i >= depth:
            break
        exponent += a
        total += sign * 2.0 ** -exponent
        sign = -sign
        if 2.0 ** -exponent < tol:
            break
    return DENJOY_SCALE * total


@dataclass(frozen=True)
class QuadratureRule:
    """Equal-weight rule for mu: nodes Phi(u_i) on a dyadic grid of 2**depth cells."""

    depth: int
    mode: str
    nodes: np.ndarray = field(repr=False)

    @property
    def weight(self) -> Fraction:
        return Fraction(1, 1 << self.depth)

    @property
    def weights(self) -> np.ndarray:
        return np.full(len(self.nodes), float(self.weight))

    def __len__(self):
        return len(self.nodes)

    def to_csv(self, fh) -> None:
        fh.write("node,weight\n")
        w = repr(float(self.weight))
        for x in self.nodes:
            fh.write(f"{x!r},{w}\n")


@functools.lru_cache(maxsize=16)
def build_quadrature(depth: int, mode: str = "midpoint") -> QuadratureRule:
    """Rule with nodes Phi((m + 1/2) / 2**depth) (midpoint) or Phi(m / 2**depth) (left).

    Each node is an exact Stern ratio rounded once to float.
    """
    if not 0 <= depth <= MAX_QUADRATURE_DEPTH:
        raise ValueError(f"depth must be in [0, {MAX_QUADRATURE_DEPTH}]")
    if mode == "midpoint":
        # Phi((2m+1) / 2**(depth+1)) = s(2m+1) / s(2m+1 + 2**(depth+1))
        s = stern_table(depth + 2)
        k = np.arange(1, 1 << (depth + 1), 2)
        nodes = s[k] / s[k + (1 << (depth + 1))]
    elif mode == "left":
        s = stern_table(depth + 1)
        k = np.arange(0, 1 << depth)
        nodes = s[k] / s[k + (1 << depth)]
    else:
        raise ValueError(f"unknown quadrature mode {mode!r}")
    nodes.setflags(write=False)
    return QuadratureRule(depth, mode, nodes)


def _evaluate(f: Callable, x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        y = np.asarray(f(x), dtype=float)
    if y.shape != x.shape:
        y = np.broadcast_to(y, x.shape)
    bad = ~np.isfinite(y)
    if bad.any():
        i = int(np.argmax(bad))
        raise EvaluationError(f"integrand is {y[i]} at node {i} (x = {x[i]!r})")
    return y


def gauss_branch(n: int, x):
    """Inverse branch h_n(x) = 1 / (n + x) of the Gauss map."""
    return 1.0 / (n + x)


def integrate(rule: QuadratureRule, f: Callable, tail_split: bool = False) -> float:
    """Sum of weight * f(node) in node order, with correctly rounded summation.

    With ``tail_split`` the first cell [0, Phi(2**-depth)] = [0, 1/(depth+1)]
    is replaced by its self-similar expansion
    ``sum_{k > depth} 2**-k int f(1/(k+x)) dmu(x)``, so f is never sampled
    near 0.  Use it for integrands with a singularity at the origin.
    """
    if not tail_split:
        return math.fsum(_evaluate(f, rule.nodes)) * float(rule.weight)
    body = math.fsum(_evaluate(f, rule.nodes[1:])) * float(rule.weight)
    coarse = build_quadrature(min(rule.depth, 10), "midpoint")
    parts = []
    for k in range(rule.depth + 1, rule.depth + 64):
        parts.append(2.0 ** -k * math.fsum(_evaluate(f, gauss_branch(k, coarse.nodes))) * float(coarse.weight))
    return body + math.fsum(parts)


def integrate_branches(rule: QuadratureRule, f: Callable, tol: float = 1e-16, n_max: int = 200) -> float:
    """int f dmu as sum_n 2**-n int f(h_n(x)) dmu(x), each term on ``rule``.

    This is the eigenmeasure identity for the Gauss-branch operator.  It suits
    integrands that are smooth on every [1/(n+1), 1/n] but jump or blow up at
    the cell boundaries (floor(1/x), {1/x}, log x).  Summation stops once
    2**-n falls below ``tol`` times the running total's scale.
    """
    parts = []
    scale = 0.0
    for n in range(1, n_max + 1):
        term = 2.0 ** -n * integrate(rule, lambda x: f(gauss_branch(n, x)))
        parts.append(term)
        scale = max(scale, abs(term))
        if abs(term) < tol * max(scale, 1.0) and n > 8:
            break
    return math.fsum(parts)


@dataclass(frozen=True)
class MomentVector:
    k_max: int
    m: tuple[float, ...]

    def to_json(self) -> str:
        return json.dumps(list(self.m))


def moments(rule: QuadratureRule, k_max: int) -> MomentVector:
    """m[k] = int x**k dmu for k = 0 .. k_max."""
    if not 1 <= k_max <= 64:
        raise ValueError("k_max must be in [1, 64]")
    x = rule.nodes
    p = np.ones_like(x)
    out = []
    for _ in range(k_max + 1):
        out.append(math.fsum(p) * float(rule.weight))
        p = p * x
    return MomentVector(k_max, tuple(out))


def eigenmeasure_defect(rule: QuadratureRule, f: Callable, n_max: int = 60) -> float:
    """int H[f] dmu - int f dmu, where H[f](x) = sum_n 2**-n f(1/(n+x))."""
    lhs = integrate(rule, lambda x: sum(2.0 ** -n * f(gauss_branch(n, x)) for n in range(1, n_max + 1)))
    return lhs - integrate(rule, f)
