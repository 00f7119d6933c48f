"""Binary, jump-binary, Farey and Gauss maps on exact rationals.

Phi conjugates binary to Farey and jump-binary to Gauss.  Every check here
runs in exact arithmetic: near the neutral fixed point of the Farey map at 0,
float comparisons of the conjugacy mean nothing.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .minkowski import DyadicPoint, phi_dyadic
from .stern import stern

ONE = Fraction(1)
ZERO = Fraction(0)


class IntervalMap(enum.Enum):
    BINARY = "binary"
    BINARY_JUMP = "binary_jump"
    FAREY = "farey"
    GAUSS = "gauss"


def binary(x: Fraction) -> Fraction:
    """Tent map 2 min(x, 1 - x)."""
    return 2 * min(x, 1 - x)


def binary_jump(x: Fraction) -> Fraction:
    """2 - 2**k x on [2**-k, 2**-k+1); 0 at the endpoints 0 and 1."""
    if x == 0 or x == 1:
        return ZERO
    # smallest k >= 1 with x >= 2**-k
    k = 1
    while x * (1 << k) < 1:
        k += 1
    return 2 - (1 << k) * x


def farey(x: Fraction) -> Fraction:
    if x == 0 or x == 1:
        return ZERO
    return min(x / (1 - x), (1 - x) / x)


def gauss(x: Fraction) -> Fraction:
    """1/x - n on [1/(n+1), 1/n); 0 at the endpoints 0 and 1."""
    if x == 0 or x == 1:
        return ZERO
    y = 1 / x
    n = math.floor(y)
    if n == y:
        # x = 1/(n) lies in the branch [1/n, 1/(n-1)), so G(x) = 1
        n -= 1
    return y - n


_MAPS: dict[IntervalMap, Callable[[Fraction], Fraction]] = {
    IntervalMap.BINARY: binary,
    IntervalMap.BINARY_JUMP: binary_jump,
    IntervalMap.FAREY: farey,
    IntervalMap.GAUSS: gauss,
}


def eval_map(kind: IntervalMap | str, x) -> Fraction:
    x = Fraction(x)
    if not 0 <= x <= 1:
        raise ValueError(f"{x} lies outside [0, 1]")
    return _MAPS[IntervalMap(kind)](x)


def phi(x: Fraction) -> Fraction:
    return phi_dyadic(DyadicPoint.from_fraction(x))


def conjugacy_check(N: int, farey_map: Callable[[Fraction], Fraction] = farey,
                    gauss_map: Callable[[Fraction], Fraction] = gauss) -> bool:
    """Check Phi o B = F o Phi and Phi o B_jump = G o Phi on every m / 2**N.

    The map arguments exist so negative controls can swap in a wrong map.
    """
    if N > 12:
        raise ValueError("conjugacy check limited to N <= 12")
    for m in range((1 << N) + 1):
        x = Fraction(m, 1 << N)
        y = phi(x)
        if phi(binary(x)) != farey_map(y):
            return False
        if phi(binary_jump(x)) != gauss_map(y):
            return False
    return True


def jump_by_iteration(x: Fraction) -> Fraction:
    """B_jump written as iterates of B: apply B until the orbit has passed
    through [1/2, 1], stopping one step after it enters."""
    if x == 0 or x == 1:
        return ZERO
    while x < Fraction(1, 2):
        x = binary(x)
    return binary(x)


@dataclass(frozen=True)
class OrbitRecord:
    start: DyadicPoint
    K: int
    gauss_orbit: tuple[Fraction, ...]
    jump_orbit: tuple[Fraction, ...]

    def to_json(self) -> str:
        return json.dumps({
            "start": str(self.start.value),
            "K": self.K,
            "gauss_orbit": [str(v) for v in self.gauss_orbit],
            "jump_orbit": [str(v) for v in self.jump_orbit],
        })


class NonTerminationError(ValueError):
    pass


def orbit(p: DyadicPoint) -> OrbitRecord:
    """Iterate B_jump from m/2**N until it reaches 1.

    ``jump_orbit`` holds the K+1 dyadic iterates ending at 1; ``gauss_orbit``
    holds Phi of the first K of them, which is the Gauss orbit of Phi(m/2**N).
    """
    if p.m == 0:
        raise NonTerminationError("the orbit of 0 never reaches 1")
    x = p.value
    dyadic = [x]
    # each step strictly lowers the 2-adic denominator or lands on 1
    for _ in range(p.N + 1):
        if x == 1:
            break
        x = binary_jump(x)
        dyadic.append(x)
    else:
        raise NonTerminationError(f"orbit of {p} did not reach 1")
    K = len(dyadic) - 1
    return OrbitRecord(p, K, tuple(phi(v) for v in dyadic[:-1]), tuple(dyadic))


def k_histogram(N: int) -> list[int]:
    """Counts of K(m/2**N) over m = 1 .. 2**N, indexed by K."""
    if N > 16:
        raise ValueError("k_histogram limited to N <= 16")
    D = 1 << N
    counts = [0] * (N + 1)
    for m in range(1, D + 1):
        # B_jump on numerators over the fixed denominator D
        a, K = m, 0
        while a != D:
            k = (D - 1) // a
            k = k.bit_length()  # smallest k >= 1 with a * 2**k >= D
            a = 2 * D - (a << k)
            K += 1
        counts[K] += 1
    return counts


class ConsistencyError(ArithmeticError):
    pass


def stern_via_gauss_product(p: DyadicPoint) -> int:
    """s(2**N + m) as the reciprocal of the product of the Gauss orbit of Phi(m/2**N)."""
    if not 1 <= p.m <= (1 << p.N):
        raise ValueError("need 1 <= m <= 2**N")
    y = phi_dyadic(p)
    prod = ONE
    while y != 1:
        prod *= y
        y = gauss(y)
    inv = 1 / prod
    if inv.denominator != 1:
        raise ConsistencyError(f"Gauss product at {p} inverts to non-integer {inv}")
    return inv.numerator


def gauss_orbit_derivative(p: DyadicPoint) -> Fraction:
    """|(G^K)'| at Phi(m/2**N) by the chain rule, |G'(y)| = 1/y**2."""
    rec = orbit(p)
    d = ONE
    for y in rec.gauss_orbit:
        d *= 1 / (y * y)
    return d


def stern_product_check(N: int) -> bool:
    P = 1 << N
    return all(stern_via_gauss_product(DyadicPoint(m, N)) == stern(P + m) for m in range(1, P + 1))
