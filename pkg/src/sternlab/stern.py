"""Exact Stern diatomic sequence: recurrence, matrix products, rows and sampling.

Row ``N`` is the block of indices ``I_N = [2**N, 2**(N+1))``.  Values are
Python ints (arbitrary precision) on the scalar paths and ``int64`` on the
vectorised row paths, which are capped well below the overflow point.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

import numpy as np

ENUMERATION_CAP = 24

A0 = ((1, 1), (0, 1))
A1 = ((1, 0), (1, 1))


class EnumerationLimitError(ValueError):
    """Raised when a full-row enumeration is requested above the cap."""


def stern(n: int) -> int:
    """Return s(n) using the pair recurrence over the bits of ``n``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    # invariant: (a, b) = (s(k), s(k+1)) for the prefix k of n read so far
    a, b = 0, 1
    for bit in bin(n)[2:]:
        if bit == "0":
            b = a + b
        else:
            a = a + b
    return a


def word_of(n: int) -> tuple[int, ...]:
    """Bits (eps_0, ..., eps_{N-1}) of ``n`` in I_N, least significant first."""
    if n < 1:
        raise ValueError("n must be >= 1")
    N = n.bit_length() - 1
    return tuple((n >> j) & 1 for j in range(N))


def index_of(bits: Sequence[int]) -> int:
    """Inverse of :func:`word_of`: n = 2**N + sum eps_j 2**j."""
    n = 1 << len(bits)
    for j, e in enumerate(bits):
        if e not in (0, 1):
            raise ValueError(f"bit {j} is {e!r}, expected 0 or 1")
        n |= e << j
    return n


def stern_pair_by_word(bits: Sequence[int]) -> tuple[int, int]:
    """Return ``(s(n+1), s(n))`` as ``A_{eps_0} ... A_{eps_{N-1}} (1, 1)^T``.

    The rightmost matrix acts first, so the word is consumed from its last
    letter to its first.
    """
    x, y = 1, 1
    for e in reversed(bits):
        if e:
            y = x + y
        else:
            x = x + y
    return x, y


def fibonacci(k: int) -> int:
    a, b = 0, 1
    for _ in range(k):
        a, b = b, a + b
    return a


def stern_table(L: int) -> np.ndarray:
    """Array ``s[0 .. 2**L]`` (inclusive), built by doubling.

    Values are bounded by F_{L+1}, so int64 is exact far beyond any L whose
    table fits in memory.
    """
    s = np.array([0, 1], dtype=np.int64)
    for _ in range(L):
        out = np.empty(2 * len(s) - 1, dtype=np.int64)
        out[0::2] = s
        out[1::2] = s[:-1] + s[1:]
        s = out
    return s


def _next_row(row: np.ndarray) -> np.ndarray:
    # row N+1 from row N, using s(2**(N+1)) = 1 as the right neighbour
    nxt = np.append(row[1:], 1)
    out = np.empty(2 * len(row), dtype=row.dtype)
    out[0::2] = row
    out[1::2] = row + nxt
    return out


def iter_rows(N_max: int, cap: int = ENUMERATION_CAP):
    """Yield ``(N, row_N)`` for N = 0 .. N_max, reusing each row for the next."""
    if N_max > cap:
        raise EnumerationLimitError(f"row level {N_max} exceeds enumeration cap {cap}")
    row = np.array([1], dtype=np.int64)
    yield 0, row
    for N in range(1, N_max + 1):
        row = _next_row(row)
        yield N, row


def row_values(N: int, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Values s(n) for n in I_N, increasing n (length 2**N)."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    if N > cap:
        raise EnumerationLimitError(f"row level {N} exceeds enumeration cap {cap}")
    row = None
    for _, row in iter_rows(N, cap):
        pass
    return row


def log_int(v: int) -> float:
    """Natural log of a positive int of any size, via bit-length and leading word."""
    if v <= 0:
        raise ValueError("log of nonpositive value")
    bl = v.bit_length()
    if bl <= 64:
        return math.log(v)
    shift = bl - 64
    return math.log(v >> shift) + shift * math.log(2)


def random_words(N: int, count: int, seed: int) -> np.ndarray:
    """``(count, N)`` array of uniform bits from a Philox (counter-based) stream."""
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.integers(0, 2, size=(count, N), dtype=np.uint8)


def log_stern_exact(words: np.ndarray) -> np.ndarray:
    out = np.empty(len(words))
    for i, w in enumerate(words):
        _, sn = stern_pair_by_word(w.tolist())
        out[i] = log_int(sn)
    return out


def log_stern_float(words: np.ndarray, renorm_every: int = 64) -> np.ndarray:
    """Vectorised float version of :func:`log_stern_exact`.

    Only additions of positive numbers occur, so the relative error after N
    steps is at most about N machine epsilons.
    """
    count, N = words.shape
    x = np.ones(count)
    y = np.ones(count)
    logscale = np.zeros(count)
    for j in range(N - 1, -1, -1):
        e = words[:, j].astype(bool)
        total = x + y
        x = np.where(e, x, total)
        y = np.where(e, total, y)
        if (N - j) % renorm_every == 0:
            logscale += np.log(y)
            x = x / y
            y = np.ones(count)
    return logscale + np.log(y)


def log_stern_sampler(N: int, count: int, seed: int, exact: bool = True) -> np.ndarray:
    """log s(n) for ``count`` independent uniform n in I_N.

    Deterministic given ``seed``.  The exact path computes s(n) as an integer
    before taking the log; ``exact=False`` uses the float recurrence.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    words = random_words(N, count, seed)
    if exact:
        return log_stern_exact(words)
    return log_stern_float(words)


def log_stern_row(N: int, cap: int = ENUMERATION_CAP) -> np.ndarray:
    return np.log(row_values(N, cap).astype(np.float64))


def gap_identity_check(N: int, values: Sequence[int] | None = None) -> bool:
    """Check s(m+1)/s(2^N+m+1) - s(m)/s(2^N+m) = 1/(s(2^N+m) s(2^N+m+1)) exactly.

    ``values`` overrides the sequence (indexable up to 2**(N+1)); used for
    negative controls.
    """
    if N > 16:
        raise ValueError("gap identity check limited to N <= 16")
    s = values if values is not None else [int(v) for v in stern_table(N + 1)]
    P = 1 << N
    for m in range(P):
        lhs = Fraction(s[m + 1], s[P + m + 1]) - Fraction(s[m], s[P + m])
        if lhs != Fraction(1, s[P + m] * s[P + m + 1]):
            return False
    return True
