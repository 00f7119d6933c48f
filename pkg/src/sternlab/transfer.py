"""Collocation discretisation of the weighted Gauss transfer operator.

    H_{tau,z}[f](t) = sum_{n>=1} z**n (n+t)**(-tau) f(1/(n+t)),   t in [0, 1]

Functions are represented by their values at the Chebyshev extreme points
mapped to [0, 1] (so t = 0 and t = 1 are nodes).  The matrix is the product
of the Chebyshev-polynomial evaluation at the image points 1/(n+t_j) with the
values-to-coefficients transform.  Eigenfunctions are analytic on the plane
cut along (-inf, -1], so collocation converges geometrically in the degree.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.polynomial import chebyshev as C
import scipy.linalg

from .stern import iter_rows

DEFAULT_DEGREE = 32
EPS_TAIL = 1e-14
ETA_WORK = 0.2
MAX_POWERS = 100_000


class TruncationError(ValueError):
    pass


class DegeneracyError(ArithmeticError):
    pass


class InstabilityError(ArithmeticError):
    pass


class ConvergenceError(ArithmeticError):
    pass


class DivergenceError(ArithmeticError):
    pass


def chebyshev_nodes(M: int) -> np.ndarray:
    """M+1 Chebyshev extreme points on [0, 1], ascending, endpoints included."""
    return (1 - np.cos(np.pi * np.arange(M + 1) / M)) / 2


@functools.lru_cache(maxsize=None)
def _values_to_coeffs(M: int) -> np.ndarray:
    V = C.chebvander(2 * chebyshev_nodes(M) - 1, M)
    return np.linalg.solve(V, np.eye(M + 1))


def tail_bound(z: complex, tau: complex, n_max: int) -> float:
    """Upper bound on sum_{n > n_max} |z|**n (n+1)**|Re tau|."""
    r, p = abs(z), abs(complex(tau).real)
    if r >= 1:
        return math.inf
    total = 0.0
    n = n_max + 1
    while True:
        term = r ** n * (n + 1) ** p
        total += term
        # once consecutive ratios are < 1, bound the rest geometrically
        q = r * ((n + 2) / (n + 1)) ** p
        if q < 1 and term * q / (1 - q) < 1e-3 * total:
            return total + term * q / (1 - q)
        n += 1


def required_n_max(z: complex, tau: complex, eps_tail: float = EPS_TAIL) -> int:
    n = 1
    while tail_bound(z, tau, n) >= eps_tail:
        n += 1
    return n


@dataclass(frozen=True)
class OperatorMatrix:
    tau: complex
    z: complex
    degree: int
    n_max: int
    entries: np.ndarray = field(repr=False)
    tail_bound: float
    nodes: np.ndarray = field(repr=False)

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.entries @ values


def _blocks(tau: complex, z: complex, M: int, n_max: int, derivatives: bool = False):
    t = chebyshev_nodes(M)
    cinv = _values_to_coeffs(M)
    E = np.zeros((M + 1, M + 1), dtype=complex)
    Et = np.zeros_like(E) if derivatives else None
    Ez = np.zeros_like(E) if derivatives else None
    for n in range(1, n_max + 1):
        y = n + t
        # principal branch; n + t > 0 so no cut is crossed
        w = z ** n * np.exp(-tau * np.log(y))
        T = C.chebvander(2 / y - 1, M)
        E += w[:, None] * T
        if derivatives:
            Et += (-np.log(y) * w)[:, None] * T
            Ez += (n * z ** (n - 1) * np.exp(-tau * np.log(y)))[:, None] * T
    if derivatives:
        return E @ cinv, Et @ cinv, Ez @ cinv
    return E @ cinv


def build_operator(tau: complex, z: complex, degree: int = DEFAULT_DEGREE,
                   n_max: int | None = None, eps_tail: float = EPS_TAIL) -> OperatorMatrix:
    tau, z = complex(tau), complex(z)
    if abs(z) > 0.6 or abs(tau) > 0.5:
        raise ValueError("build_operator needs |z| <= 0.6 and |tau| <= 0.5")
    if not 2 <= degree <= 64:
        raise ValueError("degree must be in [2, 64]")
    if n_max is None:
        n_max = required_n_max(z, tau, eps_tail)
    tb = tail_bound(z, tau, n_max)
    if tb >= eps_tail:
        raise TruncationError(
            f"tail bound {tb:.3g} >= {eps_tail:g} at n_max={n_max}; "
            f"need n_max >= {required_n_max(z, tau, eps_tail)}")
    A = _blocks(tau, z, degree, n_max)
    A.setflags(write=False)
    return OperatorMatrix(tau, z, degree, n_max, A, tb, chebyshev_nodes(degree))


def interpolate(nodes: np.ndarray, values: np.ndarray, t) -> np.ndarray:
    """Barycentric evaluation of the interpolant through Chebyshev extreme points."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    M = len(nodes) - 1
    w = (-1.0) ** np.arange(M + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    d = t[:, None] - nodes[None, :]
    hit = d == 0
    d[hit] = 1.0
    L = w / d
    L /= L.sum(axis=1, keepdims=True)
    rows = hit.any(axis=1)
    L[rows] = hit[rows]
    return L @ values


@dataclass(frozen=True)
class SpectralData:
    lam: complex
    right: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    residual: float
    left_residual: float
    lambda2: complex
    nodes: np.ndarray = field(repr=False)

    @property
    def gap_ratio(self) -> float:
        return abs(self.lambda2) / abs(self.lam)

    def eigenfunction(self, t) -> np.ndarray:
        return interpolate(self.nodes, self.right, t)

    def functional(self, f) -> complex:
        """Apply the discrete eigenmeasure (left vector) to f sampled at the nodes."""
        return complex(self.left @ np.asarray(f(self.nodes), dtype=complex))

    def to_dict(self, op: OperatorMatrix | None = None) -> dict:
        d = {"lambda": [self.lam.real, self.lam.imag], "gap": self.gap_ratio,
             "residual": self.residual}
        if op is not None:
            d = {"tau": [op.tau.real, op.tau.imag], "z": [op.z.real, op.z.imag], **d}
        return d


def dominant_eig(A: OperatorMatrix) -> SpectralData:
    """Dominant eigenvalue of the discretised operator by a full dense solve.

    The right vector is scaled so the eigenfunction equals 1 at t = 0, the
    left vector so that left . right = 1.
    """
    M = A.entries
    ev, vl, vr = scipy.linalg.eig(M, left=True, right=True)
    order = np.argsort(-np.abs(ev))
    i, j = order[0], order[1]
    lam, lam2 = ev[i], ev[j]
    if abs(lam) - abs(lam2) < 1e-8 * abs(lam):
        raise DegeneracyError(f"|lambda1|={abs(lam):.3g} and |lambda2|={abs(lam2):.3g} are not separated")
    v = vr[:, i] / vr[0, i]
    u = vl[:, i].conj()
    u = u / (u @ v)
    residual = np.max(np.abs(M @ v - lam * v)) / np.max(np.abs(v))
    left_residual = np.max(np.abs(u @ M - lam * u)) / np.max(np.abs(u))
    return SpectralData(complex(lam), v, u, float(residual), float(left_residual),
                        complex(lam2), A.nodes)


# One truncation for every solve in the working window: letting n_max follow
# (tau, z) makes lambda jump at the 1e-14 level, which the second-difference
# stencils for log rho amplify by 1/h**2.
SOLVER_N_MAX = required_n_max(0.56, ETA_WORK, 1e-17)


@functools.lru_cache(maxsize=4096)
def _lambda_and_derivatives(tau: complex, z: complex, degree: int):
    n_max = max(SOLVER_N_MAX, required_n_max(z, tau))
    op = build_operator(tau, z, degree, n_max)
    sd = dominant_eig(op)
    _, At, Az = _blocks(tau, z, degree, n_max, derivatives=True)
    # first-order perturbation: d lambda = left . dA . right  (left . right = 1)
    return sd.lam, complex(sd.left @ At @ sd.right), complex(sd.left @ Az @ sd.right), sd


def eigenvalue(tau: complex, z: complex, degree: int = DEFAULT_DEGREE) -> complex:
    return _lambda_and_derivatives(complex(tau), complex(z), degree)[0]


def lambda_derivatives(tau: complex, z: complex, h: float = 1e-5,
                       degree: int = DEFAULT_DEGREE, check: bool = True) -> tuple[complex, complex]:
    """(d lambda / d tau, d lambda / d z) from the left/right eigenvector formula.

    With ``check`` the result is compared against central differences of
    step ``h``; disagreement above 1e-5 raises InstabilityError.
    """
    tau, z = complex(tau), complex(z)
    _, dt, dz, _ = _lambda_and_derivatives(tau, z, degree)
    if check:
        fd_t = (eigenvalue(tau + h, z, degree) - eigenvalue(tau - h, z, degree)) / (2 * h)
        fd_z = (eigenvalue(tau, z + h, degree) - eigenvalue(tau, z - h, degree)) / (2 * h)
        worst = max(abs(fd_t - dt), abs(fd_z - dz))
        if worst > 1e-5:
            raise InstabilityError(f"perturbation and finite-difference derivatives differ by {worst:.3g}")
    return dt, dz


@dataclass(frozen=True)
class RhoPoint:
    tau: complex
    rho: complex
    newton_iters: int
    residual: float

    @property
    def U(self) -> complex:
        """-log(2 rho(tau)): growth rate of E_N[S_N**(-tau)]."""
        return -np.log(2 * self.rho)


@functools.lru_cache(maxsize=4096)
def _solve_rho(tau: complex, degree: int, z0: complex) -> RhoPoint:
    z = z0
    for it in range(1, 31):
        lam, _, dz, _ = _lambda_and_derivatives(tau, z, degree)
        step = (lam - 1) / dz
        z = z - step
        if abs(step) <= 1e-12 * abs(z):
            # quadratic convergence: one more step reaches rounding level
            lam, _, dz, _ = _lambda_and_derivatives(tau, z, degree)
            z = z - (lam - 1) / dz
            lam = _lambda_and_derivatives(tau, z, degree)[0]
            return RhoPoint(tau, z, it + 1, float(abs(lam - 1)))
    raise ConvergenceError(f"Newton for rho({tau}) did not converge; last step {abs(step):.3g}")


def solve_rho(tau: complex, degree: int = DEFAULT_DEGREE, z0: complex = 0.5,
              eta_work: float = ETA_WORK) -> RhoPoint:
    """Solve lambda(tau, z) = 1 for z near 1/2 by Newton's method."""
    tau = complex(tau)
    if abs(tau) > eta_work:
        raise ValueError(f"|tau| = {abs(tau):.3g} outside the working window {eta_work}")
    return _solve_rho(tau, degree, complex(z0))


def rho_curve(taus, degree: int = DEFAULT_DEGREE, warm_start: bool = False) -> list[RhoPoint]:
    """rho along a grid of tau; ``warm_start`` seeds each Newton solve from the previous point."""
    out = []
    z0 = 0.5
    for t in taus:
        p = solve_rho(t, degree, z0 if warm_start else 0.5)
        out.append(p)
        z0 = p.rho
    return out


class LogRhoDerivatives(NamedTuple):
    alpha: float
    sigma2: float
    alpha_error: float
    sigma2_error: float


def _stencil(h: float, degree: int) -> tuple[float, float]:
    f = {k: float(np.log(solve_rho(k * h, degree).rho).real) for k in (-2, -1, 0, 1, 2)}
    d1 = (-f[2] + 8 * f[1] - 8 * f[-1] + f[-2]) / (12 * h)
    d2 = (-f[2] + 16 * f[1] - 30 * f[0] + 16 * f[-1] - f[-2]) / (12 * h * h)
    return d1, d2


def log_rho_derivatives(h: float = 1e-3, degree: int = DEFAULT_DEGREE,
                        max_error: float = 1e-6) -> LogRhoDerivatives:
    """alpha = (log rho)'(0) and sigma^2 = -(log rho)''(0).

    Five-point central stencils at steps h and h/2, combined by Richardson
    extrapolation; the reported error is the size of the correction.
    """
    a1, b1 = _stencil(h, degree)
    a2, b2 = _stencil(h / 2, degree)
    alpha = (16 * a2 - a1) / 15
    second = (16 * b2 - b1) / 15
    ea, eb = abs(alpha - a2), abs(second - b2)
    if max(ea, eb) > max_error:
        raise InstabilityError(f"Richardson correction {max(ea, eb):.3g} exceeds {max_error:g}")
    return LogRhoDerivatives(alpha, -second, ea, eb)


class QuasiInverseSum(NamedTuple):
    value: complex
    terms: int
    tail_bound: float
    spectral_radius: float


def quasi_inverse_partial_sum(tau: complex, z: complex, k_max: int | None = None,
                              degree: int = DEFAULT_DEGREE, tol: float = 1e-16) -> QuasiInverseSum:
    """(1/(1-z)) sum_{k <= k_max} H^k[1](1), evaluated on the collocation grid.

    Without ``k_max`` the sum runs until a term drops below ``tol``.  The tail
    bound assumes geometric decay at the spectral radius from the last term.
    """
    op = build_operator(tau, z, degree)
    r = float(np.max(np.abs(np.linalg.eigvals(op.entries))))
    # 1 - 1e-9 rather than 1: a pole sits exactly on the spectral radius at rho(tau)
    if r >= 1 - 1e-9:
        raise DivergenceError(f"spectral radius {r:.6g} >= 1 at tau={tau}, z={z}")
    v = np.ones(degree + 1, dtype=complex)
    parts = []
    k = 0
    while True:
        parts.append(v[-1])  # t = 1 is the last node
        if k_max is not None and k >= k_max:
            break
        if k_max is None and np.max(np.abs(v)) < tol and k > 0:
            break
        if k >= MAX_POWERS:
            raise ConvergenceError(f"quasi-inverse sum did not reach {tol:g} in {MAX_POWERS} terms")
        v = op.apply(v)
        k += 1
    total = complex(math.fsum(p.real for p in parts), math.fsum(p.imag for p in parts))
    last = np.max(np.abs(v))
    tail = last * r / (1 - r)
    scale = 1 / (1 - complex(z))
    return QuasiInverseSum(total * scale, k + 1, float(tail * abs(scale)), r)


def resolvent_at_one(tau: complex, z: complex, degree: int = DEFAULT_DEGREE) -> complex:
    """(1/(1-z)) (I - H)^{-1}[1](1) by a direct linear solve."""
    op = build_operator(tau, z, degree)
    v = np.linalg.solve(np.eye(degree + 1) - op.entries, np.ones(degree + 1))
    return complex(v[-1] / (1 - complex(z)))


class SternSeries(NamedTuple):
    value: complex
    tail_bound: float
    terms: tuple[complex, ...]


def stern_series(tau: complex, z: complex, N_max: int = 20) -> SternSeries:
    """sum_{N <= N_max} z**N sum_{n in I_N} s(n)**(-tau), with a rigorous tail bound.

    The bound uses 1 <= s(n) <= F_{N+2} <= phi**(N+1) on I_N.
    """
    tau, z = complex(tau), complex(z)
    terms = []
    for N, row in iter_rows(N_max):
        vals = np.exp(-tau * np.log(row.astype(float)))
        terms.append(z ** N * complex(math.fsum(vals.real), math.fsum(vals.imag)))
    golden = (1 + 5 ** 0.5) / 2
    p = max(0.0, -tau.real)
    q = 2 * abs(z) * golden ** p
    if q >= 1:
        tail = math.inf
    else:
        tail = golden ** p * q ** (N_max + 1) / (1 - q)
    total = complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))
    return SternSeries(total, tail, tuple(terms))


def spectrum_json(op: OperatorMatrix, sd: SpectralData) -> str:
    return json.dumps(sd.to_dict(op))
