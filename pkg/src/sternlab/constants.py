"""alpha and sigma^2 by several independent routes, with cross-validation.

Every route reports under a descriptive tag.  The spectral route (transfer
operator, Richardson-extrapolated derivatives of log rho) is the most precise
and supplies the alpha used inside the sigma^2 integrands.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import chebyshev as C

from .minkowski import QuadratureRule, build_quadrature, gauss_branch, integrate, moments
from .stern import log_stern_float, row_values, stern_table
from .transfer import log_rho_derivatives

SCHEMA_VERSION = 1

ALPHA_SPREAD_TOL = 5e-4
ALPHA_SPECTRAL_TOL = 2e-4
MC_SIGMAS = 3.0
SIGMA2_SPREAD_TOL = 1e-3
BACHER_TAIL = 1e-12

# chunk size for Monte Carlo walks; fixed so results do not depend on threads
MC_CHUNK = 5000


class CrossValidationError(ArithmeticError):
    """Routes that should agree do not."""


def default_threads() -> int:
    env = os.environ.get("STERN_SPECTRAL_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def spectral_constants():
    d = log_rho_derivatives()
    return d.alpha, d.sigma2


# ---------------------------------------------------------------- alpha routes

def alpha_logx(rule: QuadratureRule) -> float:
    """-1/2 int log x dmu."""
    return -0.5 * integrate(rule, np.log, tail_split=True)


def alpha_log1px(rule: QuadratureRule) -> float:
    return integrate(rule, np.log1p)


def bacher_terms_needed(tail: float = BACHER_TAIL) -> int:
    # m_k <= 1, so the tail after k is below 2**-k / ((k+1) * (1 - 1/2))
    k = 1
    while 2.0 ** -k / (k + 1) * 2 >= tail:
        k += 1
    return k


def alpha_bacher(rule: QuadratureRule, k_max: int | None = None) -> float:
    k_max = k_max or bacher_terms_needed()
    m = moments(rule, k_max).m
    return math.log(2) - math.fsum(m[k] / (k * 2.0 ** k) for k in range(1, k_max + 1))


def bacher_partial_sums(rule: QuadratureRule, k_max: int) -> list[float]:
    m = moments(rule, k_max).m
    out, acc = [], math.log(2)
    for k in range(1, k_max + 1):
        acc -= m[k] / (k * 2.0 ** k)
        out.append(acc)
    return out


def log_farey_derivative(x):
    """log|F'(x)| = -2 log max(x, 1 - x)."""
    return -2 * np.log(np.maximum(x, 1 - x))


def alpha_entropy(rule: QuadratureRule) -> float:
    """Half the Farey-map entropy int log|F'| dmu."""
    return 0.5 * integrate(rule, log_farey_derivative)


def alpha_furstenberg(rule: QuadratureRule) -> float:
    """1/4 int (log(1+x) + log(1+1/x)) dmu, i.e. 1/2 int log(1+x) dxi."""
    return 0.25 * integrate(rule, lambda x: np.log1p(x) + np.log1p(1 / x), tail_split=True)


def entropy_identity_defect(depth: int) -> float:
    """Entropy route on a depth-N rule minus the log(1+x) route on depth N-1.

    Phi(1 - u/2) = 1/(1 + Phi(u)) maps the upper half of the finer grid onto
    the coarser grid, so the two sums consist of the same terms.
    """
    fine = build_quadrature(depth)
    coarse = build_quadrature(depth - 1)
    return alpha_entropy(fine) - alpha_log1px(coarse)


# ---------------------------------------------------------------- Monte Carlo

@dataclass(frozen=True)
class MCConfig:
    walk_length: int = 2000
    walks: int = 100_000
    seed: int = 20240601
    burn_in: int = 200
    threads: int | None = None


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    stderr: float
    walk_length: int
    walks: int
    burn_in: int
    seed: int


def _walk_chunk(ss: np.random.SeedSequence, count: int, N: int, B: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(ss))
    words = rng.integers(0, 2, size=(count, N), dtype=np.uint8)
    full = log_stern_float(words)
    if B == 0:
        return full / N
    # the product consumes the word from its last letter, so the first B
    # matrices applied are the last B letters
    head = log_stern_float(words[:, N - B:])
    return (full - head) / (N - B)


def lyapunov_mc(walk_length: int, walks: int, seed: int, burn_in: int = 0,
                threads: int | None = None) -> MCEstimate:
    """Mean of log S_N / N over random words, with its standard error.

    With ``burn_in = B > 0`` each walk contributes (log S_N - log S_B)/(N - B)
    instead, which removes the O(1/N) bias coming from the starting vector.
    Walks are drawn in fixed chunks, each with its own child seed, so the
    result depends only on (walk_length, walks, seed, burn_in).
    """
    if walk_length < 1 or walks < 2:
        raise ValueError("need walk_length >= 1 and walks >= 2")
    if not 0 <= burn_in < walk_length:
        raise ValueError("burn_in must lie in [0, walk_length)")
    sizes = [MC_CHUNK] * (walks // MC_CHUNK)
    if walks % MC_CHUNK:
        sizes.append(walks % MC_CHUNK)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = list(zip(children, sizes))
    nthreads = threads or default_threads()
    if nthreads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(nthreads) as ex:
            parts = list(ex.map(lambda j: _walk_chunk(j[0], j[1], walk_length, burn_in), jobs))
    else:
        parts = [_walk_chunk(s, n, walk_length, burn_in) for s, n in jobs]
    vals = np.concatenate(parts)
    mean = math.fsum(vals) / len(vals)
    stderr = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
    return MCEstimate(mean, stderr, walk_length, walks, burn_in, seed)


# ---------------------------------------------------------------- alpha report

ALPHA_TAGS = {
    "alpha_logx": "-1/2 int log x dmu",
    "alpha_log1px": "int log(1+x) dmu",
    "alpha_bacher": "log 2 - sum m_k/(k 2^k)",
    "alpha_entropy": "1/2 int log|F'| dmu",
    "alpha_furstenberg": "1/4 int log(1+x)+log(1+1/x) dmu",
    "alpha_lyapunov": "Monte Carlo Lyapunov exponent",
    "alpha_spectral": "(log rho)'(0), transfer operator",
}

DETERMINISTIC_ALPHA = ("alpha_logx", "alpha_log1px", "alpha_bacher", "alpha_entropy",
                       "alpha_furstenberg")


@dataclass
class AlphaReport:
    depth: int
    alpha_logx: float
    alpha_log1px: float
    alpha_bacher: float
    alpha_entropy: float
    alpha_furstenberg: float
    alpha_lyapunov: float | None
    alpha_lyapunov_stderr: float | None
    alpha_spectral: float
    bacher_k_max: int
    mc: dict | None = None
    failures: list[str] = field(default_factory=list)

    @property
    def spread(self) -> float:
        v = [getattr(self, k) for k in DETERMINISTIC_ALPHA]
        return max(v) - min(v)

    def outlier(self) -> str:
        v = {k: getattr(self, k) for k in DETERMINISTIC_ALPHA}
        med = float(np.median(list(v.values())))
        return max(v, key=lambda k: abs(v[k] - med))

    def validate(self) -> list[str]:
        out = []
        if self.spread >= ALPHA_SPREAD_TOL:
            out.append(f"deterministic spread {self.spread:.3g} >= {ALPHA_SPREAD_TOL}; outlier {self.outlier()}")
        gap = abs(self.alpha_spectral - self.alpha_log1px)
        if gap >= ALPHA_SPECTRAL_TOL:
            out.append(f"|spectral - log1px| = {gap:.3g} >= {ALPHA_SPECTRAL_TOL}")
        if self.alpha_lyapunov is not None:
            z = abs(self.alpha_lyapunov - self.alpha_spectral) / self.alpha_lyapunov_stderr
            if z > MC_SIGMAS:
                out.append(f"Monte Carlo estimate {z:.2f} standard errors from spectral")
        self.failures = out
        return out

    def rows(self) -> list[tuple[str, str, float]]:
        out = [(k, ALPHA_TAGS[k], getattr(self, k)) for k in ALPHA_TAGS
               if getattr(self, k) is not None]
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["spread"] = self.spread
        d["tags"] = ALPHA_TAGS
        return d


def alpha_all_routes(rule: QuadratureRule, mc_config: MCConfig | None = MCConfig(),
                     perturb: float = 0.0) -> AlphaReport:
    """Every alpha route on one rule.  ``perturb`` shifts the log x route (negative control)."""
    if rule.depth < 16:
        raise ValueError("alpha routes need a rule of depth >= 16")
    k_max = bacher_terms_needed()
    mc = None
    if mc_config is not None:
        mc = lyapunov_mc(mc_config.walk_length, mc_config.walks, mc_config.seed,
                         mc_config.burn_in, mc_config.threads)
    alpha_sp, _ = spectral_constants()
    rep = AlphaReport(
        depth=rule.depth,
        alpha_logx=alpha_logx(rule) + perturb,
        alpha_log1px=alpha_log1px(rule),
        alpha_bacher=alpha_bacher(rule, k_max),
        alpha_entropy=alpha_entropy(rule),
        alpha_furstenberg=alpha_furstenberg(rule),
        alpha_lyapunov=mc.estimate if mc else None,
        alpha_lyapunov_stderr=mc.stderr if mc else None,
        alpha_spectral=alpha_sp,
        bacher_k_max=k_max,
        mc=asdict(mc) if mc else None,
    )
    rep.validate()
    return rep


# ---------------------------------------------------------------- stationarity

STATIONARITY_TESTS: dict[str, Callable] = {
    "one": lambda x: np.ones_like(x),
    "1/(1+x)": lambda x: 1 / (1 + x),
    "x/(1+x)": lambda x: x / (1 + x),
    "log((1+x)/(2+x))": lambda x: np.log((1 + x) / (2 + x)),
    "1/(1+x)^2": lambda x: 1 / (1 + x) ** 2,
}


def xi_integral(rule: QuadratureRule, g: Callable) -> float:
    """int g dxi with xi = mu/2 + (x -> 1/x)_* mu / 2."""
    return 0.5 * integrate(rule, g) + 0.5 * integrate(rule, lambda x: g(1 / x))


def stationarity_defects(rule: QuadratureRule, test_fns: dict[str, Callable] | None = None) -> dict[str, float]:
    """int f dxi - 1/2 int [f(x+1) + f(x/(x+1))] dxi for each test function."""
    test_fns = test_fns or STATIONARITY_TESTS
    out = {}
    for name, f in test_fns.items():
        lhs = xi_integral(rule, f)
        rhs = 0.5 * xi_integral(rule, lambda x: f(x + 1) + f(x / (x + 1)))
        out[name] = lhs - rhs
    return out


def stationarity_check(rule: QuadratureRule, test_fns: dict[str, Callable] | None = None) -> float:
    return max(abs(v) for v in stationarity_defects(rule, test_fns).values())


# ---------------------------------------------------------------- cocycle

def chi_interpolant(rule: QuadratureRule, degree: int = 48) -> C.Chebyshev:
    """x -> int log(1 + x y) dmu(y) as a Chebyshev interpolant on [0, 1].

    The integrand is analytic for x > -1, so degree 48 is at rounding level.
    """
    y = rule.nodes
    w = float(rule.weight)

    def f(x):
        x = np.atleast_1d(x)
        return np.array([math.fsum(np.log1p(xi * y)) * w for xi in x])

    return C.Chebyshev.interpolate(f, degree, domain=[0, 1])


@dataclass
class CocycleFunctions:
    alpha: float
    chi: C.Chebyshev
    depth: int

    def psi(self, x):
        x = np.asarray(x, dtype=float)
        return floor_recip(x) + np.log(x) / self.alpha

    def chi1(self, x):
        return -self.chi(np.asarray(x, dtype=float)) / self.alpha

    def psi_hat(self, x):
        x = np.asarray(x, dtype=float)
        n = floor_recip(x)
        gx = 1 / x - n
        return self.psi(x) + self.chi1(x) - self.chi1(gx)


def floor_recip(x):
    # the convention at x = 1/n does not matter: mu has no atoms
    return np.floor(1 / np.asarray(x, dtype=float))


def cocycle_functions(depth: int = 14, alpha: float | None = None) -> CocycleFunctions:
    if alpha is None:
        alpha, _ = spectral_constants()
    rule = build_quadrature(depth)
    return CocycleFunctions(alpha, chi_interpolant(rule), depth)


def H_apply(f: Callable, x, n_max: int = 60):
    """H[f](x) = sum_n 2**-n f(1/(n + x))."""
    x = np.asarray(x, dtype=float)
    return sum(2.0 ** -n * f(gauss_branch(n, x)) for n in range(1, n_max + 1))


def cohomological_defect(cf: CocycleFunctions, points: int = 20) -> float:
    """max |H[chi1] - chi1 + H[psi]| on sample points; H[psi] = 2 + H[log]/alpha."""
    x = (np.arange(points) + 0.5) / points
    lhs = H_apply(cf.chi1, x)
    rhs = cf.chi1(x) - 2 - H_apply(lambda t: np.log(t) / cf.alpha, x)
    return float(np.max(np.abs(lhs - rhs)))


def psi_hat_min_near_zero(cf: CocycleFunctions, x_max: float = 0.1, points: int = 4000) -> float:
    """min |psi_hat| on a log-spaced grid in (0, x_max)."""
    x = np.geomspace(1e-6, x_max, points, endpoint=False)
    return float(np.min(np.abs(cf.psi_hat(x))))


def psi_mean(rule: QuadratureRule, alpha: float, n_max: int = 80) -> float:
    """int psi dmu, by branches: psi(1/(n+t)) = n - log(n+t)/alpha."""
    parts = [2.0 ** -n * integrate(rule, lambda t: n - np.log(n + t) / alpha)
             for n in range(1, n_max + 1)]
    return math.fsum(parts)


# ---------------------------------------------------------------- sigma^2

SIGMA_TAGS = {
    "sigma2_quadrature": "1/2 int (log x + alpha[1/x] + int log((1+y{1/x})/(1+yx)) dmu(y))^2 dmu(x)",
    "sigma2_alt": "1/2 int (log x + alpha[1/x])^2 dmu - int int (log x + alpha[1/x]) log(1+xy) dmu dmu",
    "sigma2_spectral": "-(log rho)''(0), transfer operator",
}

SIGMA_BRANCHES = 60


@dataclass
class SigmaReport:
    depth: int
    alpha_used: float
    sigma2_quadrature: float | None
    sigma2_alt: float | None
    sigma2_spectral: float | None
    psi_mean: float
    failures: list[str] = field(default_factory=list)

    def values(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in SIGMA_TAGS if getattr(self, k) is not None}

    @property
    def spread(self) -> float:
        v = list(self.values().values())
        return max(v) - min(v) if v else 0.0

    def validate(self) -> list[str]:
        out = [f"{k} = {v:.6g} is not positive" for k, v in self.values().items() if not v > 0]
        if self.spread >= SIGMA2_SPREAD_TOL:
            out.append(f"sigma2 spread {self.spread:.3g} >= {SIGMA2_SPREAD_TOL}")
        self.failures = out
        return out

    def rows(self) -> list[tuple[str, str, float]]:
        return [(k, SIGMA_TAGS[k], v) for k, v in self.values().items()]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["spread"] = self.spread
        d["tags"] = {k: SIGMA_TAGS[k] for k in self.values()}
        return d


def _branch_sum(rule: QuadratureRule, g: Callable[[int, np.ndarray], np.ndarray],
                n_max: int = SIGMA_BRANCHES) -> float:
    """int F dmu = sum_n 2**-n int F(1/(n+t)) dmu(t), with g(n, t) = F(1/(n+t))."""
    w = float(rule.weight)
    t = rule.nodes
    return math.fsum(2.0 ** -n * math.fsum(g(n, t)) * w for n in range(1, n_max + 1))


def sigma2_quadrature(rule: QuadratureRule, alpha: float, chi: C.Chebyshev) -> float:
    """Squared single-integrand form.  On branch n, x = 1/(n+t): log x = -log(n+t),
    [1/x] = n, {1/x} = t."""
    def g(n, t):
        x = 1 / (n + t)
        inner = chi(t) - chi(x)
        return (-np.log(n + t) + alpha * n + inner) ** 2
    return 0.5 * _branch_sum(rule, g)


def sigma2_alt(rule: QuadratureRule, alpha: float, chi: C.Chebyshev) -> float:
    """Expanded form: a squared term minus a cross term."""
    def sq(n, t):
        return (-np.log(n + t) + alpha * n) ** 2

    def cross(n, t):
        return (-np.log(n + t) + alpha * n) * chi(1 / (n + t))
    return 0.5 * _branch_sum(rule, sq) - _branch_sum(rule, cross)


def sigma2_all_routes(rule: QuadratureRule, routes: Sequence[str] = ("quad", "alt", "spectral"),
                      inner_depth: int | None = None, perturb: float = 0.0) -> SigmaReport:
    """sigma^2 by the squared form, the expanded form and the spectral route.

    Both quadrature forms are written as sums over Gauss branches, since the
    integrands jump at every 1/n.  The inner integral over y is an analytic
    function of x and is carried as a Chebyshev interpolant built on the
    inner rule.  alpha inside the integrands is the spectral value.
    """
    alpha, s2_spec = spectral_constants()
    inner = build_quadrature(inner_depth if inner_depth is not None else rule.depth)
    chi = chi_interpolant(inner)
    rep = SigmaReport(
        depth=rule.depth,
        alpha_used=alpha,
        sigma2_quadrature=sigma2_quadrature(rule, alpha, chi) + perturb if "quad" in routes else None,
        sigma2_alt=sigma2_alt(rule, alpha, chi) if "alt" in routes else None,
        sigma2_spectral=s2_spec if "spectral" in routes else None,
        psi_mean=psi_mean(rule, alpha),
    )
    rep.validate()
    return rep


# ---------------------------------------------------------------- partition entropy

@dataclass(frozen=True)
class PartitionEntropy:
    N: int
    lhs: float
    rhs: float

    @property
    def rate(self) -> float:
        """Common value / N; tends to 2 alpha."""
        return self.rhs / self.N if self.N else math.nan

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def partition_entropy(N: int) -> PartitionEntropy:
    """Both sides of -sum mu(J) log nu(J) = (2/2**N) sum log s(2**N + m).

    mu(J_{m,N}) = 2**-N and nu(J_{m,N}) = 1/(s(2**N+m) s(2**N+m+1)).
    """
    if not 0 <= N <= 22:
        raise ValueError("partition entropy needs 0 <= N <= 22")
    row = row_values(N).astype(float)
    nxt = np.append(row[1:], 1.0)  # s(2**(N+1)) = 1
    P = float(1 << N)
    logs = np.log(row)
    lhs = math.fsum(np.concatenate([logs, np.log(nxt)])) / P
    rhs = 2 * math.fsum(logs) / P
    if abs(lhs - rhs) > 1e-12 * max(1.0, abs(rhs)):
        raise ArithmeticError(f"partition entropy identity fails at N={N}: {lhs} vs {rhs}")
    return PartitionEntropy(N, lhs, rhs)


def partition_entropy_multiset_equal(N: int) -> bool:
    """The two sides are sums of the same multiset of integers' logs."""
    s = [int(v) for v in stern_table(N + 1)]
    P = 1 << N
    left = sorted(s[P + m] for m in range(P)) + sorted(s[P + m + 1] for m in range(P))
    right = sorted(s[P + m] for m in range(P)) * 2
    return sorted(left) == sorted(right)


# ---------------------------------------------------------------- output

def report_table(rows: Sequence[tuple[str, str, float]], stderr: dict[str, float] | None = None) -> str:
    stderr = stderr or {}
    w = max(len(r[0]) for r in rows)
    lines = []
    for key, tag, val in rows:
        extra = f" +- {stderr[key]:.2e}" if key in stderr else ""
        lines.append(f"{key:<{w}}  {val:.12f}{extra}  [{tag}]")
    return "\n".join(lines)


def report_json(report, config: dict) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, "config": config,
                       "report": report.to_dict()}, indent=2, sort_keys=True)
