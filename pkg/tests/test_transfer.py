import json
import math

import numpy as np
import pytest

from sternlab.minkowski import build_quadrature, moments
from sternlab.transfer import (DivergenceError, TruncationError, build_operator, chebyshev_nodes,
                               dominant_eig, eigenvalue, lambda_derivatives, log_rho_derivatives,
                               quasi_inverse_partial_sum, required_n_max, resolvent_at_one,
                               rho_curve, solve_rho, spectrum_json, stern_series, tail_bound)

ALPHA = 0.39621256429775


def test_nodes_include_endpoints():
    t = chebyshev_nodes(8)
    assert t[0] == 0.0 and t[-1] == 1.0 and len(t) == 9


@pytest.mark.parametrize("z", [0.1, 0.25, 0.5])
def test_tau_zero_eigenvalue_closed_form(z):
    # H_{0,z}[1] = z / (1 - z), a constant
    assert abs(eigenvalue(0, z) - z / (1 - z)) < 1e-13


def test_dominant_pair_at_half():
    sd = dominant_eig(build_operator(0, 0.5))
    assert abs(sd.lam - 1) < 1e-12
    assert np.max(np.abs(sd.eigenfunction(np.linspace(0, 1, 101)) - 1)) < 1e-10
    assert sd.residual < 1e-12 and sd.left_residual < 1e-12
    assert sd.gap_ratio == pytest.approx(0.25553, abs=1e-4)


def test_gap_stable_across_degree():
    g = [dominant_eig(build_operator(0, 0.5, M)).gap_ratio for M in (24, 32, 48)]
    assert max(g) - min(g) < 1e-8


def test_left_vector_is_minkowski_measure():
    sd = dominant_eig(build_operator(0, 0.5))
    m = moments(build_quadrature(16), 6).m
    for k in range(7):
        assert abs(sd.functional(lambda t: t ** k) - m[k]) < 2e-4
    assert sd.functional(np.log1p).real == pytest.approx(ALPHA, abs=1e-9)


def test_derivatives():
    dt, dz = lambda_derivatives(0, 0.5)
    assert abs(dz - 4) < 1e-8
    assert abs(dt + 2 * ALPHA) < 1e-9
    assert abs(lambda_derivatives(0, 0.25)[1] - 16 / 9) < 1e-10


def test_conjugate_symmetry():
    a = eigenvalue(0.1 + 0.05j, 0.45 - 0.02j)
    b = eigenvalue(0.1 - 0.05j, 0.45 + 0.02j)
    assert abs(a - b.conjugate()) < 1e-13
    r1, r2 = solve_rho(0.1 + 0.1j), solve_rho(0.1 - 0.1j)
    assert abs(r1.rho - r2.rho.conjugate()) < 1e-13


def test_rho():
    assert abs(solve_rho(0).rho - 0.5) < 1e-12
    with pytest.raises(ValueError):
        solve_rho(0.3)


def test_rho_curve_monotone_and_warm_start():
    taus = [-0.1, -0.05, 0.0, 0.05, 0.1]
    cold = rho_curve(taus)
    warm = rho_curve(taus, warm_start=True)
    assert all(abs(a.rho - b.rho) < 1e-13 for a, b in zip(cold, warm))
    re = [p.rho.real for p in cold]
    assert re == sorted(re)


def test_log_rho_derivatives():
    d = log_rho_derivatives()
    assert d.alpha == pytest.approx(ALPHA, abs=1e-11)
    assert d.sigma2 == pytest.approx(0.148905 ** 2, abs=1e-6)
    assert d.sigma2_error < 1e-8


def test_truncation_guard():
    assert tail_bound(0.5, 0, required_n_max(0.5, 0)) < 1e-14
    with pytest.raises(TruncationError):
        build_operator(0, 0.5, n_max=10)
    with pytest.raises(ValueError):
        build_operator(0, 0.7)
    with pytest.raises(ValueError):
        build_operator(0, 0.5, degree=80)


def test_quasi_inverse_closed_form():
    # at tau = 0 the Stern series is sum (2z)^N = 1 / (1 - 2z)
    q = quasi_inverse_partial_sum(0, 0.3)
    assert abs(q.value - 2.5) < 1e-12
    assert abs(resolvent_at_one(0, 0.3) - 2.5) < 1e-12


def test_quasi_inverse_diverges_at_pole():
    with pytest.raises(DivergenceError):
        quasi_inverse_partial_sum(0, 0.5)


def test_stern_series_tail_bound_holds():
    a = stern_series(0.3, 0.4, N_max=14)
    b = stern_series(0.3, 0.4, N_max=20)
    assert abs(a.value - b.value) <= a.tail_bound


def test_spectrum_json():
    op = build_operator(0, 0.5)
    d = json.loads(spectrum_json(op, dominant_eig(op)))
    assert set(d) >= {"tau", "z", "lambda", "gap", "residual"}


def test_quasi_inverse_matches_extrapolated_series():
    # geometric extrapolation of the direct series tail from its last two terms
    for tau, z, tol in ((0.3, 0.4, 1e-9), (-0.3, 0.3, 1e-11)):
        d = stern_series(tau, z, N_max=22)
        r = d.terms[-1] / d.terms[-2]
        extrapolated = d.value + d.terms[-1] * r / (1 - r)
        assert abs(quasi_inverse_partial_sum(tau, z).value - extrapolated) < tol
