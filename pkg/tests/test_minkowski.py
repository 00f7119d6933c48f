import io
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sternlab.minkowski import (DENJOY_SCALE, DyadicPoint, EvaluationError, build_quadrature,
                                continued_fraction, eigenmeasure_defect, from_continued_fraction,
                                golden_cf, integrate, integrate_branches, moments, phi_dyadic,
                                psi_rational, psi_series)

ALPHA = 0.39621256429775


@pytest.mark.parametrize("x, expected", [
    (Fraction(0), Fraction(0)), (Fraction(1), Fraction(1)),
    (Fraction(1, 2), Fraction(1, 2)), (Fraction(1, 3), Fraction(1, 4)),
    (Fraction(2, 3), Fraction(3, 4)), (Fraction(2, 5), Fraction(3, 8)),
    (Fraction(1, 4), Fraction(1, 8)),
])
def test_psi_small_values(x, expected):
    assert psi_rational(x) == expected


@given(st.integers(0, 14).flatmap(lambda N: st.tuples(st.integers(0, 2 ** N), st.just(N))))
def test_phi_then_psi_is_identity(mn):
    p = DyadicPoint(*mn)
    assert psi_rational(phi_dyadic(p)) == p.value


@given(st.fractions(min_value=0, max_value=1, max_denominator=10 ** 6))
def test_continued_fraction_roundtrip(x):
    assert from_continued_fraction(continued_fraction(x)) == x


@given(st.fractions(min_value=0, max_value=1, max_denominator=2000))
def test_denjoy_series_matches_tree(x):
    assert psi_series(continued_fraction(x)) == pytest.approx(float(psi_rational(x)), abs=1e-15)


def test_denjoy_scale_and_golden_ratio():
    assert DENJOY_SCALE == 2
    # 2 (1/2 - 1/4 + 1/8 - ...) = 2/3
    assert psi_series(golden_cf()) == pytest.approx(2 / 3, abs=1e-14)


def test_psi_rejects_outside():
    with pytest.raises(ValueError):
        psi_rational(Fraction(3, 2))
    with pytest.raises(ValueError):
        psi_series([1, 0, 2])


def test_dyadic_point():
    assert DyadicPoint.from_fraction(Fraction(3, 8)) == DyadicPoint(3, 3)
    with pytest.raises(ValueError):
        DyadicPoint.from_fraction(Fraction(1, 3))
    with pytest.raises(ValueError):
        DyadicPoint(9, 3)


def test_quadrature_nodes_exact_ratios():
    r = build_quadrature(3)
    assert len(r) == 8
    assert r.nodes[0] == 1 / 5  # Phi(1/16) = s(1)/s(17)
    assert r.weight == Fraction(1, 8)
    assert np.all(np.diff(r.nodes) > 0)
    with pytest.raises(ValueError):
        r.nodes[0] = 0.0


def test_quadrature_symmetric():
    r = build_quadrature(12)
    assert np.allclose(r.nodes + r.nodes[::-1], 1.0, atol=1e-15)


def test_quadrature_csv():
    buf = io.StringIO()
    build_quadrature(2).to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "node,weight" and len(lines) == 5


def test_bad_depth_and_mode():
    with pytest.raises(ValueError):
        build_quadrature(23)
    with pytest.raises(ValueError):
        build_quadrature(4, "simpson")


def test_nonfinite_integrand_reports_node():
    with pytest.raises(EvaluationError, match="node 0"):
        integrate(build_quadrature(8, "left"), np.log)


def test_first_moment_and_mass():
    m = moments(build_quadrature(14), 4)
    assert m.m[0] == 1.0
    assert m.m[1] == pytest.approx(0.5, abs=1e-14)
    # invariance under x -> 1 - x gives m_3 = 3 m_2 / 2 - 1/4
    assert m.m[3] == pytest.approx(1.5 * m.m[2] - 0.25, abs=1e-12)
    with pytest.raises(ValueError):
        moments(build_quadrature(4), 65)


def test_moment_json():
    assert moments(build_quadrature(4), 2).to_json().startswith("[1.0")


def test_log_integral_tail_split():
    r = build_quadrature(16)
    assert -0.5 * integrate(r, np.log, tail_split=True) == pytest.approx(ALPHA, abs=2e-8)


def test_branch_integration_of_floor():
    # int floor(1/x) dmu = sum n 2**-n = 2
    r = build_quadrature(8)
    v = integrate_branches(r, lambda x: np.floor(1 / x * (1 - 1e-15)))
    assert v == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("f", [lambda x: x, lambda x: np.exp(x), lambda x: 1 / (2 + x)])
def test_eigenmeasure(f):
    assert abs(eigenmeasure_defect(build_quadrature(16), f)) < 1e-8


def test_midpoint_converges_geometrically():
    errs = [abs(integrate(build_quadrature(d), np.log1p) - ALPHA) for d in (8, 10, 12)]
    assert errs[0] > errs[1] > errs[2]
