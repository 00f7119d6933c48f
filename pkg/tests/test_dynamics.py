import json
from fractions import Fraction
from math import comb

import pytest
from hypothesis import given, strategies as st

from sternlab.dynamics import (ConsistencyError, IntervalMap, NonTerminationError, binary,
                               binary_jump, conjugacy_check, eval_map, farey, gauss,
                               gauss_orbit_derivative, jump_by_iteration, k_histogram, orbit,
                               phi, stern_product_check, stern_via_gauss_product)
from sternlab.minkowski import DyadicPoint
from sternlab.stern import stern

dyadics = st.integers(0, 14).flatmap(
    lambda N: st.builds(lambda m: Fraction(m, 2 ** N), st.integers(0, 2 ** N)))


@pytest.mark.parametrize("kind, x, y", [
    ("binary", Fraction(1, 3), Fraction(2, 3)),
    ("binary", Fraction(3, 4), Fraction(1, 2)),
    ("binary_jump", Fraction(3, 8), Fraction(1, 2)),
    ("binary_jump", Fraction(1, 2), Fraction(1)),
    ("binary_jump", Fraction(1), Fraction(0)),
    ("farey", Fraction(1, 3), Fraction(1, 2)),
    ("farey", Fraction(2, 3), Fraction(1, 2)),
    ("gauss", Fraction(3, 7), Fraction(1, 3)),
    ("gauss", Fraction(1, 2), Fraction(1)),
    ("gauss", Fraction(0), Fraction(0)),
])
def test_map_values(kind, x, y):
    assert eval_map(kind, x) == y
    assert eval_map(IntervalMap(kind), x) == y


def test_eval_map_domain():
    with pytest.raises(ValueError):
        eval_map("farey", Fraction(5, 4))


@given(dyadics)
def test_jump_is_induced_binary(x):
    assert binary_jump(x) == jump_by_iteration(x)


@pytest.mark.parametrize("N", [0, 3, 8, 12])
def test_conjugacy(N):
    assert conjugacy_check(N)


def test_conjugacy_negative_control():
    # floor(1/x) without the branch convention gives G(1/2) = 0
    def naive_gauss(y):
        return 1 / y - int(1 / y) if y not in (0, 1) else Fraction(0)
    assert not conjugacy_check(4, gauss_map=naive_gauss)
    assert not conjugacy_check(4, farey_map=lambda y: 2 * min(y, 1 - y))


def test_conjugacy_cap():
    with pytest.raises(ValueError):
        conjugacy_check(13)


@given(dyadics)
def test_phi_conjugates_tent_to_farey(x):
    assert phi(binary(x)) == farey(phi(x))


def test_orbit_of_small_point():
    rec = orbit(DyadicPoint(1, 5))
    assert rec.K == 1
    assert rec.gauss_orbit == (Fraction(1, 6),)
    assert rec.jump_orbit == (Fraction(1, 32), Fraction(1))
    assert json.loads(rec.to_json())["K"] == 1


def test_orbit_lengths():
    N = 6
    Ks = [orbit(DyadicPoint(m, N)).K for m in range(1, 2 ** N + 1)]
    assert Ks.count(N) == 1
    assert orbit(DyadicPoint(2 ** N, N)).K == 0
    with pytest.raises(NonTerminationError):
        orbit(DyadicPoint(0, 3))


@pytest.mark.parametrize("N", [1, 4, 9, 16])
def test_k_histogram_binomial(N):
    assert k_histogram(N) == [comb(N, r) for r in range(N + 1)]


@pytest.mark.parametrize("N", [1, 6, 12])
def test_product_formula(N):
    assert stern_product_check(N)


def test_product_formula_spot():
    # s(8 + 3) = 5 from Phi(3/8) = 2/5 and G(2/5) = 1/2
    assert stern_via_gauss_product(DyadicPoint(3, 3)) == stern(11) == 5
    with pytest.raises(ValueError):
        stern_via_gauss_product(DyadicPoint(0, 3))


def test_orbit_derivative_is_square_of_stern():
    for m in range(1, 33):
        p = DyadicPoint(m, 5)
        assert gauss_orbit_derivative(p) == stern(32 + m) ** 2


def test_consistency_error_type():
    assert issubclass(ConsistencyError, ArithmeticError)
