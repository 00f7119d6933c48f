import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sternlab.stern import (EnumerationLimitError, fibonacci, gap_identity_check, index_of,
                            iter_rows, log_int, log_stern_exact, log_stern_float,
                            log_stern_row, log_stern_sampler, random_words, row_values,
                            stern, stern_pair_by_word, stern_table, word_of)

FIRST_TERMS = [0, 1, 1, 2, 1, 3, 2, 3, 1, 4, 3, 5, 2, 5, 3, 4, 1]


def test_first_terms():
    assert [stern(n) for n in range(17)] == FIRST_TERMS


def test_table_matches_scalar():
    s = stern_table(10)
    assert [int(v) for v in s] == [stern(n) for n in range(1025)]


@given(st.integers(min_value=1, max_value=2 ** 200))
def test_recurrence(n):
    assert stern(2 * n) == stern(n)
    assert stern(2 * n + 1) == stern(n) + stern(n + 1)


@given(st.integers(min_value=1, max_value=2 ** 256))
def test_matrix_product_matches_recurrence(n):
    assert stern_pair_by_word(word_of(n)) == (stern(n + 1), stern(n))


@given(st.lists(st.integers(0, 1), max_size=80))
def test_word_roundtrip(bits):
    assert word_of(index_of(bits)) == tuple(bits)


def test_index_of_rejects_non_bits():
    with pytest.raises(ValueError):
        index_of([0, 2])


def test_negative_index():
    with pytest.raises(ValueError):
        stern(-1)


@pytest.mark.parametrize("N", range(0, 21))
def test_row_max_is_fibonacci(N):
    assert int(row_values(N).max()) == fibonacci(N + 2)


def test_row_sum_is_power_of_three():
    # each row sum triples: s(2n) + s(2n+1) = 2 s(n) + s(n+1)
    for N in range(12):
        assert int(row_values(N).sum()) == 3 ** N


def test_rows_stream():
    rows = dict(iter_rows(6))
    assert list(rows[2]) == [1, 3, 2, 3]
    assert list(rows[0]) == [1]


def test_enumeration_cap():
    with pytest.raises(EnumerationLimitError):
        row_values(25)
    assert len(row_values(3, cap=3)) == 8


def test_log_int_large():
    v = 3 ** 400
    assert log_int(v) == pytest.approx(400 * math.log(3), rel=1e-15)
    with pytest.raises(ValueError):
        log_int(0)


def test_sampler_deterministic():
    a = log_stern_sampler(40, 200, seed=5)
    b = log_stern_sampler(40, 200, seed=5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, log_stern_sampler(40, 200, seed=6))


def test_float_path_matches_exact():
    w = random_words(300, 300, seed=1)
    exact = log_stern_exact(w)
    approx = log_stern_float(w, renorm_every=50)
    assert np.max(np.abs(exact - approx) / exact) < 1e-12


def test_log_row():
    assert np.allclose(log_stern_row(3), np.log([1, 4, 3, 5, 2, 5, 3, 4]))


@pytest.mark.parametrize("N", [0, 1, 5, 12])
def test_gap_identity(N):
    assert gap_identity_check(N)


def test_gap_identity_negative_control():
    s = [int(v) for v in stern_table(7)]
    s[2 ** 6 + 5] += 1
    assert not gap_identity_check(6, values=s)


def test_gap_identity_cap():
    with pytest.raises(ValueError):
        gap_identity_check(17)
