import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distavoid.rankcert import (MERSENNE_31, PointConfig, _is_probable_prime, det_mod_p,
                                exact_rank, float_rank, generic_symmetric_det_nonzero, gram_form,
                                random_rational_config, rank_bound_check,
                                repeated_distance_audit, sqdist_matrix)


def test_two_points():
    assert sqdist_matrix(PointConfig([(0, 0), (1, 0)])) == [[0, 1], [1, 0]]


def test_unit_square():
    M = sqdist_matrix(PointConfig([(0, 0), (1, 0), (0, 1), (1, 1)]))
    assert sorted(M[0][1:]) == [1, 1, 2]
    assert all(M[i][i] == 0 for i in range(4))


def test_point_config_validation():
    with pytest.raises(ValueError):
        PointConfig([])
    with pytest.raises(ValueError):
        PointConfig([(0, 0), (0, 0)])
    with pytest.raises(ValueError):
        PointConfig([(0, 0), (1,)])
    X = PointConfig([("1/3", 0), (2, "0.5")])
    assert X.points[0][0] == Fraction(1, 3)
    assert PointConfig.from_json(X.to_json()) == X


coords = st.fractions(-5, 5, max_denominator=7)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 3), st.data())
def test_sqdist_is_gram_form(dim, data):
    n = data.draw(st.integers(1, 8))
    pts = data.draw(st.lists(st.tuples(*[coords] * dim), min_size=n, max_size=n, unique=True))
    X = PointConfig(pts, dim)
    M = sqdist_matrix(X)
    assert M == gram_form(X)
    assert all(M[i][j] == M[j][i] for i in range(n) for j in range(n))


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 3), st.data())
def test_rank_bound_holds(dim, data):
    n = data.draw(st.integers(dim + 3, dim + 6))
    pts = data.draw(st.lists(st.tuples(*[coords] * dim), min_size=n, max_size=n, unique=True))
    rank, ok = rank_bound_check(PointConfig(pts, dim))
    assert ok and rank <= dim + 2


def test_collinear_points():
    X = PointConfig([(i, 2 * i) for i in range(6)])
    rank, ok = rank_bound_check(X)
    assert ok and rank <= 3


def test_few_points_pass_vacuously():
    X = PointConfig([(0, 0), (1, 0), (0, 3)])
    rank, ok = rank_bound_check(X)
    assert ok and rank <= 3


def test_exact_rank_matches_numpy():
    rng = np.random.default_rng(0)
    for _ in range(30):
        A = rng.integers(-3, 4, (5, 6))
        A[rng.integers(0, 5)] = A[0] * 2
        assert exact_rank(A.tolist()) == np.linalg.matrix_rank(A)


def test_float_path_agrees_on_generic_points():
    rng = random.Random(4)
    for dim in (1, 2, 3):
        X = random_rational_config(rng, dim, dim + 5)
        Y = PointConfig([[float(v) for v in p] for p in X.points], dim, exact=False)
        assert rank_bound_check(Y)[0] == rank_bound_check(X)[0]
    assert float_rank([[1e-12, 0], [0, 1]], 1e-9) == 1


def test_audit_equilateral_repeats():
    # every 5-subset containing the triangle repeats the side length
    tri = [(0.0, 0.0), (1.0, 0.0), (0.5, 3**0.5 / 2)]
    X = PointConfig(tri + [(3.1, 0.7), (-2.3, 1.9)], exact=False)
    assert repeated_distance_audit(X, tol=1e-9) == []
    square = PointConfig([(0, 0), (1, 0), (0, 1), (1, 1), (2, 2)])
    assert repeated_distance_audit(square) == []


def test_audit_reports_distinct_subsets():
    X = PointConfig([(0, 0), (1, 0), (3, 0), (0, 7), (5, 11), (13, 2)])
    out = repeated_distance_audit(X)
    M = sqdist_matrix(X)
    for sub in out:
        vals = [M[i][j] for i in sub for j in sub if i < j]
        assert len(set(vals)) == len(vals)
    assert out == sorted(out)


def test_audit_small_domain():
    assert repeated_distance_audit(PointConfig([(0, 0), (1, 0), (0, 1), (5, 7)])) == []


def test_audit_generic_points_is_a_report():
    X = random_rational_config(random.Random(1), 2, 5)
    out = repeated_distance_audit(X)
    assert out in ([], [(0, 1, 2, 3, 4)])


def test_det_closed_forms():
    p = MERSENNE_31
    assert det_mod_p([[0, 5], [5, 0]], p) == (-25) % p
    a, b, c = 3, 5, 7
    assert det_mod_p([[0, a, b], [a, 0, c], [b, c, 0]], p) == 2 * a * b * c


@pytest.mark.parametrize("n", range(2, 10))
def test_generic_det_nonzero(n):
    assert generic_symmetric_det_nonzero(n, 10)


def test_generic_det_is_monotone_in_trials():
    for seed in range(5):
        results = [generic_symmetric_det_nonzero(4, t, seed=seed) for t in (1, 2, 5, 10)]
        assert results == sorted(results)


def test_generic_det_errors():
    with pytest.raises(ValueError):
        generic_symmetric_det_nonzero(1)
    with pytest.raises(ValueError):
        generic_symmetric_det_nonzero(10)
    with pytest.raises(ValueError):
        generic_symmetric_det_nonzero(3, prime=2**31 - 3)
    with pytest.raises(ValueError):
        generic_symmetric_det_nonzero(3, prime=101)


def test_primality():
    assert _is_probable_prime(MERSENNE_31)
    assert not _is_probable_prime(2**31 + 1)
    assert [q for q in range(30) if _is_probable_prime(q)] == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
