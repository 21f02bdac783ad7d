import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from psbases.core import h0_integer
from psbases.errors import ConsistencyError, DomainError
from psbases import singular
from psbases.singular import (
    SingularSeriesParams, congruence_admissible, euler_phi, gauss_sum, gauss_sum_restricted, local_term,
    singular_series, singular_series_dense, singular_series_many, tail_estimate,
)


def test_gauss_examples():
    assert gauss_sum(2, 1, 4) == pytest.approx(2 + 2j)
    assert gauss_sum(1, 1, 5) == pytest.approx(0, abs=1e-12)
    assert gauss_sum(3, 1, 1) == pytest.approx(1)
    assert gauss_sum_restricted(2, 1, 4) == pytest.approx(2j)
    assert gauss_sum_restricted(1, 1, 2) == pytest.approx(-1)
    assert gauss_sum_restricted(5, 1, 1) == pytest.approx(1)
    with pytest.raises(DomainError):
        gauss_sum_restricted(2, 2, 4)


def test_phi():
    assert [euler_phi(q) for q in (1, 24, 97)] == [1, 8, 96]
    for q in range(1, 200):
        assert euler_phi(q) == sum(math.gcd(a, q) == 1 for a in range(1, q + 1))


def test_series_examples():
    assert singular_series(SingularSeriesParams(1, 2, 37), 12345) == pytest.approx(1.0)
    assert singular_series(SingularSeriesParams(1, 2, 2, True), 4) == pytest.approx(2.0)
    assert singular_series(SingularSeriesParams(1, 2, 2, True), 3) == pytest.approx(0.0, abs=1e-12)
    n = np.arange(1, 300)
    assert np.allclose(singular_series_many(SingularSeriesParams(1, 2, 2, True), n), 1 + (-1.0) ** n, atol=1e-12)


def test_congruence():
    assert congruence_admissible(2, 5, 29)
    assert not congruence_admissible(2, 5, 30)
    assert congruence_admissible(3, 5, 7)


def test_convergence_guard():
    with pytest.raises(DomainError):
        SingularSeriesParams(2, 4)
    SingularSeriesParams(2, 5)


def test_fast_sums_match_direct():
    for k in (1, 2, 3):
        for q in (1, 7, 12, 30):
            fast = singular._sums_all_a(k, q, False)
            fast_r = singular._sums_all_a(k, q, True)
            for a in range(1, q + 1):
                assert fast[a % q] == pytest.approx(gauss_sum(k, a, q), abs=1e-9)
                if math.gcd(a, q) == 1:
                    assert fast_r[a % q] == pytest.approx(gauss_sum_restricted(k, a, q), abs=1e-9)


@pytest.mark.parametrize("k", [2, 3])
@pytest.mark.parametrize("restricted", [False, True])
def test_multiplicativity(k, restricted):
    h = 2 * h0_integer(k) + 1
    worst = 0.0
    for q1 in range(1, 51):
        for q2 in range(q1, 51):
            if math.gcd(q1, q2) != 1:
                continue
            for n in (17, 100, 1009):
                a = local_term(k, h, q1 * q2, n, restricted)
                b = local_term(k, h, q1, n, restricted) * local_term(k, h, q2, n, restricted)
                worst = max(worst, abs(a - b))
    assert worst <= 1e-9


def test_reality_and_tail_diagnostic():
    k, h = 2, 5
    for q in range(1, 501):
        vals = singular.local_term_table(k, h, q)[[17 % q, 100 % q, 1009 % q]]
        assert np.max(np.abs(vals.imag)) <= 1e-10
        assert np.max(np.abs(vals)) <= 4 * q ** (1 - h / (2 * k))


def test_imaginary_residue_raises():
    with pytest.raises(ConsistencyError):
        singular._check_real(np.array([1 + 1e-3j]))


def _admissible_sample(m=100, seed=6):
    rng = np.random.default_rng(seed)
    return 24 * rng.integers(42, (10**6 - 5) // 24 + 1, m) + 5


def test_positivity_on_admissible_class():
    ns = _admissible_sample()
    s = singular_series_many(SingularSeriesParams(2, 5, 500, True), ns)
    assert s.min() >= 0.05


def test_truncation_stability():
    # known to fail at Q = 250 vs 500: 2- and 3-adic factors amplify the slowly converging odd tail
    ns = _admissible_sample()
    s500 = singular_series_many(SingularSeriesParams(2, 5, 500, True), ns)
    s250 = singular_series_many(SingularSeriesParams(2, 5, 250, True), ns)
    assert np.max(np.abs(s500 - s250)) <= 0.05


def test_dense_matches_pointwise():
    p = SingularSeriesParams(2, 5, 60)
    dense = singular_series_dense(p, 400)
    assert np.allclose(dense[1:], singular_series_many(p, np.arange(1, 401)), atol=1e-12)


def test_tail_estimate():
    assert tail_estimate(SingularSeriesParams(1, 2)) == math.inf
    assert tail_estimate(SingularSeriesParams(2, 5, 500)) == pytest.approx(500**-0.4 / 0.4)
    assert tail_estimate(SingularSeriesParams(2, 9, 1000)) < tail_estimate(SingularSeriesParams(2, 9, 500))


@given(st.integers(1, 60), st.integers(1, 10**6))
def test_local_term_real(q, n):
    assert abs(local_term(2, 5, q, n, True).imag) <= 1e-10
