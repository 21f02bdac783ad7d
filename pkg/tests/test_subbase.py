import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psbases import subbase
from psbases.core import RegVarFn, SequenceSpec
from psbases.errors import DomainError
from psbases.repcount import rep_function, trend_report
from psbases.sequences import generate
from psbases.subbase import (
    CounterRNG, SamplePlan, calibrate, dyadic_windows, expected_rep, expected_rep_naive, inclusion_probability,
    plan_target, probability_vector, sample_subbase, solve_lambda, verify_subbase,
)

PS = SequenceSpec(1.5)
SQRT = RegVarFn(1.0, 0.5)


def plan(lam=1.0, x_max=2**15, seed=1, F=SQRT, spec=PS, h=5):
    return SamplePlan(spec, F, h, lam, x_max, seed)


class TestRNG:
    def test_reproducible_and_keyed(self):
        a = CounterRNG(7).uniform(np.arange(100))
        b = CounterRNG(7).uniform(np.arange(100)[::-1])[::-1]
        assert np.array_equal(a, b)
        assert not np.array_equal(a, CounterRNG(8).uniform(np.arange(100)))

    def test_range_and_moments(self):
        u = CounterRNG(1).uniform(np.arange(200000))
        assert u.min() >= 0 and u.max() < 1
        assert abs(u.mean() - 0.5) < 0.005
        assert abs(np.corrcoef(u[:-1], u[1:])[0, 1]) < 0.01

    def test_split(self):
        r = CounterRNG(3)
        assert r.split(1).seed != r.split(2).seed
        assert r.split(1).seed == CounterRNG(3).split(1).seed

    def test_seed_range(self):
        with pytest.raises(DomainError):
            CounterRNG(-1)
        CounterRNG(2**64 - 1)


class TestInclusion:
    def test_formula(self):
        assert inclusion_probability(plan(), 2**15) == pytest.approx(2 ** (15 * (0.3 - 2 / 3)), rel=1e-12)

    def test_clamp_and_zero(self):
        # omega = beta makes x^(omega - beta) = 1, and lambda = 1 then clamps
        F = RegVarFn(1.0, 5 / 1.5 - 1)
        assert inclusion_probability(plan(F=F), 1000) == 1.0
        assert inclusion_probability(plan(lam=0.0), 1000) == 0.0

    def test_domain(self):
        with pytest.raises(DomainError):
            inclusion_probability(plan(), 15)
        with pytest.raises(DomainError):
            plan(lam=-1)

    def test_prime_variant_log_factor(self):
        sp = SequenceSpec(1.05, 1, True)
        p = inclusion_probability(plan(spec=sp, lam=1e-3, h=5), 1009)
        base = 1e-3 * 1009 ** (0.3 - 1 / 1.05) * math.log(1009)
        assert p == pytest.approx(base)


class TestSampling:
    def test_empty_and_full(self):
        assert sample_subbase(plan(lam=0.0), validate=False).size == 0
        full = sample_subbase(plan(lam=1e6), validate=False)
        gs = generate(PS, 2**15).elements
        assert full.A.tolist() == gs[gs >= 16].tolist()

    def test_determinism_across_threads(self):
        p = plan(lam=0.5, x_max=10**6, seed=42)
        a = sample_subbase(p, threads=1)
        b = sample_subbase(p, threads=8)
        c = sample_subbase(p, threads=3)
        assert np.array_equal(a.A, b.A) and np.array_equal(a.A, c.A)

    def test_nested_ranges_share_decisions(self):
        small = sample_subbase(plan(lam=0.5, x_max=10**5, seed=9))
        big = sample_subbase(plan(lam=0.5, x_max=10**6, seed=9))
        assert big.A[big.A <= 10**5].tolist() == small.A.tolist()

    def test_subset_of_ground_set(self):
        res = sample_subbase(plan(lam=0.5, x_max=10**6, seed=5))
        gs = set(generate(PS, 10**6).elements.tolist())
        assert set(res.A.tolist()) <= gs
        assert res.A.min() >= 16

    def test_validation(self):
        with pytest.raises(DomainError):
            sample_subbase(plan(h=4))
        huge = RegVarFn(100.0, 5 / 1.5 - 1)
        with pytest.raises(DomainError):
            sample_subbase(plan(F=huge))

    def test_concentration(self):
        p = plan(lam=0.4988, x_max=10**6)
        sizes = np.array([sample_subbase(p.with_seed(s)).size for s in range(1, 21)])
        res = sample_subbase(p)
        ok = np.abs(sizes - res.expected_size) <= 3 * math.sqrt(res.expected_size)
        assert ok.sum() >= 19
        assert sizes.std(ddof=1) <= 2 * math.sqrt(res.variance)

    def test_expected_size_formula(self):
        p = plan(lam=0.5, x_max=10**6)
        el = generate(PS, 10**6).elements
        el = el[el >= 16].astype(float)
        assert sample_subbase(p).expected_size == pytest.approx(np.sum(0.5 * el ** (-11 / 30)), rel=1e-12)


def _brute_expectation(p, h, N):
    support = np.flatnonzero(p)
    sure = [x for x in support if p[x] == 1.0]
    coin = [x for x in support if 0 < p[x] < 1]
    out = np.zeros(N + 1)
    for mask in itertools.product((0, 1), repeat=len(coin)):
        A = sure + [x for x, m in zip(coin, mask) if m]
        if not A:
            continue
        w = np.prod([p[x] if m else 1 - p[x] for x, m in zip(coin, mask)])
        out += w * rep_function(A, h, N).values
    return out


class TestExpectation:
    def test_brute_force_half_probabilities(self):
        rng = np.random.default_rng(4)
        for _ in range(3):
            xs = rng.choice(np.arange(1, 60), 20, replace=False)
            vals = rng.choice([0.0, 0.5, 1.0], 20)
            vals[:12] = 0.5  # keep the enumeration at 2^12 subsets
            p = np.zeros(61)
            p[xs] = vals
            for h in (2, 3):
                N = 60
                assert np.max(np.abs(expected_rep(p, h, N) - _brute_expectation(p, h, N))) <= 1e-12 * max(
                    1, _brute_expectation(p, h, N).max())

    @settings(max_examples=15, deadline=None)
    @given(st.lists(st.floats(0.0, 1.0), min_size=8, max_size=8), st.integers(2, 4))
    def test_exact_engine_property(self, probs, h):
        p = np.zeros(30)
        p[[2, 3, 5, 7, 11, 13, 17, 19]] = probs
        N = 29
        assert np.allclose(expected_rep(p, h, N), _brute_expectation(p, h, N), atol=1e-10)

    def test_naive_overcounts_repeats(self):
        p = np.zeros(11)
        p[5] = 0.5
        assert expected_rep(p, 2, 10)[10] == pytest.approx(0.5)
        assert expected_rep_naive(p, 2, 10)[10] == pytest.approx(0.25)

    def test_scale_law(self):
        base = plan(lam=0.05, x_max=4000)
        p1 = probability_vector(base)
        p2 = probability_vector(base.with_lambda(0.1))
        assert p2.max() < 0.5
        e1 = expected_rep_naive(p1, 5, 4000)
        e2 = expected_rep_naive(p2, 5, 4000)
        nz = e1 > 1e-300
        assert np.allclose(e2[nz] / e1[nz], 32, rtol=1e-9)


class TestCalibration:
    def test_synthetic(self):
        assert solve_lambda(lambda lam: 32 * lam**5, 5) == pytest.approx(0.5, rel=1e-6)
        assert solve_lambda(lambda lam: lam**5, 5) == pytest.approx(1.0)
        # a clamped, non-power ratio still gets bracketed
        lam = solve_lambda(lambda lam: min(lam, 2.0) ** 3 * 0.5, 3)
        assert 0.5 * min(lam, 2) ** 3 == pytest.approx(1, rel=1e-6)
        with pytest.raises(DomainError):
            solve_lambda(lambda lam: 1.0, 5, trials=2)
        with pytest.raises(DomainError):
            solve_lambda(lambda lam: 0.5 * min(lam, 1.0), 1)

    def test_flagship_bracket(self):
        p = plan(x_max=10**6)
        W = dyadic_windows(10**5, 10**6)
        cal = calibrate(p, W)
        assert 0.2 <= cal.lam <= 5
        # recompute the expectation independently at the returned lambda
        N = 10**6
        E = expected_rep(probability_vector(p.with_lambda(cal.lam), N), 5, N)
        t = plan_target(p, N)
        mask = subbase.window_mask(W, N)
        assert abs(np.median(E[mask] / t[mask]) - 1) <= 0.05

    def test_rejects_above_ceiling(self):
        with pytest.raises(DomainError):
            calibrate(plan(F=RegVarFn(100.0, 5 / 1.5 - 1), x_max=10**4), [(2**12, 2**13 - 1)])


class TestVerify:
    def test_empty_set(self):
        rep = verify_subbase([], 2, lambda n: n - 1.0, [(10, 100)])
        assert rep.per_window[0].mean_ratio == 0 and not rep.global_pass

    def test_naturals(self):
        rep = verify_subbase(range(1, 101), 2, lambda n: n - 1.0, [(10, 100)])
        w = rep.per_window[0]
        assert w.mean_ratio == 1.0 and w.min_ratio == 1.0 and w.max_ratio == 1.0
        assert rep.global_pass

    def test_window_precondition(self):
        with pytest.raises(DomainError):
            verify_subbase(range(16, 50), 2, lambda n: n - 1.0, [(10, 100)])

    def test_dyadic(self):
        assert dyadic_windows(10**5, 10**6) == [(131072, 262143), (262144, 524287), (524288, 1000000)]
        with pytest.raises(DomainError):
            dyadic_windows(10, 5)

    def test_modulus_filter(self):
        rep = verify_subbase(range(1, 101), 2, lambda n: n - 1.0, [(10, 100)], modulus=(24, 5))
        assert rep.per_window[0].count == len([n for n in range(10, 101) if n % 24 == 5])


@pytest.fixture(scope="module")
def flagship_reports():
    p = plan(x_max=10**6)
    W = dyadic_windows(10**5, 10**6)
    p = p.with_lambda(calibrate(p, W).lam)
    target = plan_target(p, 10**6)
    return [verify_subbase(sample_subbase(p.with_seed(s)).A, 5, target, W) for s in range(1, 21)], target


@pytest.mark.slow
def test_flagship_growth_matching(flagship_reports):
    reps, target = flagship_reports
    pts = []
    for i, w in enumerate(reps[0].per_window):
        mid = (w.lo + w.hi) / 2
        # mean ratio times the window-mean target recovers the window-mean count
        mean_r = np.mean([r.per_window[i].mean_ratio for r in reps]) * target[w.lo : w.hi + 1].mean()
        pts.append((mid, mean_r))
    assert abs(trend_report(pts).fitted_exponent - 0.5) <= 0.1


@pytest.mark.slow
def test_flagship_global_pass(flagship_reports):
    reps, _ = flagship_reports
    assert sum(r.global_pass for r in reps) >= 16
