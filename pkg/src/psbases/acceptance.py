"""Acceptance suite: exact identities and finite-scale trend proxies, one row per criterion.

Every criterion returns a :class:`CriterionResult` whose ``measured`` dict is
deterministic given the code; runtimes are reported separately and excluded
from the digest used by the determinism criterion.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import circle, repcount, singular, subbase
from .core import MainTermParams, RegVarFn, SequenceSpec, h0_integer, main_term, psw_threshold
from .repcount import TrendReport, hua_moment, rep_function, trend_report, weighted_indicator
from .sequences import count

RepFn = Callable[[np.ndarray, int, int], np.ndarray]


@dataclass
class CriterionResult:
    id: int
    name: str
    passed: bool
    measured: dict
    runtime: float = 0.0
    limit: Optional[float] = None
    soft: bool = False
    note: str = ""

    @property
    def within_time(self) -> bool:
        return self.limit is None or self.runtime <= self.limit

    def line(self) -> str:
        status = "PASS" if self.passed and self.within_time else "FAIL"
        t = f"{self.runtime:.1f}s" + (f"/{self.limit:.0f}s" if self.limit else "")
        vals = json.dumps(self.measured, sort_keys=True, default=_json_default)
        extra = f" ({self.note})" if self.note else ""
        return f"[{status}] {self.id:2d} {self.name} {t} {vals}{extra}"

    def digest(self) -> str:
        blob = json.dumps({"id": self.id, "passed": self.passed, "measured": self.measured},
                          sort_keys=True, default=_json_default)
        return hashlib.sha256(blob.encode()).hexdigest()


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, float):
        return repr(o)
    raise TypeError(type(o))


def _timed(fn, *a, **kw) -> CriterionResult:
    t0 = time.perf_counter()
    res = fn(*a, **kw)
    res.runtime = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------------------
# 1


def brute_force_rep(A: np.ndarray, h: int, N: int) -> np.ndarray:
    """Enumerate every ordered h-tuple of A (as an outer-sum array) and histogram the sums."""
    A = np.asarray(A, dtype=np.int64)
    sums = A
    for _ in range(h - 1):
        sums = np.add.outer(sums, A).ravel()
    sums = sums[sums <= N]
    return np.bincount(sums, minlength=N + 1)[: N + 1]


def _fast_rep(A: np.ndarray, h: int, N: int) -> np.ndarray:
    return rep_function(A, h, N).values


def noisy_rep(noise: float = 0.4, seed: int = 0) -> RepFn:
    """Fault-injected convolution: perturbed 0/1 indicator, float FFT, rounding without the guard."""
    rng = np.random.default_rng(seed)

    def rep(A, h, N):
        ind = repcount.indicator_of(A, N).astype(float)
        ind[ind > 0] += noise * rng.uniform(-1, 1, int((ind > 0).sum()))
        return np.rint(repcount.real_power(ind, h, N)).astype(np.int64)

    return rep


def criterion_exact_convolution(rep: RepFn = _fast_rep, cases: int = 50, seed: int = 1) -> CriterionResult:
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(cases):
        size = int(rng.integers(1, 201))
        A = np.sort(rng.choice(np.arange(1, 2001), size=size, replace=False))
        h = int(rng.integers(2, 4))
        N = h * 2000
        if not np.array_equal(np.asarray(rep(A, h, N)), brute_force_rep(A, h, N)):
            mismatches += 1
    return CriterionResult(1, "exact convolution oracle", mismatches == 0,
                           {"cases": cases, "mismatches": mismatches}, limit=5)


# ---------------------------------------------------------------------------
# 2


def criterion_quadrature(cases: int = 20, seed: int = 2) -> CriterionResult:
    rng = np.random.default_rng(seed)
    specs = [SequenceSpec(1), SequenceSpec(1.5), SequenceSpec(2.5), SequenceSpec(1, 2),
             SequenceSpec(1.2, 2), SequenceSpec(1, 1, True), SequenceSpec(1.5, 1, True)]
    worst = 0.0
    for _ in range(cases):
        spec = specs[int(rng.integers(len(specs)))]
        h = int(rng.integers(2, 4))
        omega = [0.0, spec.beta, 0.4][int(rng.integers(3))]
        N = int(rng.integers(max(h, 20), 201))
        series = weighted_indicator(spec, N, omega)
        q = circle.quadrature_rep_sum(series, h, N, M=h * N + 1)
        d = repcount.weighted_rep_sum(spec, h, omega, N)
        worst = max(worst, abs(q - d) / max(1.0, abs(d)))
    return CriterionResult(2, "quadrature identity", worst <= 1e-8,
                           {"cases": cases, "max_rel_err": worst}, limit=5)


# ---------------------------------------------------------------------------
# 3


def criterion_counting(max_exp: int = 7) -> CriterionResult:
    worst = 0.0
    rows = {}
    for c in (1.5, 2.5):
        spec = SequenceSpec(c)
        for e in range(3, max_exp + 1):
            x = 10**e
            dev = abs(count(spec, x) - x ** (1 / c))
            rows[f"c={c},x=1e{e}"] = round(dev, 6)
            worst = max(worst, dev)
    return CriterionResult(3, "counting law", worst <= 2, {"max_dev": worst, "devs": rows}, limit=30)


# ---------------------------------------------------------------------------
# 4


def criterion_main_term(N_hi: int = 10**5, samples: int = 20) -> CriterionResult:
    c, h, omega = 1.5, 5, 0.2
    spec = SequenceSpec(c)
    series = weighted_indicator(spec, N_hi, omega)
    vals, _ = repcount.weighted_rep_values(series, h, N_hi)
    mp = MainTermParams(c, h, omega)

    def mean_ratio(lo, hi):
        ns = np.unique(np.linspace(lo, hi, samples).round().astype(int))
        return float(np.mean([vals[n] / main_term(mp, n) for n in ns]))

    hi = mean_ratio(int(0.9 * N_hi), N_hi)
    lo = mean_ratio(900, 1000)
    ok = 0.85 <= hi <= 1.15 and abs(hi - 1) < abs(lo - 1)
    return CriterionResult(4, "main term ratio", ok, {"mean_R_high": hi, "mean_R_low": lo}, limit=180)


# ---------------------------------------------------------------------------
# 5

HUA_GRID = (10**4, 3 * 10**4, 10**5, 3 * 10**5, 10**6)


def criterion_hua(grid=HUA_GRID) -> CriterionResult:
    spec = SequenceSpec(1.5)
    pts = [(x, hua_moment(spec, 2, x)) for x in grid]
    tr: TrendReport = trend_report(pts)
    lo, hi = 2 * 2 / 1.5 - 1 - 0.1, 2 * 2 / 1.5 - 1 + 0.1
    return CriterionResult(5, "Hua moment trend", lo <= tr.fitted_exponent <= hi,
                           {"fitted_exponent": tr.fitted_exponent, "moments": [int(v) for _, v in pts]},
                           limit=120)


# ---------------------------------------------------------------------------
# 6


def multiplicativity_defect(q_max: int = 50, ns=(17, 100, 1009)) -> float:
    worst = 0.0
    for k in (2, 3):
        h = 2 * h0_integer(k) + 1
        for restricted in (False, True):
            for q1 in range(1, q_max + 1):
                for q2 in range(q1, q_max + 1):
                    if math.gcd(q1, q2) != 1:
                        continue
                    for n in ns:
                        a = singular.local_term(k, h, q1 * q2, n, restricted)
                        b = singular.local_term(k, h, q1, n, restricted) * singular.local_term(k, h, q2, n, restricted)
                        worst = max(worst, abs(a - b))
    return worst


def criterion_singular(q_max: int = 50, samples: int = 100, seed: int = 6) -> CriterionResult:
    mult = multiplicativity_defect(q_max)
    rng = np.random.default_rng(seed)
    ns = 24 * rng.integers(math.ceil((10**3 - 5) / 24), (10**6 - 5) // 24 + 1, samples) + 5
    s500 = singular.singular_series_many(singular.SingularSeriesParams(2, 5, 500, True), ns)
    s250 = singular.singular_series_many(singular.SingularSeriesParams(2, 5, 250, True), ns)
    trunc = float(np.max(np.abs(s500 - s250)))
    pq = singular.SingularSeriesParams(1, 2, 2, True)
    probe = np.arange(1, 201)
    parity = float(np.max(np.abs(singular.singular_series_many(pq, probe) - (1 + (-1.0) ** probe))))
    checks = {
        "multiplicativity": mult <= 1e-9,
        "positivity": float(s500.min()) >= 0.05,
        "truncation": trunc <= 0.05,
        "parity_Q2": parity <= 1e-12,
    }
    return CriterionResult(6, "singular series", all(checks.values()), {
        "max_mult_defect": mult, "min_S": float(s500.min()), "max_trunc_diff": trunc,
        "median_trunc_diff": float(np.median(np.abs(s500 - s250))), "parity_err": parity,
        "checks": checks,
    }, limit=60)


# ---------------------------------------------------------------------------
# 7


def criterion_kernel() -> CriterionResult:
    worst = 0.0
    rows = {}
    for h in (2, 5):
        for y in (0, 1, h, 2 * h):
            err = abs(circle.dh_kernel_transform(y, h) - circle.dh_kernel_hat(y, h))
            rows[f"h={h},y={y}"] = err
            worst = max(worst, err)
    return CriterionResult(7, "kernel Fourier pair", worst <= 0.05, {"max_err": worst, "errs": rows}, limit=10)


# ---------------------------------------------------------------------------
# 8


def criterion_arcs(Ns=(10**3, 10**4, 10**5)) -> CriterionResult:
    spec = SequenceSpec(1.5)
    omega, nu = 0.2, 0.1
    major = [circle.major_arc_error(spec, omega, N, nu).ratio for N in (Ns[0], Ns[-1])]
    minor = [circle.minor_arc_sup(spec, omega, N, nu).normalized for N in Ns]
    major_ok = major[1] <= 10 * major[0]
    minor_ok = all(b < a for a, b in zip(minor, minor[1:]))
    return CriterionResult(8, "major/minor arc proxies", major_ok and minor_ok, {
        "major_ratio": major, "minor_normalized": minor, "major_ok": major_ok, "minor_ok": minor_ok,
    }, limit=180)


# ---------------------------------------------------------------------------
# 9


def criterion_transfer(xs=(10**3, 10**4, 10**5)) -> CriterionResult:
    k, c = 2, 1.2
    reps = [circle.transfer_residual(k, c, x) for x in xs]
    tr = trend_report([(r.x, r.sup_residual) for r in reps])
    P = psw_threshold(k, c)
    ceiling = 1 / (c * k) - 0.5 * P + 0.05
    zero_err = max(abs(r.residual_at_zero - r.direct_at_zero) / max(1.0, r.direct_at_zero) for r in reps)
    slope_ok = tr.fitted_exponent <= ceiling
    zero_ok = zero_err <= 1e-9
    return CriterionResult(9, "transfer residual", zero_ok, {
        "fitted_exponent": tr.fitted_exponent, "ceiling": ceiling, "P": P,
        "sup_residuals": [r.sup_residual for r in reps], "alpha0_err": zero_err,
        "slope_ok": slope_ok, "alpha0_ok": zero_ok,
    }, limit=120, soft=True, note="" if slope_ok else "slope reported only")


# ---------------------------------------------------------------------------
# 10


def flagship_plan(x_max: int = 10**6) -> subbase.SamplePlan:
    return subbase.SamplePlan(SequenceSpec(1.5), RegVarFn(1.0, 0.5), 5, 1.0, x_max, 0)


def flagship_windows(x_max: int = 10**6) -> list[tuple[int, int]]:
    return subbase.dyadic_windows(10**5, x_max)


def criterion_flagship(seeds=range(1, 21), x_max: int = 10**6, threads: int = 1) -> CriterionResult:
    plan = flagship_plan(x_max)
    windows = flagship_windows(x_max)
    cal = subbase.calibrate(plan, windows)
    plan = plan.with_lambda(cal.lam)
    target = subbase.plan_target(plan, x_max)
    passes, lasts, sizes = 0, [], []
    for s in seeds:
        res = subbase.sample_subbase(plan.with_seed(s), threads)
        rep = subbase.verify_subbase(res.A, plan.h, target, windows)
        passes += rep.global_pass
        lasts.append(rep.per_window[-1].mean_ratio)
        sizes.append(res.size)
    n = len(lasts)
    pooled = float(np.mean(lasts))
    need = math.ceil(0.8 * n)
    ok = passes >= need and 0.75 <= pooled <= 1.33
    return CriterionResult(10, "flagship subbasis run", ok, {
        "lambda": cal.lam, "calibrated_median": cal.median_ratio, "global_pass": passes,
        "seeds": n, "needed": need, "pooled_last_window": pooled, "sizes": sizes,
    }, limit=900)


# ---------------------------------------------------------------------------

FULL = {
    1: criterion_exact_convolution,
    2: criterion_quadrature,
    3: criterion_counting,
    4: criterion_main_term,
    5: criterion_hua,
    6: criterion_singular,
    7: criterion_kernel,
    8: criterion_arcs,
    9: criterion_transfer,
    10: criterion_flagship,
}

# reduced sizes that keep the quick profile inside two minutes
QUICK = {
    1: lambda: criterion_exact_convolution(cases=20),
    2: criterion_quadrature,
    3: lambda: criterion_counting(max_exp=6),
    4: lambda: criterion_main_term(N_hi=2 * 10**4),
    5: lambda: criterion_hua(grid=(10**4, 3 * 10**4, 10**5)),
    6: lambda: criterion_singular(q_max=20, samples=20),
    7: criterion_kernel,
    8: lambda: criterion_arcs(Ns=(10**3, 3 * 10**3, 10**4)),
    9: lambda: criterion_transfer(xs=(10**3, 3 * 10**3, 10**4)),
    10: lambda: criterion_flagship(seeds=range(1, 6), x_max=2 * 10**5),
}


@dataclass
class SuiteReport:
    profile: str
    results: list = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(r.passed and r.within_time for r in self.results)

    def lines(self) -> list[str]:
        return [r.line() for r in self.results]

    def to_dict(self) -> dict:
        return {"profile": self.profile, "criteria": [
            {"id": r.id, "name": r.name, "passed": r.passed, "within_time": r.within_time,
             "runtime": r.runtime, "limit": r.limit, "soft": r.soft, "measured": r.measured}
            for r in self.results]}


def determinism(results: list[CriterionResult], table: dict, ids=None) -> CriterionResult:
    """Rerun each criterion and compare digests of the measured values."""
    ids = [r.id for r in results] if ids is None else ids
    first = {r.id: r.digest() for r in results}
    differing = [i for i in ids if table[i]().digest() != first[i]]
    return CriterionResult(11, "determinism", not differing,
                           {"rerun": list(ids), "differing": differing})


def run_suite(profile: str = "quick", only=None, progress: Optional[Callable[[str], None]] = None) -> SuiteReport:
    if profile not in ("quick", "full"):
        raise ValueError("profile must be quick or full")
    table = QUICK if profile == "quick" else FULL
    ids = sorted(table) if only is None else sorted(only)
    report = SuiteReport(profile)
    for i in ids:
        res = _timed(table[i])
        report.results.append(res)
        if progress:
            progress(res.line())
    # quick profile reruns only the cheap exact criteria
    rerun = ids if profile == "full" else [i for i in ids if i in (1, 2, 3, 6, 7, 9)]
    det = _timed(determinism, report.results, table, rerun)
    report.results.append(det)
    if progress:
        progress(det.line())
    return report
