"""Randomised thin subbases: inclusion design, keyed sampling, calibration, verification.

Each x in the ground set joins A independently with probability

    p(x) = min(1, lam * x^(omega - beta) * psi(x)^(1/h))      (times log x for prime bases)

where F(x) = x^(h omega - 1) psi(x) is the target and beta = 1/(ck).  The
product of these weights over h-tuples reproduces lam^h times the weighted
solution count, so E r_{A,h}(n) tracks a constant multiple of S(n) F(n).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .core import RegVarFn, SequenceSpec, log_grid, min_order, regvar_admissible
from .errors import ConsistencyError, DomainError
from .repcount import real_convolve, real_power, rep_function
from .sequences import generate
from .singular import SingularSeriesParams, cap_K, singular_series_dense

MIN_ELEMENT = 16
MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finaliser on a uint64 array."""
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


class CounterRNG:
    """Stateless generator: the draw for key x depends only on (seed, x)."""

    def __init__(self, seed: int):
        if not 0 <= int(seed) <= MASK64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        self.seed = int(seed)
        self._state = _mix64(np.array([self.seed], dtype=np.uint64))[0]

    def bits(self, keys) -> np.ndarray:
        k = np.asarray(keys, dtype=np.uint64)
        return _mix64(_mix64(k) ^ self._state)

    def uniform(self, keys) -> np.ndarray:
        """Doubles in [0, 1) with 53 random bits each."""
        return (self.bits(keys) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def split(self, tag: int) -> "CounterRNG":
        child = int(_mix64(np.array([tag & MASK64], dtype=np.uint64))[0] ^ self._state)
        return CounterRNG(child)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplePlan:
    spec: SequenceSpec
    F: RegVarFn
    h: int
    lam: float
    x_max: int
    seed: int = 0

    def __post_init__(self):
        if self.h < 2:
            raise DomainError("h must be >= 2")
        if not self.lam >= 0:
            raise DomainError("lambda must be non-negative")
        if self.x_max < MIN_ELEMENT:
            raise DomainError(f"x_max must be >= {MIN_ELEMENT}")
        if not 0 <= int(self.seed) <= MASK64:
            raise DomainError("seed must be an unsigned 64-bit integer")

    @property
    def omega(self) -> float:
        return (self.F.kappa + 1.0) / self.h

    @property
    def beta(self) -> float:
        return self.spec.beta

    def with_lambda(self, lam: float) -> "SamplePlan":
        return SamplePlan(self.spec, self.F, self.h, float(lam), self.x_max, self.seed)

    def with_seed(self, seed: int) -> "SamplePlan":
        return SamplePlan(self.spec, self.F, self.h, self.lam, self.x_max, int(seed))

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.describe(),
            "F": {"C": self.F.C, "kappa": self.F.kappa, "a": self.F.a, "b": self.F.b},
            "h": self.h, "lambda": self.lam, "xmax": self.x_max, "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SamplePlan":
        s = d["spec"]
        return cls(
            SequenceSpec(s["c"], s["k"], s["primes"]), RegVarFn(**d["F"]),
            int(d["h"]), float(d["lambda"]), int(d["xmax"]), int(d["seed"]),
        )


def validate_plan(plan: SamplePlan) -> None:
    """Order threshold and the growth ceiling on a grid, checked at desk scale."""
    need = min_order(plan.spec)
    if plan.h < need:
        raise DomainError(f"h={plan.h} is below the order threshold {need} for this ground set")
    rep = regvar_admissible(plan.F, plan.spec, plan.h, log_grid(MIN_ELEMENT, plan.x_max))
    if not rep.under_ceiling:
        raise DomainError(f"target exceeds the representation ceiling (margin {rep.ceiling_margin:.3g})")


def _weights(plan: SamplePlan, x: np.ndarray) -> np.ndarray:
    xf = np.asarray(x, dtype=float)
    w = xf ** (plan.omega - plan.beta) * plan.F.psi(xf) ** (1.0 / plan.h)
    if plan.spec.primes:
        w = w * np.log(xf)
    return w


def inclusion_vector(plan: SamplePlan, x) -> np.ndarray:
    x = np.asarray(x)
    if x.size and x.min() < MIN_ELEMENT:
        raise DomainError(f"inclusion probabilities are defined for x >= {MIN_ELEMENT}")
    return np.minimum(1.0, plan.lam * _weights(plan, x))


def inclusion_probability(plan: SamplePlan, x: int) -> float:
    return float(inclusion_vector(plan, np.array([x]))[0])


def candidates(plan: SamplePlan) -> np.ndarray:
    el = generate(plan.spec, plan.x_max).elements
    return el[el >= MIN_ELEMENT]


def probability_vector(plan: SamplePlan, n_max: Optional[int] = None) -> np.ndarray:
    """p(x) laid out on 0..n_max (zero off the ground set)."""
    n_max = plan.x_max if n_max is None else n_max
    el = candidates(plan)
    el = el[el <= n_max]
    out = np.zeros(n_max + 1)
    out[el] = inclusion_vector(plan, el)
    return out


@dataclass(frozen=True)
class SampleResult:
    A: np.ndarray = field(repr=False)
    seed: int
    size: int
    expected_size: float
    variance: float
    p_min: float
    p_max: float

    def to_dict(self) -> dict:
        return {
            "seed": self.seed, "size": self.size, "expected_size": self.expected_size,
            "variance": self.variance, "p_min": self.p_min, "p_max": self.p_max,
            "A": [int(v) for v in self.A],
        }


def sample_subbase(plan: SamplePlan, threads: int = 1, validate: bool = True) -> SampleResult:
    """Independent keyed coin flips over the ground set in [16, x_max]."""
    if validate:
        validate_plan(plan)
    el = candidates(plan)
    p = inclusion_vector(plan, el)
    rng = CounterRNG(plan.seed)
    threads = max(1, int(threads))
    if threads == 1 or el.size < 2 * threads:
        keep = rng.uniform(el) < p
    else:
        chunks = np.array_split(np.arange(el.size), threads)
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda idx: rng.uniform(el[idx]) < p[idx], chunks))
        keep = np.concatenate(parts)
    A = el[keep]
    A.setflags(write=False)
    return SampleResult(
        A=A, seed=plan.seed, size=int(A.size), expected_size=float(p.sum()),
        variance=float((p * (1 - p)).sum()),
        p_min=float(p.min()) if p.size else 0.0, p_max=float(p.max()) if p.size else 0.0,
    )


# ---------------------------------------------------------------------------
# expectation engine


def bernoulli_cumulant_polys(h: int) -> list[np.polynomial.Polynomial]:
    """kappa_j(p) of a Bernoulli(p) variable for j = 1..h, via kappa_{j+1} = p(1-p) kappa_j'."""
    P = np.polynomial.Polynomial
    out = [P([0.0, 1.0])]
    pq = P([0.0, 1.0, -1.0])
    for _ in range(h - 1):
        out.append(pq * out[-1].deriv())
    return out


def expected_rep_naive(p: np.ndarray, h: int, N: int) -> np.ndarray:
    """sum over ordered tuples with x_1+...+x_h = n of prod p(x_i)."""
    return real_power(np.asarray(p, dtype=float), h, N)


def expected_rep(p: np.ndarray, h: int, N: int) -> np.ndarray:
    """Exact E r_{A,h}(n), n = 0..N, for independent inclusions with probabilities p.

    Repeated entries of a tuple are one event, so the naive product overcounts
    them; the moment E[S(z)^h] of S(z) = sum_x xi_x z^x is the complete Bell
    polynomial in the cumulant series k_j(z) = sum_x kappa_j(p_x) z^(jx).
    """
    p = np.asarray(p, dtype=float)[: N + 1]
    support = np.flatnonzero(p)
    polys = bernoulli_cumulant_polys(h)
    kappas = []
    for j, poly in enumerate(polys, start=1):
        kv = np.zeros(N + 1)
        idx = support[j * support <= N]
        kv[j * idx] = poly(p[idx])
        kappas.append(kv)
    moments = [None]  # m_0 = 1
    for n in range(h):
        acc = np.zeros(N + 1)
        for i in range(n + 1):
            coef = comb(n, i)
            term = kappas[i] if n - i == 0 else real_convolve(kappas[i], moments[n - i], N)
            acc += coef * term
        moments.append(acc)
    return moments[h]


# ---------------------------------------------------------------------------
# targets and windows


def dyadic_windows(lo: int, hi: int) -> list[tuple[int, int]]:
    """[2^j, 2^(j+1) - 1] for 2^j >= lo, clipped at hi."""
    if hi < lo:
        raise DomainError("empty window range")
    j = max(0, math.ceil(math.log2(lo)))
    while 2**j < lo:
        j += 1
    out = []
    while 2**j <= hi:
        out.append((2**j, min(2 ** (j + 1) - 1, hi)))
        j += 1
    return out


def plan_target(plan: SamplePlan, n_max: int, Q: int = 500) -> np.ndarray:
    """S(n) F(n) on 0..n_max (zero below 16); S = 1 for floor(n^c) itself."""
    out = np.zeros(n_max + 1)
    n = np.arange(MIN_ELEMENT, n_max + 1)
    out[MIN_ELEMENT:] = plan.F(n)
    spec = plan.spec
    if spec.k > 1 or spec.primes:
        params = SingularSeriesParams(spec.k, plan.h, Q, spec.primes)
        out *= singular_series_dense(params, n_max)
    return out


def admissible_mask(plan: SamplePlan, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    if plan.spec.primes:
        return (n - plan.h) % cap_K(plan.spec.k) == 0
    return np.ones(n_max + 1, dtype=bool)


def window_mask(windows: Sequence[tuple[int, int]], n_max: int) -> np.ndarray:
    m = np.zeros(n_max + 1, dtype=bool)
    for lo, hi in windows:
        m[lo : hi + 1] = True
    return m


def solve_lambda(ratio: Callable[[float], float], h: int, lam0: float = 1.0, trials: int = 3,
                 tol: float = 0.05, lam_max: float = 1e12) -> float:
    """Find lam with ratio(lam) = 1 for a ratio increasing roughly like lam^h.

    Starts from fixed-point steps lam <- lam * ratio^(-1/h) and falls back to
    bisection on log(lam) when those do not land within ``tol``.
    """
    if trials < 3:
        raise DomainError("calibration needs trials >= 3")
    lam = float(lam0)
    r = ratio(lam)
    for _ in range(trials):
        if r <= 0:
            break
        if abs(r - 1) <= 1e-4:
            return lam
        lam *= r ** (-1.0 / h)
        r = ratio(lam)
    if r > 0 and abs(r - 1) <= tol:
        return lam
    lo, hi = lam, lam
    while ratio(lo) > 1:
        lo /= 2
    while ratio(hi) < 1:
        hi *= 2
        if hi > lam_max:
            raise DomainError("no lambda reaches the target; the target is above what the ground set supports")
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        if ratio(mid) < 1:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1 + 1e-9:
            break
    return math.sqrt(lo * hi)


@dataclass(frozen=True)
class Calibration:
    lam: float
    median_ratio: float
    window_means: tuple


def calibrate(plan: SamplePlan, windows: Sequence[tuple[int, int]], trials: int = 3,
              exact: bool = True, Q: int = 500) -> Calibration:
    """Choose lambda so the median of E r / (S F) over the windows is 1 (no sampling)."""
    validate_plan(plan)
    N = max(hi for _, hi in windows)
    if N > plan.x_max:
        raise DomainError("verification windows must lie inside [16, x_max]")
    target = plan_target(plan, N, Q)
    mask = window_mask(windows, N) & admissible_mask(plan, N) & (target > 0)
    if not mask.any():
        raise DomainError("no admissible n in the verification windows")
    engine = expected_rep if exact else expected_rep_naive

    def ratios(lam: float) -> np.ndarray:
        p = probability_vector(plan.with_lambda(lam), N)
        return engine(p, plan.h, N)

    def median_ratio(lam: float) -> float:
        E = ratios(lam)
        return float(np.median(E[mask] / target[mask]))

    # start from the naive lam^h law at lam = 1 when it applies without clamping
    base = median_ratio(1.0)
    lam0 = base ** (-1.0 / plan.h) if base > 0 else 1.0
    lam = solve_lambda(median_ratio, plan.h, lam0=lam0, trials=trials)
    E = ratios(lam)
    med = float(np.median(E[mask] / target[mask]))
    if abs(med - 1) > 0.05:
        raise ConsistencyError(f"calibration ended at median ratio {med:.4f}")
    adm = admissible_mask(plan, N)
    means = tuple(
        float(np.mean(E[lo : hi + 1][adm[lo : hi + 1]] / target[lo : hi + 1][adm[lo : hi + 1]]))
        for lo, hi in windows
    )
    return Calibration(lam, med, means)


def calibrate_lambda(plan: SamplePlan, windows: Sequence[tuple[int, int]], trials: int = 3,
                     exact: bool = True) -> float:
    return calibrate(plan, windows, trials, exact).lam


# ---------------------------------------------------------------------------
# verification

PASS_BAND = (0.5, 2.0)
ASYMPTOTIC_BAND = (0.75, 1.33)


@dataclass(frozen=True)
class WindowStats:
    lo: int
    hi: int
    count: int
    mean_ratio: float
    min_ratio: float
    max_ratio: float

    def to_dict(self) -> dict:
        return {"range": [self.lo, self.hi], "count": self.count, "meanRatio": self.mean_ratio,
                "minRatio": self.min_ratio, "maxRatio": self.max_ratio}


@dataclass(frozen=True)
class VerifyReport:
    per_window: tuple
    global_pass: bool
    last_window_ok: bool

    def to_dict(self) -> dict:
        return {"perWindow": [w.to_dict() for w in self.per_window],
                "globalPass": self.global_pass, "lastWindowOk": self.last_window_ok}


Target = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


def verify_subbase(A: Sequence[int], h: int, target: Target, windows: Sequence[tuple[int, int]],
                   modulus: Optional[tuple[int, int]] = None) -> VerifyReport:
    """Window statistics of r_{A,h}(n) / target(n).

    ``modulus=(K, residue)`` restricts to n = residue mod K.
    """
    A = np.asarray(A, dtype=np.int64)
    if not windows:
        raise DomainError("no verification windows")
    N = max(hi for _, hi in windows)
    if A.size:
        lo_ok, hi_ok = h * int(A.min()), h * int(A.max())
        for lo, hi in windows:
            if lo < lo_ok or hi > hi_ok:
                raise DomainError(f"window [{lo}, {hi}] lies outside [{lo_ok}, {hi_ok}]")
        r = rep_function(A, h, N).values.astype(float)
    else:
        r = np.zeros(N + 1)
    if callable(target):
        t = np.zeros(N + 1)
        idx = np.arange(min(lo for lo, _ in windows), N + 1)
        t[idx] = target(idx)
    else:
        t = np.asarray(target, dtype=float)
    stats = []
    for lo, hi in windows:
        n = np.arange(lo, hi + 1)
        if modulus is not None:
            n = n[(n - modulus[1]) % modulus[0] == 0]
        if n.size == 0:
            raise DomainError(f"window [{lo}, {hi}] contains no admissible n")
        ratio = r[n] / t[n]
        stats.append(WindowStats(lo, hi, int(n.size), float(ratio.mean()), float(ratio.min()), float(ratio.max())))
    ok = all(PASS_BAND[0] <= s.mean_ratio <= PASS_BAND[1] for s in stats)
    last = ASYMPTOTIC_BAND[0] <= stats[-1].mean_ratio <= ASYMPTOTIC_BAND[1]
    return VerifyReport(tuple(stats), ok, last)


def verify_plan(plan: SamplePlan, result: SampleResult, windows: Sequence[tuple[int, int]],
                Q: int = 500) -> VerifyReport:
    N = max(hi for _, hi in windows)
    target = plan_target(plan, N, Q)
    modulus = (cap_K(plan.spec.k), plan.h % cap_K(plan.spec.k)) if plan.spec.primes else None
    return verify_subbase(result.A, plan.h, target, windows, modulus)
