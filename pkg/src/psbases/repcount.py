"""Representation functions, weighted solution sums and Hua-type moments.

Integer convolutions run through a floating FFT whose output is rounded and
checked; a deviation above ``ROUNDING_GUARD`` from the nearest integer raises
``PrecisionError``.  When the product of the operands' L1 masses reaches 2**52
the engine switches to an exact Kronecker-substitution product on big integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import gmpy2
import numpy as np
from scipy import fft as sfft

from .core import SequenceSpec
from .errors import DomainError, PrecisionError, ResourceError
from .sequences import MAX_INDICATOR, generate

ROUNDING_GUARD = 0.3
FFT_MASS_LIMIT = 2**52
EXACT_LIMIT = 2**53
MACHINE_EPS = np.finfo(float).eps

_workers = 1


def set_workers(n: int) -> None:
    """Thread count handed to scipy.fft for every convolution."""
    global _workers
    _workers = max(1, int(n))


def _fft_product(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    L = sfft.next_fast_len(a.size + b.size - 1, real=True)
    fa = sfft.rfft(a, L, workers=_workers)
    fb = fa if b is a else sfft.rfft(b, L, workers=_workers)
    return sfft.irfft(fa * fb, L, workers=_workers)[: n + 1]


def _pad(v: np.ndarray, n: int) -> np.ndarray:
    if v.size >= n + 1:
        return v[: n + 1]
    out = np.zeros(n + 1, dtype=v.dtype)
    out[: v.size] = v
    return out


def _kronecker_product(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """Exact product of non-negative int64 coefficient vectors by packing into big integers."""
    if a.size == 0 or b.size == 0:
        return np.zeros(n + 1, dtype=np.int64)
    bound = int(a.max()) * int(b.max()) * min(a.size, b.size)
    width = max(1, (bound.bit_length() + 8) // 8)

    def pack(v: np.ndarray) -> gmpy2.mpz:
        buf = np.zeros((v.size, max(width, 8)), dtype=np.uint8)
        buf[:, :8] = v.astype("<u8").view(np.uint8).reshape(-1, 8)
        return gmpy2.mpz(int.from_bytes(buf[:, :width].tobytes(), "little"))

    prod = pack(a) * pack(b)
    slots = a.size + b.size - 1
    raw = int(prod).to_bytes(slots * width, "little")
    cells = np.frombuffer(raw, dtype=np.uint8).reshape(slots, width)[: n + 1]
    if width > 8 and cells[:, 8:].any():
        raise ResourceError("representation count exceeds 64-bit range")
    lanes = np.zeros((cells.shape[0], 8), dtype=np.uint8)
    lanes[:, : min(width, 8)] = cells[:, :8]
    out = lanes.view("<u8").reshape(-1)
    if out.size and int(out.max()) > EXACT_LIMIT:
        raise ResourceError("representation count exceeds 2**53")
    return _pad(out.astype(np.int64), n)


def int_convolve(a: np.ndarray, b: np.ndarray, n: int, *, guard: bool = True) -> np.ndarray:
    """Exact truncated product of non-negative integer sequences, entries 0..n."""
    same = a is b
    a = np.asarray(a, dtype=np.int64)[: n + 1]
    b = a if same else np.asarray(b, dtype=np.int64)[: n + 1]
    if (a.size and a.min() < 0) or (b.size and b.min() < 0):
        raise DomainError("exact convolution expects non-negative counts")
    if a.size == 0 or b.size == 0:
        return np.zeros(n + 1, dtype=np.int64)
    mass = int(a.sum()) * int(b.sum())
    if mass >= FFT_MASS_LIMIT:
        return _kronecker_product(a, b, n)
    fa = a.astype(float)
    raw = _fft_product(fa, fa if b is a else b.astype(float), n)
    rounded = np.rint(raw)
    if guard and raw.size:
        dev = float(np.max(np.abs(raw - rounded)))
        if dev > ROUNDING_GUARD:
            raise PrecisionError(f"FFT output deviates {dev:.3f} from an integer")
    return _pad(rounded.astype(np.int64), n)


def real_convolve(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)[: n + 1]
    b = np.asarray(b, dtype=float)[: n + 1]
    if a.size == 0 or b.size == 0:
        return np.zeros(n + 1)
    return _pad(_fft_product(a, b, n), n)


def _power(base: np.ndarray, h: int, n: int, mul) -> np.ndarray:
    if h < 1:
        raise DomainError("power exponent must be >= 1")
    result: Optional[np.ndarray] = None
    cur = base[: n + 1]
    while True:
        if h & 1:
            result = cur if result is None else mul(result, cur, n)
        h >>= 1
        if not h:
            break
        cur = mul(cur, cur, n)
    return _pad(result, n)


def int_power(a: np.ndarray, h: int, n: int, *, guard: bool = True) -> np.ndarray:
    """h-fold self-convolution by repeated squaring, truncated to 0..n."""
    return _power(np.asarray(a, dtype=np.int64), h, n, lambda x, y, m: int_convolve(x, y, m, guard=guard))


def real_power(a: np.ndarray, h: int, n: int) -> np.ndarray:
    return _power(np.asarray(a, dtype=float), h, n, real_convolve)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightedSeries:
    """Coefficients coeff[n], n = 0..length, of a weighted indicator sum."""

    length: int
    coeffs: np.ndarray
    spec: Optional[SequenceSpec]
    omega: float
    beta: float
    log_weighted: bool = False

    @property
    def l1(self) -> float:
        return float(np.abs(self.coeffs).sum())


def weighted_indicator(spec: SequenceSpec, x: int, omega: float, log_weighted: bool = False) -> WeightedSeries:
    """coeff[n] = n^(omega - beta) (times log n) on members n <= x, beta = 1/(ck)."""
    if x < 1:
        raise DomainError("x must be >= 1")
    if x > MAX_INDICATOR:
        raise ResourceError(f"series length {x} exceeds budget")
    elems = generate(spec, x).elements
    beta = spec.beta
    coeffs = np.zeros(x + 1)
    w = elems.astype(float) ** (omega - beta)
    if log_weighted:
        w = w * np.log(elems.astype(float))
    coeffs[elems] = w
    coeffs.setflags(write=False)
    return WeightedSeries(x, coeffs, spec, float(omega), beta, bool(log_weighted))


def series_from_coeffs(coeffs: Sequence[float], omega: float = 0.0, beta: float = 0.0) -> WeightedSeries:
    """Wrap an explicit coefficient vector (index 0 must be zero)."""
    arr = np.array(coeffs, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise DomainError("need at least coefficients for n = 0, 1")
    if arr[0] != 0:
        raise DomainError("coeff[0] must be zero")
    arr.setflags(write=False)
    return WeightedSeries(arr.size - 1, arr, None, omega, beta, False)


@dataclass(frozen=True)
class RepVector:
    h: int
    values: np.ndarray
    exact: bool

    def __getitem__(self, n: int):
        return self.values[n]

    @property
    def N(self) -> int:
        return self.values.size - 1


def indicator_of(A: Iterable[int], n: int) -> np.ndarray:
    arr = np.unique(np.asarray(list(A) if not isinstance(A, np.ndarray) else A, dtype=np.int64))
    if arr.size and arr[0] < 1:
        raise DomainError("sets must consist of positive integers")
    arr = arr[arr <= n]
    ind = np.zeros(n + 1, dtype=np.int64)
    ind[arr] = 1
    return ind


def rep_function(A: Iterable[int], h: int, N: int, *, guard: bool = True) -> RepVector:
    """r_{A,h}(n) for n = 0..N: ordered h-tuples from A summing to n."""
    if h < 1:
        raise DomainError("h must be >= 1")
    if N < 0:
        raise DomainError("N must be >= 0")
    ind = indicator_of(A, N)
    vals = int_power(ind, h, N, guard=guard)
    vals.setflags(write=False)
    return RepVector(h, vals, True)


def weighted_rep_values(series: WeightedSeries, h: int, N: int) -> tuple[np.ndarray, float]:
    """h-fold convolution of a weighted series on 0..N with a first-order FFT error bound."""
    vals = real_power(series.coeffs, h, N)
    x = max(series.length, 2)
    err = x * math.log(x) * MACHINE_EPS * series.l1**h
    return vals, err


def weighted_rep_sum(spec: SequenceSpec, h: int, omega: float, N: int, log_weighted: bool = False) -> float:
    """Sum over ordered h-tuples of members with x_1+...+x_h = N of the product of weights."""
    if N < h:
        raise DomainError(f"N must be >= h, got N={N}, h={h}")
    series = weighted_indicator(spec, N, omega, log_weighted)
    vals, _ = weighted_rep_values(series, h, N)
    return float(vals[N])


def _sum_squares(r: np.ndarray) -> int:
    if r.size == 0:
        return 0
    top = int(r.max())
    if top * top * r.size < 2**62:
        return int(np.dot(r, r))
    return sum(int(v) * int(v) for v in r)


def hua_moment(spec: SequenceSpec, h: int, x: int) -> int:
    """Sum over n <= x of r_{B,h}(n)^2 where B is the ground set of spec up to x."""
    if h < 1 or x < 1:
        raise DomainError("need h >= 1 and x >= 1")
    elems = generate(spec, x).elements
    if elems.size == 0:
        return 0
    r = rep_function(elems, h, x).values
    return _sum_squares(r[1:])


@dataclass(frozen=True)
class TrendReport:
    fitted_exponent: float
    last_ratio: float
    points: int


def trend_report(points: Sequence[tuple[float, float]], window: Optional[tuple[float, float]] = None) -> TrendReport:
    """Least-squares slope of log(value) against log(N), restricted to N in ``window``."""
    pts = sorted((float(n), float(v)) for n, v in points)
    if window is not None:
        lo, hi = window
        pts = [(n, v) for n, v in pts if lo <= n <= hi]
    if len(pts) < 3:
        raise DomainError("trend fits need at least 3 points")
    ns = np.array([p[0] for p in pts])
    vs = np.array([p[1] for p in pts])
    if np.any(vs <= 0) or np.any(ns <= 0):
        raise DomainError("trend fits need positive N and values")
    slope = np.polyfit(np.log(ns), np.log(vs), 1)[0]
    return TrendReport(float(slope), float(vs[-1]), len(pts))
