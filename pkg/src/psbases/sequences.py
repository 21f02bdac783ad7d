"""Exact generation and counting for floor(m^c) sequences, their k-th powers and prime variants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import gmpy2
import numpy as np

from .core import SequenceSpec
from .errors import DomainError, ResourceError

SIEVE_CAP = 10**8
MAX_ELEMENTS = 5 * 10**7
MAX_INDICATOR = 2 * 10**8

# doubles within this distance of an integer are re-evaluated at high precision
NEAR_INTEGER = 1e-6
_INTERVAL_PREC = 128


def prime_sieve(x: int, cap: int = SIEVE_CAP) -> np.ndarray:
    """Boolean array ``s`` of length x+1 with s[i] true iff i is prime."""
    if x < 2:
        raise DomainError(f"sieve bound must be >= 2, got {x}")
    if x > cap:
        raise ResourceError(f"sieve bound {x} exceeds cap {cap}")
    s = np.ones(x + 1, dtype=bool)
    s[:2] = False
    s[4::2] = False
    for p in range(3, math.isqrt(x) + 1, 2):
        if s[p]:
            s[p * p :: 2 * p] = False
    return s


def _interval_floor(m: int, c: Fraction) -> int | None:
    """floor(m^c) from directed-rounding evaluation of exp(c log m); None if undecided."""
    q = (c.numerator, c.denominator)
    with gmpy2.context(precision=_INTERVAL_PREC, round=gmpy2.RoundDown):
        flo = int(gmpy2.floor(gmpy2.exp(gmpy2.div(*q) * gmpy2.log(m))))
    with gmpy2.context(precision=_INTERVAL_PREC, round=gmpy2.RoundUp):
        fhi = int(gmpy2.floor(gmpy2.exp(gmpy2.div(*q) * gmpy2.log(m))))
    return flo if flo == fhi else None


def floor_power(m: int, c: Fraction) -> int:
    """Exact floor(m^c) for a positive integer m and rational c >= 1."""
    if m < 1:
        raise DomainError("floor_power needs m >= 1")
    if c == 1 or m == 1:
        return m
    approx = float(m) ** float(c)
    frac = approx - math.floor(approx)
    tol = NEAR_INTEGER + 1e-15 * approx * (1.0 + math.log(m))
    if tol < frac < 1 - tol:
        return int(math.floor(approx))
    val = _interval_floor(m, c)
    if val is not None:
        return val
    # m^c is an integer or agrees with one to 128 bits: settle it with an integer root
    root, _ = gmpy2.iroot(gmpy2.mpz(m) ** c.numerator, c.denominator)
    return int(root)


def _floor_powers(ms: np.ndarray, c: Fraction) -> np.ndarray:
    """Vectorised exact floor(m^c) for an int array of m values."""
    if c == 1:
        return ms.astype(np.int64)
    mf = ms.astype(np.float64)
    approx = mf ** float(c)
    fl = np.floor(approx)
    frac = approx - fl
    tol = NEAR_INTEGER + 1e-15 * approx * (1.0 + np.log(mf))
    out = fl.astype(np.int64)
    suspect = np.flatnonzero((frac <= tol) | (frac >= 1 - tol))
    for i in suspect:
        out[i] = floor_power(int(ms[i]), c)
    return out


def _base_index_bound(c: Fraction, t: int) -> int:
    """Largest m with floor(m^c) <= t, i.e. m^c < t + 1."""
    if c == 1:
        return t
    m = int(math.floor((t + 1) ** (1 / float(c))))
    m = max(m, 1)
    while m > 1 and floor_power(m, c) > t:
        m -= 1
    while floor_power(m + 1, c) <= t:
        m += 1
    return m if floor_power(m, c) <= t else 0


def _is_prime(n: int) -> bool:
    return n >= 2 and bool(gmpy2.is_prime(n))


def _base_member(c: Fraction, t: int) -> bool:
    if c == 1:
        return True
    m0 = int(round(t ** (1 / float(c))))
    return any(m >= 1 and floor_power(m, c) == t for m in (m0 - 1, m0, m0 + 1))


def is_member(spec: SequenceSpec, n: int) -> bool:
    """Exact membership of n in the ground set described by ``spec``."""
    if n < 1:
        raise DomainError(f"membership is defined for n >= 1, got {n}")
    t = int(n)
    if spec.k > 1:
        root, exact = gmpy2.iroot(gmpy2.mpz(t), spec.k)
        if not exact:
            return False
        t = int(root)
    if spec.primes and not _is_prime(t):
        return False
    return _base_member(spec.c, t)


@dataclass(frozen=True)
class GroundSet:
    spec: SequenceSpec
    x_max: int
    elements: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return int(self.elements.size)

    @cached_property
    def indicator(self) -> np.ndarray:
        if self.x_max > MAX_INDICATOR:
            raise ResourceError(f"indicator of length {self.x_max + 1} exceeds budget")
        ind = np.zeros(self.x_max + 1, dtype=bool)
        ind[self.elements] = True
        ind.setflags(write=False)
        return ind

    def up_to(self, x: int) -> np.ndarray:
        return self.elements[: np.searchsorted(self.elements, x, side="right")]


def _base_elements(spec: SequenceSpec, t_max: int) -> np.ndarray:
    c = spec.c
    m_max = _base_index_bound(c, t_max)
    if m_max > MAX_ELEMENTS:
        raise ResourceError(f"{m_max} base elements exceed the memory budget")
    if m_max == 0:
        return np.zeros(0, dtype=np.int64)
    base = _floor_powers(np.arange(1, m_max + 1, dtype=np.int64), c)
    if spec.primes:
        if t_max >= 2:
            sieve = prime_sieve(max(t_max, 2))
            base = base[sieve[base]]
        else:
            base = base[:0]
    return base


def generate(spec: SequenceSpec, x_max: int) -> GroundSet:
    """All ground-set elements <= x_max, ascending."""
    if x_max < 1:
        raise DomainError(f"x_max must be >= 1, got {x_max}")
    t_max = int(gmpy2.iroot(gmpy2.mpz(x_max), spec.k)[0])
    base = _base_elements(spec, t_max)
    if spec.k > 1:
        elems = base.astype(np.int64) ** spec.k
    else:
        elems = base.astype(np.int64, copy=True)
    elems.setflags(write=False)
    return GroundSet(spec, int(x_max), elems)


def count(spec: SequenceSpec, x: int) -> int:
    """Exact number of ground-set elements in [1, x]."""
    if x < 1:
        raise DomainError(f"x must be >= 1, got {x}")
    t_max = int(gmpy2.iroot(gmpy2.mpz(x), spec.k)[0])
    if not spec.primes:
        return _base_index_bound(spec.c, t_max)
    return int(_base_elements(spec, t_max).size)
