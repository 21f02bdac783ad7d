"""Complete exponential sums and truncated singular series for sums of k-th powers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .core import cap_K
from .errors import ConsistencyError, DomainError

DEFAULT_Q = 500
IMAG_ASSERT = 1e-6


def euler_phi(q: int) -> int:
    if q < 1:
        raise DomainError("phi is defined for q >= 1")
    out, m, p = q, q, 2
    while p * p <= m:
        if m % p == 0:
            while m % p == 0:
                m //= p
            out -= out // p
        p += 1 if p == 2 else 2
    if m > 1:
        out -= out // m
    return out


def _e(num: np.ndarray, q: int) -> np.ndarray:
    """e(num/q) for integer numerators already reduced mod q."""
    return np.exp(2j * np.pi * (np.asarray(num, dtype=np.int64) % q) / q)


def gauss_sum(k: int, a: int, q: int) -> complex:
    """S(a,q) = sum_{r=1..q} e(a r^k / q), by direct summation."""
    if q < 1:
        raise DomainError("modulus q must be >= 1")
    res = np.array([(a * pow(t, k, q)) % q for t in range(1, q + 1)], dtype=np.int64)
    return complex(_e(res, q).sum())


def gauss_sum_restricted(k: int, a: int, q: int) -> complex:
    """S*(q,a) = sum over r in 1..q coprime to q of e(a r^k / q)."""
    if q < 1:
        raise DomainError("modulus q must be >= 1")
    if math.gcd(a, q) != 1:
        raise DomainError(f"gcd(a, q) must be 1, got a={a}, q={q}")
    res = [(a * pow(t, k, q)) % q for t in range(1, q + 1) if math.gcd(t, q) == 1]
    return complex(_e(np.array(res, dtype=np.int64), q).sum())


@lru_cache(maxsize=4096)
def _sums_all_a(k: int, q: int, restricted: bool) -> np.ndarray:
    """S(a,q) for every a in 0..q-1 from the residue histogram of r^k mod q."""
    r = np.arange(1, q + 1, dtype=np.int64)
    if restricted:
        r = r[np.gcd(r, q) == 1]
    # r^k mod q by square-and-multiply on int64; q^2 stays well inside 2^63
    res = np.ones_like(r) % q
    base, e = r % q, k
    while e:
        if e & 1:
            res = (res * base) % q
        base = (base * base) % q
        e >>= 1
    hist = np.bincount(res, minlength=q).astype(float)
    out = np.fft.ifft(hist) * q
    out.setflags(write=False)
    return out


def _reduced_residues(q: int) -> np.ndarray:
    a = np.arange(1, q + 1, dtype=np.int64)
    return a[np.gcd(a, q) == 1] % q


@lru_cache(maxsize=4096)
def _local_coeffs(k: int, h: int, q: int, restricted: bool) -> tuple[np.ndarray, np.ndarray]:
    a = _reduced_residues(q)
    S = _sums_all_a(k, q, restricted)[a]
    denom = euler_phi(q) if restricted else q
    coef = (S / denom) ** h
    a.setflags(write=False)
    coef.setflags(write=False)
    return a, coef


def local_term(k: int, h: int, q: int, n, restricted: bool = False):
    """A(q,n) = sum over reduced a mod q of (S/q)^h e(-na/q) (S*/phi(q) when restricted)."""
    if q < 1:
        raise DomainError("modulus q must be >= 1")
    a, coef = _local_coeffs(k, h, q, restricted)
    ns = np.atleast_1d(np.asarray(n, dtype=np.int64)) % q
    phase = _e(-(ns[:, None] * a[None, :]), q)
    out = phase @ coef
    return complex(out[0]) if np.ndim(n) == 0 else out


def local_term_table(k: int, h: int, q: int, restricted: bool = False) -> np.ndarray:
    """A(q, n) for every residue n mod q."""
    return np.asarray(local_term(k, h, q, np.arange(q), restricted))


@dataclass(frozen=True)
class SingularSeriesParams:
    k: int
    h: int
    Q: int = DEFAULT_Q
    prime_restricted: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise DomainError("k must be >= 1")
        if self.Q < 1:
            raise DomainError("truncation Q must be >= 1")
        if self.h < convergence_floor(self.k):
            raise DomainError(
                f"singular series with k={self.k} needs h >= {convergence_floor(self.k)}, got {self.h}"
            )


def convergence_floor(k: int) -> int:
    """Smallest h for which the truncated series is evaluated."""
    return 2 if k == 1 else 2 * k + 1


def tail_estimate(params: SingularSeriesParams) -> float:
    """Crude bound for the omitted terms q > Q from |A(q,n)| << q^(1 - h/k + 0.1)."""
    expo = params.h / params.k - 2.1
    if expo <= 0:
        return math.inf
    return params.Q ** (-expo) / expo


def _check_real(total: np.ndarray) -> np.ndarray:
    worst = float(np.max(np.abs(total.imag))) if total.size else 0.0
    if worst > IMAG_ASSERT:
        raise ConsistencyError(f"singular series has imaginary residue {worst:.2e}")
    return total.real


def singular_series_many(params: SingularSeriesParams, ns: Sequence[int]) -> np.ndarray:
    """Truncated singular series at every n in ``ns``."""
    ns = np.asarray(ns, dtype=np.int64)
    if ns.size and ns.min() < 1:
        raise DomainError("n must be >= 1")
    total = np.zeros(ns.size, dtype=complex)
    for q in range(1, params.Q + 1):
        table = local_term_table(params.k, params.h, q, params.prime_restricted)
        total += table[ns % q]
    return _check_real(total)


def singular_series(params: SingularSeriesParams, n: int) -> float:
    return float(singular_series_many(params, [n])[0])


def singular_series_dense(params: SingularSeriesParams, n_max: int) -> np.ndarray:
    """Truncated singular series for n = 0..n_max (index 0 included for alignment)."""
    total = np.zeros(n_max + 1, dtype=complex)
    idx = np.arange(n_max + 1, dtype=np.int64)
    for q in range(1, params.Q + 1):
        table = local_term_table(params.k, params.h, q, params.prime_restricted)
        total += table[idx % q]
    return _check_real(total)


def congruence_admissible(k: int, h: int, n: int) -> bool:
    """n = h mod K(k), the class forced on sums of h k-th powers of large primes."""
    if k < 1 or h < 1:
        raise DomainError("k and h must be >= 1")
    K = cap_K(k)
    return (n - h) % K == 0
