"""Domain types, tabulated thresholds, gamma factors and regularly varying targets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DomainError

Real = Union[int, float, str, Fraction, Decimal]

NON_INTEGRAL_TOL = 1e-9
# slack factor applied to the tabulated prime-transfer threshold
WORKING_FRACTION = Fraction(9, 10)


def as_fraction(value: Real) -> Fraction:
    """Parse a real parameter exactly; floats are read through their shortest repr."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise DomainError("boolean is not a real parameter")
    if isinstance(value, float):
        if not math.isfinite(value):
            raise DomainError(f"non-finite parameter {value!r}")
        return Fraction(repr(value))
    try:
        return Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"cannot parse {value!r} as an exact decimal") from exc


def _check_exponent(c: Fraction) -> None:
    if c == 1:
        return
    if c < 1:
        raise DomainError(f"exponent c must be > 1 (or exactly 1), got {c}")
    cf = float(c)
    if abs(cf - round(cf)) <= NON_INTEGRAL_TOL:
        raise DomainError(f"exponent c must be non-integral, got {cf}")


@dataclass(frozen=True)
class SequenceSpec:
    """Ground set selector: k-th powers of floor(m^c) values, optionally prime-based.

    ``c == 1`` means no Piatetski-Shapiro thinning (plain k-th powers or prime powers).
    """

    c: Fraction
    k: int = 1
    primes: bool = False

    def __post_init__(self):
        c = as_fraction(self.c)
        _check_exponent(c)
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise DomainError(f"power k must be a positive integer, got {self.k!r}")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "primes", bool(self.primes))

    @property
    def c_float(self) -> float:
        return float(self.c)

    @property
    def beta(self) -> float:
        """Counting exponent 1/(ck) of the ground set."""
        return float(1 / (self.c * self.k))

    @property
    def thinned(self) -> bool:
        return self.c != 1

    def describe(self) -> dict:
        return {"c": str(self.c_decimal()), "k": self.k, "primes": self.primes}

    def c_decimal(self) -> str:
        """Shortest decimal text for c (exact whenever c came from a decimal)."""
        d = Decimal(self.c.numerator) / Decimal(self.c.denominator)
        return format(d.normalize(), "f")


@dataclass(frozen=True)
class RegVarFn:
    """F(x) = C * x**kappa * (log x)**a * (log log x)**b, evaluated for x >= 16."""

    C: float
    kappa: float
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if not self.C > 0:
            raise DomainError(f"constant C must be positive, got {self.C}")

    def psi(self, x):
        """Slowly varying factor C (log x)^a (log log x)^b."""
        x = self._domain(x)
        lx = np.log(x)
        return self.C * lx**self.a * np.log(lx) ** self.b

    def __call__(self, x):
        x = self._domain(x)
        out = x**self.kappa * self.psi(x)
        return float(out) if np.ndim(out) == 0 else out

    @staticmethod
    def _domain(x):
        arr = np.asarray(x, dtype=float)
        if np.any(arr < 16):
            raise DomainError("regularly varying targets are evaluated only for x >= 16")
        return arr

    @classmethod
    def parse(cls, text: str) -> "RegVarFn":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise DomainError("F must be given as C,kappa,a,b")
        return cls(*(float(as_fraction(p)) for p in parts))

    def to_text(self) -> str:
        return ",".join(repr(float(v)) for v in (self.C, self.kappa, self.a, self.b))


# ---------------------------------------------------------------------------
# thresholds


def h0_integer(k: int) -> int:
    """Hua exponent H0(k) for k-th powers."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    if k <= 4:
        return 2 ** (k - 1)
    return k * (k - 1) // 2 + math.isqrt(2 * k + 2)


def h0_real(c: Real) -> int:
    """Hua exponent H0(c) for floor(n^c) with non-integral c > 1."""
    cq = as_fraction(c)
    if cq <= 1:
        raise DomainError(f"H0(c) needs c > 1, got {cq}")
    _check_exponent(cq)
    if cq < 2:
        return 2
    f = math.floor(2 * cq)
    return (f + 1) * (f + 2) // 2


def cap_K(k: int) -> int:
    """Modulus K(k) = prod over primes p with (p-1) | k of p^nu(k, p)."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    out = 1
    for d in range(1, k + 1):
        if k % d or not _is_small_prime(d + 1):
            continue
        p = d + 1
        theta, t = 0, k
        while t % p == 0:
            t //= p
            theta += 1
        nu = theta + 2 if (p == 2 and k % 2 == 0) else theta + 1
        out *= p**nu
    return out


def _is_small_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in range(2, math.isqrt(n) + 1):
        if n % p == 0:
            return False
    return True


def _sigma_inv(r: Fraction) -> Fraction:
    return r * (r - 1)


def nu0(k: int) -> Fraction:
    """Bourgain-type parameter for k >= 6 in the transfer table."""
    if k < 6:
        raise DomainError("nu0 is defined for k >= 6")
    if k % 2 == 0:
        return Fraction(3 * k + 2, k) * _sigma_inv(Fraction(3 * k, 2))
    return Fraction(3 * k + 1, k - 1) * _sigma_inv(Fraction(3 * k - 1, 2))


def nu0_star(k: int) -> Fraction:
    """Parameter for k >= 4 in the prime transfer table."""
    if k < 4:
        raise DomainError("nu0* is defined for k >= 4")
    if k <= 11:
        return Fraction(k * (k + 1) ** 2)
    r = 3 * k // 2
    return Fraction(2 * r * (r * r - 1), r - k)


def _nu_row(nu: Fraction, k: int, c: Fraction) -> tuple[Fraction, Fraction]:
    return nu / (nu - 1), (nu / c - nu + 1) / (k * (2 * nu - 1))


def psw_range(k: int) -> Fraction:
    """Right endpoint of the admissible c-range for the k-th power transfer."""
    if k < 2:
        raise DomainError("the power transfer table starts at k = 2")
    fixed = {2: Fraction(4, 3), 3: Fraction(16, 15), 4: Fraction(96, 95), 5: Fraction(224, 223)}
    if k in fixed:
        return fixed[k]
    nu = nu0(k)
    return nu / (nu - 1)


def pswg_range(k: int) -> Fraction:
    """Right endpoint of the admissible c-range for the prime-power transfer."""
    if k < 1:
        raise DomainError("k must be >= 1")
    fixed = {1: Fraction(73, 64), 2: Fraction(82, 75), 3: Fraction(80, 77)}
    if k in fixed:
        return fixed[k]
    nu = nu0_star(k)
    return nu / (nu - 1)


def psw_threshold_exact(k: int, c: Real) -> Optional[Fraction]:
    cq = as_fraction(c)
    if not (1 < cq < psw_range(k)):
        return None
    if k == 2:
        return 1 / (4 * cq) - Fraction(3, 16)
    if k == 3:
        return Fraction(8, 45) / cq - Fraction(1, 6)
    if k == 4:
        return (96 / cq - 95) / 764
    if k == 5:
        return (224 / cq - 223) / 2235
    return _nu_row(nu0(k), k, cq)[1]


def psw_threshold(k: int, c: Real) -> Optional[float]:
    """Saving exponent P(c,k) of the k-th power transfer, or None when c is out of range."""
    val = psw_threshold_exact(k, c)
    return None if val is None else float(val)


def pswg_threshold_exact(k: int, c: Real) -> Optional[Fraction]:
    cq = as_fraction(c)
    if not (1 < cq < pswg_range(k)):
        return None
    if k == 1:
        return min(1 - 1 / cq, (73 / cq - 64) / 86)
    if k == 2:
        return (82 / cq - 75) / 174
    if k == 3:
        return min((80 / cq - 77) / 468, (78 / cq - 75) / 471)
    return _nu_row(nu0_star(k), k, cq)[1]


def pswg_threshold(k: int, c: Real) -> Optional[float]:
    """Threshold P0*(c,k) of the prime-power transfer, or None when c is out of range."""
    val = pswg_threshold_exact(k, c)
    return None if val is None else float(val)


def working_pswg_exponent(k: int, c: Real) -> Optional[float]:
    val = pswg_threshold_exact(k, c)
    return None if val is None else float(WORKING_FRACTION * val)


def transfer_exponent(spec: SequenceSpec) -> Optional[float]:
    """Working saving exponent for the transfer that applies to ``spec``."""
    if not spec.thinned:
        return None
    if spec.primes:
        return working_pswg_exponent(spec.k, spec.c)
    if spec.k == 1:
        return None
    return psw_threshold(spec.k, spec.c)


def min_order(spec: SequenceSpec) -> int:
    """Smallest order h for which thin subbases of this ground set are constructed."""
    base = 2 * h0_integer(spec.k) + 1
    if not spec.thinned:
        return base
    if spec.k == 1 and not spec.primes:
        return 2 * h0_real(spec.c) + 1
    P = transfer_exponent(spec)
    if P is None:
        raise DomainError(f"no tabulated transfer exponent for k={spec.k}, c={spec.c_float}")
    return max(base, 2 * math.ceil(0.5 / P) + 1)


@dataclass(frozen=True)
class ThresholdRow:
    k: int
    c: float
    H0k: int
    H0c: Optional[int]
    K: int
    P: Optional[float]
    P0star: Optional[float]

    def to_dict(self) -> dict:
        return {
            "k": self.k, "c": self.c, "H0k": self.H0k, "H0c": self.H0c,
            "K": self.K, "P": self.P, "P0star": self.P0star,
        }


def thresholds(k: int, c: Real) -> ThresholdRow:
    cq = as_fraction(c)
    _check_exponent(cq)
    return ThresholdRow(
        k=k,
        c=float(cq),
        H0k=h0_integer(k),
        H0c=h0_real(cq) if cq > 1 else None,
        K=cap_K(k),
        P=psw_threshold(k, cq) if k >= 2 else None,
        P0star=pswg_threshold(k, cq),
    )


# ---------------------------------------------------------------------------
# gamma factors

_LANCZOS_G = 7
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma(x: float) -> float:
    """Lanczos approximation (g=7, 9 terms), reflected below 1/2."""
    if x < 0.5:
        if x == math.floor(x):
            raise DomainError(f"gamma has a pole at {x}")
        return math.pi / (math.sin(math.pi * x) * gamma(1.0 - x))
    x -= 1.0
    acc = _LANCZOS[0]
    for i, coef in enumerate(_LANCZOS[1:], start=1):
        acc += coef / (x + i)
    t = x + _LANCZOS_G + 0.5
    return math.sqrt(2 * math.pi) * t ** (x + 0.5) * math.exp(-t) * acc


def log_gamma(x: float) -> float:
    if x <= 0:
        raise DomainError("log_gamma is implemented for x > 0")
    if x < 0.5:
        return math.log(math.pi / (math.sin(math.pi * x))) - log_gamma(1.0 - x)
    x -= 1.0
    acc = _LANCZOS[0]
    for i, coef in enumerate(_LANCZOS[1:], start=1):
        acc += coef / (x + i)
    t = x + _LANCZOS_G + 0.5
    return 0.5 * math.log(2 * math.pi) + (x + 0.5) * math.log(t) - t + math.log(acc)


def gamma_ratio(omega: float, h: int) -> float:
    """Gamma(omega)^h / Gamma(h * omega)."""
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega}")
    if h < 1:
        raise DomainError(f"h must be >= 1, got {h}")
    if h == 1:
        return 1.0
    if h * omega <= 50:
        g = gamma(omega)
        num = g**h
        if math.isfinite(num) and num > 0:
            return num / gamma(h * omega)
    return math.exp(h * log_gamma(omega) - log_gamma(h * omega))


@dataclass(frozen=True)
class MainTermParams:
    c: float
    h: int
    omega: float
    log_weighted: bool = False

    def __post_init__(self):
        if not self.omega > 0:
            raise DomainError("omega must be positive")
        if self.h < 1:
            raise DomainError("h must be >= 1")


def main_term(p: MainTermParams, N: float) -> float:
    """Analytic factor c^-h * Gamma(w)^h / Gamma(h w) * N^(h w - 1); no singular series."""
    if N < 1:
        raise DomainError("N must be >= 1")
    c = float(as_fraction(p.c))
    return gamma_ratio(p.omega, p.h) / c**p.h * float(N) ** (p.h * p.omega - 1)


# ---------------------------------------------------------------------------
# admissibility of regularly varying targets


def regvar_eval(F: RegVarFn, x: float) -> float:
    return F(x)


def representation_ceiling(spec: SequenceSpec, h: int, x):
    """Largest admissible target growth for r_{A,h} over ``spec`` at x."""
    x = np.asarray(x, dtype=float)
    beta = spec.beta
    if spec.primes:
        c = spec.c_float
        const = gamma_ratio(beta, h) / c**h
        return const * x ** (h * beta - 1) / np.log(x) ** h
    const = gamma(1 + beta) ** h / gamma(h * beta)
    return const * x ** (h * beta - 1)


@dataclass(frozen=True)
class AdmissibilityReport:
    grows_faster_than_log: bool
    under_ceiling: bool
    ceiling_margin: float


def regvar_admissible(F: RegVarFn, spec: SequenceSpec, h: int, x_grid: Sequence[float]) -> AdmissibilityReport:
    """Finite-grid proxy for the two growth hypotheses on a target F."""
    grid = np.asarray(list(x_grid), dtype=float)
    if grid.size == 0:
        raise DomainError("empty x grid")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("x grid must be strictly ascending")
    if grid[0] < 16:
        raise DomainError("x grid must start at 16 or above")
    vals = np.atleast_1d(F(grid))
    over_log = vals / np.log(grid)
    tail = over_log[-3:]
    grows = bool(tail.size >= 2 and np.all(np.diff(tail) > 0))
    margin = float(np.max(vals / representation_ceiling(spec, h, grid)))
    return AdmissibilityReport(grows, margin <= 1.0, margin)


def log_grid(lo: float, hi: float, per_decade: int = 4) -> list[float]:
    """Geometric grid from lo to hi inclusive."""
    if hi <= lo:
        return [float(lo)]
    n = max(2, int(math.ceil(per_decade * math.log10(hi / lo))) + 1)
    return [float(v) for v in np.geomspace(lo, hi, n)]
