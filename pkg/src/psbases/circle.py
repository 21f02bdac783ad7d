"""Exponential sums on uniform grids and circle-method diagnostics.

Every grid evaluation is a zero-padded FFT of a coefficient vector.  Sup-norms
are taken over grid points only; the true sup of a degree-x trigonometric
polynomial exceeds the grid sup by at most the factor ``1 + pi * x / M``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy import fft as sfft
from scipy import integrate

from . import repcount
from .core import SequenceSpec, h0_real, psw_threshold, working_pswg_exponent
from .errors import DomainError
from .repcount import WeightedSeries, weighted_indicator
from .sequences import generate

DEFAULT_GRID_FACTOR = 8
MIN_MAJOR_POINTS = 64


@dataclass(frozen=True)
class ExpSumGrid:
    M: int
    values: np.ndarray
    source_length: int

    def alphas(self) -> np.ndarray:
        return np.arange(self.M) / self.M

    @property
    def bernstein_factor(self) -> float:
        return 1.0 + math.pi * self.source_length / self.M


def _grid_values(coeffs: np.ndarray, M: int) -> np.ndarray:
    """values[j] = sum_n coeffs[n] e(n j / M)."""
    padded = np.zeros(M, dtype=coeffs.dtype)
    padded[: coeffs.size] = coeffs
    return sfft.ifft(padded, workers=repcount._workers) * M


def exp_sum_grid(series: WeightedSeries, M: int, top: Optional[int] = None) -> ExpSumGrid:
    """Evaluate the series' trigonometric polynomial at alpha = j/M.

    With ``top=h`` only the range x/h <= n <= x is kept.
    """
    if M <= series.length:
        raise DomainError(f"grid size M={M} must exceed the series length {series.length}")
    coeffs = np.array(series.coeffs, dtype=float)
    if top is not None:
        if top < 1:
            raise DomainError("top-range divisor must be >= 1")
        coeffs[: math.ceil(series.length / top)] = 0.0
    vals = _grid_values(coeffs, M)
    vals.setflags(write=False)
    return ExpSumGrid(M, vals, series.length)


def comparator_series(omega: float, x: int) -> WeightedSeries:
    """Coefficients n^(omega - 1) on every n <= x."""
    return weighted_indicator(SequenceSpec(1), x, omega)


def circular_distance(alpha: np.ndarray) -> np.ndarray:
    return np.abs(alpha - np.rint(alpha))


# ---------------------------------------------------------------------------
# Davenport-Heilbronn kernel


def dh_kernel(beta, h: int):
    """(sin(2 pi h beta) / (pi beta))^2 with the value 4h^2 at beta = 0."""
    b = np.asarray(beta, dtype=float)
    out = (2 * h * np.sinc(2 * h * b)) ** 2
    return float(out) if out.ndim == 0 else out


def dh_kernel_hat(y, h: int):
    """(2h - |y|)_+."""
    out = np.maximum(2 * h - np.abs(np.asarray(y, dtype=float)), 0.0)
    return float(out) if out.ndim == 0 else out


def dh_kernel_transform(y: float, h: int, cutoff: float = 200.0) -> float:
    """Numerical Fourier transform of the kernel over |beta| <= cutoff."""
    f = lambda b: dh_kernel(b, h)  # noqa: E731
    # split at the kernel's zeros so each piece is smooth for the oscillatory rule
    step = 1.0 / (2 * h)
    edges = np.arange(0.0, cutoff + step / 2, step)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if y == 0:
            val, _ = integrate.quad(f, lo, hi, limit=200)
        else:
            val, _ = integrate.quad(f, lo, hi, weight="cos", wvar=2 * math.pi * y, limit=200)
        total += val
    return 2.0 * total


# ---------------------------------------------------------------------------


def quadrature_rep_sum(series: WeightedSeries, h: int, N: int, M: Optional[int] = None) -> float:
    """(1/M) sum_j T(j/M)^h e(-N j/M); exact when M > h * length."""
    threshold = h * series.length + 1
    if M is None:
        M = threshold
    if M < threshold:
        raise DomainError(f"grid size {M} aliases a degree-{h * series.length} polynomial (need >= {threshold})")
    grid = exp_sum_grid(series, M)
    j = np.arange(M, dtype=np.int64)
    phase = np.exp(-2j * np.pi * ((N * j) % M) / M)
    return float(((grid.values**h) @ phase).real / M)


@dataclass(frozen=True)
class ArcSplit:
    N: int
    nu: float

    def __post_init__(self):
        if not self.nu > 0:
            raise DomainError("nu must be positive")
        if self.half_width >= 0.5:
            raise DomainError(f"major arc half-width N^nu/N = {self.half_width:.3g} covers the circle")

    @property
    def L(self) -> float:
        return float(self.N) ** self.nu

    @property
    def half_width(self) -> float:
        return self.L / self.N

    def satisfies_constraint(self, c: float, omega0: float) -> bool:
        """Whether nu <= min(1/c, omega0)/3 (equality tolerated to 1e-12)."""
        return self.nu <= min(1.0 / c, omega0) / 3.0 + 1e-12


def default_delta(c: float, h: int) -> float:
    """Half of the admissible ceiling for delta at (c, h)."""
    H = h0_real(c)
    if h < 2 * H + 1:
        raise DomainError(f"h={h} is below 2 H0(c) + 1 = {2 * H + 1}")
    return 0.5 * (h - 2 * H) / (2 * h * (h - 1) * H)


def default_nu(c: float, h: int) -> float:
    omega0 = 1.0 / h - default_delta(c, h)
    return 0.8 * min(1.0 / float(c), omega0) / 3.0


@dataclass(frozen=True)
class MajorArcReport:
    N: int
    omega: float
    nu: float
    sup_error: float
    error_at_zero: float
    bound: float
    ratio: float
    points: int
    bernstein_factor: float
    nu_constraint_ok: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _ps_only(spec: SequenceSpec) -> None:
    if spec.k != 1 or spec.primes or not spec.thinned:
        raise DomainError("arc diagnostics are defined for floor(n^c) with c > 1, k = 1, no prime restriction")


def major_arc_error(
    spec: SequenceSpec, omega: float, N: int, nu: float, grid_factor: int = DEFAULT_GRID_FACTOR
) -> MajorArcReport:
    """sup over |alpha| <= N^nu/N of |T(alpha;N) - U(alpha;N)/c| against N^(omega - 2 nu)."""
    _ps_only(spec)
    arcs = ArcSplit(N, nu)
    c = spec.c_float
    T = weighted_indicator(spec, N, omega)
    U = comparator_series(omega, N)
    diff = T.coeffs - U.coeffs / c
    # grid fine enough to put MIN_MAJOR_POINTS points on the arc
    need = math.ceil(MIN_MAJOR_POINTS / (2 * arcs.half_width))
    M = sfft.next_fast_len(max(grid_factor * N, need, N + 1))
    vals = _grid_values(diff, M)
    dist = circular_distance(np.arange(M) / M)
    on_arc = dist <= arcs.half_width
    sup = float(np.max(np.abs(vals[on_arc])))
    bound = float(N) ** (omega - 2 * nu)
    return MajorArcReport(
        N=N, omega=omega, nu=nu, sup_error=sup, error_at_zero=float(abs(vals[0])),
        bound=bound, ratio=sup / bound, points=int(on_arc.sum()),
        bernstein_factor=1.0 + math.pi * N / M,
        nu_constraint_ok=arcs.satisfies_constraint(c, omega),
    )


@dataclass(frozen=True)
class MinorArcReport:
    N: int
    omega: float
    nu: float
    sup: float
    scale: float
    normalized: float
    points: int
    bernstein_factor: float

    def to_dict(self) -> dict:
        return asdict(self)


def minor_arc_sup(
    spec: SequenceSpec, omega: float, N: int, nu: float,
    grid_factor: int = DEFAULT_GRID_FACTOR, h: int = 5,
) -> MinorArcReport:
    """max |T#(j/M)| over grid points with ||j/M|| > N^nu/N, M = grid_factor * N."""
    _ps_only(spec)
    if grid_factor < 4:
        raise DomainError("grid_factor must be >= 4")
    arcs = ArcSplit(N, nu)
    M = grid_factor * N
    grid = exp_sum_grid(weighted_indicator(spec, N, omega), M, top=h)
    minor = circular_distance(grid.alphas()) > arcs.half_width
    sup = float(np.max(np.abs(grid.values[minor])))
    scale = float(N) ** omega
    return MinorArcReport(N, omega, nu, sup, scale, sup / scale, int(minor.sum()), grid.bernstein_factor)


@dataclass(frozen=True)
class TransferReport:
    k: int
    c: float
    x: int
    log_weighted: bool
    exponent: float
    sup_residual: float
    reference_scale: float
    ratio: float
    residual_at_zero: float
    direct_at_zero: float

    def to_dict(self) -> dict:
        return asdict(self)


def transfer_coefficients(k: int, c, x: int, log_weighted: bool = False) -> np.ndarray:
    """Coefficients of (thinned sum) - (1/c) * (smoothly weighted unthinned sum) on 0..x."""
    thin = SequenceSpec(c, k, primes=log_weighted)
    full = SequenceSpec(1, k, primes=log_weighted)
    cf = thin.c_float
    d = np.zeros(x + 1)
    a = generate(thin, x).elements
    b = generate(full, x).elements
    af, bf = a.astype(float), b.astype(float)
    wa = np.log(af) if log_weighted else np.ones_like(af)
    wb = bf ** ((1.0 / cf - 1.0) / k) / cf
    if log_weighted:
        wb = wb * np.log(bf)
    d[a] += wa
    d[b] -= wb
    return d


def transfer_residual(k: int, c, x: int, M: Optional[int] = None, log_weighted: bool = False) -> TransferReport:
    """Grid sup of the transfer residual, against x^(1/(ck) - P)."""
    if log_weighted:
        P = working_pswg_exponent(k, c)
    else:
        P = psw_threshold(k, c) if k >= 2 else None
    if P is None:
        raise DomainError(f"(k={k}, c={c}) is outside the tabulated transfer range")
    if M is None:
        M = 4 * x
    if M < 4 * x:
        raise DomainError("transfer grid needs M >= 4x")
    d = transfer_coefficients(k, c, x, log_weighted)
    vals = _grid_values(d, M)
    sup = float(np.max(np.abs(vals)))
    cf = SequenceSpec(c, k).c_float
    scale = float(x) ** (1.0 / (cf * k) - P)
    return TransferReport(
        k=k, c=cf, x=x, log_weighted=log_weighted, exponent=P, sup_residual=sup,
        reference_scale=scale, ratio=sup / scale,
        residual_at_zero=float(abs(vals[0])), direct_at_zero=abs(math.fsum(d)),
    )
