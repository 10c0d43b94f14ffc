"""Wick ordering with respect to a Gaussian of variance c, and the cutoff covariance split.

Coefficient tables are exact rationals (``fractions.Fraction``); floats enter
only when a polynomial is evaluated on data.  A float ordering constant is
converted with ``Fraction(c)``, i.e. exactly as stored in binary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import k0 as bessel_k0

from .modes import Truncation

MAX_TABLE_DEGREE = 12


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@lru_cache(maxsize=None)
def _lowering(n: int, j: int) -> int:
    """n! / ((n - 2j)! j! 2^j), the number of ways to pick j disjoint pairs from n points."""
    return math.factorial(n) // (math.factorial(n - 2 * j) * math.factorial(j) * 2**j)


def hermite_wick(n: int, c) -> tuple[Fraction, ...]:
    """Coefficients of :x^n:_c in descending powers of x.

    :x^n:_c = sum_j (-1)^j n!/((n-2j)! j! 2^j) c^j x^{n-2j}
    """
    if n < 0:
        raise ValueError("degree must be non-negative")
    c = _frac(c)
    if c < 0:
        raise ValueError("variance must be non-negative")
    out = [Fraction(0)] * (n + 1)
    for j in range(n // 2 + 1):
        out[2 * j] = (-1) ** j * _lowering(n, j) * c**j
    return tuple(out)


def hermite_values(n: int, c: float, x) -> np.ndarray:
    """Evaluate :x^n:_c at float data through the three-term recurrence.

    H_{k+1} = x H_k - k c H_{k-1}.
    """
    x = np.asarray(x, dtype=float)
    h_prev, h = np.ones_like(x), x.copy()
    if n == 0:
        return h_prev
    for k in range(1, n):
        h_prev, h = h, x * h - k * c * h_prev
    return h


@dataclass(frozen=True)
class WickPolynomial:
    """P = sum_k coeffs[k] :x^k:_c (ascending degree, Wick basis)."""

    coeffs: tuple
    c: Fraction = Fraction(0)

    def __post_init__(self):
        coeffs = tuple(_frac(a) for a in self.coeffs)
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs = coeffs[:-1]
        if not coeffs:
            coeffs = (Fraction(0),)
        c = _frac(self.c)
        if c < 0:
            raise ValueError("ordering constant must be non-negative")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "c", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @classmethod
    def from_monomials(cls, coeffs, c) -> "WickPolynomial":
        """Wick-order the ordinary polynomial sum_k coeffs[k] x^k, i.e. return sum_k coeffs[k] :x^k:_c."""
        return cls(tuple(coeffs), c)

    def monomials(self) -> tuple[Fraction, ...]:
        """Ascending ordinary-power coefficients of P as a function of x."""
        out = [Fraction(0)] * (self.degree + 1)
        for k, a in enumerate(self.coeffs):
            if a == 0:
                continue
            desc = hermite_wick(k, self.c)
            for i, h in enumerate(desc):
                out[k - i] += a * h
        return tuple(out)

    def __call__(self, x) -> np.ndarray:
        c = float(self.c)
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        for k, a in enumerate(self.coeffs):
            if a != 0:
                total = total + float(a) * hermite_values(k, c, x)
        return total

    def require_bounded_below(self) -> None:
        lead = self.coeffs[-1]
        if self.degree == 0:
            return
        if self.degree % 2 or lead <= 0:
            raise ValueError("interaction must have even degree and positive leading coefficient")


def wick_reorder(P: WickPolynomial, shift) -> WickPolynomial:
    """Re-express P in the Wick basis of variance c + shift.

    From the generating function :e^{tx}:_c = e^{tx - t^2 c/2},
    :x^n:_c = sum_j n!/((n-2j)! j! 2^j) shift^j :x^{n-2j}:_{c+shift}.
    With c = C_0 and shift = C_f this is the change from C_0- to C-ordering.
    """
    s = _frac(shift)
    new_c = P.c + s
    if new_c < 0:
        raise ValueError("reordered variance would be negative")
    out = [Fraction(0)] * (P.degree + 1)
    for n, a in enumerate(P.coeffs):
        if a == 0:
            continue
        for j in range(n // 2 + 1):
            out[n - 2 * j] += a * _lowering(n, j) * s**j
    return WickPolynomial(tuple(out), new_c)


def gaussian_moment(k: int, c) -> Fraction:
    """E x^k under N(0, c): c^{k/2} (k-1)!! for even k, 0 for odd k."""
    if k % 2:
        return Fraction(0)
    c = _frac(c)
    return c ** (k // 2) * math.prod(range(k - 1, 0, -2))


def expectation(monomial_coeffs, c) -> Fraction:
    """E P(x) for ascending ordinary coefficients under N(0, c), exactly."""
    return sum((a * gaussian_moment(k, c) for k, a in enumerate(monomial_coeffs)), Fraction(0))


def poly_mul(p, q) -> tuple[Fraction, ...]:
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return tuple(out)


# --------------------------------------------------------------------------
# cutoff covariance on the flat torus


def _box(R: float, L: float, n_max: int) -> tuple[int, int]:
    k_max = max(1, int(math.floor(n_max * L / (2.0 * math.pi * R))))
    return n_max, k_max


def cutoff_variance(m: float, R: float, L: float, n_max: int) -> float:
    """c_N = Var phi(x) for the torus S^1_R x S^1_L with the box cutoff |n| <= N, |k| <= K."""
    N, K = _box(R, L, n_max)
    n = np.arange(-N, N + 1) / R
    k = 2.0 * np.pi * np.arange(-K, K + 1) / L
    lam = m * m + n[:, None] ** 2 + k[None, :] ** 2
    A = 2.0 * math.pi * R * L
    return math.fsum((1.0 / lam).ravel()) / A


def effective_cutoff(R: float, L: float, n_max: int) -> float:
    """Lambda_eff with ln Lambda_eff = (1/2pi) int ln rho(phi) dphi over the cutoff box boundary.

    The box in momentum space has half-widths (N + 1/2)/R and (K + 1/2) 2pi/L
    (midpoint cells).  The cutoff variance is (1/2pi) ln(Lambda_eff / m) plus a
    finite part, so eps_N = 1/Lambda_eff is the effective short-distance scale.
    """
    N, K = _box(R, L, n_max)
    a = (N + 0.5) / R
    b = (K + 0.5) * 2.0 * math.pi / L
    corner = math.atan2(b, a)

    def ln_rho(phi):
        return math.log(a / math.cos(phi)) if phi < corner else math.log(b / math.sin(phi))

    val, _ = integrate.quad(ln_rho, 0.0, math.pi / 2, points=[corner], epsabs=1e-14, epsrel=1e-13)
    return math.exp(val * 4.0 / (2.0 * math.pi))


@dataclass(frozen=True)
class CovarianceSplit:
    m: float
    m0: float
    R: float
    L: float
    n_max: int
    c_N: float
    eps_N: float
    C_f: float  # c_N + (1/2pi) ln(m0 eps_N)
    regulator: str = "mode-box"
    diagnostics: dict = field(default_factory=dict)


def covariance_split(m: float, R: float, L: float, trunc: Truncation, m0: float | None = None) -> CovarianceSplit:
    """Split the cutoff variance as c_N = C_0(eps_N) + C_f with C_0(d) = -(1/2pi) ln(m0 d)."""
    if not m > 0:
        raise ValueError("mass must be positive")
    m0 = m if m0 is None else m0
    c = cutoff_variance(m, R, L, trunc.n_max)
    eps = 1.0 / effective_cutoff(R, L, trunc.n_max)
    return CovarianceSplit(m, m0, R, L, trunc.n_max, c, eps, c + math.log(m0 * eps) / (2.0 * math.pi))


@dataclass(frozen=True)
class SplitFit:
    slope: float  # d c_N / d ln N, expected 1/(2 pi)
    slope_rel_error: float
    C_f: float
    C_f_drift: float  # |C_f(N_last) - C_f(N_prev)|
    fit_residual: float
    stable: bool


class UnstableSplit(RuntimeError):
    pass


def fit_covariance_split(m, R, L, cutoffs=(16, 32, 64, 128, 256), m0=None, tol=1e-3, strict=True) -> SplitFit:
    """Log-divergence regression of c_N and stability of C_f over a cutoff ladder."""
    splits = [covariance_split(m, R, L, Truncation(N), m0) for N in cutoffs]
    x = np.log(np.array(cutoffs, dtype=float))
    y = np.array([s.c_N for s in splits])
    slope, icpt = np.polyfit(x, y, 1)
    resid = float(np.max(np.abs(y - (slope * x + icpt))))
    drift = abs(splits[-1].C_f - splits[-2].C_f)
    fit = SplitFit(
        float(slope),
        float(abs(slope * 2 * math.pi - 1.0)),
        splits[-1].C_f,
        float(drift),
        resid,
        drift < tol,
    )
    if strict and not fit.stable:
        raise UnstableSplit(f"C_f drifted by {drift:.3e} between the last two cutoffs: {fit}")
    return fit


def smooth_part_difference(m1: float, m2: float, R: float, L: float, tol: float = 1e-17) -> float:
    """Oracle: C_f(m1) - C_f(m2) at a common m0, from the image sum of K_0.

    G_m(x) = (1/2pi) sum_w K_0(m |x - w|) over the period lattice, and
    K_0(z) = -ln(z/2) - gamma + o(1), so with C_0 = -(1/2pi) ln(m0 d)
    C_f(m) = (1/2pi)[ln 2 - gamma - ln(m/m0) + sum_{w != 0} K_0(m|w|)].
    """
    p, q = 2 * math.pi * R, L
    reach = 45.0 / min(m1, m2) + 2 * max(p, q)
    amax, bmax = int(reach / p) + 1, int(reach / q) + 1
    a = np.arange(-amax, amax + 1)
    b = np.arange(-bmax, bmax + 1)
    r = np.hypot(p * a[:, None], q * b[None, :]).ravel()
    r = np.sort(r[r > 0])[::-1]
    s = math.fsum(bessel_k0(m1 * r) - bessel_k0(m2 * r))
    return (s - math.log(m1 / m2)) / (2 * math.pi)


def smooth_part_image_sum(m: float, R: float, L: float, m0: float | None = None) -> float:
    """Absolute C_f(x, x) for the mollifier-free definition (used only to report the regulator offset)."""
    m0 = m if m0 is None else m0
    p, q = 2 * math.pi * R, L
    reach = 45.0 / m + 2 * max(p, q)
    amax, bmax = int(reach / p) + 1, int(reach / q) + 1
    a = np.arange(-amax, amax + 1)
    b = np.arange(-bmax, bmax + 1)
    r = np.hypot(p * a[:, None], q * b[None, :]).ravel()
    r = np.sort(r[r > 0])[::-1]
    s = math.fsum(bessel_k0(m * r))
    return (math.log(2) - np.euler_gamma - math.log(m / m0) + s) / (2 * math.pi)


# --------------------------------------------------------------------------
# interaction functional


def wick_interaction(sample, P: WickPolynomial, c: float | None = None, area_weights=None) -> float:
    """sum_x w_x P(phi(x)) with P Wick-ordered at variance ``c`` (defaults to P.c).

    ``sample`` and ``area_weights`` must have the same shape; a scalar weight is
    broadcast.  The reduction uses math.fsum, so the result is the correctly
    rounded sum and domain additivity holds to one rounding per piece.
    """
    phi = np.asarray(sample, dtype=float)
    if c is not None and _frac(c) != P.c:
        P = wick_reorder(P, _frac(c) - P.c)
    w = np.broadcast_to(np.asarray(1.0 if area_weights is None else area_weights, dtype=float), phi.shape) \
        if np.ndim(area_weights) == 0 else np.asarray(area_weights, dtype=float)
    if w.shape != phi.shape:
        raise ValueError(f"grid mismatch: sample {phi.shape} vs weights {w.shape}")
    return math.fsum((w * P(phi)).ravel())


def wick_basis_from_monomials(monomials, c) -> WickPolynomial:
    """Expand an ordinary polynomial in the Wick basis at variance c by back-substitution.

    Independent of ``wick_reorder``: it only uses ``hermite_wick`` tables.
    """
    rest = [_frac(a) for a in monomials]
    out = [Fraction(0)] * len(rest)
    for k in range(len(rest) - 1, -1, -1):
        a = rest[k]
        if a == 0:
            continue
        out[k] = a
        for i, h in enumerate(hermite_wick(k, c)):
            rest[k - i] -= a * h
    return WickPolynomial(tuple(out), _frac(c))
