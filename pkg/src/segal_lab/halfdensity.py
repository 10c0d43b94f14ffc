"""Gaussian half-densities and their kernel calculus in finite dimensions.

A positive Gaussian measure nu = exp(log_mass) N(center, Q^{-1}) on R^d is
stored in closed form.  Its square root nu^{1/2} is the half-density; the
pairing of two half-densities is int sqrt(nu1 nu2) dx.  A measure on a product
space R^{d_out} x R^{d_in} is read as the Hilbert-Schmidt kernel nu^{1/2} and
composition is

    nu3(phi, psi) = ( int nu1(phi, eta)^{1/2} nu2(eta, psi)^{1/2} d eta )^2,

which is again a multiple of a Gaussian.  Everything below is exact linear
algebra on log-quadratic forms; quadrature lives in ``compose_numeric`` only.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LOG_2PI = np.log(2.0 * np.pi)


class NotPositiveDefinite(ValueError):
    pass


def _logdet_spd(Q: np.ndarray, what: str = "form") -> float:
    try:
        L = np.linalg.cholesky(Q)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(f"{what} is not positive definite") from None
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def _symmetrize(Q) -> np.ndarray:
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.shape[0] != Q.shape[1]:
        raise ValueError(f"quadratic form must be square, got shape {Q.shape}")
    scale = max(np.abs(Q).max(), 1.0)
    if np.abs(Q - Q.T).max() > 1e-12 * scale:
        raise ValueError("quadratic form is not symmetric")
    return 0.5 * (Q + Q.T)


@dataclass(frozen=True)
class LogQuadratic:
    """log f(x) = -x^T P x / 2 + b^T x + c."""

    P: np.ndarray
    b: np.ndarray
    c: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return -0.5 * np.einsum("...i,ij,...j->...", x, self.P, x) + x @ self.b + self.c

    def scaled(self, t: float) -> "LogQuadratic":
        return LogQuadratic(t * self.P, t * self.b, t * self.c)

    def integrate(self, idx) -> tuple["LogQuadratic", float]:
        """Integrate out the coordinates ``idx``; returns (remaining form, reduced order kept)."""
        idx = np.asarray(idx, dtype=int)
        keep = np.setdiff1d(np.arange(self.P.shape[0]), idx)
        Pkk = self.P[np.ix_(keep, keep)]
        Pke = self.P[np.ix_(keep, idx)]
        Pee = self.P[np.ix_(idx, idx)]
        logdet = _logdet_spd(Pee, "marginal form")
        Pee_inv_Pek = np.linalg.solve(Pee, Pke.T)
        Pee_inv_be = np.linalg.solve(Pee, self.b[idx])
        P = Pkk - Pke @ Pee_inv_Pek
        b = self.b[keep] - Pke @ Pee_inv_be
        c = self.c + 0.5 * self.b[idx] @ Pee_inv_be + 0.5 * len(idx) * LOG_2PI - 0.5 * logdet
        return LogQuadratic(0.5 * (P + P.T), b, float(c)), keep


@dataclass(frozen=True)
class GaussianHD:
    """Half-density nu^{1/2} of nu = exp(log_mass) N(center, Q^{-1})."""

    Q: np.ndarray
    center: np.ndarray
    log_mass: float

    def __post_init__(self):
        Q = _symmetrize(self.Q)
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        if center.shape != (Q.shape[0],):
            raise ValueError("center does not match the form dimension")
        _logdet_spd(Q, "precision")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "log_mass", float(self.log_mass))

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    @property
    def half_form(self) -> np.ndarray:
        """Quadratic form of the half-density itself."""
        return 0.5 * self.Q

    def measure_form(self) -> LogQuadratic:
        """log of the density of nu."""
        Q, mu = self.Q, self.center
        c = self.log_mass - 0.5 * mu @ Q @ mu - 0.5 * self.dim * LOG_2PI + 0.5 * _logdet_spd(Q)
        return LogQuadratic(Q, Q @ mu, float(c))

    @classmethod
    def from_measure_form(cls, form: LogQuadratic) -> "GaussianHD":
        logdet = _logdet_spd(form.P, "composed form")
        center = np.linalg.solve(form.P, form.b)
        d = form.P.shape[0]
        log_mass = form.c + 0.5 * form.b @ center + 0.5 * d * LOG_2PI - 0.5 * logdet
        return cls(form.P, center, log_mass)

    def log_value(self, x):
        """log nu^{1/2}(x) against Lebesgue half-density (dx)^{1/2}."""
        return 0.5 * self.measure_form()(x)

    def pair(self, other: "GaussianHD") -> float:
        """int nu1^{1/2} nu2^{1/2}; self-pairing is the mass of nu."""
        return float(np.exp(self.log_pair(other)))

    def log_pair(self, other: "GaussianHD") -> float:
        if other.dim != self.dim:
            raise ValueError("dimension mismatch in pairing")
        f, g = self.measure_form(), other.measure_form()
        s = LogQuadratic(0.5 * (f.P + g.P), 0.5 * (f.b + g.b), 0.5 * (f.c + g.c))
        if self.dim == 0:
            return s.c
        reduced, _ = s.integrate(np.arange(self.dim))
        return reduced.c

    def scaled(self, factor: float) -> "GaussianHD":
        """Half-density of factor * nu."""
        return GaussianHD(self.Q, self.center, self.log_mass + np.log(factor))

    def change_coordinates(self, A) -> "GaussianHD":
        """Express nu^{1/2} in coordinates y with x = A y + 0 (A invertible).

        The reference half-density changes by |det A|^{1/2}; pairings are unchanged.
        """
        A = np.atleast_2d(np.asarray(A, dtype=float))
        Ainv = np.linalg.inv(A)
        return GaussianHD(A.T @ self.Q @ A, Ainv @ self.center, self.log_mass)


def hd_sqrt(Q, center, log_mass: float = 0.0) -> GaussianHD:
    """Positive square root of exp(log_mass) N(center, Q^{-1})."""
    return GaussianHD(Q, center, log_mass)


@dataclass(frozen=True)
class KernelHD:
    """Kernel nu^{1/2}(out, in) with nu a Gaussian on R^{d_out} x R^{d_in}."""

    hd: GaussianHD
    d_out: int
    d_in: int = field(init=False)

    def __post_init__(self):
        if not 0 <= self.d_out <= self.hd.dim:
            raise ValueError("block split inconsistent with dimension")
        object.__setattr__(self, "d_in", self.hd.dim - self.d_out)

    @classmethod
    def from_parts(cls, Q, center, log_mass, d_out) -> "KernelHD":
        return cls(GaussianHD(Q, center, log_mass), d_out)

    @property
    def log_mass(self) -> float:
        return self.hd.log_mass

    def adjoint(self) -> "KernelHD":
        d = self.hd.dim
        perm = np.r_[np.arange(self.d_out, d), np.arange(self.d_out)]
        Q = self.hd.Q[np.ix_(perm, perm)]
        return KernelHD(GaussianHD(Q, self.hd.center[perm], self.hd.log_mass), self.d_in)


def _compose_forms(f1: LogQuadratic, d_out1: int, f2: LogQuadratic, d_in2: int) -> LogQuadratic:
    """Square of int sqrt(nu1(phi, eta) nu2(eta, psi)) d eta as a log-quadratic in (phi, psi)."""
    d_eta = f1.P.shape[0] - d_out1
    if f2.P.shape[0] - d_in2 != d_eta:
        raise ValueError(
            f"cannot compose: inner dimensions {d_eta} and {f2.P.shape[0] - d_in2} differ"
        )
    n = d_out1 + d_eta + d_in2
    P = np.zeros((n, n))
    b = np.zeros(n)
    s1 = slice(0, d_out1 + d_eta)
    s2 = slice(d_out1, n)
    P[s1, s1] += 0.5 * f1.P
    P[s2, s2] += 0.5 * f2.P
    b[s1] += 0.5 * f1.b
    b[s2] += 0.5 * f2.b
    joint = LogQuadratic(P, b, 0.5 * (f1.c + f2.c))
    if d_eta == 0:
        return joint.scaled(2.0)
    reduced, _ = joint.integrate(np.arange(d_out1, d_out1 + d_eta))
    return reduced.scaled(2.0)


def compose(k1: KernelHD, k2: KernelHD) -> KernelHD:
    """k1 o k2 (k2 acts first)."""
    form = _compose_forms(k1.hd.measure_form(), k1.d_out, k2.hd.measure_form(), k2.d_in)
    return KernelHD(GaussianHD.from_measure_form(form), k1.d_out)


def apply(k: KernelHD, v: GaussianHD) -> GaussianHD:
    """Action of the kernel on a half-density on its input space."""
    if v.dim != k.d_in:
        raise ValueError(f"vector has dimension {v.dim}, kernel expects {k.d_in}")
    form = _compose_forms(k.hd.measure_form(), k.d_out, v.measure_form(), 0)
    return GaussianHD.from_measure_form(form)


def kernel_log_trace(k: KernelHD) -> float:
    """log int nu^{1/2}(x, x) dx."""
    if k.d_in != k.d_out:
        raise ValueError("trace needs equal input and output dimensions")
    d = k.d_in
    f = k.hd.measure_form()
    S = np.hstack([np.eye(d), np.eye(d)])  # (x, x) = S^T x
    P = 0.5 * S @ f.P @ S.T
    b = 0.5 * S @ f.b
    diag = LogQuadratic(0.5 * (P + P.T), b, 0.5 * f.c)
    try:
        reduced, _ = diag.integrate(np.arange(d))
    except NotPositiveDefinite:
        raise NotPositiveDefinite("kernel diagonal is not integrable; trace diverges") from None
    return reduced.c


def kernel_trace(k: KernelHD) -> float:
    return float(np.exp(kernel_log_trace(k)))


def compose_numeric(k1: KernelHD, k2: KernelHD, phi, psi, n_nodes: int = 161, width: float = 9.0):
    """Quadrature oracle for nu3(phi, psi); points are rows of ``phi`` and ``psi``.

    The eta integral is a tensor trapezoid rule on a box of ``width`` standard
    deviations around the conditional centre of the integrand.  Inner
    dimension is limited to 2.
    """
    d_eta = k1.d_in
    if d_eta != k2.d_out:
        raise ValueError("inner dimensions differ")
    if d_eta > 2:
        raise ValueError("quadrature oracle supports at most 2 inner dimensions")
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    f1, f2 = k1.hd.measure_form(), k2.hd.measure_form()
    out = np.empty(len(phi))
    # Curvature of the integrand in eta fixes the box size.
    Pee = 0.5 * (f1.P[k1.d_out :, k1.d_out :] + f2.P[:d_eta, :d_eta])
    sd = np.sqrt(np.diag(np.linalg.inv(Pee)))
    for i, (x, y) in enumerate(zip(phi, psi)):
        # centre: maximiser of the integrand in eta
        g1 = f1.b[k1.d_out :] - f1.P[k1.d_out :, : k1.d_out] @ x
        g2 = f2.b[:d_eta] - f2.P[:d_eta, d_eta:] @ y
        centre = np.linalg.solve(Pee, 0.5 * (g1 + g2))
        axes = [np.linspace(c - width * s, c + width * s, n_nodes) for c, s in zip(centre, sd)]
        grids = np.meshgrid(*axes, indexing="ij")
        eta = np.stack([g.ravel() for g in grids], axis=-1)
        z1 = np.hstack([np.broadcast_to(x, (len(eta), len(x))), eta])
        z2 = np.hstack([eta, np.broadcast_to(y, (len(eta), len(y)))])
        vals = np.exp(0.5 * f1(z1) + 0.5 * f2(z2)).reshape(grids[0].shape)
        integral = vals
        for ax in reversed(axes):
            integral = np.trapezoid(integral, ax, axis=-1)
        out[i] = float(integral) ** 2
    return out


def evaluate_density(k: KernelHD, phi, psi) -> np.ndarray:
    """nu(phi, psi) from the closed form."""
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    return np.exp(k.hd.measure_form()(np.hstack([phi, psi])))
