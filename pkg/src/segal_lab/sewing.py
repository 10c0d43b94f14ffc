"""Free amplitudes of flat cylinders as Gaussian half-density kernels, and their sewing.

For a cylinder Sigma of height L, the amplitude is

    Z(Sigma)(phi_out, phi_in) = det(m^2 + Delta on the double)^{-1/4} * nu^{1/2}

where nu is the probability law of the boundary values of the free field on
the double (a torus of t-circumference 2L).  Mode by mode, nu is centred
Gaussian with precision w_n * 2 D_n, where D_n is the unit-weight DtN block
and w_n the weight of a real coordinate of mode n.  Each kernel is stored
with unit mass, so the whole normalisation sits in ``log_prefactor``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import determinants as det
from .geometry_dtn import (
    CylinderGeometry,
    dtn_cylinder,
    interval_energy_matrix,
    mode_weight,
    multiplicity,
    omega,
    schur_onto,
)
from .halfdensity import GaussianHD, KernelHD, compose, kernel_log_trace
from .modes import Truncation

TRUNCATED = det.TRUNCATED
ZETA = det.ZETA


def _mode_kernel(geom: CylinderGeometry, m: float, n: int) -> KernelHD:
    k = multiplicity(n)
    block = dtn_cylinder(geom, m, n, weight=mode_weight(geom.R, n))
    # variables ordered (out coordinates, in coordinates); block is symmetric in out/in
    Q = np.kron(2.0 * block.matrix, np.eye(k))
    return KernelHD(GaussianHD(Q, np.zeros(2 * k), 0.0), k)


def _mode_log_prefactor(m: float, R: float, L: float, n: int) -> float:
    """-1/4 log det_1D(circle of length 2L) for every real coordinate of mode n."""
    w = float(omega(m, R, n))
    return -0.25 * multiplicity(n) * float(det.log_det_circle_1d(w, 2.0 * L))


@dataclass(frozen=True)
class Amplitude:
    kernels: tuple  # kernels[n], n = 0..n_max, each of unit mass
    log_prefactor: float
    regime: str
    m: float
    R: float
    L: float | None  # total height for cylinders, None when unknown
    in_label: str = "in"
    out_label: str = "out"

    @property
    def n_max(self) -> int:
        return len(self.kernels) - 1

    def adjoint(self) -> "Amplitude":
        return Amplitude(
            tuple(k.adjoint() for k in self.kernels),
            self.log_prefactor, self.regime, self.m, self.R, self.L, self.out_label, self.in_label,
        )

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "m": self.m,
            "R": self.R,
            "L": self.L,
            "n_max": self.n_max,
            "log_prefactor": self.log_prefactor,
            "in": self.in_label,
            "out": self.out_label,
            "modes": [
                {"n": n, "Q": k.hd.Q.tolist(), "center": k.hd.center.tolist(), "log_mass": k.log_mass}
                for n, k in enumerate(self.kernels)
            ],
        }


@dataclass(frozen=True)
class ClosedPartition:
    log_value: float
    regime: str
    n_max: int

    def __post_init__(self):
        if not math.isfinite(self.log_value):
            raise ValueError("partition function must be finite and positive")

    @property
    def value(self) -> float:
        return math.exp(self.log_value)


def amplitude_free(geom: CylinderGeometry, m: float, trunc: Truncation, regime: str = TRUNCATED) -> Amplitude:
    """Free amplitude of a cylinder.

    ``truncated``: prefactor summed over the retained modes (exact 1-D determinants).
    ``zeta``: prefactor -1/4 log det_zeta of the doubled torus; refused until the
    regularized omega sum has been validated in this process.
    """
    if not m > 0:
        raise ValueError("mass must be positive")
    kernels = tuple(_mode_kernel(geom, m, n) for n in range(trunc.n_max + 1))
    if regime == TRUNCATED:
        lp = math.fsum(_mode_log_prefactor(m, geom.R, geom.L, n) for n in range(trunc.n_max + 1))
    elif regime == ZETA:
        det.require_validated()
        lp = -0.25 * det.zeta_logdet_torus(m, geom.R, 2.0 * geom.L)
    else:
        raise ValueError(f"unknown regime {regime!r}")
    return Amplitude(kernels, lp, regime, float(m), geom.R, geom.L, geom.in_label, geom.out_label)


def sew(a2: Amplitude, a1: Amplitude) -> Amplitude:
    """a2 o a1: integrate out the circle shared by a1's output and a2's input."""
    if a1.n_max != a2.n_max:
        raise ValueError(f"truncation mismatch: {a1.n_max} vs {a2.n_max}")
    if a1.R != a2.R:
        raise ValueError(f"radius mismatch: {a1.R} vs {a2.R}")
    if a1.regime != a2.regime:
        raise ValueError("cannot sew amplitudes from different determinant regimes")
    if a1.m != a2.m:
        raise ValueError("mass mismatch")
    kernels, masses = [], []
    for k2, k1 in zip(a2.kernels, a1.kernels):
        k = compose(k2, k1)
        masses.append(k.log_mass)
        kernels.append(KernelHD(GaussianHD(k.hd.Q, k.hd.center, 0.0), k.d_out))
    lp = a1.log_prefactor + a2.log_prefactor + 0.5 * math.fsum(masses)
    L = None if a1.L is None or a2.L is None else a1.L + a2.L
    return Amplitude(tuple(kernels), lp, a1.regime, a1.m, a1.R, L, a1.in_label, a2.out_label)


def trace_amplitude(a: Amplitude) -> ClosedPartition:
    """Close the cylinder into a torus: log trace = prefactor + sum of per-mode kernel traces."""
    logs = [kernel_log_trace(k) for k in a.kernels]
    return ClosedPartition(a.log_prefactor + math.fsum(logs), a.regime, a.n_max)


def torus_partition(m: float, R: float, L: float, trunc: Truncation, regime: str = TRUNCATED) -> ClosedPartition:
    """Free torus partition function -1/2 log det, computed without any kernels."""
    return ClosedPartition(det.log_partition_torus(m, R, L, regime, trunc), regime, trunc.n_max)


def amplitude_residual(a: Amplitude, b: Amplitude) -> dict:
    """Relative kernel-parameter error and absolute prefactor error between two amplitudes."""
    if a.n_max != b.n_max:
        raise ValueError("truncation mismatch")
    rel = 0.0
    for ka, kb in zip(a.kernels, b.kernels):
        scale = np.max(np.abs(kb.hd.Q))
        rel = max(rel, float(np.max(np.abs(ka.hd.Q - kb.hd.Q)) / scale))
        rel = max(rel, float(np.max(np.abs(ka.hd.center - kb.hd.center))))
        rel = max(rel, abs(ka.log_mass - kb.log_mass))
    return {"kernel": rel, "prefactor": abs(a.log_prefactor - b.log_prefactor)}


def boundary_variance(a: Amplitude, n: int) -> float:
    """Variance of one real coordinate of mode n at the out-circle under |Z|^2 (normalised)."""
    cov = np.linalg.inv(a.kernels[n].hd.Q)
    return float(cov[0, 0])


def identity_limit_study(a: Amplitude, m: float, heights=(0.5, 0.1, 0.02, 0.004)) -> list[dict]:
    """How far sewing a short cylinder onto ``a`` moves it, as the height shrinks.

    There is no L = 0 identity; this only reports the trend.
    """
    out = []
    trunc = Truncation(a.n_max)
    for eps in heights:
        short = amplitude_free(CylinderGeometry(a.R, eps), m, trunc, a.regime)
        s = sew(short, a)
        r = amplitude_residual(s, a)
        out.append({"height": eps, **r})
    return out


# --------------------------------------------------------------------------
# disintegration of the bulk Gaussian on a finite t-grid


def _ring(w: float, L: float, n_half: int) -> np.ndarray:
    return det._ring_energy_matrix(w, L, n_half)


@dataclass
class DisintegrationReport:
    n_max: int
    t_points: int
    conditional_mean: float
    conditional_covariance: float
    boundary_precision_discrete: float
    boundary_precision_continuum: float  # O(h^2) discretization error, reported only
    fourier_identity: float
    zero_data: float
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _char_log(prec: np.ndarray, f: np.ndarray) -> np.ndarray:
    """log E exp(i f.x) for x ~ N(0, prec^{-1}); f has shape (..., d)."""
    cov = np.linalg.inv(prec)
    return -0.5 * np.einsum("...i,ij,...j->...", f, cov, f)


def disintegration_check(
    geom: CylinderGeometry,
    m: float,
    trunc: Truncation,
    t_points: int = 64,
    cap_length: float | None = None,
    n_covectors: int = 20,
    seed: int = 0,
) -> DisintegrationReport:
    """Conditioning identities for the free field on the double of ``geom``.

    The double is a ring of ``t_points`` nodes (spacing 2L / t_points); the cut
    circles sit at nodes 0 and t_points/2.  Per mode and real coordinate:

    * conditional mean given boundary data: -K_II^{-1} K_IB b (discrete Helmholtz
      extension) against Sigma_IB Sigma_BB^{-1} b computed from the covariance;
    * conditional covariance against the Dirichlet Green's matrix K_II^{-1};
    * boundary precision Sigma_BB^{-1} against the discrete DtN of both halves;
    * the two Fourier-side expressions for the law of (phi1, phi2, phi1*) on
      the double of (geom o cap), cap of height ``cap_length`` clamped at its
      far end.
    """
    if t_points % 2:
        raise ValueError("t_points must be even")
    n_half = t_points // 2
    L = geom.L
    L0 = L if cap_length is None else cap_length
    rng = np.random.default_rng(seed)
    res_mean = res_cov = res_bp = res_bp_cont = res_zero = 0.0
    B = np.array([0, n_half])
    I = np.setdiff1d(np.arange(t_points), B)
    log_lhs = np.zeros(n_covectors)
    log_rhs = np.zeros(n_covectors)
    for n in range(trunc.n_max + 1):
        w = float(omega(m, geom.R, n))
        wt = mode_weight(geom.R, n)
        K = wt * _ring(w, L, n_half)
        Sigma = np.linalg.inv(K)
        KII = K[np.ix_(I, I)]
        KIB = K[np.ix_(I, B)]
        b = rng.standard_normal(2)
        mean_prec = -np.linalg.solve(KII, KIB @ b)
        mean_cov = Sigma[np.ix_(I, B)] @ np.linalg.solve(Sigma[np.ix_(B, B)], b)
        res_mean = max(res_mean, float(np.max(np.abs(mean_prec - mean_cov)) / np.max(np.abs(mean_prec))))
        cond = Sigma[np.ix_(I, I)] - Sigma[np.ix_(I, B)] @ np.linalg.solve(Sigma[np.ix_(B, B)], Sigma[np.ix_(B, I)])
        green = np.linalg.inv(KII)
        res_cov = max(res_cov, float(np.max(np.abs(cond - green)) / np.max(np.abs(green))))
        res_zero = max(res_zero, float(np.max(np.abs(-np.linalg.solve(KII, KIB @ np.zeros(2))))))
        bp = np.linalg.inv(Sigma[np.ix_(B, B)])
        two_d = 2.0 * wt * schur_onto(interval_energy_matrix(w, L, n_half), [0, n_half])
        res_bp = max(res_bp, float(np.max(np.abs(bp - two_d)) / np.max(np.abs(two_d))))
        cont = 2.0 * dtn_cylinder(geom, m, n, weight=wt).matrix
        res_bp_cont = max(res_bp_cont, float(np.max(np.abs(bp - cont)) / np.max(np.abs(cont))))

        # law of (phi1, phi2, phi1*) on the double of geom o cap
        lhs_prec, pieces = _glued_three_circle_precision(w, L0, L, n_half)
        lhs_prec = wt * lhs_prec
        beta, delta, D3 = (wt * pieces[k] for k in ("beta", "delta", "D3"))
        for _ in range(multiplicity(n)):
            f = rng.standard_normal((n_covectors, 3)) / math.sqrt(wt)
            log_lhs += _char_log(lhs_prec, f)
            f1, f2, f1s = f[:, 0], f[:, 1], f[:, 2]
            # phi2 ~ N(0, 1/(2 D3)); given phi2, phi1 and phi1* are iid N(-beta phi2/delta, 1/delta)
            g = f2 - beta * (f1 + f1s) / delta
            log_rhs += -0.5 * ((f1**2 + f1s**2) / delta + g**2 / (2.0 * D3))
    fourier = float(np.max(np.abs(np.exp(log_lhs) - np.exp(log_rhs)) / np.exp(log_rhs)))
    return DisintegrationReport(
        trunc.n_max, t_points, res_mean, res_cov, res_bp, res_bp_cont, fourier, res_zero,
        {"cap_length": L0},
    )


def _glued_three_circle_precision(w: float, L0: float, L: float, n_seg: int):
    """Precision of (phi1, phi2, phi1*) on clamp-L0-phi1-L-phi2-L-phi1*-L0-clamp, and the
    closed-form pieces (beta, delta, D3) assembled from the separate discrete DtN maps."""
    K, ends = det._chain_energy_matrix(w, [L0, L, L, L0], n_seg)
    K = K[1:-1, 1:-1]
    keep = [ends[1] - 1, ends[2] - 1, ends[3] - 1]
    dense = schur_onto(K, keep)
    cap = interval_energy_matrix(w, L0, n_seg)[1:, 1:]
    D1 = schur_onto(cap, [n_seg - 1])[0, 0]
    cyl = schur_onto(interval_energy_matrix(w, L, n_seg), [n_seg, 0])  # (phi2, phi1)
    A, Bv, D = cyl[0, 0], cyl[0, 1], cyl[1, 1]
    delta = D + D1
    return dense, {"beta": Bv, "delta": delta, "D3": A - Bv * Bv / delta}


def helmholtz_extension(w: float, L: float, a: float, b: float, t) -> np.ndarray:
    """Continuum solution of -u'' + w^2 u = 0 on [0, L], u(0) = a, u(L) = b."""
    t = np.asarray(t, dtype=float)
    return (a * np.sinh(w * (L - t)) + b * np.sinh(w * t)) / np.sinh(w * L)
