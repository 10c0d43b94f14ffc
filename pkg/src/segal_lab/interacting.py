"""Crude Monte Carlo for the Wick-ordered P(phi)_2 measure on a flat torus.

The field is sampled exactly at the mode cutoff |n| <= N, |k| <= K (the same
box as ``wick.cutoff_variance``) on the matching (2N+1) x (2K+1) grid, so the
grid values carry exactly the retained modes and the pointwise variance is c_N.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import determinants as det
from .modes import Truncation
from .wick import WickPolynomial, _box, covariance_split, wick_reorder

ORDERINGS = ("C", "C0")


class CutoffMismatch(ValueError):
    """Counterterms were computed at a different cutoff than the sample."""


@dataclass(frozen=True)
class MCConfig:
    m: float = 1.0
    R: float = 1.0
    L: float = 1.0
    n_max: int = 16
    P: tuple = (0.0, 0.0, 0.0, 0.0, 0.1)  # coefficients of :x^k: (ascending)
    n_samples: int = 100_000
    seed: int = 12345
    n_chains: int = 4
    ordering: str = "C"
    antithetic: bool = True
    batch: int = 8192

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("mass must be positive")
        if self.R <= 0 or self.L <= 0:
            raise ValueError("torus sides must be positive")
        if self.ordering not in ORDERINGS:
            raise ValueError(f"ordering must be one of {ORDERINGS}")
        if self.n_chains < 1 or self.n_samples < 2 * self.n_chains:
            raise ValueError("need at least two samples per chain")
        WickPolynomial(self.P).require_bounded_below()

    @property
    def k_max(self) -> int:
        return _box(self.R, self.L, self.n_max)[1]

    @property
    def grid_shape(self) -> tuple[int, int]:
        return 2 * self.n_max + 1, 2 * self.k_max + 1

    @property
    def area(self) -> float:
        return 2.0 * math.pi * self.R * self.L


@dataclass(frozen=True)
class GridField:
    """Samples phi(theta_i, t_j) with a leading batch axis, tagged with their cutoff."""

    values: np.ndarray  # (batch, n_theta, n_t)
    n_max: int
    k_max: int
    R: float
    L: float

    @property
    def cell_area(self) -> float:
        nt, nz = self.values.shape[-2:]
        return 2.0 * math.pi * self.R * self.L / (nt * nz)


def _spectral_scale(cfg: MCConfig) -> np.ndarray:
    nth, nt = cfg.grid_shape
    n = np.fft.fftfreq(nth, d=1.0 / nth) / cfg.R
    k = np.fft.fftfreq(nt, d=1.0 / nt) * 2.0 * math.pi / cfg.L
    lam = cfg.m**2 + n[:, None] ** 2 + k[None, :] ** 2
    return np.sqrt(nth * nt / (cfg.area * lam))


def sample_gff_torus(cfg: MCConfig, chain_seed, size: int | None = None) -> GridField:
    """Exact draws of the cutoff free field; ``chain_seed`` is an int or SeedSequence."""
    size = cfg.batch if size is None else size
    rng = np.random.default_rng(chain_seed)
    z = rng.standard_normal((size,) + cfg.grid_shape)
    phi = np.fft.ifft2(_spectral_scale(cfg) * np.fft.fft2(z)).real
    return GridField(phi, cfg.n_max, cfg.k_max, cfg.R, cfg.L)


def green_function(cfg: MCConfig, dtheta_steps: int = 0, dt_steps: int = 0) -> float:
    """Mode-sum two-point function at a grid separation (partial-sum oracle)."""
    nth, nt = cfg.grid_shape
    n = np.arange(-cfg.n_max, cfg.n_max + 1)
    k = np.arange(-cfg.k_max, cfg.k_max + 1)
    lam = cfg.m**2 + (n[:, None] / cfg.R) ** 2 + (2 * math.pi * k[None, :] / cfg.L) ** 2
    phase = 2 * math.pi * (n[:, None] * dtheta_steps / nth + k[None, :] * dt_steps / nt)
    return math.fsum((np.cos(phase) / lam).ravel()) / cfg.area


@dataclass(frozen=True)
class Ordering:
    """Wick-ordering constant at a given cutoff, with its provenance."""

    kind: str
    c: float
    n_max: int
    R: float
    L: float
    c_N: float
    C_f: float

    @classmethod
    def at_cutoff(cls, cfg: MCConfig, kind: str | None = None, m0: float | None = None) -> "Ordering":
        kind = cfg.ordering if kind is None else kind
        split = covariance_split(cfg.m, cfg.R, cfg.L, Truncation(cfg.n_max), m0)
        c = split.c_N if kind == "C" else split.c_N - split.C_f
        if c < 0:
            raise ValueError("C0 ordering constant is negative at this cutoff")
        return cls(kind, c, cfg.n_max, cfg.R, cfg.L, split.c_N, split.C_f)

    def bridge(self, P: WickPolynomial) -> WickPolynomial:
        """Re-express a C0-ordered P in C-ordering (only meaningful for kind C0)."""
        return wick_reorder(P, Fraction(self.c_N) - P.c)


def _check_cutoff(sample: GridField, ordering: Ordering):
    if (sample.n_max, sample.R, sample.L) != (ordering.n_max, ordering.R, ordering.L):
        raise CutoffMismatch(
            f"sample cutoff n_max={sample.n_max} (R={sample.R}, L={sample.L}) but ordering computed at "
            f"n_max={ordering.n_max} (R={ordering.R}, L={ordering.L})"
        )


def interaction(sample: GridField, P, ordering: Ordering) -> np.ndarray:
    """int :P(phi):_c dA for every sample in the batch (grid quadrature)."""
    _check_cutoff(sample, ordering)
    poly = WickPolynomial(tuple(P), Fraction(ordering.c))
    vals = poly(sample.values)
    # per-sample fsum keeps partition additivity at rounding level
    flat = vals.reshape(vals.shape[0], -1)
    return np.array([math.fsum(row) for row in flat]) * sample.cell_area


def fk_log_weight(sample: GridField, P, ordering: Ordering) -> np.ndarray:
    return -interaction(sample, P, ordering)


def fk_weight(sample: GridField, P, ordering: Ordering) -> np.ndarray:
    """exp(-int :P:), refusing to overflow."""
    lw = fk_log_weight(sample, P, ordering)
    if np.any(lw > 700.0):
        raise OverflowError("Feynman-Kac weight overflows; use fk_log_weight")
    return np.exp(lw)


@dataclass
class MCReport:
    estimate: float
    stderr: float
    effective_samples: float
    chain_means: list
    chain_stderrs: list
    flagged: bool
    seed: int
    n_samples: int
    cutoff: dict
    log_free: float | None = None
    log_weight_variance: float | None = None
    extras: dict = field(default_factory=dict)

    @property
    def log_Z(self) -> float:
        return (self.log_free or 0.0) + math.log(self.estimate)

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["log_Z"] = self.log_Z if self.estimate > 0 else None
        return d


def _chain_statistic(cfg: MCConfig, seq: np.random.SeedSequence, n: int, stat):
    """Per-unit values for one chain; units are antithetic pairs when enabled."""
    units = []
    remaining = n // 2 if cfg.antithetic else n
    child = np.random.default_rng(seq)
    while remaining > 0:
        size = min(cfg.batch, remaining)
        z = child.standard_normal((size,) + cfg.grid_shape)
        phi = np.fft.ifft2(_spectral_scale(cfg) * np.fft.fft2(z)).real
        g = GridField(phi, cfg.n_max, cfg.k_max, cfg.R, cfg.L)
        a = stat(g)
        if cfg.antithetic:
            b = stat(GridField(-phi, cfg.n_max, cfg.k_max, cfg.R, cfg.L))
            units.append(np.stack([a, b], axis=1))
        else:
            units.append(a[:, None])
        remaining -= size
    return np.concatenate(units)


def _reduce(per_chain: list[np.ndarray], log_domain: bool):
    """Pool chains; in log domain values are log-weights and the mean is taken stably."""
    shift = max(float(np.max(u)) for u in per_chain) if log_domain else 0.0
    unit_means = [np.exp(u - shift).mean(axis=1) if log_domain else u.mean(axis=1) for u in per_chain]
    pooled = np.concatenate(unit_means)
    est = pooled.mean()
    se = pooled.std(ddof=1) / math.sqrt(pooled.size)
    raw = np.concatenate([np.exp(u - shift).ravel() if log_domain else u.ravel() for u in per_chain])
    ess = float(raw.var(ddof=1) / se**2) if se > 0 else float(raw.size)
    cm = [float(u.mean()) for u in unit_means]
    cse = [float(u.std(ddof=1) / math.sqrt(u.size)) for u in unit_means]
    scale = math.exp(shift) if log_domain else 1.0
    flagged = any(abs(c - est) > 4.0 * s for c, s in zip(cm, cse) if s > 0)
    return est * scale, se * scale, ess, [c * scale for c in cm], [s * scale for s in cse], flagged


def _run(cfg: MCConfig, stat, log_domain: bool, ordering: Ordering) -> MCReport:
    per_chain_n = cfg.n_samples // cfg.n_chains
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_chains)
    per_chain = [_chain_statistic(cfg, s, per_chain_n, stat) for s in children]
    est, se, ess, cm, cse, flagged = _reduce(per_chain, log_domain)
    lw_var = float(np.concatenate([u.ravel() for u in per_chain]).var()) if log_domain else None
    if se == 0.0:
        se = float(np.finfo(float).tiny)  # all weights identical (P = 0)
    cutoff = {
        "n_max": cfg.n_max, "k_max": cfg.k_max, "grid": list(cfg.grid_shape),
        "ordering": ordering.kind, "c": ordering.c, "c_N": ordering.c_N, "C_f": ordering.C_f,
    }
    n_used = per_chain_n // 2 * 2 * cfg.n_chains if cfg.antithetic else per_chain_n * cfg.n_chains
    return MCReport(est, se, ess, cm, cse, flagged, cfg.seed, n_used, cutoff, None, lw_var)


def mc_partition(cfg: MCConfig, regime: str = det.TRUNCATED) -> MCReport:
    """E[exp(-int :P:)] under the cutoff free field, times the free torus partition function.

    ``log_free`` is the regime-tagged free prefactor (-1/2 log det); the
    estimate itself is the normalised Feynman-Kac mass.
    """
    ordering = Ordering.at_cutoff(cfg)
    P = tuple(cfg.P)
    rep = _run(cfg, lambda g: fk_log_weight(g, P, ordering), True, ordering)
    rep.log_free = det.log_partition_torus(cfg.m, cfg.R, cfg.L, regime, Truncation(cfg.n_max))
    rep.extras["regime"] = regime
    if ordering.kind == "C0":
        bridged = ordering.bridge(WickPolynomial(P, Fraction(ordering.c)))
        rep.extras["bridge_to_C"] = [float(x) for x in bridged.coeffs]
    return rep


def mc_wick_moment(cfg: MCConfig, degree: int) -> MCReport:
    """Spatial average (1/A) int :phi^degree:_c dA under the free field (mean zero for C-ordering)."""
    ordering = Ordering.at_cutoff(cfg)
    coeffs = (0.0,) * degree + (1.0,)
    area = cfg.area
    return _run(cfg, lambda g: interaction(g, coeffs, ordering) / area, False, ordering)


def mc_two_point(cfg: MCConfig, dtheta_steps: int = 0, dt_steps: int = 0) -> MCReport:
    """Grid-averaged phi(x) phi(x + delta); compare with ``green_function``."""
    ordering = Ordering.at_cutoff(cfg)

    def stat(g):
        shifted = np.roll(g.values, shift=(-dtheta_steps, -dt_steps), axis=(1, 2))
        return (g.values * shifted).mean(axis=(1, 2))

    return _run(cfg, stat, False, ordering)


@dataclass(frozen=True)
class LocalityReport:
    exact_residual: float  # rational reduction: whole minus sum of pieces, exactly
    float_residual_ulps: float  # fsum reduction, in ulps of sum |integrand|
    n_pieces: int
    n_draws: int


def _exact_sum(values) -> Fraction:
    return sum((Fraction(float(v)) for v in values), Fraction(0))


def locality_check(cfg: MCConfig, cuts, n_draws: int = 16) -> LocalityReport:
    """Additivity of the interaction over a partition of the torus into cylinders.

    ``cuts`` are t-grid row indices; each piece collects the grid cells with
    t-index in [cut_i, cut_{i+1}).  Cells are never split, so with an exact
    (rational) reduction the pieces add up to the whole with no error at all;
    the float reduction is reported alongside.
    """
    nt = cfg.grid_shape[1]
    if any(c != int(c) for c in cuts):
        raise ValueError("cuts must be t-grid indices")
    cuts = sorted(int(c) for c in cuts)
    if not cuts or any(not 0 < c < nt for c in cuts) or len(set(cuts)) != len(cuts):
        raise ValueError(f"cuts must be distinct interior t-grid indices in 1..{nt - 1}")
    ordering = Ordering.at_cutoff(cfg)
    g = sample_gff_torus(cfg, cfg.seed, n_draws)
    poly = WickPolynomial(tuple(cfg.P), Fraction(ordering.c))
    vals = poly(g.values) * g.cell_area
    bounds = [0] + cuts + [nt]
    exact, flt = 0.0, 0.0
    for v in vals:
        whole = _exact_sum(v.ravel())
        parts = [_exact_sum(v[:, a:b].ravel()) for a, b in zip(bounds, bounds[1:])]
        exact = max(exact, abs(float(whole - sum(parts))))
        fw = math.fsum(v.ravel())
        fp = math.fsum([math.fsum(v[:, a:b].ravel()) for a, b in zip(bounds, bounds[1:])])
        scale = math.ulp(math.fsum(np.abs(v).ravel()))
        flt = max(flt, abs(fw - fp) / scale)
    return LocalityReport(exact, flt, len(bounds) - 1, n_draws)


def write_trace_csv(path, values, header=("index", "value")):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, v in enumerate(np.ravel(values)):
            w.writerow([i, repr(float(v))])
