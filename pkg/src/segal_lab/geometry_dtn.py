"""Flat cylinders, their Dirichlet-to-Neumann blocks, and Schur-complement gluing.

On S^1_R x [0, L] the Helmholtz equation (m^2 + Delta) u = 0 separates in
Fourier modes; mode n obeys u'' = omega_n^2 u with omega_n = (m^2 + n^2/R^2)^{1/2}.
Its DtN map, in coordinates (value on circle 1, value on circle 2), is

    omega_n * [[coth(omega_n L), -csch(omega_n L)],
               [-csch(omega_n L), coth(omega_n L)]]

with outward normals on both circles.  Quadratic forms on boundary fields pick
up a per-coordinate weight from int (.) R dtheta, see ``mode_weight``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .modes import Truncation


@dataclass(frozen=True)
class CylinderGeometry:
    R: float
    L: float
    in_label: str = "in"
    out_label: str = "out"

    def __post_init__(self):
        if not (self.R > 0 and self.L > 0):
            raise ValueError(f"cylinder needs R > 0 and L > 0, got R={self.R}, L={self.L}")

    def reversed(self) -> "CylinderGeometry":
        return CylinderGeometry(self.R, self.L, self.out_label, self.in_label)

    def glue(self, other: "CylinderGeometry") -> "CylinderGeometry":
        """other o self: ``self`` first, then ``other`` on top."""
        if self.R != other.R:
            raise ValueError(f"radius mismatch: {self.R} vs {other.R}")
        return CylinderGeometry(self.R, self.L + other.L, self.in_label, other.out_label)


def omega(m: float, R: float, n) -> np.ndarray | float:
    return np.sqrt(m * m + (np.asarray(n, dtype=float) / R) ** 2)


def mode_weight(R: float, n: int) -> float:
    """Weight of one real coordinate of mode n in int_{S^1_R} phi psi R dtheta."""
    return 2.0 * np.pi * R if n == 0 else 4.0 * np.pi * R


def multiplicity(n: int) -> int:
    """Number of real coordinates carried by mode n (n and -n together)."""
    return 1 if n == 0 else 2


@dataclass(frozen=True)
class DtNBlock:
    n: int
    matrix: np.ndarray

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if M.shape[0] != M.shape[1] or M.shape[0] not in (1, 2):
            raise ValueError(f"DtN block must be 1x1 or 2x2, got {M.shape}")
        if abs(M[0, -1] - M[-1, 0]) > 1e-12 * np.abs(M).max():
            raise ValueError("DtN block is not symmetric")
        object.__setattr__(self, "matrix", M)

    @property
    def diag(self) -> float:
        return float(self.matrix[0, 0])

    @property
    def offdiag(self) -> float:
        return float(self.matrix[0, 1])

    def is_positive_definite(self) -> bool:
        return bool(np.all(np.linalg.eigvalsh(self.matrix) > 0))

    def swapped(self) -> "DtNBlock":
        return DtNBlock(self.n, self.matrix[::-1, ::-1])

    def scaled(self, c: float) -> "DtNBlock":
        return DtNBlock(self.n, c * self.matrix)

    def split(self):
        """(A, B, D) with A on the first (outgoing) circle."""
        M = self.matrix
        return M[0, 0], M[0, 1], M[1, 1]


def _coth_csch(x):
    x = np.asarray(x, dtype=float)
    e = np.exp(-2.0 * x)
    coth = (1.0 + e) / (1.0 - e)
    csch = 2.0 * np.exp(-x) / (1.0 - e)
    return coth, csch


def dtn_cylinder(geom: CylinderGeometry, m: float, n: int, weight: float = 1.0) -> DtNBlock:
    if m < 0:
        raise ValueError("mass must be non-negative")
    if m == 0 and n == 0:
        raise ValueError("mode (m, n) = (0, 0) has no Helmholtz DtN block")
    w = float(omega(m, geom.R, n))
    coth, csch = _coth_csch(w * geom.L)
    M = weight * w * np.array([[coth, -csch], [-csch, coth]])
    return DtNBlock(n, M)


def dtn_clamped(geom: CylinderGeometry, m: float, n: int, weight: float = 1.0) -> DtNBlock:
    """1x1 DtN of a cylinder whose in-circle carries a Dirichlet (zero) condition."""
    if m == 0 and n == 0:
        raise ValueError("mode (m, n) = (0, 0) has no Helmholtz DtN block")
    w = float(omega(m, geom.R, n))
    coth, _ = _coth_csch(w * geom.L)
    return DtNBlock(n, [[weight * w * coth]])


@dataclass(frozen=True)
class BlockOperator:
    blocks: tuple[DtNBlock, ...]  # blocks[n] for n = 0..n_max

    @property
    def n_max(self) -> int:
        return len(self.blocks) - 1

    def __getitem__(self, n: int) -> DtNBlock:
        return self.blocks[n]

    def __iter__(self):
        return iter(self.blocks)


def cylinder_operator(geom: CylinderGeometry, m: float, trunc: Truncation, weighted=False) -> BlockOperator:
    return BlockOperator(
        tuple(
            dtn_cylinder(geom, m, n, mode_weight(geom.R, n) if weighted else 1.0)
            for n in range(trunc.n_max + 1)
        )
    )


def schur_compose(D2, D1):
    """Eliminate the shared circle between D2 (out, shared) and D1 (shared[, in]).

    D1 may be a 1x1 block (a cap: no further boundary) or a 2x2 cylinder block
    in (shared, in) coordinates.  Returns A - B (D1 + D)^{-1} B^T in the cap
    case and the 2x2 glued block otherwise.  BlockOperators compose mode by mode.
    """
    if isinstance(D2, BlockOperator):
        if not isinstance(D1, BlockOperator) or D1.n_max != D2.n_max:
            raise ValueError("block operators must share a truncation")
        return BlockOperator(tuple(schur_compose(b2, b1) for b2, b1 in zip(D2, D1)))
    n = D2.n if isinstance(D2, DtNBlock) else 0
    M2 = D2.matrix if isinstance(D2, DtNBlock) else np.atleast_2d(np.asarray(D2, dtype=float))
    M1 = D1.matrix if isinstance(D1, DtNBlock) else np.atleast_2d(np.asarray(D1, dtype=float))
    A, B, D = M2[0, 0], M2[0, 1], M2[1, 1]
    pivot = D + M1[0, 0]
    if not pivot > 0:
        raise ValueError("D1 + D is not positive definite")
    if M1.shape == (1, 1):
        return DtNBlock(n, [[A - B * B / pivot]])
    b1, d1 = M1[0, 1], M1[1, 1]
    out = np.array([[A - B * B / pivot, -B * b1 / pivot], [-b1 * B / pivot, d1 - b1 * b1 / pivot]])
    return DtNBlock(n, out)


def lagrangian_residual(D2: DtNBlock, D1_cap: DtNBlock, phi2: float = 1.0) -> float:
    """Check the pair relations that define the composed Lagrangian.

    With phi1 the Helmholtz value on the shared circle given phi2,
    D3 phi2 = A phi2 + B phi1 and -(B phi2 + D phi1) = D1 phi1.
    """
    A, B, D = D2.split()
    d1 = D1_cap.matrix[0, 0]
    phi1 = -B * phi2 / (d1 + D)
    d3 = schur_compose(D2, D1_cap).matrix[0, 0]
    r1 = d3 * phi2 - (A * phi2 + B * phi1)
    r2 = -(B * phi2 + D * phi1) - d1 * phi1
    return float(max(abs(r1), abs(r2)) / max(abs(d3 * phi2), 1e-300))


def glued_dtn(g1: CylinderGeometry, g2: CylinderGeometry, m: float, n: int, weight: float = 1.0) -> DtNBlock:
    """Helmholtz form of g2 o g1 in (phi2, phi1), g1's in-circle clamped.

    Returns [[alpha, beta], [beta, delta]] with alpha = A, beta = B and
    delta = D_{g1} + D (the jump operator across the sewing circle).
    """
    if g1.R != g2.R:
        raise ValueError(f"radius mismatch: {g1.R} vs {g2.R}")
    A, B, D = dtn_cylinder(g2, m, n, weight).split()
    d1 = dtn_clamped(g1, m, n, weight).matrix[0, 0]
    return DtNBlock(n, [[A, B], [B, D + d1]])


def verify_block_factorization(M, split: int | None = None) -> float:
    """Relative residual of det(2M) - det(2D) det(2(A - B D^{-1} B^T))."""
    if isinstance(M, BlockOperator):
        return max(verify_block_factorization(b) for b in M)
    M = M.matrix if isinstance(M, DtNBlock) else np.asarray(M, dtype=float)
    k = M.shape[0] // 2 if split is None else split
    A, B, D = M[:k, :k], M[:k, k:], M[k:, k:]
    S = A - B @ np.linalg.solve(D, B.T)
    lhs = np.linalg.det(2 * M)
    rhs = np.linalg.det(2 * D) * np.linalg.det(2 * S)
    return float(abs(lhs - rhs) / abs(lhs))


def bvp_oracle(omega: float, L: float, a: float, b: float, h: float) -> tuple[float, float]:
    """Finite-difference solve of u'' = omega^2 u, u(0) = a, u(L) = b.

    Returns the outward normal derivatives (-u'(0), u'(L)) using one-sided
    second-order stencils.
    """
    if not omega > 0:
        raise ValueError("omega must be positive")
    if not h < L / 8:
        raise ValueError("grid spacing must satisfy h < L/8")
    N = int(round(L / h))
    h = L / N
    k = N - 1  # interior unknowns
    ab = np.empty((3, k))
    ab[0, :] = 1.0
    ab[1, :] = -(2.0 + (omega * h) ** 2)
    ab[2, :] = 1.0
    rhs = np.zeros(k)
    rhs[0] -= a
    rhs[-1] -= b
    inner = solve_banded((1, 1), ab, rhs)
    u = np.concatenate([[a], inner, [b]])
    du0 = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
    duL = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)
    return float(-du0), float(duL)


def bvp_richardson(omega: float, L: float, a: float, b: float, h: float, levels: int = 3) -> tuple[float, float]:
    """Richardson table over h, h/2, ..., eliminating error terms h^2, h^3, ... in turn."""
    n0 = int(math.ceil(L / h))  # exact halving of the grid needs h = L / n0
    rows = [np.array(bvp_oracle(omega, L, a, b, L / (n0 * 2**k))) for k in range(levels + 1)]
    for order in range(2, 2 + levels):
        rows = [(2**order * fine - coarse) / (2**order - 1) for coarse, fine in zip(rows, rows[1:])]
    return float(rows[0][0]), float(rows[0][1])


def interval_energy_matrix(omega: float, L: float, n_intervals: int) -> np.ndarray:
    """Matrix of sum (u_{i+1} - u_i)^2/h + h omega^2 sum' u_i^2 on N+1 nodes (trapezoid ends)."""
    N = n_intervals
    h = L / N
    K = np.zeros((N + 1, N + 1))
    i = np.arange(N)
    K[i, i] += 1.0 / h
    K[i + 1, i + 1] += 1.0 / h
    K[i, i + 1] -= 1.0 / h
    K[i + 1, i] -= 1.0 / h
    mass = np.full(N + 1, h)
    mass[[0, -1]] = h / 2
    K[np.diag_indices(N + 1)] += omega**2 * mass
    return K


def schur_onto(K: np.ndarray, keep) -> np.ndarray:
    """Schur complement of K onto the index set ``keep``."""
    keep = np.asarray(keep)
    rest = np.setdiff1d(np.arange(K.shape[0]), keep)
    Kkk = K[np.ix_(keep, keep)]
    Kkr = K[np.ix_(keep, rest)]
    Krr = K[np.ix_(rest, rest)]
    return Kkk - Kkr @ np.linalg.solve(Krr, Kkr.T)


def dtn_discrete(omega: float, L: float, n_intervals: int, weight: float = 1.0) -> np.ndarray:
    """DtN block of the finite-difference energy; converges to the continuum block as O(h^2)."""
    K = interval_energy_matrix(omega, L, n_intervals)
    S = schur_onto(K, [0, n_intervals])
    return weight * S
