"""The ten acceptance criteria, at their stated tolerances.

Each test prints one PASS/FAIL line (also collected into the terminal
summary).  Run on its own with ``pytest tests/test_acceptance.py -v -s``.
"""
import itertools
import math
import time

import numpy as np
import pytest

from segal_lab import determinants as det
from segal_lab.geometry_dtn import CylinderGeometry, dtn_cylinder, schur_compose
from segal_lab.halfdensity import GaussianHD, KernelHD, compose, compose_numeric, evaluate_density
from segal_lab.interacting import MCConfig, locality_check, mc_partition, mc_wick_moment
from segal_lab.modes import Truncation, Verdict, hellinger_affinity, kakutani_report, mode_measure
from segal_lab.sewing import ZETA, amplitude_free, amplitude_residual, disintegration_check, sew, torus_partition, trace_amplitude
from segal_lab.wick import WickPolynomial, expectation, hermite_wick, poly_mul, wick_basis_from_monomials, wick_reorder

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # collected from another rootdir
    ACCEPTANCE_LINES = {}


def report(k, name, ok, detail):
    line = f"criterion {k:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES[k] = line
    print(line)
    assert ok, line


def test_criterion_01_cylinder_semigroup():
    t0 = time.perf_counter()
    worst = 0.0
    grid = np.geomspace(0.1, 20.0, 5)
    lengths = np.geomspace(0.1, 5.0, 5)
    for w, L1, L2 in itertools.product(grid, lengths, lengths):
        one = lambda L: dtn_cylinder(CylinderGeometry(1.0, L), w, 0)
        c = schur_compose(one(L2), one(L1)).matrix
        d = one(L1 + L2).matrix
        worst = max(worst, float(np.max(np.abs(c - d)) / np.max(np.abs(d))))
    dt = time.perf_counter() - t0
    report(1, "cylinder semigroup", worst < 1e-10 and dt < 1.0, f"max rel err {worst:.2e} (<1e-10), {dt:.2f}s (<1s)")


def test_criterion_02_free_sewing():
    t0 = time.perf_counter()
    worst_k = worst_p = 0.0
    for n_max in (8, 32):
        t = Truncation(n_max)
        for L1, L2 in [(1.0, 1.0), (0.4, 1.7)]:
            s = sew(amplitude_free(CylinderGeometry(1.0, L2), 1.0, t), amplitude_free(CylinderGeometry(1.0, L1), 1.0, t))
            r = amplitude_residual(s, amplitude_free(CylinderGeometry(1.0, L1 + L2), 1.0, t))
            worst_k, worst_p = max(worst_k, r["kernel"]), max(worst_p, r["prefactor"])
    dt = time.perf_counter() - t0
    ok = worst_k < 1e-10 and worst_p < 1e-9 and dt < 5.0
    report(2, "free sewing", ok, f"kernel {worst_k:.2e} (<1e-10), prefactor {worst_p:.2e} (<1e-9), {dt:.2f}s (<5s)")


def test_criterion_03_trace_identity():
    t0 = time.perf_counter()
    det.validate_regularized_sum()
    t = Truncation(32)
    trunc_err = zeta_err = 0.0
    for L in (0.5, 1.0, 2.0):
        g = CylinderGeometry(1.0, L)
        trunc_err = max(trunc_err, abs(trace_amplitude(amplitude_free(g, 1.0, t)).log_value
                                       - torus_partition(1.0, 1.0, L, t).log_value))
        zeta_err = max(zeta_err, abs(trace_amplitude(amplitude_free(g, 1.0, t, ZETA)).log_value
                                     - torus_partition(1.0, 1.0, L, t, ZETA).log_value))
    dt = time.perf_counter() - t0
    ok = trunc_err < 1e-9 and zeta_err < 1e-5 and dt < 10.0
    report(3, "trace identity", ok, f"truncated {trunc_err:.2e} (<1e-9), zeta {zeta_err:.2e} (<1e-5), {dt:.2f}s (<10s)")


def test_criterion_04_determinant_gluing():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    t = Truncation(8)
    for _ in range(50):
        L1, L2 = rng.uniform(0.2, 3.0, 2)
        m = rng.uniform(0.3, 3.0)
        g1, g2 = CylinderGeometry(1.0, L1), CylinderGeometry(1.0, L2)
        worst = max(worst, det.bfk_composition_identity(g1, g2, m, t, n_t=16).residual)
        worst = max(worst, det.bfk_double_identity(g2, m, t, n_t=16).residual)
    dt = time.perf_counter() - t0
    report(4, "determinant gluing", worst < 1e-9 and dt < 10.0, f"max residual {worst:.2e} over 50 draws (<1e-9), {dt:.2f}s (<10s)")


def test_criterion_05_anomaly():
    ladder = (8, 16, 32, 64)
    worst_64 = 0.0
    monotone = True
    for L1, L2 in [(1.0, 1.7), (1.5, 3.0)]:
        g1, g2 = CylinderGeometry(1.0, L1), CylinderGeometry(1.0, L2)
        vals = [det.anomaly(g1, g2, 1.0, Truncation(n)).log_F for n in ladder]
        monotone &= all(a > b for a, b in zip(vals, vals[1:]))
        worst_64 = max(worst_64, vals[-1])
    report(5, "multiplicative anomaly", worst_64 < 1e-6 and monotone,
           f"|log F| at n_max=64 {worst_64:.2e} (<1e-6), monotone={monotone}")


def test_criterion_06_disintegration():
    r = disintegration_check(CylinderGeometry(1.0, 1.0), 1.0, Truncation(16), t_points=64, n_covectors=20)
    ok = r.conditional_mean < 1e-10 and r.conditional_covariance < 1e-10 and r.fourier_identity < 1e-9
    report(6, "disintegration", ok,
           f"mean {r.conditional_mean:.2e}, cov {r.conditional_covariance:.2e} (<1e-10), fourier {r.fourier_identity:.2e} (<1e-9)")


def test_criterion_07_kakutani():
    verdicts_ok, lam_fits = True, []
    for d in range(1, 6):
        rep = kakutani_report(0.0, 1.0, d)
        verdicts_ok &= rep.verdict is (Verdict.EQUIVALENT if d <= 3 else Verdict.DISJOINT)
        lam_fits.append(rep.lambda_exponent)
    t = Truncation(1)
    circle = hellinger_affinity(mode_measure(0.0, 1.0, t), mode_measure(1.0, 1.0, t), 4096).tail_exponent
    lam_ok = all(abs(x + 2.0) <= 0.2 for x in lam_fits)
    ok = verdicts_ok and lam_ok and abs(circle + 4.0) <= 0.2
    report(7, "Kakutani dichotomy", ok,
           f"verdicts ok={verdicts_ok}, circle exponent {circle:.3f} (-4+-0.2), lambda exponents {[round(x, 3) for x in lam_fits]} (-2+-0.2)")


def test_criterion_08_wick_algebra():
    from fractions import Fraction

    rng = np.random.default_rng(8)
    mismatches = 0
    for n in range(9):
        for _ in range(5):
            coeffs = [Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 9))) for _ in range(n + 1)]
            c = Fraction(int(rng.integers(0, 20)), int(rng.integers(1, 7)))
            new_c = Fraction(int(rng.integers(0, 20)), int(rng.integers(1, 7)))
            P = WickPolynomial(tuple(coeffs), c)
            if wick_reorder(P, new_c - c) != wick_basis_from_monomials(P.monomials(), new_c):
                mismatches += 1
    c = Fraction(7, 3)
    orth_bad = 0
    for a in range(7):
        for b in range(7):
            v = expectation(poly_mul(hermite_wick(a, c)[::-1], hermite_wick(b, c)[::-1]), c)
            orth_bad += v != (math.factorial(a) * c**a if a == b else 0)
    report(8, "Wick algebra", mismatches == 0 and orth_bad == 0,
           f"reorder mismatches {mismatches}/45 (exact), orthogonality defects {orth_bad}/49 (exact)")


def _kernel(rng, d_out, d_in):
    d = d_out + d_in
    X = rng.standard_normal((d, d))
    return KernelHD(GaussianHD(X @ X.T + d * np.eye(d), 0.3 * rng.standard_normal(d), rng.normal()), d_out)


def test_criterion_09_half_density_calculus():
    rng = np.random.default_rng(9)
    quad = 0.0
    for d_eta in (1, 2):
        for _ in range(3):
            k1, k2 = _kernel(rng, 1, d_eta), _kernel(rng, d_eta, 1)
            phi, psi = 0.5 * rng.standard_normal((3, 1)), 0.5 * rng.standard_normal((3, 1))
            num = compose_numeric(k1, k2, phi, psi)
            ex = evaluate_density(compose(k1, k2), phi, psi)
            quad = max(quad, float(np.max(np.abs(num - ex) / ex)))
    assoc = 0.0
    for d in range(1, 7):
        for _ in range(5):
            a, b, c = (_kernel(rng, d, d) for _ in range(3))
            left, right = compose(compose(a, b), c), compose(a, compose(b, c))
            assoc = max(assoc, float(np.max(np.abs(left.hd.Q - right.hd.Q)) / np.max(np.abs(right.hd.Q))),
                        abs(left.log_mass - right.log_mass) / max(1.0, abs(right.log_mass)))
    report(9, "half-density calculus", quad < 1e-6 and assoc < 1e-10,
           f"composition vs quadrature {quad:.2e} (<1e-6), associativity {assoc:.2e} (<1e-10)")


def test_criterion_10_interacting_mc():
    t0 = time.perf_counter()
    P = (0.0, 0.0, 0.0, 0.0, 0.1)
    cfg = MCConfig(m=1.0, R=1.0, L=1.0, n_max=16, P=P, n_samples=100_000, seed=12345)
    z2 = [mc_wick_moment(cfg, k) for k in (2, 4)]
    moments_ok = all(abs(r.estimate) < 3 * r.stderr for r in z2)
    z = mc_partition(cfg)
    jensen_ok = z.estimate >= 1.0 - 3 * z.stderr
    zd = mc_partition(MCConfig(m=1.0, R=1.0, L=1.0, n_max=32, P=P, n_samples=100_000, seed=12346))
    sigmas = abs(z.estimate - zd.estimate) / math.hypot(z.stderr, zd.stderr)
    loc = locality_check(cfg, [1, cfg.grid_shape[1] - 1])
    dt = time.perf_counter() - t0
    ok = moments_ok and jensen_ok and sigmas < 3 and loc.exact_residual == 0.0 and dt < 300
    detail = (f"<:phi^2:>={z2[0].estimate:.2e}+-{z2[0].stderr:.1e}, <:phi^4:>={z2[1].estimate:.2e}+-{z2[1].stderr:.1e}, "
              f"E[w]={z.estimate:.4f}+-{z.stderr:.4f} (n=16) vs {zd.estimate:.4f} (n=32): {sigmas:.2f} sigma, "
              f"locality residual {loc.exact_residual}, {dt:.0f}s (<300s)")
    report(10, "interacting Monte Carlo", ok, detail)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
