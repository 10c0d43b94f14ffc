import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segal_lab import determinants as det
from segal_lab.geometry_dtn import CylinderGeometry, interval_energy_matrix, mode_weight, omega, schur_onto
from segal_lab.halfdensity import KernelHD, hd_sqrt, kernel_log_trace
from segal_lab.modes import Truncation
from segal_lab.sewing import (
    TRUNCATED,
    ZETA,
    amplitude_free,
    amplitude_residual,
    boundary_variance,
    disintegration_check,
    helmholtz_extension,
    identity_limit_study,
    sew,
    torus_partition,
    trace_amplitude,
)


def cyl(L, R=1.0, a="in", b="out"):
    return CylinderGeometry(R, L, a, b)


@pytest.fixture(scope="module")
def zeta_ready():
    det.validate_regularized_sum()


def test_sew_unit_cylinders_gives_height_two():
    t = Truncation(8)
    a = amplitude_free(cyl(1.0), 1.0, t)
    r = amplitude_residual(sew(a, a), amplitude_free(cyl(2.0), 1.0, t))
    assert r["kernel"] < 1e-10 and r["prefactor"] < 1e-9


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.2, 3.0), st.floats(0.3, 3.0), st.floats(0.5, 2.0), st.sampled_from([2, 8, 16]))
def test_functoriality_truncated(L1, L2, m, R, n_max):
    t = Truncation(n_max)
    s = sew(amplitude_free(cyl(L2, R), m, t), amplitude_free(cyl(L1, R), m, t))
    r = amplitude_residual(s, amplitude_free(cyl(L1 + L2, R), m, t))
    assert r["kernel"] < 1e-10
    assert r["prefactor"] < 1e-9 * max(1.0, abs(s.log_prefactor))


def test_functoriality_zeta(zeta_ready):
    t = Truncation(16)
    s = sew(amplitude_free(cyl(0.7), 1.0, t, ZETA), amplitude_free(cyl(1.1), 1.0, t, ZETA))
    r = amplitude_residual(s, amplitude_free(cyl(1.8), 1.0, t, ZETA))
    assert r["kernel"] < 1e-10 and r["prefactor"] < 1e-5


def test_associativity():
    t = Truncation(8)
    a, b, c = (amplitude_free(cyl(L), 0.8, t) for L in (0.3, 1.2, 0.9))
    r = amplitude_residual(sew(sew(c, b), a), sew(c, sew(b, a)))
    assert r["kernel"] < 1e-10 and r["prefactor"] < 1e-10


def test_sew_rejects_mismatches(zeta_ready):
    a = amplitude_free(cyl(1.0), 1.0, Truncation(4))
    with pytest.raises(ValueError):
        sew(a, amplitude_free(cyl(1.0), 1.0, Truncation(5)))
    with pytest.raises(ValueError):
        sew(a, amplitude_free(cyl(1.0, R=2.0), 1.0, Truncation(4)))
    with pytest.raises(ValueError):
        sew(a, amplitude_free(cyl(1.0), 1.0, Truncation(4), ZETA))
    with pytest.raises(ValueError):
        amplitude_free(cyl(1.0), 0.0, Truncation(4))
    with pytest.raises(ValueError):
        amplitude_free(cyl(1.0), 1.0, Truncation(4), "lattice")


def test_zeta_amplitude_refused_before_validation(monkeypatch):
    monkeypatch.setitem(det._VALIDATION, "passed", False)
    with pytest.raises(det.RegularizationNotValidated):
        amplitude_free(cyl(1.0), 1.0, Truncation(4), ZETA)


def test_reflection_and_adjoint():
    a = amplitude_free(cyl(1.3, a="x", b="y"), 1.0, Truncation(6))
    r = amplitude_free(cyl(1.3).reversed(), 1.0, Truncation(6))
    adj = a.adjoint()
    assert (adj.in_label, adj.out_label) == ("y", "x")
    for ka, kr, kadj in zip(a.kernels, r.kernels, adj.kernels):
        assert np.array_equal(ka.hd.Q, kr.hd.Q)
        # symmetric cylinder: swapping blocks leaves the kernel fixed
        assert np.array_equal(kadj.hd.Q, ka.hd.Q)
    assert amplitude_residual(adj.adjoint(), a) == {"kernel": 0.0, "prefactor": 0.0}


def test_positive_blocks_and_cutoff_stability():
    a8 = amplitude_free(cyl(0.9), 1.2, Truncation(8))
    a16 = amplitude_free(cyl(0.9), 1.2, Truncation(16))
    for n in range(9):
        assert np.all(np.linalg.eigvalsh(a16.kernels[n].hd.Q) > 0)
        assert np.array_equal(a8.kernels[n].hd.Q, a16.kernels[n].hd.Q)
    s = sew(a8, a8)
    assert all(np.all(np.linalg.eigvalsh(k.hd.Q) > 0) for k in s.kernels)


@pytest.mark.parametrize("n", [0, 1, 3])
def test_boundary_variance_is_doubled_green_function(n):
    m, R, L = 1.0, 1.0, 0.8
    a = amplitude_free(cyl(L, R), m, Truncation(4))
    w = float(omega(m, R, n))
    k = np.arange(-1_000_000, 1_000_001, dtype=float)
    green = np.sum(1.0 / (w * w + (math.pi * k / L) ** 2)) / (2 * L)  # circle of length 2L at coincident points
    assert boundary_variance(a, n) == pytest.approx(green / mode_weight(R, n), rel=1e-6)


def test_trace_equals_torus_truncated():
    for L in (0.5, 1.0, 2.3):
        t = Truncation(12)
        tr = trace_amplitude(amplitude_free(cyl(L), 1.0, t))
        ref = torus_partition(1.0, 1.0, L, t)
        assert tr.log_value == pytest.approx(ref.log_value, abs=1e-9)
        assert tr.value > 0 and tr.regime == TRUNCATED


def test_trace_two_halves():
    t = Truncation(8)
    half = amplitude_free(cyl(0.6), 1.0, t)
    whole = amplitude_free(cyl(1.2), 1.0, t)
    assert trace_amplitude(sew(half, half)).log_value == pytest.approx(trace_amplitude(whole).log_value, abs=1e-9)


def test_trace_zeta(zeta_ready):
    t = Truncation(32)
    tr = trace_amplitude(amplitude_free(cyl(1.0), 1.0, t, ZETA))
    ref = torus_partition(1.0, 1.0, 1.0, t, ZETA)
    assert abs(tr.log_value - ref.log_value) < 1e-5


def test_trace_per_mode_dense_oracle():
    # On a finite t-grid: det(K_ring(2L))^{-1/4} * trace(sqrt nu) = det(K_ring(L))^{-1/2},
    # nu the boundary law of the 2L ring at two antipodal nodes.
    w, L, n = 1.3, 0.9, 24
    K2 = det._ring_energy_matrix(w, L, n)
    K1 = det._ring_energy_matrix(w, L / 2, n // 2)
    P = 2.0 * schur_onto(interval_energy_matrix(w, L, n), [0, n])
    ktrace = kernel_log_trace(KernelHD(hd_sqrt(P, np.zeros(2)), 1))
    lhs = -0.25 * np.linalg.slogdet(K2)[1] + ktrace
    assert lhs == pytest.approx(-0.5 * np.linalg.slogdet(K1)[1], abs=1e-10)


def test_identity_limit_is_reported_not_asserted():
    a = amplitude_free(cyl(1.0), 1.0, Truncation(8))
    rows = identity_limit_study(a, 1.0)
    kernel = [r["kernel"] for r in rows]
    assert all(x > y for x, y in zip(kernel, kernel[1:]))
    assert all(math.isfinite(r["prefactor"]) for r in rows)


def test_amplitude_json_round_trip():
    a = amplitude_free(cyl(1.0), 1.0, Truncation(3))
    d = json.loads(json.dumps(a.to_dict()))
    assert d["n_max"] == 3 and len(d["modes"]) == 4
    assert np.allclose(d["modes"][2]["Q"], a.kernels[2].hd.Q)


def test_disintegration_identities():
    r = disintegration_check(cyl(1.0), 1.0, Truncation(4), t_points=64)
    assert r.conditional_mean < 1e-10
    assert r.conditional_covariance < 1e-10
    assert r.boundary_precision_discrete < 1e-10
    assert r.fourier_identity < 1e-9
    assert r.zero_data == 0.0
    # continuum gap is O(h^2) and only reported
    r2 = disintegration_check(cyl(1.0), 1.0, Truncation(4), t_points=128)
    assert r.boundary_precision_continuum / r2.boundary_precision_continuum == pytest.approx(4.0, rel=0.1)
    with pytest.raises(ValueError):
        disintegration_check(cyl(1.0), 1.0, Truncation(2), t_points=63)


def test_discrete_extension_large_mass_decays():
    m, L, N = 20.0, 1.0, 400
    K = interval_energy_matrix(m, L, N)
    inner = np.arange(1, N)
    u = -np.linalg.solve(K[np.ix_(inner, inner)], K[np.ix_(inner, [0, N])] @ np.array([1.0, 1.0]))
    t = inner * L / N
    exact = helmholtz_extension(m, L, 1.0, 1.0, t)
    assert np.max(np.abs(u - exact)) < 5e-3
    near = t < 0.3
    assert np.allclose(exact[near], np.exp(-m * t[near]), atol=1e-5)
