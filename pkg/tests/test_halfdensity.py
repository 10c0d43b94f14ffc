import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from segal_lab.halfdensity import (
    GaussianHD,
    KernelHD,
    NotPositiveDefinite,
    apply,
    compose,
    compose_numeric,
    evaluate_density,
    hd_sqrt,
    kernel_trace,
)


def spd(rng, d, shift=None):
    X = rng.standard_normal((d, d))
    return X @ X.T + (d if shift is None else shift) * np.eye(d)


def random_kernel(rng, d_out, d_in, log_mass=None):
    d = d_out + d_in
    return KernelHD(GaussianHD(spd(rng, d), 0.3 * rng.standard_normal(d), rng.normal() if log_mass is None else log_mass), d_out)


def test_standard_gaussian_half_density():
    h = hd_sqrt([[1.0]], [0.0])
    assert h.half_form[0, 0] == 0.5
    assert h.pair(h) == pytest.approx(1.0, rel=1e-14)
    h3 = h.scaled(3.0)
    assert h3.log_mass == pytest.approx(math.log(3.0))
    assert h3.pair(h3) == pytest.approx(3.0, rel=1e-14)


def test_self_pairing_3d_quadrature():
    rng = np.random.default_rng(1)
    Q = spd(rng, 3)
    h = hd_sqrt(Q, np.zeros(3), 0.4)
    # tensor-grid quadrature of nu
    sd = np.sqrt(np.diag(np.linalg.inv(Q)))
    axes = [np.linspace(-8 * s, 8 * s, 81) for s in sd]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    vals = np.exp(h.measure_form()(grid))
    total = vals
    for ax in reversed(axes):
        total = np.trapezoid(total, ax, axis=-1)
    assert total == pytest.approx(h.pair(h), rel=1e-8)
    assert h.pair(h) == pytest.approx(math.exp(0.4), rel=1e-13)


def test_rejects_indefinite_forms():
    with pytest.raises(NotPositiveDefinite):
        GaussianHD(np.diag([1.0, -1.0]), np.zeros(2), 0.0)
    with pytest.raises(ValueError):
        GaussianHD(np.array([[1.0, 0.5], [0.0, 1.0]]), np.zeros(2), 0.0)


def test_separable_composition_has_unit_mass():
    I2 = np.eye(2)
    k = KernelHD(GaussianHD(I2, np.zeros(2), 0.0), 1)
    c = compose(k, k)
    # integrand in eta is sqrt(N(0,1)) sqrt(N(0,1)) = N(0,1): total mass 1
    assert c.log_mass == pytest.approx(0.0, abs=1e-14)
    assert np.allclose(c.hd.Q, I2)
    num = compose_numeric(k, k, [[0.3]], [[-0.7]])
    assert num[0] == pytest.approx(evaluate_density(c, [[0.3]], [[-0.7]])[0], rel=1e-8)


@pytest.mark.parametrize("d_eta", [1, 2])
def test_compose_matches_quadrature(d_eta):
    rng = np.random.default_rng(10 + d_eta)
    for _ in range(3):
        k1, k2 = random_kernel(rng, 1, d_eta), random_kernel(rng, d_eta, 1)
        c = compose(k1, k2)
        phi = 0.5 * rng.standard_normal((4, 1))
        psi = 0.5 * rng.standard_normal((4, 1))
        num = compose_numeric(k1, k2, phi, psi)
        ex = evaluate_density(c, phi, psi)
        assert np.max(np.abs(num - ex) / ex) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_associativity(d, seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_kernel(rng, d, d) for _ in range(3))
    left, right = compose(compose(a, b), c), compose(a, compose(b, c))
    assert np.max(np.abs(left.hd.Q - right.hd.Q)) <= 1e-10 * np.max(np.abs(right.hd.Q))
    assert np.max(np.abs(left.hd.center - right.hd.center)) <= 1e-10 * (1 + np.max(np.abs(right.hd.center)))
    assert left.log_mass == pytest.approx(right.log_mass, rel=1e-10, abs=1e-10)


def test_composed_log_density_is_quadratic():
    # Gaussian closure, seen through the quadrature oracle rather than the closed form
    rng = np.random.default_rng(3)
    k1, k2 = random_kernel(rng, 1, 2), random_kernel(rng, 2, 1)
    g = np.linspace(-1, 1, 5)
    X, Y = np.meshgrid(g, g)
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    z = np.log(compose_numeric(k1, k2, pts[:, :1], pts[:, 1:]))
    A = np.stack([np.ones(len(pts)), pts[:, 0], pts[:, 1], pts[:, 0] ** 2, pts[:, 0] * pts[:, 1], pts[:, 1] ** 2], axis=1)
    coef, *_ = np.linalg.lstsq(A, z, rcond=None)
    assert np.max(np.abs(A @ coef - z)) < 1e-9


def test_cauchy_schwarz_mass_bound():
    rng = np.random.default_rng(4)
    for _ in range(20):
        k1 = random_kernel(rng, 1, 2, log_mass=-abs(rng.normal()))
        k2 = random_kernel(rng, 2, 1, log_mass=-abs(rng.normal()))
        assert compose(k1, k2).log_mass <= k1.log_mass + k2.log_mass + 1e-12


def test_positivity_through_long_chains():
    rng = np.random.default_rng(5)
    k = random_kernel(rng, 2, 2)
    for _ in range(10):
        k = compose(random_kernel(rng, 2, 2), k)
        assert np.isfinite(k.log_mass)
        assert np.all(np.linalg.eigvalsh(k.hd.Q) > 0)
        assert k.hd.pair(k.hd) > 0


def test_apply_and_positive_cone():
    rng = np.random.default_rng(6)
    k = random_kernel(rng, 2, 2)
    v = hd_sqrt(spd(rng, 2), rng.standard_normal(2), 0.2)
    w = apply(k, v)
    assert w.dim == 2 and np.all(np.isfinite(w.center)) and math.isfinite(w.log_mass)
    as_kernel = compose(k, KernelHD(v, 2))
    assert np.allclose(as_kernel.hd.Q, w.Q) and as_kernel.log_mass == pytest.approx(w.log_mass)
    with pytest.raises(ValueError):
        apply(k, hd_sqrt(np.eye(3), np.zeros(3)))


def test_apply_fixed_shape():
    # symmetric Gaussian kernel; its stationary shape is mapped to a multiple of itself
    Q = np.array([[2.0, -1.0], [-1.0, 2.0]])
    k = KernelHD(GaussianHD(Q, np.zeros(2), 0.0), 1)
    v = hd_sqrt([[1.0]], [0.0])
    for _ in range(60):
        v = apply(k, v)
        v = GaussianHD(v.Q, v.center, 0.0)
    w = apply(k, v)
    assert w.Q[0, 0] == pytest.approx(v.Q[0, 0], rel=1e-12)


def test_trace_of_separable_kernel_is_pairing():
    g = hd_sqrt([[1.5]], [0.2], 0.1)
    h = hd_sqrt([[0.7]], [-0.4], -0.3)
    k = KernelHD(GaussianHD(np.diag([1.5, 0.7]), [0.2, -0.4], 0.1 - 0.3), 1)
    assert kernel_trace(k) == pytest.approx(g.pair(h), rel=1e-13)
    x = np.linspace(-15, 15, 20001)
    diag = np.exp(0.5 * k.hd.measure_form()(np.stack([x, x], axis=1)))
    assert kernel_trace(k) == pytest.approx(np.trapezoid(diag, x), rel=1e-9)


def test_coordinate_change_covariance():
    rng = np.random.default_rng(8)
    a = hd_sqrt(spd(rng, 3), rng.standard_normal(3), 0.3)
    b = hd_sqrt(spd(rng, 3), rng.standard_normal(3), -0.1)
    A = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    a2, b2 = a.change_coordinates(A), b.change_coordinates(A)
    assert a2.pair(b2) == pytest.approx(a.pair(b), rel=1e-12)
    assert a2.pair(a2) == pytest.approx(a.pair(a), rel=1e-12)


def test_adjoint_swaps_blocks():
    rng = np.random.default_rng(9)
    k = random_kernel(rng, 1, 2)
    adj = k.adjoint()
    assert (adj.d_out, adj.d_in) == (2, 1)
    assert np.allclose(adj.adjoint().hd.Q, k.hd.Q)
