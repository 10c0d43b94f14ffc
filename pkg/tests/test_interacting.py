import csv
import math

import numpy as np
import pytest

from segal_lab.interacting import (
    CutoffMismatch,
    GridField,
    MCConfig,
    Ordering,
    fk_log_weight,
    fk_weight,
    green_function,
    interaction,
    locality_check,
    mc_partition,
    mc_two_point,
    mc_wick_moment,
    sample_gff_torus,
    write_trace_csv,
)
from segal_lab.sewing import torus_partition
from segal_lab.modes import Truncation
from segal_lab.wick import WickPolynomial, cutoff_variance


def small(**kw):
    base = dict(m=1.0, R=1.0, L=1.0, n_max=4, n_samples=20_000, seed=7, n_chains=4, batch=4096)
    base.update(kw)
    return MCConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        small(m=0.0)
    with pytest.raises(ValueError):
        small(P=(0, 0, 0, -1.0))
    with pytest.raises(ValueError):
        small(ordering="D")
    cfg = small(L=2 * math.pi)
    assert cfg.grid_shape == (9, 9)


def test_seed_reproducibility():
    cfg = small()
    a = sample_gff_torus(cfg, 11, 8).values
    b = sample_gff_torus(cfg, 11, 8).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_gff_torus(cfg, 12, 8).values)
    r1, r2 = mc_partition(cfg), mc_partition(cfg)
    assert r1.estimate == r2.estimate and r1.chain_means == r2.chain_means


def test_pointwise_variance_is_cutoff_variance():
    cfg = small()
    c_N = cutoff_variance(cfg.m, cfg.R, cfg.L, cfg.n_max)
    assert green_function(cfg) == pytest.approx(c_N, rel=1e-13)
    g = sample_gff_torus(cfg, 3, 100_000).values[:, 0, 0]
    se = c_N * math.sqrt(2.0 / g.size)
    assert abs(g.var() - c_N) < 3 * se


def test_two_point_function():
    cfg = small(n_samples=10_000)
    for d in ((1, 0), (2, 1)):
        r = mc_two_point(cfg, *d)
        assert abs(r.estimate - green_function(cfg, *d)) < 3 * r.stderr


def test_zero_interaction_weight_is_one():
    cfg = small(P=(0.0,))
    g = sample_gff_torus(cfg, 1, 16)
    assert np.array_equal(fk_weight(g, cfg.P, Ordering.at_cutoff(cfg)), np.ones(16))
    r = mc_partition(cfg)
    assert r.estimate == 1.0
    assert r.log_Z == pytest.approx(torus_partition(1.0, 1.0, 1.0, Truncation(4)).log_value, rel=1e-15)


def test_quartic_jensen_and_wick_mean():
    cfg = small()
    r = mc_partition(cfg)
    assert r.estimate >= 1.0 - 3 * r.stderr
    assert not r.flagged and r.stderr > 0
    m4 = mc_wick_moment(cfg, 4)
    assert abs(m4.estimate) < 3 * m4.stderr


def test_antithetic_sign_symmetry():
    cfg = small()
    g = sample_gff_torus(cfg, 5, 32)
    o = Ordering.at_cutoff(cfg)
    flipped = GridField(-g.values, g.n_max, g.k_max, g.R, g.L)
    assert np.array_equal(fk_log_weight(g, cfg.P, o), fk_log_weight(flipped, cfg.P, o))


def test_cutoff_mismatch_is_hard_error():
    g = sample_gff_torus(small(n_max=4), 1, 2)
    with pytest.raises(CutoffMismatch):
        interaction(g, (0, 0, 1), Ordering.at_cutoff(small(n_max=8)))


def test_c0_ordering_and_bridge():
    cfg = small(ordering="C0")
    o = Ordering.at_cutoff(cfg)
    assert o.c == pytest.approx(o.c_N - o.C_f)
    r = mc_partition(cfg)
    assert "bridge_to_C" in r.extras
    # bridging C0-ordered x^4 back to C-ordering adds 6 C_f :x^2: + 3 C_f^2
    b = o.bridge(WickPolynomial((0, 0, 0, 0, 1), o.c))
    shift = o.c_N - o.c
    assert [float(x) for x in b.coeffs] == pytest.approx([3 * shift**2, 0, 6 * shift, 0, 1], rel=1e-12)


def test_locality_exact():
    cfg = small(n_max=6, L=2 * math.pi)
    nt = cfg.grid_shape[1]
    assert nt == 13
    rng = np.random.default_rng(0)
    for cuts in ([nt // 2], [1, nt // 3, nt - 1], sorted(rng.choice(np.arange(1, nt), 2, replace=False).tolist())):
        rep = locality_check(cfg, cuts, n_draws=4)
        assert rep.exact_residual == 0.0
        assert rep.float_residual_ulps <= len(cuts) + 1
    with pytest.raises(ValueError):
        locality_check(cfg, [0])
    with pytest.raises(ValueError):
        locality_check(cfg, [1.5])


def test_overflow_guard():
    cfg = small(P=(0, 0, 0, 0, 1.0))
    g = sample_gff_torus(cfg, 1, 2)
    big = GridField(g.values * 0 + 30.0, g.n_max, g.k_max, g.R, g.L)
    o = Ordering.at_cutoff(cfg)
    # large field: log weight very negative, fine; negative quadratic part blows up
    assert np.all(np.isfinite(fk_log_weight(big, cfg.P, o)))
    with pytest.raises(OverflowError):
        fk_weight(big, (-1e4, 0, 0, 0, 1e-12), o)


def test_trace_csv(tmp_path):
    p = tmp_path / "trace.csv"
    write_trace_csv(p, [0.5, -1.25], ("index", "log_weight"))
    rows = list(csv.reader(open(p)))
    assert rows == [["index", "log_weight"], ["0", "0.5"], ["1", "-1.25"]]
