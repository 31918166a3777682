import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from lpdens.bwselect import (
    BwMethod,
    default_minimum,
    golden_section_min,
    imse_dpi,
    irot_bandwidth,
    mse_dpi,
    normal_cdf_derivative,
    regularize_bandwidth,
    rot_bandwidth,
    select_bandwidth,
)
from lpdens.ecdf import effective_n, ingest, quantile_grid
from lpdens.simulate import draw, rep_rng


@pytest.fixture(scope="module")
def sample():
    return np.random.default_rng(31).normal(0.5, 2.0, size=600)


def test_normal_cdf_derivatives_against_finite_differences():
    mu, sigma = 0.3, 1.7
    x = np.linspace(-3, 4, 9)
    assert np.allclose(normal_cdf_derivative(1, x, mu, sigma), norm.pdf(x, mu, sigma), rtol=1e-12)
    step = 1e-4
    for k in (2, 3, 4):
        fd = (normal_cdf_derivative(k - 1, x + step, mu, sigma)
              - normal_cdf_derivative(k - 1, x - step, mu, sigma)) / (2 * step)
        assert np.allclose(normal_cdf_derivative(k, x, mu, sigma), fd, rtol=1e-6, atol=1e-9)
    with pytest.raises(ValueError):
        normal_cdf_derivative(0, x, mu, sigma)


# --------------------------------------------------------------------------
# rules of thumb


@pytest.mark.parametrize("p,nu,rate", [(2, 1, 5), (1, 1, 5), (3, 1, 9), (2, 2, 7), (3, 2, 7)])
def test_rot_sample_size_power_law(sample, p, nu, rate):
    # duplicating the sample keeps the fitted normal and doubles n
    s1 = ingest(sample)
    s2 = ingest(np.tile(sample, 2))
    for x in (-1.0, 0.5, 2.5):
        ratio = rot_bandwidth(s2, x, p, nu) / rot_bandwidth(s1, x, p, nu)
        assert ratio == pytest.approx(2.0 ** (-1.0 / rate), rel=1e-12)


@pytest.mark.parametrize("lam", [0.01, 0.5, 3.0, 250.0])
def test_rot_scale_equivariance(sample, lam):
    s1 = ingest(sample)
    s2 = ingest(lam * sample - 7.0)
    for x in (-1.0, 0.5, 2.5):
        h1 = rot_bandwidth(s1, x)
        h2 = rot_bandwidth(s2, lam * x - 7.0)
        assert h2 == pytest.approx(lam * h1, rel=1e-10)


def test_rot_reflection(sample):
    a = rot_bandwidth(ingest(sample), 1.3, 3, 1)
    b = rot_bandwidth(ingest(-sample), -1.3, 3, 1)
    assert a == pytest.approx(b, rel=1e-12)


def test_irot_single_point_and_repetition(sample):
    s = ingest(sample)
    assert irot_bandwidth(s, [0.7]) == pytest.approx(rot_bandwidth(s, 0.7), rel=1e-14)
    grid = [-1.0, 0.4, 2.0]
    assert irot_bandwidth(s, np.repeat(grid, 3)) == pytest.approx(irot_bandwidth(s, grid),
                                                                  rel=1e-12)


def test_irot_symmetric_grid_reflection():
    base = np.random.default_rng(2).normal(size=400)
    s = ingest(np.concatenate((base, -base)))  # exactly symmetric about 0
    grid = np.array([-1.2, 0.3, 0.8, 2.0])
    assert irot_bandwidth(s, grid) == pytest.approx(irot_bandwidth(s, -grid), rel=1e-12)


def test_rot_cdf_target_is_finite(sample):
    s = ingest(sample)
    h = rot_bandwidth(s, 0.5, 2, 0)
    assert np.isfinite(h) and h > 0


def test_rot_derivative_floor_keeps_bandwidth_finite():
    # at the mode of the normal the density's first derivative vanishes
    s = ingest(np.random.default_rng(1).normal(size=300))
    mu = float(np.mean(s.x))
    h = rot_bandwidth(s, mu, 1, 1)
    assert np.isfinite(h) and h > 0


# --------------------------------------------------------------------------
# regularization


def test_regularize_example():
    s = ingest(np.arange(100.0))
    assert default_minimum(2) == 23
    # distances from 50 are 0, 1, 1, 2, 2, ...; the 23rd smallest is 11
    assert regularize_bandwidth(s, 50.0, 1.0, p=2) == 11.0
    assert effective_n(s, 50.0, 11.0) == 23
    assert regularize_bandwidth(s, 50.0, 30.0, p=2) == 30.0
    assert regularize_bandwidth(s, 50.0, 1.0, p=2, enabled=False) == 1.0


def test_regularize_counts_distinct_values():
    # 200 observations but only 10 distinct values
    s = ingest(np.repeat(np.arange(10.0), 20))
    h = regularize_bandwidth(s, 0.0, 0.5, p=1, n_local_min=5, n_unique_min=5)
    assert h == 4.0


def test_regularize_small_sample_warns():
    s = ingest(np.arange(10.0))
    with pytest.warns(RuntimeWarning, match="below the local minimum"):
        with pytest.warns(RuntimeWarning, match="distinct values"):
            h = regularize_bandwidth(s, 0.0, 0.1, p=2)
    assert h == 9.0


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(1e-3, 5.0), st.floats(1e-3, 5.0), st.integers(0, 4))
def test_regularize_monotone_and_idempotent(x, h1, h2, p):
    s = ingest(np.random.default_rng(17).normal(size=250))
    a = regularize_bandwidth(s, x, h1, p)
    b = regularize_bandwidth(s, x, h2, p)
    assert a >= h1
    if h1 <= h2:
        assert a <= b
    assert regularize_bandwidth(s, x, a, p) == a
    assert effective_n(s, x, a) >= default_minimum(p)


# --------------------------------------------------------------------------
# plug-in


def test_golden_section():
    xmin = golden_section_min(lambda v: (v - 1.3) ** 2 + 0.5, -4.0, 9.0, tol=1e-9)
    assert xmin == pytest.approx(1.3, abs=1e-8)
    assert golden_section_min(lambda v: v, 0.0, 1.0) == pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("lam,shift", [(0.1, 0.0), (4.0, -3.0), (1.0, 100.0)])
def test_dpi_affine_equivariance(sample, lam, shift):
    s1 = ingest(sample)
    s2 = ingest(lam * sample + shift)
    for x in (-0.5, 1.5):
        a = mse_dpi(s1, x)
        b = mse_dpi(s2, lam * x + shift)
        assert b == pytest.approx(lam * a, rel=1e-5)
    a = imse_dpi(s1, quantile_grid(s1))
    b = imse_dpi(s2, quantile_grid(s2))
    assert b == pytest.approx(lam * a, rel=1e-5)


def test_selectors_translation_invariant(sample):
    s1, s2 = ingest(sample), ingest(sample + 12.5)
    grid = np.array([-1.0, 0.5, 2.0])
    for method in ("mse-rot", "imse-rot", "mse-dpi", "imse-dpi"):
        a = select_bandwidth(s1, grid, method).h
        b = select_bandwidth(s2, grid + 12.5, method).h
        assert np.allclose(a, b, rtol=1e-5)


def test_imse_single_point_equals_mse(sample):
    s = ingest(sample)
    assert imse_dpi(s, [0.9]) == mse_dpi(s, 0.9)


@pytest.mark.parametrize("p,nu", [(1, 1), (2, 1), (3, 1), (2, 2), (2, 0), (4, 1)])
def test_dpi_orders_finite(sample, p, nu):
    h = mse_dpi(ingest(sample), 0.5, p, nu)
    assert np.isfinite(h) and h > 0


def test_dpi_order_limit(sample):
    with pytest.raises(ValueError, match="p \\+ 3"):
        mse_dpi(ingest(sample), 0.0, p=5)
    with pytest.raises(ValueError):
        mse_dpi(ingest(sample), 0.0, p=2, nu=3)


def test_dpi_tracks_normal_reference_on_normal_data():
    # on normal data the plug-in and the rule of thumb target the same optimum
    s = ingest(np.random.default_rng(5).normal(size=20_000))
    for x in (-1.5, 1.5):
        assert mse_dpi(s, x) == pytest.approx(rot_bandwidth(s, x), rel=0.25)


def test_dpi_mean_bandwidth_truncated_normal():
    hs, hi = [], []
    for r in range(40):
        s = ingest(draw("truncnorm", 1000, rep_rng(3, r)))
        hs.append(mse_dpi(s, 1.5))
        hi.append(imse_dpi(s, quantile_grid(s)))
    assert np.mean(hs) == pytest.approx(0.785, rel=0.25)
    assert np.mean(hi) == pytest.approx(0.62, rel=0.25)


# --------------------------------------------------------------------------
# select_bandwidth


def test_user_bandwidth_is_not_regularized(sample):
    s = ingest(sample)
    bw = select_bandwidth(s, [0.0, 1.0], "user", bw=0.01)
    assert np.all(bw.h == 0.01)
    assert bw.method is BwMethod.USER
    assert not bw.regularized.any()
    bw = select_bandwidth(s, [0.0, 1.0], bw=[0.3, 0.4])
    assert list(bw.h) == [0.3, 0.4]
    with pytest.raises(ValueError):
        select_bandwidth(s, [0.0], "user")
    with pytest.raises(ValueError):
        select_bandwidth(s, [0.0], bw=-1.0)


def test_pointwise_selectors_regularize(sample):
    s = ingest(sample)
    grid = np.array([-4.0, 0.5, 6.0])
    for method in ("mse-rot", "mse-dpi"):
        on = select_bandwidth(s, grid, method)
        off = select_bandwidth(s, grid, method, regularize=False)
        assert np.all(on.h >= off.h * (1 - 1e-9))
        assert np.all(on.eff_n >= default_minimum(2))
        assert on.regularized.any()


def test_integrated_selectors_constant(sample):
    s = ingest(sample)
    grid = quantile_grid(s)
    for method in ("imse-rot", "imse-dpi"):
        bw = select_bandwidth(s, grid, method)
        assert np.ptp(bw.h) == 0.0
    bw = select_bandwidth(s, grid, "imse-rot")
    assert bw.h[0] >= irot_bandwidth(s, grid)


def test_imse_grid_override(sample):
    s = ingest(sample)
    bw = select_bandwidth(s, [0.0, 1.0], "imse-dpi", imse_grid=[0.5])
    assert bw.h[0] == pytest.approx(max(regularize_bandwidth(s, x, mse_dpi(s, 0.5))
                                        for x in (0.0, 1.0)))


def test_select_rejects_empty_grid(sample):
    with pytest.raises(ValueError, match="empty"):
        select_bandwidth(ingest(sample), [], "mse-rot")


def test_bandwidth_sample_size_rate():
    # log-log slope of the DPI bandwidth against n is near -1/5 (x=0: f'' != 0)
    ns = np.array([500, 4000])
    hs = []
    for n in ns:
        vals = [mse_dpi(ingest(np.random.default_rng(100 + r).normal(size=n)), 0.0, regularize=False)
                for r in range(15)]
        hs.append(np.mean(vals))
    slope = math.log(hs[1] / hs[0]) / math.log(ns[1] / ns[0])
    assert slope == pytest.approx(-0.2, abs=0.15)


def test_dpi_ratio_over_32_fold_sample_size():
    h_small = np.mean([mse_dpi(ingest(np.random.default_rng(r).normal(size=500)), 0.0)
                       for r in range(20)])
    h_big = np.mean([mse_dpi(ingest(np.random.default_rng(50 + r).normal(size=16_000)), 0.0)
                     for r in range(20)])
    assert h_big / h_small == pytest.approx(0.5, rel=0.15)
