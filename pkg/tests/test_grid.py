"""Tests for the radial grid, quadrature, norms, and field IO."""

import numpy as np
import pytest
from scipy.integrate import quad as squad

import corowm as cw
from corowm import FieldSample, GridError, WaveMapState


def test_fd_weights_first_derivative_uniform():
    # classical centered 5-point first-derivative weights
    x = np.arange(-2.0, 3.0)
    w = cw.fd_weights(x, 0.0, 1)
    assert np.allclose(w, [1 / 12, -8 / 12, 0.0, 8 / 12, -1 / 12], atol=1e-13)


def test_fd_weights_interpolation_exactness():
    rng = np.random.default_rng(3)
    x = np.sort(rng.uniform(-1.0, 1.0, 6))
    coeffs = rng.standard_normal(6)
    poly = np.polynomial.Polynomial(coeffs)
    x0 = 0.37
    w = cw.fd_weights(x, x0, 0)
    assert abs(w @ poly(x) - poly(x0)) < 1e-12
    w1 = cw.fd_weights(x, x0, 1)
    assert abs(w1 @ poly(x) - poly.deriv()(x0)) < 1e-10


def test_quadrature_exact_on_polynomials():
    # the composite rule integrates cubic integrands exactly
    g = cw.make_grid(2.0, 64, [])
    for k in range(3):
        f = FieldSample(g, g.r ** k)
        exact = 2.0 ** (k + 2) / (k + 2)  # int_0^2 r^{k+1} dr
        assert abs(cw.quad(f, "r dr") - exact) < 1e-13 * max(1.0, exact)


def test_quadrature_smooth_vs_adaptive_oracle():
    ref, _ = squad(lambda r: np.exp(-r * r) * np.cos(r) * r, 0, 10,
                   epsabs=1e-14)
    errs = []
    for n in (400, 800):
        g = cw.make_grid(10.0, n, [])
        f = FieldSample(g, np.exp(-g.r ** 2) * np.cos(g.r))
        errs.append(abs(cw.quad(f, "r dr") - ref))
    assert errs[0] < 1e-7
    # fourth-order composite rule: halving h cuts the error ~16x
    assert errs[0] / errs[1] > 10.0


def test_quadrature_dr_over_r_origin_limit():
    g = cw.make_grid(5.0, 500, [(0.0, 0.5)])
    f = FieldSample(g, np.sin(g.r) * np.exp(-g.r))
    val = cw.quad(f, "dr/r")
    ref, _ = squad(lambda r: np.sin(r) * np.exp(-r) / r, 0, 5, epsabs=1e-14)
    assert abs(val - ref) < 1e-10


def test_quadrature_dr_over_r_rejects_nonvanishing():
    g = cw.make_grid(5.0, 100, [])
    with pytest.raises(GridError):
        cw.quad(FieldSample(g, np.ones(g.n)), "dr/r")


def test_quadrature_tail_is_added():
    g = cw.make_grid(1.0, 32, [])
    f = FieldSample(g, np.zeros(g.n))
    assert cw.quad(f, "r dr", tail=0.25) == 0.25


def test_make_grid_patch_validation():
    with pytest.raises(GridError):
        cw.make_grid(8.0, 64, [(0.0, 3.0), (2.0, 5.0)])  # straddles a seam
    with pytest.raises(GridError):
        cw.make_grid(8.0, 64, [(5.0, 3.0)])  # empty interval


def test_make_deep_grid_structure():
    g = cw.make_deep_grid(8.0, 256, 3)
    assert g.r[0] == 0.0
    assert abs(g.r[-1] - 8.0) < 1e-12
    # innermost spacing is the base spacing divided by 2^levels
    assert np.isclose(g.h_min, (8.0 / 256) / 8.0)
    assert np.all(np.diff(g.r) > 0)


def test_derivative_accuracy_on_sin():
    g = cw.make_grid(6.0, 600, [(0.0, 1.0)])
    df = g.d1(np.sin(g.r))
    assert np.max(np.abs(df - np.cos(g.r))) < 1e-10


def test_even_mirror_second_derivative_at_origin():
    # u = cos(r) is even; the mirrored stencil must see u''(0) = -1
    g = cw.make_grid(6.0, 600, [])
    d2 = g.diff(2, even=True) @ np.cos(g.r)
    assert abs(d2[0] + 1.0) < 1e-8


def test_h_norm_of_lambda_q():
    # int ((dr LQ)^2 + LQ^2/r^2) r dr = 8/3 for LQ = 2r/(1+r^2)
    g = cw.make_grid(400.0, 6400, [(0.0, 1.0), (0.0, 0.5)])
    f = FieldSample(g, cw.LambdaQ(g.r))
    ref, _ = squad(
        lambda r: ((2 * (1 - r * r) / (1 + r * r) ** 2) ** 2
                   + (2 / (1 + r * r)) ** 2) * r, 0, np.inf, limit=200)
    assert abs(cw.h_norm(f) - np.sqrt(ref)) < 1e-4


def test_h0_norm_combines_components():
    g = cw.make_grid(10.0, 500, [])
    s = WaveMapState(FieldSample(g, g.r * np.exp(-g.r), "angle"),
                     FieldSample(g, np.exp(-g.r), "velocity"))
    val = cw.h0_norm(s)
    assert np.isclose(val, np.hypot(cw.h_norm(s.psi), cw.l2_norm(s.psi_t)))


def test_4d_round_trip():
    g = cw.make_grid(10.0, 500, [(0.0, 1.0)])
    psi = g.r * np.exp(-g.r ** 2)
    s = WaveMapState(FieldSample(g, psi, "angle"),
                     FieldSample(g, 0.5 * psi, "velocity"))
    u = cw.to_4d(s)
    # u(0) equals the analytic limit psi/r -> 1 * exp(0)
    assert abs(u.values[0] - 1.0) < 1e-8
    back = cw.from_4d(u.values, u.values, g)
    assert np.max(np.abs(back.psi.values - psi)) < 1e-12
    assert back.psi.values[0] == 0.0


def test_resample_exact_nodes_and_cubic():
    src = cw.make_grid(4.0, 256, [])
    tgt = cw.make_grid(4.0, 128, [])
    f = FieldSample(src, src.r ** 3 - 2.0 * src.r)
    out = cw.resample(f, tgt)
    assert np.max(np.abs(out.values - (tgt.r ** 3 - 2.0 * tgt.r))) < 1e-12
    with pytest.raises(GridError):
        cw.resample(f, cw.make_grid(8.0, 64, []))  # would extrapolate


def test_field_csv_round_trip(tmp_path):
    g = cw.make_grid(3.0, 96, [])
    f = FieldSample(g, np.sin(g.r) * 1e-7)
    path = str(tmp_path / "field.csv")
    cw.write_field_csv(f, path)
    back = cw.read_field_csv(path, g)
    assert np.array_equal(back.values, f.values)  # 17 digits round-trips


def test_state_validation():
    g = cw.make_grid(10.0, 200, [])
    psi = np.ones(g.n)  # psi(0) != 0
    s = WaveMapState(FieldSample(g, psi, "angle"),
                     FieldSample(g, np.zeros(g.n), "velocity"))
    with pytest.raises(GridError):
        s.validate()
