"""Tests for the harmonic-map bubble, scaling generators, and two-bubble data."""

import numpy as np
import pytest
from scipy.integrate import quad as squad

import corowm as cw
from corowm import BubbleParams, FieldSample


def test_q_limits_and_midpoint():
    assert cw.Q(0.0) == 0.0
    assert abs(cw.Q(1.0) - np.pi / 2) < 1e-15
    assert abs(cw.Q(1e12) - np.pi) < 1e-11


def test_q_scaled_rejects_bad_scale():
    with pytest.raises(ValueError):
        cw.Q_scaled(1.0, 0.0)


def test_generators_match_grid_stencils():
    g = cw.make_grid(40.0, 2000, [(0.0, 1.0)])
    qf = FieldSample(g, cw.Q(g.r))
    lq = cw.lambda_gen(qf)
    assert np.max(np.abs(lq.values - cw.LambdaQ(g.r))) < 1e-9
    l2q = cw.lambda_gen(lq)
    assert np.max(np.abs(l2q.values - cw.Lambda2Q(g.r))) < 1e-6
    # iterated stencils lose accuracy at the outer boundary; compare inside
    inner = g.r <= 39.0
    l3q = cw.lambda_gen(l2q)
    assert np.max(np.abs(l3q.values - cw.Lambda3Q(g.r))[inner]) < 1e-4
    l0lq = cw.lambda0_gen(lq)
    assert np.max(np.abs(l0lq.values - cw.Lambda0LambdaQ(g.r))) < 1e-6


def test_lambda_q_peak():
    # LambdaQ peaks at r = 1 with value 1
    assert cw.LambdaQ(1.0) == 1.0
    r = np.linspace(0.01, 100, 1000)
    assert np.max(cw.LambdaQ(r)) <= 1.0


def test_bubble_params_validation():
    with pytest.raises(ValueError):
        BubbleParams(-1.0, 1.0)
    with pytest.raises(ValueError):
        BubbleParams(0.1, 1.0, iota=2)
    assert BubbleParams(0.01, 1.0).well_separated
    assert not BubbleParams(2.0, 1.0).well_separated


def test_single_bubble_energy_is_4pi():
    g = cw.make_grid(32.0, 4096, [(0.0, 1.0)])
    s = cw.single_bubble(1.0, g)
    rep = cw.energy(s)
    assert abs(rep.total - 4.0 * np.pi) < 1e-8 * 4.0 * np.pi


def test_two_bubble_structure():
    g = cw.make_grid(100.0, 3200, [(0.0, 1.0), (0.0, 0.25)])
    p = BubbleParams(0.05, 1.0, iota=-1)
    s = cw.two_bubble(p, g)
    assert s.degree == 0
    assert s.psi.values[0] == 0.0
    # iota = -1 flips the sign
    mid = np.searchsorted(g.r, 0.2)
    assert s.psi.values[mid] < 0.0
    assert np.all(s.psi_t.values == 0.0)


def test_two_bubble_energy_tail_oracle():
    p = BubbleParams(0.05, 1.0)
    tail = cw.two_bubble_energy_tail(p, 100.0)

    def dens(r):
        dpsi = (cw.LambdaQ(r / p.lam) - cw.LambdaQ(r / p.mu)) / r
        s = np.sin(cw.Q_scaled(r, p.lam) - cw.Q_scaled(r, p.mu))
        return np.pi * (dpsi ** 2 + (s / r) ** 2) * r

    ref, _ = squad(dens, 100.0, np.inf, limit=200)
    assert abs(tail - ref) < 1e-12
    assert cw.two_bubble_energy_tail(BubbleParams(1.0, 1.0), 100.0) == 0.0


def test_two_bubble_energy_approaches_8pi():
    # E(Q_lam - Q_mu) -> 8 pi as lam/mu -> 0
    g = cw.make_deep_grid(200.0, 3200, 8)
    vals = []
    for lam in (3e-2, 1e-2):
        s = cw.two_bubble(BubbleParams(lam, 1.0), g)
        vals.append(cw.energy(s).total)
    tgt = 8.0 * np.pi
    assert abs(vals[1] - tgt) < abs(vals[0] - tgt)
    assert abs(vals[1] - tgt) < 0.05 * tgt
