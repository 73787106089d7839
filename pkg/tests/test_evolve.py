"""Tests for the 4d-reduced solver: right-hand side, stepping, regridding,
and blow-up heuristics."""

import numpy as np
import pytest

import corowm as cw
from corowm import BubbleParams, FieldSample, GridError, SolverConfig


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(cfl=0.0)
    with pytest.raises(ValueError):
        SolverConfig(cfl=1.5)


def test_nonlinearity_Z_matches_exact():
    # Z(psi) = (2 psi - sin 2 psi) / (2 psi^3), smooth through psi = 0
    psi = np.array([0.05, 0.5, 2.0, -0.7])
    exact = (2 * psi - np.sin(2 * psi)) / (2 * psi ** 3)
    assert np.max(np.abs(cw.nonlinearity_Z(psi) - exact)) < 1e-12
    # near zero the closed form cancels catastrophically; the series takes over
    small = np.array([1e-6, 1e-3])
    series = 2.0 / 3.0 - (2.0 / 15.0) * small ** 2 + (4.0 / 315.0) * small ** 4
    assert np.max(np.abs(cw.nonlinearity_Z(small) - series)) < 1e-14
    assert abs(cw.nonlinearity_Z(np.array([0.0]))[0] - 2.0 / 3.0) < 1e-15
    # the branch switch is seamless
    a, b = 1e-2 * (1 - 1e-9), 1e-2 * (1 + 1e-9)
    za, zb = cw.nonlinearity_Z(np.array([a, b]))
    assert abs(za - zb) < 1e-9


def test_rhs_vanishes_on_static_bubble():
    # Q_lam is a static solution; the reduced field u = Q_lam / r must give
    # a small residual away from the under-resolved outer boundary
    g = cw.make_grid(32.0, 2048, [(0.0, 1.0), (0.0, 0.25)])
    s = cw.single_bubble(1.0, g)
    u = cw.to_4d(s)
    res = cw.rhs(u.values, g)
    inner = g.r < 30.0
    assert np.max(np.abs(res[inner])) < 1e-5


def test_step_energy_stability():
    g = cw.make_grid(16.0, 512, [])
    s = cw.make_small_bump(0.3, 1.5, g)
    e0 = cw.energy(s).total
    dt = 0.4 * g.h_min
    for _ in range(50):
        s = cw.step(s, dt)
    drift = abs(cw.energy(s).total - e0) / e0
    assert drift < 1e-6
    assert abs(s.time - 50 * dt) < 1e-14


def test_step_rejects_large_dt():
    g = cw.make_grid(16.0, 512, [])
    s = cw.make_small_bump(0.3, 1.5, g)
    with pytest.raises(GridError):
        cw.step(s, 10.0 * g.h_min)


def test_lambda_proxy_of_bubble():
    g = cw.make_grid(32.0, 2048, [(0.0, 1.0), (0.0, 0.25)])
    for lam in (0.3, 1.0):
        s = cw.single_bubble(lam, g)
        # psi = pi/2 exactly at r = lam; the proxy interpolates linearly
        assert abs(cw.lambda_proxy(s) - lam) < 1e-4
    flat = cw.make_small_bump(0.1, 1.0, g)
    assert cw.lambda_proxy(flat) == np.inf


def test_regrid_preserves_field():
    g = cw.make_grid(16.0, 512, [])
    s = cw.make_small_bump(0.3, 1.5, g)
    cfg = SolverConfig()
    s2 = cw.regrid(s, cfg)
    assert s2.grid.h_min == g.h_min / 2
    # values agree on shared nodes
    back = cw.resample(s2.psi, g)
    assert np.max(np.abs(back.values - s.psi.values)) < 1e-12


def test_evolve_emits_outputs_and_conserves():
    g = cw.make_grid(16.0, 512, [])
    s = cw.make_small_bump(0.3, 1.5, g)
    cfg = SolverConfig(cfl=0.4, t_end=1.0, output_dt=0.25)
    seen = []
    traj = cw.evolve(s, cfg, observers=[lambda st, rep: seen.append(st.time)])
    assert len(seen) == 5  # t = 0, 0.25, 0.5, 0.75, 1.0
    assert abs(seen[-1] - 1.0) < 1e-12
    assert traj.final_state.time == seen[-1]
    assert all(abs(r.relative_energy_drift) < 1e-6 for r in traj.reports)
    assert not traj.blowup_flag


def test_evolve_static_two_bubble_stays_close():
    # a well-separated two-bubble accelerates toward collapse only
    # quadratically in time, so a short run moves the profile very little
    g = cw.make_grid(32.0, 1024, [(0.0, 1.0), (0.0, 0.25), (0.0, 0.0625)])
    s = cw.two_bubble(BubbleParams(0.05, 1.0), g)
    psi0 = s.psi.values.copy()
    cfg = SolverConfig(cfl=0.4, t_end=0.02, output_dt=0.02)
    traj = cw.evolve(s, cfg)
    # the run may have refined the grid; compare on the original nodes
    final = cw.resample(traj.final_state.psi, g)
    delta = np.max(np.abs(final.values - psi0))
    assert delta < 0.05


def test_detect_blowup_negative_case():
    g = cw.make_grid(16.0, 512, [])
    s = cw.make_small_bump(0.3, 1.5, g)
    cfg = SolverConfig(cfl=0.4, t_end=0.5, output_dt=0.25)
    traj = cw.evolve(s, cfg)
    T_plus, evidence = cw.detect_blowup(traj, cfg)
    assert T_plus is None
