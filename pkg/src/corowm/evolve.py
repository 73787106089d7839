"""Time evolution of the azimuth-angle equation via its 4d reduction.

The evolved unknown is u = psi/r, which satisfies the regular radial
semilinear wave equation  u_tt = u_rr + (3/r) u_r + Z(r u) u^3.
Classical RK4 in time on the first-order system (u, u_t); the outermost
node is held static (the domain is sized so the light cone from the active
region never reaches it).
"""

import numpy as np

from .grid import (FieldSample, GridError, RadialGrid, WaveMapState,
                   fd_weights, from_4d, resample)
from .functionals import energy


class SolverConfig:
    __slots__ = ("cfl", "t_end", "output_dt", "refine_trigger", "max_levels",
                 "blowup_floor", "gradient_cap")

    def __init__(self, cfl=0.4, t_end=1.0, output_dt=0.1, refine_trigger=64,
                 max_levels=12, blowup_floor=1e-6, gradient_cap=1e7):
        if not 0 < cfl <= 0.9:
            raise ValueError("cfl must lie in (0, 0.9]")
        if max_levels > 12:
            raise ValueError("max_levels capped at 12")
        self.cfl = float(cfl)
        self.t_end = float(t_end)
        self.output_dt = float(output_dt)
        self.refine_trigger = int(refine_trigger)
        self.max_levels = int(max_levels)
        self.blowup_floor = float(blowup_floor)
        self.gradient_cap = float(gradient_cap)


class StepReport:
    __slots__ = ("t", "dt", "energy", "relative_energy_drift", "h_min",
                 "lambda_estimate", "regridded", "blowup_suspected")

    def __init__(self, t, dt, energy, drift, h_min, lam_est,
                 regridded=False, blowup_suspected=False):
        self.t = t
        self.dt = dt
        self.energy = energy
        self.relative_energy_drift = drift
        self.h_min = h_min
        self.lambda_estimate = lam_est
        self.regridded = regridded
        self.blowup_suspected = blowup_suspected


def nonlinearity_Z(psi):
    """Z(psi) = (2 psi - sin 2 psi) / (2 psi^3), even and smooth.

    A Taylor expansion replaces the ratio below |psi| = 1e-2 to avoid
    catastrophic cancellation.
    """
    psi = np.asarray(psi, dtype=float)
    scalar = psi.ndim == 0
    psi = np.atleast_1d(psi)
    out = np.empty_like(psi)
    small = np.abs(psi) < 1e-2
    ps = psi[small]
    out[small] = 2.0 / 3.0 - (2.0 / 15.0) * ps ** 2 + (4.0 / 315.0) * ps ** 4
    pb = psi[~small]
    out[~small] = (2.0 * pb - np.sin(2.0 * pb)) / (2.0 * pb ** 3)
    return float(out[0]) if scalar else out


def rhs(u, grid):
    """Acceleration u_rr + (3/r) u_r + Z(r u) u^3 for an even-regular u."""
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise GridError("non-finite values in the evolved field")
    d1 = grid.diff(1, even=True)
    d2 = grid.diff(2, even=True)
    ur = d1 @ u
    urr = d2 @ u
    lap = np.empty_like(u)
    lap[1:] = urr[1:] + 3.0 * ur[1:] / grid.r[1:]
    lap[0] = 4.0 * urr[0]
    return lap + nonlinearity_Z(grid.r * u) * u ** 3


def _uv_from_state(s):
    """(u, u_t) arrays from a state, with node-0 values by extrapolation."""
    g = s.grid
    uv = []
    for f in (s.psi, s.psi_t):
        v = np.empty(g.n)
        v[1:] = f.values[1:] / g.r[1:]
        v[0] = fd_weights(g.r[1:6], 0.0, 0) @ v[1:6]
        uv.append(v)
    return uv


def _deriv(u, v, grid):
    du = v.copy()
    dv = rhs(u, grid)
    du[-1] = 0.0
    dv[-1] = 0.0
    return du, dv


def rk4_step(u, v, grid, dt):
    k1u, k1v = _deriv(u, v, grid)
    k2u, k2v = _deriv(u + 0.5 * dt * k1u, v + 0.5 * dt * k1v, grid)
    k3u, k3v = _deriv(u + 0.5 * dt * k2u, v + 0.5 * dt * k2v, grid)
    k4u, k4v = _deriv(u + dt * k3u, v + dt * k3v, grid)
    un = u + dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
    vn = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return un, vn


def step(s, dt):
    """One RK4 step of a state; dt must respect the CFL limit."""
    g = s.grid
    if dt > g.h_min:
        raise GridError("dt exceeds the unit-speed CFL limit h_min")
    u, v = _uv_from_state(s)
    un, vn = rk4_step(u, v, g, dt)
    return from_4d(un, vn, g, time=s.time + dt, degree=s.degree,
                   energy_tail=s.energy_tail)


def lambda_proxy(s):
    """Cheap scale estimate: radius where |psi| first crosses pi/2."""
    psi = np.abs(s.psi.values)
    idx = np.nonzero(psi >= np.pi / 2)[0]
    if len(idx) == 0:
        return np.inf
    i = idx[0]
    if i == 0:
        return 0.0
    r0, r1 = s.grid.r[i - 1], s.grid.r[i]
    p0, p1 = psi[i - 1], psi[i]
    if p1 == p0:
        return r1
    return r0 + (r1 - r0) * (np.pi / 2 - p0) / (p1 - p0)


def regrid(s, cfg):
    """Add one dyadic refinement patch at the origin and resample."""
    g = s.grid
    lo, hi, h = g.segments[0]
    w = 0.5 * hi
    w = max(round(w / h), 2) * h
    if w >= hi:
        raise GridError("cannot halve the innermost segment further")
    new_segments = ((0.0, w, h / 2.0), (w, hi, h)) + g.segments[1:]
    ng = RadialGrid(g.r_max, g.base_spacing, new_segments)
    psi = resample(s.psi, ng)
    psi.values[0] = 0.0
    psi_t = resample(s.psi_t, ng)
    psi_t.values[0] = 0.0
    return WaveMapState(psi, psi_t, time=s.time, degree=s.degree,
                        energy_tail=s.energy_tail)


class Trajectory:
    """Evolution record: snapshots and step reports at output cadence."""

    def __init__(self):
        self.times = []
        self.snapshots = []
        self.reports = []
        self.track = None
        self.blowup_flag = False
        self.halt_reason = None

    @property
    def final_state(self):
        return self.snapshots[-1] if self.snapshots else None


def evolve(s, cfg, observers=()):
    """Integrate a state to cfg.t_end, reporting at cfg.output_dt cadence.

    Returns a Trajectory.  Integration halts early on NaN (blow-up flagged)
    or when refinement would exceed cfg.max_levels.
    """
    traj = Trajectory()
    state = s
    e0 = energy(state).total
    n_levels = 0

    def emit(state, dt, regridded=False, suspected=False):
        e = energy(state).total
        drift = (e - e0) / max(abs(e0), 1e-300)
        rep = StepReport(state.time, dt, e, drift, state.grid.h_min,
                         lambda_proxy(state), regridded, suspected)
        traj.times.append(state.time)
        traj.snapshots.append(state)
        traj.reports.append(rep)
        for obs in observers:
            obs(state, rep)
        return rep

    u, v = _uv_from_state(state)
    grid = state.grid
    emit(state, cfg.cfl * grid.h_min)
    t = state.time
    next_out = t + cfg.output_dt
    while t < cfg.t_end - 1e-14:
        dt = cfg.cfl * grid.h_min
        t_target = min(next_out, cfg.t_end)
        n_sub = max(1, int(np.ceil((t_target - t) / dt - 1e-12)))
        dt = (t_target - t) / n_sub
        bad = False
        for _ in range(n_sub):
            try:
                u, v = rk4_step(u, v, grid, dt)
            except GridError:
                bad = True
                break
            t += dt
            if not np.all(np.isfinite(u)):
                bad = True
                break
        state = from_4d(u, v, grid, time=t, degree=state.degree,
                        energy_tail=state.energy_tail)
        if bad:
            traj.blowup_flag = True
            traj.halt_reason = "nan"
            emit(state, dt, suspected=True)
            break
        lam_est = lambda_proxy(state)
        suspected = lam_est < cfg.blowup_floor
        dpsi_max = np.max(np.abs(grid.d1(state.psi.values)))
        suspected = suspected or dpsi_max > cfg.gradient_cap
        regridded = False
        if np.isfinite(lam_est) and lam_est < cfg.refine_trigger * grid.h_min:
            if n_levels + 1 > cfg.max_levels:
                traj.blowup_flag = True
                traj.halt_reason = "max_levels"
                emit(state, dt, suspected=True)
                break
            state = regrid(state, cfg)
            grid = state.grid
            u, v = _uv_from_state(state)
            n_levels += 1
            regridded = True
        emit(state, dt, regridded=regridded, suspected=suspected)
        if suspected:
            traj.blowup_flag = True
            traj.halt_reason = traj.halt_reason or "threshold"
            break
        next_out = t + cfg.output_dt
    return traj


def detect_blowup(traj, cfg=None):
    """Blow-up declaration from a trajectory's step reports.

    Returns (T_plus_estimate, evidence dict).  The estimate here is the last
    recorded time; a rate fit sharpens it downstream.
    """
    evidence = {}
    declared = traj.blowup_flag
    lams = [rep.lambda_estimate for rep in traj.reports
            if np.isfinite(rep.lambda_estimate)]
    if cfg is not None and lams:
        if min(lams) < cfg.blowup_floor:
            declared = True
            evidence["lambda_floor"] = min(lams)
    if not declared:
        return None, evidence
    if lams:
        evidence["lambda_min"] = min(lams)
        evidence["lambda_shrinking"] = len(lams) > 1 and lams[-1] < lams[0]
    if traj.halt_reason:
        evidence["halt_reason"] = traj.halt_reason
    return traj.times[-1] if traj.times else None, evidence
