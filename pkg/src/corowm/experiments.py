"""Initial-data generators, experiment orchestration, rate fitting, and the
reduced-ODE comparator for the scale dynamics."""

import json
import os

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .grid import (FieldSample, GridError, WaveMapState, make_grid,
                   write_field_csv)
from .harmonic import BubbleParams, LambdaQ, Q_scaled, two_bubble, \
    two_bubble_energy_tail
from .functionals import distance, energy
from .modulation import ModConfig, ModulationTrack, fit_modulation, \
    split_intervals
from .evolve import SolverConfig, detect_blowup, evolve


def ell_of_t(t):
    """Solve ell |log ell| = 2 t^2 on (0, 1/e) and return (ell, ell').

    The derivative follows from implicit differentiation:
    ell' (|log ell| - 1) = 4t.
    """
    t = float(t)
    if not 0 < t or not 2.0 * t * t < np.exp(-1.0):
        raise ValueError("t must satisfy 0 < 2 t^2 < 1/e")
    target = 2.0 * t * t

    def f(ell):
        return ell * (-np.log(ell)) - target

    ell = brentq(f, 1e-300, np.exp(-1.0), xtol=1e-300, rtol=8.9e-16)
    ell_prime = 4.0 * t / (-np.log(ell) - 1.0)
    return ell, ell_prime


def _blowup_state(ell, ell_prime, grid, r_cut, tail):
    """State (Q_ell - Q, -ell' LambdaQ_ell_under * [r <= r_cut]).

    The node straddling r_cut carries a fractional weight so that the
    discrete energy is continuous in r_cut (needed by the root-find below).
    """
    r = grid.r
    psi = Q_scaled(r, ell) - 2.0 * np.arctan(r)
    psi1 = -ell_prime * LambdaQ(r / ell) / ell
    w = np.zeros(grid.n)
    w[r <= r_cut] = 1.0
    above = np.nonzero(r > r_cut)[0]
    if len(above) > 0 and above[0] > 0:
        i = above[0]
        w[i] = (r_cut - r[i - 1]) / (r[i] - r[i - 1])
    return WaveMapState(FieldSample(grid, psi, "angle"),
                        FieldSample(grid, psi1 * w, "velocity"),
                        time=0.0, degree=0, energy_tail=tail)


def make_blowup_data(t_n, grid, details=False):
    """Threshold data (Q_ell - Q, -ell' LambdaQ_ell_under cut at sqrt(R_n ell)).

    R_n is fixed by a root-find so the discrete energy equals exactly twice
    the bubble energy, 8 pi.
    """
    ell, ell_prime = ell_of_t(t_n)
    tail = two_bubble_energy_tail(BubbleParams(ell, 1.0), grid.r_max)
    target = 8.0 * np.pi

    def gap(R_n):
        s = _blowup_state(ell, ell_prime, grid, np.sqrt(R_n * ell), tail)
        return energy(s).total - target

    lo, hi = ell, 1e3
    glo, ghi = gap(lo), gap(hi)
    if glo * ghi > 0:
        raise GridError(
            f"no energy bracket for the cutoff radius: gap({lo}) = {glo:.3e}, "
            f"gap({hi}) = {ghi:.3e}")
    R_n = brentq(gap, lo, hi, xtol=1e-14, rtol=8.9e-16)
    state = _blowup_state(ell, ell_prime, grid, np.sqrt(R_n * ell), tail)
    if details:
        info = {"ell": ell, "ell_prime": ell_prime, "R_n": R_n,
                "r_cut": float(np.sqrt(R_n * ell)),
                "energy": energy(state).total}
        return state, info
    return state


def make_small_bump(amplitude, width, grid):
    """Sub-threshold data psi = A r exp(-r^2/w^2), psi_t = 0."""
    r = grid.r
    psi = amplitude * r * np.exp(-(r / width) ** 2)
    s = WaveMapState(FieldSample(grid, psi, "angle"),
                     FieldSample(grid, np.zeros(grid.n), "velocity"),
                     time=0.0, degree=0)
    if amplitude != 0 and energy(s).total >= 8.0 * np.pi:
        raise GridError("bump energy reaches the two-bubble threshold 8 pi")
    return s


def make_perturbed_two_bubble(p, pert, grid):
    """Two-bubble plus a localized bump and/or velocity field.

    pert keys (all optional, default 0): amp, width, center,
    vel_amp, vel_width, vel_center.
    """
    s = two_bubble(p, grid)
    r = grid.r
    amp = pert.get("amp", 0.0)
    if amp:
        w = pert.get("width", 1.0)
        c = pert.get("center", 0.0)
        s.psi.values[:] += amp * r * np.exp(-((r - c) / w) ** 2)
    vamp = pert.get("vel_amp", 0.0)
    if vamp:
        w = pert.get("vel_width", 1.0)
        c = pert.get("vel_center", 0.0)
        s.psi_t.values[:] += vamp * r * np.exp(-((r - c) / w) ** 2)
    return s


# -- rate fitting -----------------------------------------------------------


class RateFit:
    __slots__ = ("T_plus", "C", "window", "rms_residual")

    def __init__(self, T_plus, C, window, rms_residual):
        self.T_plus = T_plus
        self.C = C
        self.window = window
        self.rms_residual = rms_residual

    def to_json(self):
        return json.dumps({"T_plus": self.T_plus, "C": self.C,
                           "window": list(self.window),
                           "rms_residual": self.rms_residual})


def fit_blowup_rate(track, window):
    """Fit sqrt(lambda |log lambda|) = a (T_plus - t) on a track window.

    Linear in a for fixed T_plus, so a 1d search over T_plus suffices;
    returns C = a^2, the comparability constant of the collapse law.
    """
    t = track.column("t")
    lam = track.column("lambda")
    conv = track.column("converged") > 0
    sel = conv & (t >= window[0]) & (t <= window[1]) & np.isfinite(lam)
    t, lam = t[sel], lam[sel]
    if len(t) < 20:
        raise GridError("rate fit needs at least 20 converged points")
    if np.any(np.diff(lam) >= 0):
        raise GridError("rate fit needs strictly decreasing lambda")
    s = np.sqrt(lam * np.abs(np.log(lam)))
    t_hi = t[-1]
    span = t_hi - t[0]

    def cost(T):
        x = T - t
        a = np.sum(s * x) / np.sum(x * x)
        return float(np.sum((s - a * x) ** 2))

    res = minimize_scalar(cost, bounds=(t_hi + 1e-12, t_hi + 10.0 * span + 1.0),
                          method="bounded",
                          options={"xatol": 1e-13})
    T_plus = float(res.x)
    x = T_plus - t
    a = float(np.sum(s * x) / np.sum(x * x))
    rms = float(np.sqrt(np.mean((s - a * x) ** 2)))
    return RateFit(T_plus, a * a, (float(t[0]), float(t_hi)), rms)


def mod_ode(zeta0, b0, mu0, ts):
    """Closed-form comparator: zeta' = b, b' = 8/mu, mu' = 0.

    Times are measured from ts[0]; returns (zeta, b) arrays on ts.
    """
    if mu0 <= 0:
        raise ValueError("mu0 must be positive")
    ts = np.asarray(ts, dtype=float)
    tau = ts - ts[0]
    zeta = zeta0 + b0 * tau + 4.0 * tau ** 2 / mu0
    b = b0 + 8.0 * tau / mu0
    return zeta, b


# -- experiment orchestration ----------------------------------------------

_KINDS = ("two_bubble", "blowup_s5", "small_bump", "perturbed_two_bubble")


class ExperimentConfig:
    """Declarative description of one run (data, solver, diagnostics, outputs)."""

    def __init__(self, kind, params, grid_spec, solver=None, mod=None,
                 diagnostics=None, out_dir=".", seed=0):
        if kind not in _KINDS:
            raise ValueError(f"unknown data kind {kind!r}")
        self.kind = kind
        self.params = dict(params)
        self.grid_spec = dict(grid_spec)
        self.solver = solver or SolverConfig()
        self.mod = mod or ModConfig()
        self.diagnostics = dict(diagnostics or {})
        self.out_dir = out_dir
        self.seed = int(seed)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            doc = json.load(fh)
        solver = SolverConfig(**doc.get("solver", {}))
        mod = ModConfig(**doc.get("mod", {}))
        return cls(doc["kind"], doc.get("params", {}), doc["grid"],
                   solver=solver, mod=mod,
                   diagnostics=doc.get("diagnostics", {}),
                   out_dir=doc.get("out_dir", "."), seed=doc.get("seed", 0))

    def build_grid(self):
        patches = [tuple(p) for p in self.grid_spec.get("patches", [])]
        return make_grid(self.grid_spec["r_max"], self.grid_spec["n_base"],
                         patches)

    def build_state(self, grid):
        p = self.params
        if self.kind == "two_bubble":
            return two_bubble(BubbleParams(p["lambda"], p["mu"],
                                           p.get("iota", 1)), grid)
        if self.kind == "blowup_s5":
            return make_blowup_data(p["t_n"], grid)
        if self.kind == "small_bump":
            return make_small_bump(p.get("amplitude", 0.0),
                                   p.get("width", 1.0), grid)
        bp = BubbleParams(p["lambda"], p["mu"], p.get("iota", 1))
        return make_perturbed_two_bubble(bp, p.get("pert", {}), grid)


def run_experiment(cfg):
    """Evolve the configured data, attach diagnostics, write artifacts.

    Writes per-snapshot field CSVs, a manifest JSON, the modulation-track
    CSV, and an events JSON into cfg.out_dir.
    """
    os.makedirs(cfg.out_dir, exist_ok=True)
    grid = cfg.build_grid()
    state = cfg.build_state(grid)
    diag = cfg.diagnostics
    track = ModulationTrack()
    manifest = {"kind": cfg.kind, "params": cfg.params, "seed": cfg.seed,
                "times": [], "files": [], "grid": [], "reports": []}
    guess_holder = {"guess": None}

    def observer(st, rep):
        i = len(manifest["times"])
        fpsi = f"psi_{i:04d}.csv"
        fpsit = f"psit_{i:04d}.csv"
        write_field_csv(st.psi, os.path.join(cfg.out_dir, fpsi))
        write_field_csv(st.psi_t, os.path.join(cfg.out_dir, fpsit))
        manifest["times"].append(st.time)
        manifest["files"].append([fpsi, fpsit])
        manifest["grid"].append({"r_max": st.grid.r_max, "n": st.grid.n,
                                 "segments": [list(seg) for seg in
                                              st.grid.segments]})
        manifest["reports"].append({
            "t": rep.t, "dt": rep.dt, "energy": rep.energy,
            "relative_energy_drift": rep.relative_energy_drift,
            "h_min": rep.h_min, "lambda_estimate": rep.lambda_estimate,
            "regridded": bool(rep.regridded),
            "blowup_suspected": bool(rep.blowup_suspected)})
        if not diag.get("modulation") and not diag.get("distance"):
            return
        dist = None
        if diag.get("distance"):
            dist = distance(st)
        if diag.get("modulation"):
            guess = guess_holder["guess"]
            if guess is None:
                if dist is None:
                    dist = distance(st)
                guess = dist.argmin
            pt = fit_modulation(st, cfg.mod, guess)
            if pt.converged:
                guess_holder["guess"] = BubbleParams(pt.lam, pt.mu, guess.iota)
            track.append(st.time, pt, dist)
        elif dist is not None:
            from .modulation import ModulationPoint
            pt = ModulationPoint(st.time, dist.argmin.lam, dist.argmin.mu,
                                 np.nan, np.nan, np.nan, np.nan, False)
            track.append(st.time, pt, dist)

    traj = evolve(state, cfg.solver, observers=[observer])
    traj.track = track
    track_path = os.path.join(cfg.out_dir, "track.csv")
    if track.rows:
        track.write_csv(track_path)

    T_plus, evidence = detect_blowup(traj, cfg.solver)
    events = {"blowup": {"declared": T_plus is not None,
                         "T_plus": T_plus, "C": None},
              "intervals": {"bad": [], "good": []}}
    if T_plus is not None and track.rows:
        try:
            conv_t = track.column("t")[track.column("converged") > 0]
            fit = fit_blowup_rate(track, (conv_t[0], conv_t[-1]))
            events["blowup"]["T_plus"] = fit.T_plus
            events["blowup"]["C"] = fit.C
        except (GridError, IndexError):
            pass
    if track.rows and diag.get("distance"):
        eps0 = diag.get("eps0", 1e-2)
        ts = track.column("t")
        ds = track.column("d")
        ok = np.isfinite(ds)
        bad, good = split_intervals(ts[ok], ds[ok], eps0)
        events["intervals"]["bad"] = [list(iv) for iv in bad]
        events["intervals"]["good"] = [list(iv) for iv in good]
    with open(os.path.join(cfg.out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1)
    with open(os.path.join(cfg.out_dir, "events.json"), "w") as fh:
        json.dump(events, fh, indent=1)
    return traj
