"""Harmonic-map bubble Q = 2 arctan r, its scaling generators, and two-bubble builders.

Closed forms are used everywhere they exist; sampled generators exist only to
cross-check the grid stencils.
"""

import numpy as np
from scipy.integrate import quad as _squad

from .grid import FieldSample, WaveMapState


def Q(r):
    """Harmonic-map profile 2 arctan r."""
    return 2.0 * np.arctan(r)


def Q_scaled(r, lam):
    """Q at scale lam: Q(r/lam)."""
    if lam <= 0:
        raise ValueError("scale must be positive")
    return 2.0 * np.arctan(np.asarray(r) / lam)


def LambdaQ(r):
    """r d/dr Q = 2r/(1+r^2)."""
    r = np.asarray(r, dtype=float)
    return 2.0 * r / (1.0 + r * r)


def Lambda2Q(r):
    """Second scaling generator applied to Q: 2r(1-r^2)/(1+r^2)^2."""
    r = np.asarray(r, dtype=float)
    return 2.0 * r * (1.0 - r * r) / (1.0 + r * r) ** 2


def Lambda3Q(r):
    """Third scaling generator applied to Q: 2r(1-6r^2+r^4)/(1+r^2)^3."""
    r = np.asarray(r, dtype=float)
    r2 = r * r
    return 2.0 * r * (1.0 - 6.0 * r2 + r2 * r2) / (1.0 + r2) ** 3


def Lambda0LambdaQ(r):
    """(1 + r d/dr) applied to LambdaQ: 4r/(1+r^2)^2."""
    r = np.asarray(r, dtype=float)
    return 4.0 * r / (1.0 + r * r) ** 2


def lambda_gen(f):
    """r d/dr f via the grid stencils."""
    g = f.grid
    return FieldSample(g, g.r * g.d1(f.values), "aux")


def lambda0_gen(f):
    """(1 + r d/dr) f via the grid stencils."""
    g = f.grid
    return FieldSample(g, f.values + g.r * g.d1(f.values), "aux")


class BubbleParams:
    """Scales and sign of a two-bubble configuration i*(Q_lam - Q_mu)."""

    __slots__ = ("lam", "mu", "iota")

    def __init__(self, lam, mu, iota=1):
        if lam <= 0 or mu <= 0:
            raise ValueError("scales must be positive")
        if iota not in (1, -1):
            raise ValueError("iota must be +1 or -1")
        self.lam = float(lam)
        self.mu = float(mu)
        self.iota = int(iota)

    @property
    def well_separated(self):
        return self.lam / self.mu < 1.0

    def __repr__(self):
        return f"BubbleParams(lam={self.lam}, mu={self.mu}, iota={self.iota:+d})"


def two_bubble(p, grid):
    """State (psi, psi_t) = (iota*(Q_lam - Q_mu), 0), degree 0, at time 0."""
    psi = p.iota * (Q_scaled(grid.r, p.lam) - Q_scaled(grid.r, p.mu))
    return WaveMapState(
        FieldSample(grid, psi, "angle"),
        FieldSample(grid, np.zeros(grid.n), "velocity"),
        time=0.0, degree=0,
        energy_tail=two_bubble_energy_tail(p, grid.r_max))


def single_bubble(lam, grid):
    """Degree-1 state (Q_lam, 0) with the analytic energy tail beyond r_max."""
    psi = Q_scaled(grid.r, lam)
    x = grid.r_max / lam
    tail = 4.0 * np.pi / (1.0 + x * x)
    return WaveMapState(
        FieldSample(grid, psi, "angle"),
        FieldSample(grid, np.zeros(grid.n), "velocity"),
        time=0.0, degree=1, energy_tail=tail)


def _tb_energy_density(r, lam, mu):
    dpsi = (LambdaQ(r / lam) - LambdaQ(r / mu)) / r
    s = np.sin(Q_scaled(r, lam) - Q_scaled(r, mu))
    return np.pi * (dpsi ** 2 + (s / r) ** 2) * r


def two_bubble_energy_tail(p, r_max):
    """Energy of iota*(Q_lam - Q_mu) beyond r_max, by adaptive quadrature."""
    if p.lam == p.mu:
        return 0.0
    val, _ = _squad(_tb_energy_density, r_max, np.inf, args=(p.lam, p.mu),
                    epsabs=1e-13, epsrel=1e-12, limit=200)
    return float(val)
