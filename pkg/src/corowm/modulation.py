"""Modulation machinery: scale extraction by orthogonality, corrected quantities
zeta and b, the virial weight q with its operators, and the interval splitter.
"""

import numpy as np
from scipy.integrate import quad as _squad

from .grid import FieldSample, GridError, h_norm, l2_norm, quad
from .harmonic import Lambda0LambdaQ, LambdaQ, Q_scaled
from .functionals import chi, chi_prime


class ModConfig:
    """Tunables for the modulation layer.

    L: truncation scale of the localized resonance Z = chi_L LambdaQ.
    M: neck-scale multiplier in the cutoff chi at radius M sqrt(lambda mu).
    q_c, q_R: smallness parameter and inner radius of the virial weight q.
    """

    __slots__ = ("L", "M", "q_c", "q_R", "newton_tol", "max_iter", "tube_radius")

    def __init__(self, L=100.0, M=10.0, q_c=0.05, q_R=50.0,
                 newton_tol=1e-11, max_iter=40, tube_radius=0.5):
        if L < 10:
            raise ValueError("L must be at least 10")
        if M < 1:
            raise ValueError("M must be at least 1")
        if not 0 < q_c <= 1:
            raise ValueError("q_c must lie in (0, 1]")
        if q_R < 1:
            raise ValueError("q_R must be at least 1")
        self.L = float(L)
        self.M = float(M)
        self.q_c = float(q_c)
        self.q_R = float(q_R)
        self.newton_tol = float(newton_tol)
        self.max_iter = int(max_iter)
        self.tube_radius = float(tube_radius)


class ModulationPoint:
    __slots__ = ("time", "lam", "mu", "zeta", "b", "g_h_norm", "gdot_l2",
                 "converged", "residual", "iterations")

    def __init__(self, time, lam, mu, zeta, b, g_h_norm, gdot_l2,
                 converged, residual=np.nan, iterations=0):
        self.time = time
        self.lam = lam
        self.mu = mu
        self.zeta = zeta
        self.b = b
        self.g_h_norm = g_h_norm
        self.gdot_l2 = gdot_l2
        self.converged = converged
        self.residual = residual
        self.iterations = iterations


# -- localized resonance ----------------------------------------------------


def Zcut(r, L):
    """Truncated resonance chi(r/L) * LambdaQ(r)."""
    return chi(np.asarray(r) / L) * LambdaQ(r)


def Lambda0Zcut(r, L):
    """(1 + r d/dr) applied to Zcut, in closed form."""
    r = np.asarray(r, dtype=float)
    return chi(r / L) * Lambda0LambdaQ(r) + (r / L) * chi_prime(r / L) * LambdaQ(r)


_ALPHA_CACHE = {}


def alphaL(L):
    """<Z | LambdaQ> = int chi(r/L) (LambdaQ)^2 r dr, about 4 log L + O(1)."""
    if L not in _ALPHA_CACHE:
        val, _ = _squad(lambda x: chi(x / L) * LambdaQ(x) ** 2 * x, 0.0,
                        2.0 * L, points=[L], epsabs=1e-13, epsrel=1e-12,
                        limit=200)
        _ALPHA_CACHE[L] = float(val)
    return _ALPHA_CACHE[L]


def _pair_Z_LQ(sigma, L):
    """<Z_lam_under | LambdaQ_mu_under> as a function of sigma = lam/mu."""
    val, _ = _squad(lambda x: Zcut(x, L) * sigma * LambdaQ(sigma * x) * x,
                    0.0, 2.0 * L, points=[L], epsabs=1e-14, epsrel=1e-12,
                    limit=200)
    return float(val)


def _pair_Zmu_LQlam(sigma, L):
    """<Z_mu_under | LambdaQ_lam_under> as a function of sigma = lam/mu."""
    val, _ = _squad(lambda x: Zcut(x, L) * LambdaQ(x / sigma) * x / sigma,
                    0.0, 2.0 * L, points=[sigma, L], epsabs=1e-14,
                    epsrel=1e-12, limit=200)
    return float(val)


def _pair(grid, a, b):
    return quad(FieldSample(grid, a * b), "r dr")


def a_matrix(s, lam, mu, cfg, g_values=None):
    """The 2x2 matrix of the modulation linear system.

    Also the exact Jacobian of F(lam, mu) = (<Z_lam_under | g>, <Z_mu_under | g>)
    with g = psi - Q_lam + Q_mu.
    """
    grid = s.grid
    r = grid.r
    L = cfg.L
    if g_values is None:
        g_values = s.psi.values - Q_scaled(r, lam) + Q_scaled(r, mu)
    al = alphaL(L)
    sigma = lam / mu
    a11 = al - _pair(grid, Lambda0Zcut(r / lam, L) / lam ** 2, g_values)
    a12 = -_pair_Z_LQ(sigma, L)
    a21 = _pair_Zmu_LQlam(sigma, L)
    a22 = -al - _pair(grid, Lambda0Zcut(r / mu, L) / mu ** 2, g_values)
    return np.array([[a11, a12], [a21, a22]])


def fit_modulation(s, cfg, guess):
    """Extract (lambda, mu) by Newton iteration on the orthogonality conditions.

    F(lam, mu) = (<Z_lam_under | g>, <Z_mu_under | g>) with
    g = psi - Q_lam + Q_mu; the Jacobian is the modulation A-matrix.
    Steps are damped (halved while the residual grows) and clamped to a
    factor-of-5 multiplicative change per iteration.  If the iteration from
    the supplied guess stalls, it is restarted once with the mu guess
    doubled, which separates the two scale windows when they were guessed
    too close together.
    """
    grid = s.grid
    r = grid.r
    al = alphaL(cfg.L)
    psi = s.psi.values
    if guess.iota == -1:
        psi = -psi

    def residuals(lam, mu):
        g = psi - Q_scaled(r, lam) + Q_scaled(r, mu)
        F1 = _pair(grid, Zcut(r / lam, cfg.L) / lam, g)
        F2 = _pair(grid, Zcut(r / mu, cfg.L) / mu, g)
        return np.array([F1, F2]), g

    def attempt(lam, mu):
        F, g = residuals(lam, mu)
        n_iter = 0
        ok = False
        for n_iter in range(1, cfg.max_iter + 1):
            if max(abs(F[0]), abs(F[1])) < cfg.newton_tol * al:
                ok = True
                break
            A = a_matrix(s, lam, mu, cfg, g_values=g)
            det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
            if abs(det) < 1e-12:
                break
            step = np.linalg.solve(A, -F)
            lam_new = float(np.clip(lam + step[0], lam / 5.0, lam * 5.0))
            mu_new = float(np.clip(mu + step[1], mu / 5.0, mu * 5.0))
            F_new, g_new = residuals(lam_new, mu_new)
            halvings = 0
            while (np.max(np.abs(F_new)) > np.max(np.abs(F))
                   and halvings < 12):
                lam_new = 0.5 * (lam + lam_new)
                mu_new = 0.5 * (mu + mu_new)
                F_new, g_new = residuals(lam_new, mu_new)
                halvings += 1
            lam, mu, F, g = lam_new, mu_new, F_new, g_new
        else:
            ok = max(abs(F[0]), abs(F[1])) < cfg.newton_tol * al
        return lam, mu, F, g, n_iter, ok

    lam, mu, F, g, n_iter, ok = attempt(guess.lam, guess.mu)
    if not ok:
        lam, mu, F, g, n_retry, ok = attempt(guess.lam, 2.0 * guess.mu)
        n_iter += n_retry

    ghn = h_norm(FieldSample(grid, g))
    gdl = l2_norm(s.psi_t)
    if ok and ghn ** 2 + lam / mu > cfg.tube_radius:
        ok = False
    pt = ModulationPoint(s.time, lam, mu, np.nan, np.nan, ghn, gdl,
                         ok, residual=float(np.max(np.abs(F))),
                         iterations=n_iter)
    if ok and lam < mu:
        pt.zeta, pt.b = zeta_b(s, pt, cfg, iota=guess.iota)
    return pt


# -- corrected scale and its momentum ---------------------------------------

_DEFAULT_Q = {}


def default_q(cfg):
    key = (cfg.q_c, cfg.q_R)
    if key not in _DEFAULT_Q:
        _DEFAULT_Q[key] = build_q(cfg.q_c, cfg.q_R)
    return _DEFAULT_Q[key]


def zeta_b(s, pt, cfg, iota=1):
    """Corrected scale zeta and momentum-like correction b.

    zeta = 2 lam |log(lam/mu)| - <chi_m LambdaQ_lam_under | g>,
    b = -<chi_m LambdaQ_lam_under | gdot> - <gdot | A0(lam) g>,
    with m = M sqrt(lam mu) and gdot = psi_t.
    """
    lam, mu = pt.lam, pt.mu
    if lam >= mu:
        raise GridError("zeta and b require lam < mu")
    grid = s.grid
    r = grid.r
    m = cfg.M * np.sqrt(lam * mu)
    psi = iota * s.psi.values
    psi_t = iota * s.psi_t.values
    g = psi - Q_scaled(r, lam) + Q_scaled(r, mu)
    weight = chi(r / m) * LambdaQ(r / lam) / lam
    zeta = 2.0 * lam * abs(np.log(lam / mu)) - _pair(grid, weight, g)
    q = default_q(cfg)
    a0g = applyA0(lam, FieldSample(grid, g), q).values
    b = -_pair(grid, weight, psi_t) - _pair(grid, psi_t, a0g)
    return float(zeta), float(b)


# -- the virial weight q ----------------------------------------------------


def _s5(x):
    x = np.clip(x, 0.0, 1.0)
    return x ** 3 * (10.0 - 15.0 * x + 6.0 * x * x)


def _s5p(x):
    x = np.asarray(x, dtype=float)
    inside = (x > 0.0) & (x < 1.0)
    return np.where(inside, 30.0 * x ** 2 * (1.0 - x) ** 2, 0.0)


def _s5_int(x):
    """Antiderivative of the smoothstep, zero at 0; equals x - 1/2 for x >= 1."""
    xc = np.clip(x, 0.0, 1.0)
    base = xc ** 4 * (2.5 - 3.0 * xc + xc * xc)
    return base + np.maximum(np.asarray(x, dtype=float) - 1.0, 0.0)


class QFunction:
    """Virial weight q with q(r) = r^2/2 inside r <= R and slow log-scale decay
    of q'(r)/r beyond, so that q' vanishes identically at large radius while
    the curvature bounds q'' >= -c and |r (q'/r)'| <= c hold everywhere.

    In s = log(r/R), the profile is y(s) = q'(r)/r = 1 - c * int_0^s sigma,
    where sigma ramps 0 -> 1 -> 0 smoothly with total integral 1/c.
    """

    def __init__(self, c, R):
        if not 0 < c <= 1:
            raise ValueError("c must lie in (0, 1]")
        if R < 1:
            raise ValueError("R must be at least 1")
        self.c = float(c)
        self.R = float(R)
        self.W = min(6.0, 1.0 / self.c)
        self.P = 1.0 / self.c - self.W
        self.s_end = self.P + 2.0 * self.W
        self.r_star = self.R * np.exp(self.s_end)
        # cumulative integral for q values beyond R, on a dense log sample
        sg = np.linspace(0.0, self.s_end, 64001)
        integ = np.exp(2.0 * sg) * self._y(sg)
        ds = sg[1] - sg[0]
        self._sgrid = sg
        self._cum = np.concatenate(
            [[0.0], np.cumsum(0.5 * (integ[1:] + integ[:-1]) * ds)])
        self._verify()

    def _sigma(self, s):
        s = np.asarray(s, dtype=float)
        up = _s5(s / self.W)
        down = _s5((self.s_end - s) / self.W)
        return np.minimum(up, down)

    def _sigma_s(self, s):
        s = np.asarray(s, dtype=float)
        on_up = s <= self.W + 0.5 * self.P
        return np.where(on_up, _s5p(s / self.W) / self.W,
                        -_s5p((self.s_end - s) / self.W) / self.W)

    def _y(self, s):
        s = np.asarray(s, dtype=float)
        up = self.W * _s5_int(np.clip(s, 0.0, self.W) / self.W)
        mid = np.clip(s - self.W, 0.0, self.P)
        down = self.W * (0.5 - _s5_int(np.clip(self.s_end - s, 0.0, self.W)
                                       / self.W))
        return np.maximum(1.0 - self.c * (up + mid + down), 0.0)

    def qp(self, r):
        """First derivative q'."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out = np.array(r, dtype=float, copy=True)
        outer = r > self.R
        s = np.log(np.maximum(r[outer], self.R) / self.R)
        out[outer] = r[outer] * self._y(s)
        return float(out[0]) if scalar else out

    def qpp(self, r):
        """Second derivative q''."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out = np.ones_like(r)
        outer = r > self.R
        s = np.log(np.maximum(r[outer], self.R) / self.R)
        out[outer] = self._y(s) - self.c * self._sigma(s)
        out[r >= self.r_star] = 0.0
        return float(out[0]) if scalar else out

    def q(self, r):
        """The weight itself."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out = 0.5 * np.minimum(r, self.R) ** 2
        outer = r > self.R
        s = np.minimum(np.log(np.maximum(r[outer], self.R) / self.R), self.s_end)
        out[outer] += self.R ** 2 * np.interp(s, self._sgrid, self._cum)
        return float(out[0]) if scalar else out

    def _verify(self, n=10000):
        """Numerical guard for the curvature and bi-Laplacian properties."""
        c, R = self.c, self.R
        r = np.exp(np.linspace(np.log(1e-3 * R), np.log(3.0 * self.r_star), n))
        qp = self.qp(r)
        qpp = self.qpp(r)
        tol = 1e-9
        if np.any(qp < -tol) or np.any(qp > r * (1.0 + 1e-12) + tol):
            raise GridError("q verification failed: 0 <= q' <= r violated")
        if np.any(np.abs(qpp) > 1.0 + tol):
            raise GridError("q verification failed: |q''| <= 1 violated")
        if np.any(qpp < -c - tol) or np.any(qp / r < -c - tol):
            raise GridError("q verification failed: lower curvature bound")
        if np.any(np.abs(qpp - qp / r) > c + tol):
            raise GridError("q verification failed: |r (q'/r)'| <= c")
        # bi-Laplacian bound: Lap^2 q <= c/r^2, via 5-point differences in
        # log r of G = q'' + q'/r (Lap q), using Lap G = G_ss / r^2
        d = 1e-3
        shifts = np.array([-2, -1, 0, 1, 2]) * d
        coef = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * d * d)
        G = np.zeros((5, n))
        for k, sh in enumerate(shifts):
            rk = r * np.exp(sh)
            G[k] = self.qpp(rk) + self.qp(rk) / rk
        bilap = (coef @ G) / r ** 2
        if np.any(bilap > c / r ** 2 * (1.0 + 1e-6) + tol):
            raise GridError("q verification failed: bi-Laplacian bound")


def build_q(c, R):
    """Construct and verify the virial weight for parameters (c, R)."""
    return QFunction(c, R)


# -- the virial operators ---------------------------------------------------


def applyA(lam, f, q):
    """[A(lam) f](r) = q'(r/lam) d_r f."""
    g = f.grid
    vals = q.qp(g.r / lam) * g.d1(f.values)
    return FieldSample(g, vals, "aux")


def applyA0(lam, f, q):
    """[A0(lam) f](r) = (q''(r/lam)/(2 lam) + q'(r/lam)/(2r)) f + q'(r/lam) d_r f."""
    g = f.grid
    r = g.r
    x = r / lam
    qp_over_2r = np.empty(g.n)
    qp_over_2r[1:] = q.qp(x[1:]) / (2.0 * r[1:])
    qp_over_2r[0] = 0.5 / lam
    vals = (q.qpp(x) / (2.0 * lam) + qp_over_2r) * f.values \
        + q.qp(x) * g.d1(f.values)
    return FieldSample(g, vals, "aux")


# -- interval splitter ------------------------------------------------------


def split_intervals(ts, ds, eps0):
    """Hysteresis split of a time series of distances into bad/good intervals.

    Bad intervals keep d <= eps0 throughout (exit when d crosses above eps0);
    good intervals keep d >= eps0/2 throughout (exit when d crosses below
    eps0/2).  Boundaries are linear interpolants of the threshold crossings.
    """
    ts = np.asarray(ts, dtype=float)
    ds = np.asarray(ds, dtype=float)
    if len(ts) == 0:
        return [], []
    if eps0 <= 0:
        raise ValueError("eps0 must be positive")
    lo, hi = 0.5 * eps0, eps0
    bad, good = [], []
    state = "good" if ds[0] >= lo else "bad"
    start = ts[0]
    for i in range(1, len(ts)):
        if state == "bad" and ds[i] > hi:
            tc = _crossing(ts[i - 1], ts[i], ds[i - 1], ds[i], hi)
            bad.append((start, tc))
            state, start = "good", tc
        elif state == "good" and ds[i] < lo:
            tc = _crossing(ts[i - 1], ts[i], ds[i - 1], ds[i], lo)
            good.append((start, tc))
            state, start = "bad", tc
    (bad if state == "bad" else good).append((start, ts[-1]))
    return bad, good


def _crossing(t0, t1, d0, d1, level):
    if d1 == d0:
        return t1
    return t0 + (t1 - t0) * (level - d0) / (d1 - d0)


# -- track container --------------------------------------------------------

TRACK_COLUMNS = ("t", "lambda", "mu", "zeta", "b", "d", "dplus", "dminus",
                 "g_h_norm", "gdot_l2", "converged")


class ModulationTrack:
    """Time series of modulation quantities along a trajectory."""

    def __init__(self):
        self.rows = []

    def append(self, t, pt, dist=None):
        d = dp = dm = np.nan
        if dist is not None:
            d, dp, dm = dist.d, dist.d_plus, dist.d_minus
        self.rows.append((t, pt.lam, pt.mu, pt.zeta, pt.b, d, dp, dm,
                          pt.g_h_norm, pt.gdot_l2, int(pt.converged)))

    def column(self, name):
        j = TRACK_COLUMNS.index(name)
        return np.array([row[j] for row in self.rows])

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(TRACK_COLUMNS) + "\n")
            for row in self.rows:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    @classmethod
    def read_csv(cls, path):
        track = cls()
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        for row in data:
            track.rows.append(tuple(row))
        return track
