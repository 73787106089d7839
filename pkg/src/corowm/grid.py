"""Radial grids, sampled fields, quadrature, norms, and the 2d<->4d change of variables.

Grids live on [0, r_max] and are unions of contiguous uniform segments.
Refinement patches halve the spacing of the segment they sit in and must be
aligned to parent nodes, so node positions are always exactly representable.
"""

import numpy as np

_ALIGN_TOL = 1e-9


class GridError(ValueError):
    pass


def fd_weights(x, x0, m):
    """Finite-difference weights for the m-th derivative at x0 on nodes x.

    Fornberg's recursion; exact for polynomials of degree len(x)-1.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    C = np.zeros((n, m + 1))
    C[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0] - x0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    C[i, k] = c1 * (k * C[i - 1, k - 1] - c5 * C[i - 1, k]) / c2
                C[i, 0] = -c1 * c5 * C[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                C[j, k] = (c4 * C[j, k] - k * C[j, k - 1]) / c3
            C[j, 0] = c4 * C[j, 0] / c3
        c1 = c2
    return C[:, m]


def _uniform_weights(n_int, h):
    """Composite closed Newton-Cotes weights on n_int uniform intervals.

    Groups of 3 intervals use the 4-point rule; a remainder of 1 is absorbed
    into one 5-point (Boole) group, a remainder of 2 into one Simpson group.
    All pieces are at least 4th-order accurate.
    """
    if n_int < 2:
        raise GridError("segment must have at least 2 intervals")
    w = np.zeros(n_int + 1)
    i = 0
    rem = n_int % 3
    if rem == 1:
        # needs n_int >= 4; n_int == 1 already excluded above
        w[0:5] += h * np.array([14.0, 64.0, 24.0, 64.0, 14.0]) / 45.0
        i = 4
    elif rem == 2:
        w[0:3] += h * np.array([1.0, 4.0, 1.0]) / 3.0
        i = 2
    while i < n_int:
        w[i:i + 4] += h * np.array([3.0, 9.0, 9.0, 3.0]) / 8.0
        i += 3
    return w


class RadialGrid:
    """Nested radial mesh on [0, r_max].

    segments is a tuple of (r_lo, r_hi, spacing), contiguous and covering
    [0, r_max]; nodes of adjacent segments share the interface point.
    Derivative matrices and quadrature weights are built lazily and cached.
    """

    def __init__(self, r_max, base_spacing, segments):
        self.r_max = float(r_max)
        self.base_spacing = float(base_spacing)
        self.segments = tuple(segments)
        nodes = [np.array([0.0])]
        seg_start = []
        for (lo, hi, h) in self.segments:
            n = int(round((hi - lo) / h))
            if abs(n * h - (hi - lo)) > _ALIGN_TOL * max(1.0, hi):
                raise GridError(f"segment [{lo}, {hi}] not commensurate with spacing {h}")
            if n < 2:
                raise GridError("segment must have at least 2 intervals")
            seg_start.append(sum(len(a) for a in nodes) - 1)
            nodes.append(lo + h * np.arange(1, n + 1))
        self.r = np.concatenate(nodes)
        self.r[-1] = self.r_max
        self._seg_start = seg_start
        if self.r[0] != 0.0 or np.any(np.diff(self.r) <= 0):
            raise GridError("node sequence must start at 0 and increase strictly")
        self._cache = {}

    @property
    def n(self):
        return len(self.r)

    @property
    def h_min(self):
        return min(h for (_, _, h) in self.segments)

    def seg_node_range(self, k):
        """Inclusive node index range [i0, i1] covered by segment k."""
        lo, hi, h = self.segments[k]
        i0 = self._seg_start[k]
        i1 = i0 + int(round((hi - lo) / h))
        return i0, i1

    # -- quadrature ---------------------------------------------------------

    @property
    def quad_weights(self):
        if "qw" not in self._cache:
            w = np.zeros(self.n)
            for k in range(len(self.segments)):
                lo, hi, h = self.segments[k]
                i0, i1 = self.seg_node_range(k)
                w[i0:i1 + 1] += _uniform_weights(i1 - i0, h)
            self._cache["qw"] = w
        return self._cache["qw"]

    # -- differentiation ----------------------------------------------------

    def _build_diff(self, order, even):
        """Sparse banded derivative operator from 7-node local stencils.

        With even=True the field is extended evenly through r=0 (mirror
        nodes at -r_k carry the same value), which is the right closure for
        4d-reduced fields u = psi/r.
        """
        from scipy.sparse import csr_matrix
        npts = self.n
        width = 7
        half = width // 2
        rows, cols, vals = [], [], []
        for i in range(npts):
            if even and i < half:
                # mirrored stencil through the origin
                nmirror = half - i
                idx = list(range(nmirror, 0, -1)) + list(range(0, i + half + 1))
                x = np.concatenate([-self.r[nmirror:0:-1], self.r[:i + half + 1]])
                w = fd_weights(x, self.r[i], order)
                for j, c in zip(idx, w):
                    rows.append(i)
                    cols.append(j)
                    vals.append(c)
                continue
            j0 = min(max(i - half, 0), npts - width)
            x = self.r[j0:j0 + width]
            w = fd_weights(x, self.r[i], order)
            for j, c in zip(range(j0, j0 + width), w):
                rows.append(i)
                cols.append(j)
                vals.append(c)
        return csr_matrix((vals, (rows, cols)), shape=(npts, npts))

    def diff(self, order=1, even=False):
        key = ("D", order, even)
        if key not in self._cache:
            self._cache[key] = self._build_diff(order, even)
        return self._cache[key]

    def d1(self, values):
        return self.diff(1) @ np.asarray(values)

    def __eq__(self, other):
        return isinstance(other, RadialGrid) and self.segments == other.segments

    def __repr__(self):
        return f"RadialGrid(r_max={self.r_max}, n={self.n}, segments={len(self.segments)})"


def make_grid(r_max, n_base, patches=()):
    """Build a grid with n_base uniform intervals plus dyadic refinement patches.

    Each patch (r_lo, r_hi) must lie inside a single existing segment with its
    endpoints on that segment's nodes; it halves the spacing there.  Patches
    are applied in order, so repeated nested patches keep halving.
    """
    if r_max <= 0:
        raise GridError("r_max must be positive")
    if n_base < 16:
        raise GridError("n_base must be at least 16")
    h0 = r_max / n_base
    segments = [(0.0, float(r_max), h0)]
    for (a, b) in patches:
        if not (0.0 <= a < b <= r_max):
            raise GridError(f"patch [{a}, {b}] outside [0, {r_max}]")
        for k, (lo, hi, h) in enumerate(segments):
            if lo - _ALIGN_TOL <= a and b <= hi + _ALIGN_TOL:
                break
        else:
            raise GridError(f"patch [{a}, {b}] is not nested inside one segment")
        for x in (a, b):
            m = (x - lo) / h
            if abs(m - round(m)) > _ALIGN_TOL * max(1.0, 1.0 / h):
                raise GridError(f"patch boundary {x} not aligned to parent node")
        new = []
        if a > lo + _ALIGN_TOL:
            new.append((lo, a, h))
        new.append((a, b, h / 2.0))
        if b < hi - _ALIGN_TOL:
            new.append((b, hi, h))
        segments[k:k + 1] = new
    return RadialGrid(r_max, h0, segments)


def make_deep_grid(r_max, n_base, levels, width=1.0):
    """Grid with `levels` nested dyadic patches [0, width/2^k], k = 0..levels-1."""
    patches = [(0.0, width / 2 ** k) for k in range(levels)]
    return make_grid(r_max, n_base, patches)


# -- fields -----------------------------------------------------------------


class FieldSample:
    """Real samples on a RadialGrid with a quantity tag."""

    __slots__ = ("grid", "values", "kind")

    def __init__(self, grid, values, kind="aux"):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n,):
            raise GridError(f"expected {grid.n} values, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise GridError("field values must be finite")
        self.grid = grid
        self.values = values
        self.kind = kind

    def copy(self):
        return FieldSample(self.grid, self.values.copy(), self.kind)


class WaveMapState:
    """Sampled azimuth angle and its time derivative, plus a degree tag.

    energy_tail holds the analytic energy carried by the profile beyond
    r_max (zero when no tail descriptor applies); see the energy functional.
    """

    __slots__ = ("psi", "psi_t", "time", "degree", "energy_tail")

    def __init__(self, psi, psi_t, time=0.0, degree=0, energy_tail=0.0):
        if psi.grid is not psi_t.grid and psi.grid != psi_t.grid:
            raise GridError("psi and psi_t must share a grid")
        self.psi = psi
        self.psi_t = psi_t
        self.time = float(time)
        self.degree = int(degree)
        self.energy_tail = float(energy_tail)

    @property
    def grid(self):
        return self.psi.grid

    def validate(self, boundary_tol=1e-3):
        """Check the degree-class boundary conditions."""
        v = self.psi.values
        if abs(v[0]) > 1e-12:
            raise GridError("psi(0) must vanish")
        target = self.degree * np.pi
        if abs(v[-1] - target) >= boundary_tol:
            raise GridError(
                f"psi(r_max) = {v[-1]:.6g}, expected {target:.6g} within {boundary_tol}")
        return self


# -- quadrature and norms ---------------------------------------------------


def quad(f, weight="r dr", tail=0.0):
    """Composite quadrature of a FieldSample against r dr, dr, or dr/r.

    For dr/r the integrand must vanish at least linearly at the origin; the
    node-0 value of f/r is replaced by the one-sided derivative limit.
    An optional analytic tail (integral beyond r_max) is added.
    """
    g = f.grid
    v = f.values
    if weight == "r dr":
        integrand = v * g.r
    elif weight == "dr":
        integrand = v
    elif weight == "dr/r":
        scale = np.max(np.abs(v)) or 1.0
        if abs(v[0]) > 1e-9 * scale:
            raise GridError("dr/r weight requires the integrand to vanish at r = 0")
        integrand = np.empty_like(v)
        integrand[1:] = v[1:] / g.r[1:]
        integrand[0] = fd_weights(g.r[:5], 0.0, 1) @ v[:5]
    else:
        raise GridError(f"unknown weight {weight!r}")
    return float(g.quad_weights @ integrand) + tail


def l2_norm(f):
    """sqrt of int f^2 r dr."""
    return float(np.sqrt(max(quad(FieldSample(f.grid, f.values ** 2), "r dr"), 0.0)))


def h_norm(f):
    """sqrt of int ((d_r f)^2 + f^2/r^2) r dr.  Requires f(0) = 0."""
    g = f.grid
    v = f.values
    scale = np.max(np.abs(v)) or 1.0
    if abs(v[0]) > 1e-9 * scale:
        raise GridError("h_norm requires f(0) = 0")
    df = g.d1(v)
    over_r = np.empty_like(v)
    over_r[1:] = v[1:] / g.r[1:]
    over_r[0] = df[0]
    dens = df ** 2 + over_r ** 2
    return float(np.sqrt(max(quad(FieldSample(g, dens), "r dr"), 0.0)))


def h0_norm(s):
    """H x L2 norm of a state."""
    return float(np.hypot(h_norm(s.psi), l2_norm(s.psi_t)))


# -- 2d <-> 4d reduction ----------------------------------------------------


def to_4d(s):
    """u = psi/r, with u(0) filled by one-sided 4th-order extrapolation."""
    g = s.grid
    v = s.psi.values
    scale = np.max(np.abs(v)) or 1.0
    if abs(v[0]) > 1e-9 * scale:
        raise GridError("to_4d requires psi(0) = 0")
    u = np.empty_like(v)
    u[1:] = v[1:] / g.r[1:]
    u[0] = fd_weights(g.r[1:6], 0.0, 0) @ u[1:6]
    return FieldSample(g, u, "aux")


def from_4d(u, u_t, grid, time=0.0, degree=0, energy_tail=0.0):
    """Reconstruct (psi, psi_t) = (r u, r u_t); psi(0) = 0 is exact."""
    psi = FieldSample(grid, grid.r * np.asarray(u), "angle")
    psi_t = FieldSample(grid, grid.r * np.asarray(u_t), "velocity")
    return WaveMapState(psi, psi_t, time=time, degree=degree, energy_tail=energy_tail)


# -- resampling and IO ------------------------------------------------------


def resample(f, target):
    """Cubic (4-point) polynomial interpolation onto another grid.

    Exact on cubics; refuses to extrapolate past the source domain.
    """
    src = f.grid
    if target.r_max > src.r_max + _ALIGN_TOL:
        raise GridError("resample cannot extrapolate beyond the source domain")
    rs = src.r
    out = np.empty(target.n)
    idx = np.searchsorted(rs, target.r)
    for i, (rt, j) in enumerate(zip(target.r, idx)):
        j0 = min(max(j - 2, 0), src.n - 4)
        # exact node hits avoid interpolation noise
        k = np.searchsorted(rs, rt)
        if k < src.n and abs(rs[k] - rt) <= _ALIGN_TOL * max(1.0, rt):
            out[i] = f.values[k]
            continue
        if k > 0 and abs(rs[k - 1] - rt) <= _ALIGN_TOL * max(1.0, rt):
            out[i] = f.values[k - 1]
            continue
        w = fd_weights(rs[j0:j0 + 4], rt, 0)
        out[i] = w @ f.values[j0:j0 + 4]
    return FieldSample(target, out, f.kind)


def write_field_csv(f, path):
    """Dump as CSV `r,value` with IEEE-754 round-trippable decimals."""
    with open(path, "w") as fh:
        fh.write("r,value\n")
        for r, v in zip(f.grid.r, f.values):
            fh.write(f"{r:.17g},{v:.17g}\n")


def read_field_csv(path, grid, kind="aux"):
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    r, v = data[:, 0], data[:, 1]
    if len(r) != grid.n or np.max(np.abs(r - grid.r)) > _ALIGN_TOL * max(1.0, grid.r_max):
        raise GridError("CSV nodes do not match the target grid")
    return FieldSample(grid, v, kind)
