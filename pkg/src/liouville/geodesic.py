"""Geodesic flow in separated coordinates.

The flow is Hamiltonian for the kinetic energy of the diagonal metric;
it is integrated directly in the angle coordinates (x, xi), which are
globally smooth away from the codimension-two degenerate corners.  The
n-1 turning roots b_1 >= ... >= b_{n-1} of the fiberwise invariants label
the invariant torus; each coordinate value f_i(x_i(t)) oscillates in the
band [a_i^+, a_{i-1}^-] whose edges are spectrum constants or turning
roots.  Total-variation clocks sigma_i accumulate |d f_i| along the
trajectory and drive the cut-time milestone.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .model import Manifold, ModelError, metric_at, first_integrals, energy
from .quadrature import band_edges, band_segment_integral

__all__ = [
    "CovectorState",
    "FirstIntegralVector",
    "GeodesicTrace",
    "IntegrationOptions",
    "integrate",
    "b_from_covector",
    "reflect",
    "cut_time",
    "CutTimeResult",
    "classify_cut_case",
    "abel_residual",
    "length_residual",
    "unit_covector",
    "covector_from_roots",
]


class GeodesicError(RuntimeError):
    pass


@dataclass
class IntegrationOptions:
    rtol: float = 1e-10
    atol: float = 1e-12
    method: str = "DOP853"
    max_step: float = np.inf
    b_drift_abort: float = 1e-6
    check_drift: bool = True


# ---------------------------------------------------------------------------
# fast coordinate tables (piecewise-quintic Hermite on a uniform grid)


class _FastCoords:
    """Uniform-grid Hermite tables for f_i, f_i', f_i'' on the quarter branch.

    Built once per manifold from the spectral interpolants; evaluation is a
    handful of numpy operations for all coordinates at once, which keeps the
    ODE right-hand side cheap.
    """

    N = 1024

    def __init__(self, man: Manifold):
        self.man = man
        n = man.n
        self.quarter = np.array([br.quarter for br in man.periods.branches])
        self.alpha = np.array([br.alpha for br in man.periods.branches])
        self.lo = np.array([br.lo for br in man.periods.branches])
        self.h = np.array([br.h for br in man.periods.branches])
        N = self.N
        self.dx = self.quarter / N
        coef = np.empty((n, N, 6))
        # Hermite quintic in the normalized local variable t in [0, 1].
        M = np.array([
            [1, 0, 0, 0, 0, 0],
            [0, 1, 0, 0, 0, 0],
            [0, 0, 2, 0, 0, 0],
            [1, 1, 1, 1, 1, 1],
            [0, 1, 2, 3, 4, 5],
            [0, 0, 2, 6, 12, 20],
        ], float)
        Minv = np.linalg.inv(M)
        for i, br in enumerate(man.periods.branches):
            xs = np.linspace(0.0, br.quarter, N + 1)
            th = np.empty(N + 1)
            th[0], th[-1] = 0.0, math.pi / 2
            for j in range(1, N):
                th[j] = brentq(lambda t: br._x_of_theta(t) - xs[j], 0.0, math.pi / 2,
                               xtol=1e-15, rtol=8.9e-16)
            g = br._speed(th)
            gp = br._speed.deriv()(th)
            th1 = 1.0 / g                      # d theta / dx
            th2 = -gp / g**3
            d = self.dx[i]
            rows = np.stack([th[:-1], d * th1[:-1], d * d * th2[:-1],
                             th[1:], d * th1[1:], d * d * th2[1:]], axis=1)
            coef[i] = rows @ Minv.T
        self.coef = coef
        self._idx = np.arange(n)

    def theta(self, s):
        """theta, dtheta/dx, d2theta/dx2 at quarter positions s (one per coord)."""
        N = self.N
        j = np.clip((s / self.dx).astype(int), 0, N - 1)
        t = s / self.dx - j
        c = self.coef[self._idx, j, :]  # (n, 6)
        v = c[:, 5]
        d1 = np.zeros_like(v)
        d2 = np.zeros_like(v)
        for k in range(4, -1, -1):
            d2 = d2 * t + 2.0 * d1
            d1 = d1 * t + v
            v = v * t + c[:, k]
        return v, d1 / self.dx, d2 / self.dx**2

    def eval(self, x):
        """(f, f', f'') for the full coordinate vector x."""
        u = np.mod(x, self.alpha)
        q = np.minimum((u / self.quarter).astype(int), 3)
        s = u - q * self.quarter
        rising = q % 2 == 0
        s_q = np.where(rising, s, self.quarter - s)
        direction = np.where(rising, 1.0, -1.0)
        th, th1, th2 = self.theta(s_q)
        s2, c2 = np.sin(2.0 * th), np.cos(2.0 * th)
        f = self.lo + 0.5 * self.h * (1.0 - c2)
        fp = self.h * s2 * th1
        fpp = self.h * (2.0 * c2 * th1**2 + s2 * th2)
        return f, direction * fp, fpp


def _fast(man: Manifold) -> _FastCoords:
    tab = getattr(man, "_fast_coords", None)
    if tab is None:
        tab = _FastCoords(man)
        man._fast_coords = tab
    return tab


# ---------------------------------------------------------------------------
# Hamiltonian right-hand side and its Jacobian


class Flow:
    """Evaluator for the geodesic vector field and its linearization."""

    def __init__(self, man: Manifold):
        self.man = man
        self.n = man.n
        self.tab = _fast(man)
        self.signs = np.array([(-1.0) ** (self.n - (k + 1)) for k in range(self.n)])

    def coord(self, x):
        return self.tab.eval(x)

    def metric_data(self, x):
        f, fp, fpp = self.tab.eval(x)
        D = f[:, None] - f[None, :]          # D[l, k] = f_l - f_k
        Dm = D.copy()
        np.fill_diagonal(Dm, 1.0)
        col = np.prod(Dm, axis=0)            # prod_{l != k} (f_l - f_k)
        g = self.signs * col
        return f, fp, fpp, D, g

    def rhs(self, t, z):
        n = self.n
        x, xi = z[:n], z[n:]
        f, fp, fpp, D, g = self.metric_data(x)
        h = 1.0 / g
        Dm = D.copy()
        np.fill_diagonal(Dm, 1.0)
        # dg[k, i] = d g_k / d x_i
        dg = fp[None, :] * g[:, None] / Dm.T
        np.fill_diagonal(dg, 0.0)
        S1 = np.sum(1.0 / Dm, axis=0) - 1.0  # sum_{l != k} 1/(f_l - f_k)
        np.fill_diagonal(dg, -fp * g * S1)
        w = (xi * h) ** 2
        out = np.empty(2 * n)
        out[:n] = h * xi
        out[n:] = 0.5 * (dg.T @ w)
        return out

    def jacobian(self, z):
        """d X / d z at z, blocks [[A, B], [C, -A^T]] for (dx, dxi)."""
        n = self.n
        x, xi = z[:n], z[n:]
        f, fp, fpp, D, g = self.metric_data(x)
        h = 1.0 / g
        Dm = D.copy()
        np.fill_diagonal(Dm, 1.0)
        inv = 1.0 / Dm                      # inv[l, k] = 1/(f_l - f_k), diag 1
        S1 = np.sum(inv, axis=0) - 1.0      # sum_{l != k} 1/(f_l - f_k)

        dg = fp[None, :] * g[:, None] * inv.T
        np.fill_diagonal(dg, 0.0)
        np.fill_diagonal(dg, -fp * g * S1)

        # d2g[k, i, j] = d^2 g_k / dx_i dx_j
        d2g = np.empty((n, n, n))
        for k in range(n):
            ik = inv[:, k]                  # 1/(f_i - f_k), entry k is 1
            for i in range(n):
                for j in range(i, n):
                    if i == k and j == k:
                        s1 = S1[k]
                        s2 = s1 * s1 - (np.sum(ik**2) - 1.0)
                        val = -fpp[k] * g[k] * s1 + fp[k] ** 2 * g[k] * s2
                    elif i == k:            # j != k
                        val = -fp[j] * fp[k] * g[k] * ik[j] * (S1[k] - ik[j])
                    elif j == k:            # i != k
                        val = -fp[i] * fp[k] * g[k] * ik[i] * (S1[k] - ik[i])
                    elif i == j:            # i = j != k
                        val = fpp[i] * g[k] * ik[i]
                    else:                   # i != j, both != k
                        val = fp[i] * fp[j] * g[k] * ik[i] * ik[j]
                    d2g[k, i, j] = val
                    d2g[k, j, i] = val

        h2 = h * h
        w = xi**2 * h2
        # A[i, j] = d (h_i xi_i) / d x_j
        A = -(xi * h2)[:, None] * dg
        B = np.diag(h)
        # C[i, j] = -d^2 E / dx_i dx_j,  d2h_k = 2 h^3 dg dg - h^2 d2g
        C = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                t1 = np.sum(xi**2 * (2.0 * h**3 * dg[:, i] * dg[:, j] - h2 * d2g[:, i, j]))
                C[i, j] = -0.5 * t1
        J = np.zeros((2 * n, 2 * n))
        J[:n, :n] = A
        J[:n, n:] = B
        J[n:, :n] = C
        J[n:, n:] = -A.T
        return J

    def rhs_with_stm(self, t, zf):
        n = self.n
        z = zf[: 2 * n]
        Phi = zf[2 * n:].reshape(2 * n, 2 * n)
        dz = self.rhs(t, z)
        dPhi = self.jacobian(z) @ Phi
        return np.concatenate([dz, dPhi.ravel()])


# ---------------------------------------------------------------------------
# covectors and invariants


@dataclass
class CovectorState:
    """Base point (angles x) plus fiber components xi."""

    manifold: Manifold
    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, float)
        self.xi = np.asarray(self.xi, float)

    @property
    def lam(self):
        return self.manifold.lam(self.x)

    def energy(self) -> float:
        return energy(self.lam, self.xi)

    def unit(self) -> "CovectorState":
        e = self.energy()
        if e <= 0:
            raise GeodesicError("cannot normalize a null covector")
        return CovectorState(self.manifold, self.x.copy(), self.xi / math.sqrt(e))

    def z(self):
        return np.concatenate([self.x, self.xi])


def unit_covector(man: Manifold, x, v) -> CovectorState:
    """Unit covector from Euclidean sphere coordinates v (xi_i = sqrt(g_i) v_i)."""
    x = np.asarray(x, float)
    v = np.asarray(v, float)
    g = metric_at(man.lam(x))
    xi = np.sqrt(g) * (v / np.linalg.norm(v))
    return CovectorState(man, x, xi)


def reflect(eta: CovectorState) -> CovectorState:
    """Flip the last fiber component (mirror across the boundary hyperplane)."""
    xi = eta.xi.copy()
    xi[-1] = -xi[-1]
    return CovectorState(eta.manifold, eta.x.copy(), xi)


def _theta_poly_from_c(a_inner, c):
    """Coefficients (ascending) of the turning polynomial for invariants c."""
    poly = np.polynomial.polynomial
    full = poly.polyfromroots(a_inner)
    coeffs = -full
    for j, cj in enumerate(c):
        part = poly.polyfromroots(np.delete(a_inner, j))
        coeffs = poly.polyadd(coeffs, cj * part)
    return coeffs


@dataclass
class FirstIntegralVector:
    """Turning roots b_1 >= ... >= b_{n-1} with degeneracy classification."""

    roots: np.ndarray
    c: np.ndarray
    spectrum_a: tuple
    base_lam: np.ndarray
    tol: float

    @property
    def n(self):
        return len(self.spectrum_a) - 1

    def bands(self):
        return band_edges(np.array(self.spectrum_a), self.roots)

    def radicand_roots(self):
        return np.concatenate([self.roots, np.array(self.spectrum_a)])

    def a_plus(self, i: int) -> float:
        a = self.spectrum_a
        if i == self.n:
            return a[self.n]
        return max(a[i], self.roots[i - 1])

    def a_minus(self, i: int) -> float:
        a = self.spectrum_a
        if i == 0:
            return a[0]
        return min(a[i], self.roots[i - 1])

    def classify(self, i: int) -> str:
        """Degeneracy tag of root b_i: regular | axis | axis-adjacent |
        double | base-touch."""
        b = self.roots
        a = self.spectrum_a
        band = self.tol
        bi = b[i - 1]
        if abs(bi - a[i]) < band:
            return "axis"
        if abs(bi - a[i - 1]) < band or abs(bi - a[i + 1]) < band:
            return "axis-adjacent"
        if (i >= 2 and abs(bi - b[i - 2]) < band) or (i <= len(b) - 1 and abs(bi - b[i]) < band):
            return "double"
        if np.min(np.abs(self.base_lam - bi)) < band:
            return "base-touch"
        return "regular"

    def is_generic(self) -> bool:
        return all(self.classify(i) in ("regular", "base-touch")
                   for i in range(1, self.n))


def b_from_covector(eta: CovectorState) -> FirstIntegralVector:
    """Turning roots of a unit covector.

    Route: solve the linear invariant relations for (c_1..c_{n-1}, 2E),
    assemble the turning polynomial, then take its real roots (companion
    matrix plus a bracketed polish where the interlacing provides sign
    changes).  Coincident base values fall back to constrained
    interpolation on the reduced node set.
    """
    man = eta.manifold
    n = man.n
    a = np.array(man.spectrum.a)
    a_inner = a[1:n]
    lam = eta.lam
    tolband = man.degeneracy_band()

    e = eta.energy()
    if abs(e - 1.0) > 1e-8:
        raise GeodesicError(f"covector not unit (2E = {e})")

    min_gap = np.min(np.abs(np.diff(lam))) if n > 1 else np.inf
    if min_gap > tolband:
        F = first_integrals(man.spectrum, lam, eta.xi)
        c = F[: n - 1]
        coeffs = _theta_poly_from_c(a_inner, c)
    else:
        # base on the branch set: constrained interpolation through the
        # distinct nodes with leading coefficient -1
        nodes, vals = [], []
        for i in range(n):
            v = (-1.0) ** (i + 1) * eta.xi[i] ** 2
            dup = [k for k, nd in enumerate(nodes) if abs(nd - lam[i]) < tolband]
            if dup:
                continue
            nodes.append(lam[i])
            vals.append(v)
        nodes = np.array(nodes)
        vals = np.array(vals)
        m = n - 1  # polynomial degree
        V = np.vander(nodes, m + 1, increasing=True)
        rhs = vals - (-1.0) * nodes**m
        sol, *_ = np.linalg.lstsq(V[:, :m], rhs, rcond=None)
        coeffs = np.concatenate([sol, [-1.0]])
        c = None

    roots = np.roots(coeffs[::-1])
    if np.any(np.abs(roots.imag) > 1e-9 * man.spectrum.width):
        raise GeodesicError(f"turning polynomial has non-real roots {roots}")
    b = np.sort(roots.real)[::-1]
    b = np.clip(b, a[-1], a[0])
    # enforce the admissible range a_{i+1} <= b_i <= a_{i-1}
    for i in range(1, n):
        b[i - 1] = min(max(b[i - 1], a[i + 1]), a[i - 1])
    if c is None:
        c = _c_from_roots(a_inner, b)
    return FirstIntegralVector(b, np.asarray(c, float), man.spectrum.a, lam.copy(),
                               tolband)


def _c_from_roots(a_inner, b):
    """Invariant values c_j from turning roots b."""
    c = np.empty(len(a_inner))
    for j, aj in enumerate(a_inner):
        num = -np.prod(aj - b)
        den = np.prod(np.delete(a_inner, j) - aj) * (-1.0) ** (len(a_inner) - 1)
        c[j] = num / den
    return c


def covector_from_roots(man: Manifold, x, b, signs=None) -> CovectorState:
    """Unit covector at x with prescribed turning roots b.

    xi_i = sign_i sqrt((-1)^i Theta(f_i(x_i))) with Theta = -prod (lam-b);
    requires every (-1)^i Theta(f_i) >= 0 (x compatible with the torus).
    """
    b = np.asarray(b, float)
    n = man.n
    lam = man.lam(np.asarray(x, float))
    if signs is None:
        signs = np.ones(n)
    xi = np.empty(n)
    for i in range(n):
        theta = -np.prod(lam[i] - b)
        val = (-1.0) ** (i + 1) * theta
        if val < -1e-11 * man.spectrum.width ** n:
            raise GeodesicError(
                f"point incompatible with roots (coordinate {i+1}: {val})")
        xi[i] = signs[i] * math.sqrt(max(val, 0.0))
    eta = CovectorState(man, np.asarray(x, float), xi)
    return eta.unit()


# ---------------------------------------------------------------------------
# traces


@dataclass
class GeodesicTrace:
    """Dense geodesic solution with turning events and variation clocks."""

    eta: CovectorState
    T: float
    sol: object
    b: FirstIntegralVector
    event_times: list           # per coordinate, ascending times
    event_values: list          # f_i at those times
    event_kinds: list           # per coordinate, 'min'/'max' edge markers
    active: np.ndarray          # coordinates that actually oscillate
    diagnostics: dict = field(default_factory=dict)

    @property
    def manifold(self) -> Manifold:
        return self.eta.manifold

    def state(self, t):
        z = self.sol(t)
        n = self.manifold.n
        return z[:n], z[n:]

    def x(self, t):
        return self.state(t)[0]

    def lam(self, t):
        return _fast(self.manifold).eval(self.x(t))[0]

    def sigma(self, i: int, t) -> float:
        """Total variation of f_i on [0, t]."""
        times = self.event_times[i - 1]
        vals = self.event_values[i - 1]
        f0 = _fast(self.manifold).eval(self.eta.x)[0][i - 1]
        ft = self.lam(t)[i - 1]
        if len(times) == 0 or t < times[0]:
            return abs(ft - f0)
        j = int(np.searchsorted(times, t, side="right")) - 1
        total = abs(vals[0] - f0)
        total += float(np.sum(np.abs(np.diff(vals[: j + 1]))))
        total += abs(ft - vals[j])
        return total

    def sigma_all(self, t):
        return np.array([self.sigma(i, t) for i in range(1, self.manifold.n + 1)])

    def legs(self, i: int, s: float, t: float):
        """Monotone legs of f_i on [s, t] as (lam_start, lam_end) pairs."""
        times = self.event_times[i - 1]
        mask = (times > s) & (times < t)
        mids = times[mask]
        vals = np.asarray(self.event_values[i - 1])[mask]
        pts_t = np.concatenate([[s], mids, [t]])
        pts_f = np.concatenate([[self.lam(s)[i - 1]], vals, [self.lam(t)[i - 1]]])
        return [(pts_f[k], pts_f[k + 1]) for k in range(len(pts_f) - 1)]

    def event_log(self):
        """Flat log of turning events: (t, coordinate, f-value, kind)."""
        rows = []
        for i in range(1, self.manifold.n + 1):
            for t, v, k in zip(self.event_times[i - 1], self.event_values[i - 1],
                               self.event_kinds[i - 1]):
                rows.append((float(t), i, float(v), k))
        rows.sort()
        return rows

    def sample(self, ts):
        """Columnar samples: t, x, xi, lambda, sigma, b (for export)."""
        n = self.manifold.n
        rows = []
        for t in ts:
            x, xi = self.state(t)
            lam = _fast(self.manifold).eval(x)[0]
            sig = self.sigma_all(t)
            rows.append(np.concatenate([[t], x, xi, lam, sig, self.b.roots]))
        return np.array(rows)


def _detect_pinned(flow: Flow, z0):
    """Coordinates frozen on an invariant plane (turning value or corner)."""
    n = flow.n
    x, xi = z0[:n], z0[n:]
    f, fp, _ = flow.coord(x)
    rhs0 = flow.rhs(0.0, z0)
    scale = max(np.max(np.abs(fp)) * np.max(np.abs(rhs0[:n])), 1e-6)
    pinned = np.zeros(n, bool)
    for i in range(n):
        m0 = fp[i] * xi[i]
        # rate of m_i: approximated by one tiny Euler step
        dz = 1e-8 * rhs0
        f2, fp2, _ = flow.coord(x + dz[:n])
        m1 = fp2[i] * (xi[i] + dz[n + i])
        if abs(m0) < 1e-13 * scale and abs(m1 - m0) < 1e-18 * scale:
            pinned[i] = True
    return pinned


def integrate(eta: CovectorState, T: float,
              options: IntegrationOptions | None = None,
              extra_events=None) -> GeodesicTrace:
    """Integrate the geodesic flow for time (= arc length) T.

    Turning points of every oscillating coordinate are located by event
    detection on f_i'(x_i) xi_i and feed the variation clocks.  The
    turning-root drift is monitored and aborts the run when it exceeds
    the configured bound.
    """
    opts = options or IntegrationOptions()
    man = eta.manifold
    n = man.n
    flow = Flow(man)
    eta = eta.unit()
    z0 = eta.z()
    b = b_from_covector(eta)
    pinned = _detect_pinned(flow, z0)

    cache = {}

    def coord_cached(t, z):
        key = float(t)
        hit = cache.get(key)
        if hit is not None and hit[0] is z:
            return hit[1]
        data = flow.coord(z[:n])
        cache.clear()
        cache[key] = (z, data)
        return data

    events = []
    event_index = []
    for i in range(n):
        if pinned[i]:
            continue

        def make(i):
            def ev(t, z):
                f, fp, _ = coord_cached(t, z)
                return fp[i] * z[n + i]
            return ev

        events.append(make(i))
        event_index.append(i)
    n_turn_events = len(events)
    if extra_events:
        events.extend(extra_events)

    sol = solve_ivp(flow.rhs, (0.0, T), z0, method=opts.method, rtol=opts.rtol,
                    atol=opts.atol, dense_output=True, events=events,
                    max_step=opts.max_step)
    if not sol.success:
        raise GeodesicError(f"integration failed: {sol.message}")

    event_times = [np.array([])] * n
    event_values = [np.array([])] * n
    event_kinds = [[]] * n
    tab = _fast(man)
    for j in range(n_turn_events):
        i = event_index[j]
        ts = sol.t_events[j]
        # drop the spurious t = 0 hit when starting exactly at a turning point
        ts = ts[ts > 1e-12]
        vals = np.array([tab.eval(sol.sol(t)[:n])[0][i] for t in ts])
        lo, hi = b.a_plus(i + 1), b.a_minus(i)
        kinds = ["min" if abs(v - lo) < abs(v - hi) else "max" for v in vals]
        # turning values are band edges exactly; snap off the numerical slip
        # (an O(eps) sliver carries O(sqrt(eps)) mass under the 1/sqrt edge)
        snap = 1e-5 * man.spectrum.width
        vals = np.array([lo if (k == "min" and abs(v - lo) < snap)
                         else hi if (k == "max" and abs(v - hi) < snap) else v
                         for v, k in zip(vals, kinds)])
        event_times[i] = ts
        event_values[i] = vals
        event_kinds[i] = kinds

    diagnostics = {}
    if opts.check_drift:
        ts = np.linspace(0.0, T, 17)[1:]
        bmax = 0.0
        cmax = 0.0
        emax = 0.0
        # root drift is meaningful for simple roots only; coincident roots
        # respond to coefficient noise like its square root, so the abort
        # decision always uses the invariant values themselves
        gaps = [abs(b.roots[k] - b.roots[k + 1]) for k in range(len(b.roots) - 1)]
        simple = (min(gaps) if gaps else np.inf) > 1e3 * man.degeneracy_band()
        for t in ts:
            z = sol.sol(t)
            st = CovectorState(man, z[:n], z[n:])
            emax = max(emax, abs(energy(st.lam, st.xi) - 1.0))
            try:
                bt = b_from_covector(st)
                cmax = max(cmax, float(np.max(np.abs(bt.c - b.c))))
                if simple:
                    bmax = max(bmax, float(np.max(np.abs(bt.roots - b.roots))))
            except GeodesicError:
                pass
        diagnostics["b_drift"] = bmax if simple else None
        diagnostics["c_drift"] = cmax
        diagnostics["energy_drift"] = emax
        worst = bmax if simple else cmax
        if worst > opts.b_drift_abort:
            raise GeodesicError(
                f"invariant drift {worst:.3e} exceeds {opts.b_drift_abort:.1e}")

    trace = GeodesicTrace(eta, T, sol.sol, b, event_times, event_values,
                          event_kinds, ~pinned, diagnostics)
    trace._ivp = sol
    return trace


# ---------------------------------------------------------------------------
# band integrals along traces


def _trace_band_integral(trace: GeodesicTrace, i: int, s: float, t: float, num):
    """integral of num(f_i) d sigma_i over [s, t], leg by leg."""
    b = trace.b
    lo, hi = b.a_plus(i), b.a_minus(i - 1)
    if hi - lo < 1e-14 * trace.manifold.spectrum.width:
        return 0.0
    roots = b.radicand_roots()
    total = 0.0
    for fa, fb in trace.legs(i, s, t):
        seg = (min(fa, fb), max(fa, fb))
        total += band_segment_integral(num, roots, lo, hi, seg=seg)
    return total


def abel_residual(trace: GeodesicTrace, s: float, t: float, l: int) -> float:
    """Residual of the closed-form orbit relation with numerator G_l.

    Sum over coordinates of the signed sigma-integrals of
    G_l(f) A(f) / sqrt(R(f)) with G_l the turning-root product omitting
    b_l; identically zero along exact geodesics, so the magnitude is an
    integration-quality metric.
    """
    man = trace.manifold
    n = man.n
    b = trace.b.roots
    if trace.b.classify(l) not in ("regular", "base-touch"):
        raise GeodesicError(f"root b_{l} degenerate; orbit relation not directly integrable")
    others = np.delete(b, l - 1)
    A = man.generator
    total = 0.0
    for i in range(1, n + 1):
        sign = (-1.0) ** i

        def num(lam, sign=sign):
            poly = np.prod(lam[:, None] - others[None, :], axis=1) if len(others) else 1.0
            return sign * poly * A(lam)

        total += _trace_band_integral(trace, i, s, t, num)
    return float(total)


def length_residual(trace: GeodesicTrace, s: float, t: float) -> float:
    """Elapsed-time reconstruction error from the monic degree-(n-1) relation.

    The signed sigma-integrals with numerator (1/2) Gt(f) A(f), Gt monic of
    degree n-1 (taken with roots at the interior spectrum constants),
    reproduce t - s along exact geodesics.
    """
    man = trace.manifold
    n = man.n
    a_inner = np.array(man.spectrum.a[1:n])
    A = man.generator
    total = 0.0
    for i in range(1, n + 1):
        sign = (-1.0) ** (i + 1)

        def num(lam, sign=sign):
            poly = np.prod(lam[:, None] - a_inner[None, :], axis=1) if len(a_inner) else 1.0
            return 0.5 * sign * poly * A(lam)

        total += _trace_band_integral(trace, i, s, t, num)
    return float(total - (t - s))


# ---------------------------------------------------------------------------
# cut time


@dataclass
class CutTimeResult:
    t0: float
    case: str
    trace: GeodesicTrace | None
    diagnostics: dict = field(default_factory=dict)
    warning: str | None = None


def _sigma_milestone_time(trace: GeodesicTrace, i: int, target: float):
    """First time sigma_i reaches target, or None within the trace horizon.

    When the milestone lands on a turning point of f_i the crossing is a
    quadratic tangency and plain bisection loses half the digits; the
    polished turning-event time is returned instead.
    """
    T = trace.T
    if trace.sigma(i, T) < target:
        return None
    width = trace.manifold.spectrum.width
    times = trace.event_times[i - 1]
    sig_at = np.array([trace.sigma(i, te) for te in times])
    # milestone exactly at a turning point (tangential touch)
    if len(times):
        j = int(np.argmin(np.abs(sig_at - target)))
        if abs(sig_at[j] - target) < 1e-8 * width:
            return float(times[j])
    j = int(np.searchsorted(sig_at, target))
    if j == 0:
        lo_t, hi_t = 0.0, times[0] if len(times) else T
    elif j >= len(times):
        lo_t = times[-1] if len(times) else 0.0
        hi_t = T
    else:
        lo_t, hi_t = times[j - 1], times[j]
    return brentq(lambda t: trace.sigma(i, t) - target, lo_t, hi_t,
                  xtol=1e-12, rtol=8.9e-16)


def classify_cut_case(eta: CovectorState, b: FirstIntegralVector | None = None) -> str:
    """Degenerate-case tag for the cut-time rule.

    'generic'        : milestone rule applies;
    'in-bottom-cap'  : geodesic inside the smallest-axis hypersurface
                       (b_{n-1} at the bottom constant);
    'tangent-sheet'  : inside the next hypersurface, started at the sheet
                       (b_{n-1} at a_{n-1}, last coordinate at its top);
    'corner-base'    : base point on the codimension-two corner set.
    """
    man = eta.manifold
    n = man.n
    a = man.spectrum.a
    band = man.degeneracy_band()
    lam = eta.lam
    corner = abs(lam[n - 1] - a[n - 1]) < band and abs(lam[n - 2] - a[n - 1]) < band
    if corner:
        return "corner-base"
    if b is None:
        b = b_from_covector(eta.unit())
    bn1 = b.roots[n - 2]
    if abs(bn1 - a[n]) < band:
        return "in-bottom-cap"
    if abs(bn1 - a[n - 1]) < band and (abs(lam[n - 1] - a[n - 1]) < band
                                       or abs(lam[n - 2] - a[n - 1]) < band):
        return "tangent-sheet"
    return "generic"


def _integrate_until_sigma(eta, i, target, options=None, T0=None):
    """Trace long enough for sigma_i to pass target (horizon doubling)."""
    opts = options or IntegrationOptions()
    man = eta.manifold
    if T0 is None:
        probe = integrate(eta, 1.0, options=opts)
        rate = probe.sigma(i, 1.0)
        if rate < 1e-8:
            raise GeodesicError("variation clock stalled; degenerate direction")
        T0 = 1.25 * target / rate + 0.5
    T = T0
    for _ in range(8):
        trace = integrate(eta, T, options=opts)
        if trace.sigma(i, T) >= target:
            return trace
        T *= 2.0
    raise GeodesicError("variation clock failed to reach the milestone")


def cut_time(eta: CovectorState, options: IntegrationOptions | None = None) -> CutTimeResult:
    """Cut time along the geodesic with initial unit covector eta.

    Generic rule: first time the last variation clock reaches
    2 (a_{n-1}^- - a_n^+), located by event bracketing and bisection.
    Degenerate rules: first vanishing of the normal Jacobi field, realized
    by the linearized flow (bottom-cap case) or by a quadratic-limit
    extrapolation of the milestone rule along a regularizing family of
    covectors (tangent-sheet case).
    """
    man = eta.manifold
    n = man.n
    if classify_cut_case(eta) == "corner-base":
        raise GeodesicError(
            "base point on the corner set; use the degenerate cut-locus pipeline")
    eta = eta.unit()
    b = b_from_covector(eta)
    case = classify_cut_case(eta, b)
    opts = options or IntegrationOptions()

    if case == "generic":
        target = 2.0 * (b.a_minus(n - 1) - b.a_plus(n))
        trace = _integrate_until_sigma(eta, n, target, options=opts)
        t0 = _sigma_milestone_time(trace, n, target)
        diag = _endpoint_diag(trace, t0)
        return CutTimeResult(t0, case, trace, diag)

    if case == "in-bottom-cap":
        from .jacobi import linearized_flow, first_position_zero
        # time scale from the milestone of the previous clock
        target = 2.0 * (b.a_minus(n - 2) - b.a_plus(n - 1))
        trace = _integrate_until_sigma(eta, n - 1, target, options=opts)
        bracket = _sigma_milestone_time(trace, n - 1, target)
        frame = linearized_flow(eta, 2.0 * bracket, options=opts)
        t0 = first_position_zero(frame, n - 1)
        if t0 is None:
            raise GeodesicError("normal field did not vanish within the bracket")
        diag = _endpoint_diag(trace, t0)
        return CutTimeResult(t0, case, trace, diag)

    # tangent-sheet: regularize b_{n-1} = a_{n-1} +- s^2 and extrapolate the
    # milestone rule along the family (the continuity construction); the sign
    # is set by which coordinate carries the sheet value at the base
    a = man.spectrum.a
    lam = eta.lam
    side = 1.0 if abs(lam[n - 1] - a[n - 1]) < man.degeneracy_band() else -1.0
    s2 = 4e-3 * man.spectrum.width
    vals = []
    base_signs = np.sign(eta.xi)
    base_signs[base_signs == 0] = 1.0
    trace = None
    # the family members pass close to the corner set; slightly relaxed
    # tolerances keep the stiff passages affordable without moving the
    # extrapolated limit at the reported accuracy
    fam_opts = IntegrationOptions(rtol=max(opts.rtol, 1e-9),
                                  atol=max(opts.atol, 1e-11),
                                  b_drift_abort=1e-5)
    for k in range(3):
        bk = b.roots.copy()
        bk[n - 2] = a[n - 1] + side * s2 / 2**k
        eta_k = covector_from_roots(man, eta.x, bk, base_signs)
        bk_vec = b_from_covector(eta_k)
        target = 2.0 * (bk_vec.a_minus(n - 1) - bk_vec.a_plus(n))
        trace = _integrate_until_sigma(eta_k, n, target, options=fam_opts)
        vals.append((s2 / 2**k, _sigma_milestone_time(trace, n, target)))
    (h1, t1), (h2, t2), (h3, t3) = vals
    # quadratic fit in the family parameter h = s^2
    coef = np.polyfit([h1, h2, h3], [t1, t2, t3], 2)
    t0 = float(np.polyval(coef, 0.0))
    spread = max(t1, t2, t3) - min(t1, t2, t3)
    warning = None
    if not (t3 <= t2 <= t1 or t1 <= t2 <= t3):
        warning = f"non-monotone limit sequence ({t1}, {t2}, {t3})"
    return CutTimeResult(t0, "tangent-sheet", trace,
                         {"family_values": vals, "spread": spread}, warning)


def _endpoint_diag(trace: GeodesicTrace, t0: float) -> dict:
    """Check x_n(t0) against the two admissible mirror representatives."""
    man = trace.manifold
    n = man.n
    al = man.alpha[n - 1]
    xn0 = trace.eta.x[n - 1]
    xn = trace.x(t0)[n - 1]
    cands = [-xn0, al / 2.0 + xn0]
    gaps = [abs((xn - cv + al / 2.0) % al - al / 2.0) for cv in cands]
    return {"last_angle_gap": float(min(gaps)), "sigma_at_t0": trace.sigma_all(t0)}
