"""Linearized geodesic flow: Jacobi fields, conjugate points, zero patterns.

All Jacobi fields are realized through one mechanism, the linearized
Hamiltonian flow (variational equations along a trace).  The structured
families attached to the invariants are recovered by seeding initial
momenta along the fiber gradients of the turning-root functions; the
structural statements about their zeros are audit targets, not inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .model import Manifold, metric_at
from .geodesic import (
    CovectorState,
    Flow,
    GeodesicTrace,
    GeodesicError,
    IntegrationOptions,
    _fast,
    b_from_covector,
    integrate,
    band_segment_integral,
)

__all__ = [
    "LinearizedFrame",
    "ConjugateEvent",
    "linearized_flow",
    "conjugate_points",
    "zero_pattern_audit",
    "compute_theta",
    "invariant_gradient_covector",
    "invariant_gradient_norm",
    "invariant_times",
    "jacobi_seed",
    "first_position_zero",
    "symplectic_product",
    "min_transversal_singular_value",
    "FamilyField",
    "transversal_matrix",
]


def _solve_ivp_stm(eta: CovectorState, T: float, options: IntegrationOptions | None):
    from scipy.integrate import solve_ivp
    opts = options or IntegrationOptions()
    man = eta.manifold
    n = man.n
    flow = Flow(man)
    z0 = np.concatenate([eta.z(), np.eye(2 * n).ravel()])
    sol = solve_ivp(flow.rhs_with_stm, (0.0, T), z0, method=opts.method,
                    rtol=opts.rtol, atol=opts.atol, dense_output=True)
    if not sol.success:
        raise GeodesicError(f"linearized integration failed: {sol.message}")
    return sol


@dataclass
class LinearizedFrame:
    """Fundamental solution of the variational equations along a geodesic.

    The 2n x 2n matrix stm(t) maps initial (dx, dxi) to time t; the
    position block of the momentum-seeded half realizes the Jacobi fields
    vanishing at the start.
    """

    eta: CovectorState
    T: float
    sol: object

    @property
    def manifold(self) -> Manifold:
        return self.eta.manifold

    def state(self, t):
        n = self.manifold.n
        z = self.sol(t)
        return z[:n], z[n: 2 * n]

    def stm(self, t):
        n = self.manifold.n
        return self.sol(t)[2 * n:].reshape(2 * n, 2 * n)

    def position_block(self, t):
        """P(t): dx response to momentum seeds (columns = fiber basis)."""
        n = self.manifold.n
        return self.stm(t)[:n, n:]

    def momentum_block(self, t):
        n = self.manifold.n
        return self.stm(t)[n:, n:]

    def propagate(self, t, dz0):
        return self.stm(t) @ np.asarray(dz0, float)


def linearized_flow(eta: CovectorState, T: float,
                    options: IntegrationOptions | None = None) -> LinearizedFrame:
    """Integrate the variational equations with identity initial frame."""
    eta = eta.unit()
    sol = _solve_ivp_stm(eta, T, options)
    return LinearizedFrame(eta, T, sol.sol)


def symplectic_product(d1, d2, n: int) -> float:
    """omega(d1, d2) = sum_k (dxi1_k dx2_k - dx1_k dxi2_k); flow-invariant."""
    d1 = np.asarray(d1, float)
    d2 = np.asarray(d2, float)
    return float(d1[n:] @ d2[:n] - d1[:n] @ d2[n:])


def first_position_zero(frame: LinearizedFrame, col: int, t_min: float = 1e-6):
    """First positive zero of the dx component 'col' of the momentum-seeded
    column 'col' (used for the normal field of pinned degenerate runs)."""
    n = frame.manifold.n

    def y(t):
        return frame.stm(t)[col, n + col]

    ts = np.linspace(t_min, frame.T, max(400, int(80 * frame.T)))
    vals = np.array([y(t) for t in ts])
    for k in range(len(ts) - 1):
        if vals[k] == 0.0:
            return float(ts[k])
        if vals[k] * vals[k + 1] < 0.0:
            return float(brentq(y, ts[k], ts[k + 1], xtol=1e-12))
    return None


# ---------------------------------------------------------------------------
# invariant fiber gradients (seeds for the structured Jacobi families)


def _dc_db(a_inner, b, i: int):
    """Derivatives of the invariant values c_j with respect to root b_i."""
    b = np.asarray(b, float)
    out = np.empty(len(a_inner))
    sel = np.delete(b, i - 1)
    for j, aj in enumerate(a_inner):
        num = np.prod(aj - sel) if len(sel) else 1.0
        den = np.prod(np.delete(a_inner, j) - aj) * (-1.0) ** (len(a_inner) - 1)
        out[j] = num / den
    return out


def invariant_gradient_covector(man: Manifold, x, xi, b, i: int):
    """Fiber covector representing the gradient of the i-th turning root
    on the unit sphere (the direction along which only b_i varies).

    Solves d F_j(v) = dc_j/db_i, dE(v) = 0 in the fiber; requires every
    xi_k nonzero (off the turning times of all coordinates).
    """
    from .model import first_integral_matrix
    n = man.n
    lam = man.lam(np.asarray(x, float))
    xi = np.asarray(xi, float)
    if np.min(np.abs(xi)) < 1e-12:
        raise GeodesicError("gradient seed undefined at a turning time")
    B = first_integral_matrix(man.spectrum, lam)
    w = np.zeros(n)
    w[: n - 1] = _dc_db(np.array(man.spectrum.a[1: n]), b, i)
    rhs = B @ w
    return rhs / (2.0 * xi)


def invariant_gradient_norm(man: Manifold, x, xi, b, i: int) -> float:
    """Cotangent norm of the i-th root gradient, in closed form:
    (1/2) sqrt( (-1)^(n-1) G_i(b_i) / prod_m (f_m - b_i) )."""
    n = man.n
    b = np.asarray(b, float)
    lam = man.lam(np.asarray(x, float))
    bi = b[i - 1]
    Gi = np.prod(bi - np.delete(b, i - 1)) if n > 2 else 1.0
    val = (-1.0) ** (n - 1) * Gi / np.prod(lam - bi)
    if val < 0:
        raise GeodesicError("closed-form norm radicand negative (degenerate data)")
    return 0.5 * math.sqrt(val)


def jacobi_seed(man: Manifold, x, xi, b, i: int):
    """Unit-normalized momentum seed for the i-th family Jacobi field."""
    v = invariant_gradient_covector(man, x, xi, b, i)
    g = metric_at(man.lam(np.asarray(x, float)))
    norm = math.sqrt(float(np.sum(v**2 / g)))
    return v / norm


def invariant_times(trace: GeodesicTrace, i: int):
    """Times where the i-th family degenerates: the adjacent band touches b_i.

    For b_i above the axis constant these are the 'min' turning events of
    coordinate i at value b_i; below, the 'max' events of coordinate i+1.
    """
    b = trace.b
    a = trace.manifold.spectrum.a
    tol = 10.0 * trace.manifold.degeneracy_band()
    bi = b.roots[i - 1]
    out = []
    if bi > a[i]:
        coord, kind = i, "min"
    else:
        coord, kind = i + 1, "max"
    for t, v, k in zip(trace.event_times[coord - 1], trace.event_values[coord - 1],
                       trace.event_kinds[coord - 1]):
        if k == kind and abs(v - bi) < tol:
            out.append(float(t))
    return np.array(out)


# ---------------------------------------------------------------------------
# conjugate points


@dataclass
class ConjugateEvent:
    t: float
    multiplicity: int
    family: int | None = None
    flags: tuple = ()


def _scaled_columns(frame: LinearizedFrame, t: float, dom):
    """Flow direction and position responses in metric-scaled coordinates."""
    man = frame.manifold
    x, xi = frame.state(t)
    g = metric_at(_fast(man).eval(x)[0])
    sg = np.sqrt(g)
    u = (xi / g) * sg
    u = u / np.linalg.norm(u)
    cols = sg[:, None] * (frame.position_block(t) @ dom)
    return u, cols


def transversal_det(frame: LinearizedFrame, t: float, dom) -> float:
    """det [flow_dir | scaled responses]: smooth in t, zero exactly at
    conjugate configurations of the domain seeds."""
    u, cols = _scaled_columns(frame, t, dom)
    return float(np.linalg.det(np.concatenate([u[:, None], cols], axis=1)))


def transversal_singular_values(frame: LinearizedFrame, t: float, dom):
    """Singular values of the responses projected off the flow direction."""
    u, cols = _scaled_columns(frame, t, dom)
    Z = cols - np.outer(u, u @ cols)
    return np.linalg.svd(Z, compute_uv=False)


def transversal_matrix(frame: LinearizedFrame, t: float, dom, prev=None):
    """Projected response block (kept for multiplicity extraction)."""
    u, cols = _scaled_columns(frame, t, dom)
    Z = cols - np.outer(u, u @ cols)
    return Z, None


def _domain_basis(frame: LinearizedFrame):
    """Momentum seeds generating fields with initial derivative orthogonal
    to the flow: dxi with sum_k dxi_k xi_k / g_k = 0."""
    from scipy.linalg import null_space
    man = frame.manifold
    n = man.n
    x, xi = frame.state(0.0)
    g = metric_at(_fast(man).eval(x)[0])
    w = xi / g
    w = w / np.linalg.norm(w)
    dom = null_space(w.reshape(1, n))
    if dom.shape[1] != n - 1:
        raise GeodesicError("failed to build the transversal seed basis")
    return dom


def conjugate_points(eta: CovectorState, T: float,
                     options: IntegrationOptions | None = None,
                     frame: LinearizedFrame | None = None,
                     svd_rel: float = 1e-7,
                     samples_per_unit: int = 60):
    """Conjugate events along the geodesic in (0, T].

    Zeros of the transversal position determinant are found by sign
    tracking with bisection; even-multiplicity events (no sign change)
    by dips of the smallest singular value.  Multiplicity counts the
    singular values below svd_rel relative to the block norm.
    """
    if frame is None:
        frame = linearized_flow(eta, T, options=options)
    man = frame.manifold
    n = man.n
    dom = _domain_basis(frame)
    m = max(200, int(samples_per_unit * T))
    ts = np.linspace(1e-4 * T, T, m)
    dets = np.empty(m)
    smins = np.empty(m)
    scale = np.empty(m)
    for k, t in enumerate(ts):
        dets[k] = transversal_det(frame, t, dom)
        sv = transversal_singular_values(frame, t, dom)
        smins[k] = sv[-1]
        scale[k] = sv[0]
    events = []
    for k in range(m - 1):
        if dets[k] * dets[k + 1] < 0.0:
            tc = brentq(lambda t: transversal_det(frame, t, dom),
                        ts[k], ts[k + 1], xtol=1e-11)
            events.append(tc)
    # even-multiplicity dips (no sign change of the determinant)
    floor = svd_rel * np.max(scale)
    for k in range(1, m - 1):
        if smins[k] < smins[k - 1] and smins[k] < smins[k + 1] and smins[k] < 50 * floor:
            res = minimize_scalar(
                lambda t: transversal_singular_values(frame, t, dom)[-1],
                bounds=(ts[k - 1], ts[k + 1]), method="bounded",
                options={"xatol": 1e-11})
            tc = float(res.x)
            if res.fun < floor and all(abs(tc - e) > 1e-7 for e in events):
                events.append(tc)
    events.sort()

    out = []
    merged = []
    for tc in events:
        if merged and tc - merged[-1][-1] < 1e-7:
            merged[-1].append(tc)
        else:
            merged.append([tc])
    for group in merged:
        tc = group[0]
        sv = transversal_singular_values(frame, tc, dom)
        mult = int(np.sum(sv < svd_rel * max(sv[0], 1e-300)))
        mult = max(mult, 1)
        flags = ("cluster",) if len(group) > 1 else ()
        out.append(ConjugateEvent(float(tc), mult, None, flags))
    return out, frame


def min_transversal_singular_value(eta: CovectorState, t_hi: float,
                                   n_samples: int = 50,
                                   frame: LinearizedFrame | None = None,
                                   options: IntegrationOptions | None = None):
    """min over sampled (0, t_hi) of the smallest singular value of the
    transversal position block (positivity certifies no conjugate point)."""
    if frame is None:
        frame = linearized_flow(eta, t_hi, options=options)
    dom = _domain_basis(frame)
    ts = np.linspace(t_hi / (n_samples + 1), t_hi * (1.0 - 1.0 / (n_samples + 1)),
                     n_samples)
    worst = np.inf
    for t in ts:
        worst = min(worst, transversal_singular_values(frame, t, dom)[-1])
    return float(worst)


# ---------------------------------------------------------------------------
# structured family fields along a trace


class FamilyField:
    """Jacobi field of the i-th family seeded at time s (zero there)."""

    def __init__(self, trace: GeodesicTrace, i: int, s: float,
                 options: IntegrationOptions | None = None):
        man = trace.manifold
        self.man = man
        self.i = i
        self.s = s
        self.trace = trace
        x, xi = trace.state(s)
        seed = jacobi_seed(man, x, xi, trace.b.roots, i)
        eta_s = CovectorState(man, x, xi)
        self.frame = linearized_flow(eta_s, trace.T - s, options=options)
        n = man.n
        self.dz0 = np.concatenate([np.zeros(n), seed])

    def displacement(self, t):
        """dx block at absolute time t (>= s)."""
        n = self.man.n
        return self.frame.propagate(t - self.s, self.dz0)[:n]

    def norm(self, t) -> float:
        x, _ = self.frame.state(t - self.s)
        g = metric_at(_fast(self.man).eval(x)[0])
        d = self.displacement(t)
        return math.sqrt(float(np.sum(g * d * d)))

    def component(self, t) -> float:
        """Signed component along the family direction (for zero finding)."""
        x, xi = self.frame.state(t - self.s)
        try:
            v = invariant_gradient_covector(self.man, x, xi, self.trace.b.roots, self.i)
            v = v / np.linalg.norm(v)
        except GeodesicError:
            d = self.displacement(t)
            return math.copysign(self.norm(t), d[np.argmax(np.abs(d))])
        return float(self.displacement(t) @ v)

    def zeros(self, t_lo: float, t_hi: float, samples_per_unit: int = 120):
        """Zeros of the field on (t_lo, t_hi).

        The reference direction flips orientation across the invariant
        times, so the signed component changes sign both at true zeros and
        at those flips; candidates are kept only when the field norm
        actually collapses there.
        """
        m = max(100, int(samples_per_unit * (t_hi - t_lo)))
        ts = np.linspace(t_lo, t_hi, m)
        vals = np.array([self.component(t) for t in ts])
        norms = np.array([self.norm(t) for t in ts])
        scale = np.median(norms)
        out = []
        for k in range(m - 1):
            if vals[k] * vals[k + 1] < 0.0:
                tc = float(brentq(self.component, ts[k], ts[k + 1], xtol=1e-11))
                if self.norm(tc) < 1e-5 * scale:
                    out.append(tc)
        # zeros at orientation flips show as |t - t*| kinks of the norm,
        # with no sign change of the component
        for k in range(1, m - 1):
            if norms[k] < norms[k - 1] and norms[k] < norms[k + 1] and norms[k] < 0.2 * scale:
                res = minimize_scalar(self.norm, bounds=(ts[k - 1], ts[k + 1]),
                                      method="bounded", options={"xatol": 1e-11})
                tc = float(res.x)
                if res.fun < 1e-5 * scale and all(abs(tc - z) > 1e-6 for z in out):
                    out.append(tc)
        return np.array(sorted(out))


def zero_pattern_audit(trace: GeodesicTrace, i: int, s1: float, T: float | None = None,
                       options: IntegrationOptions | None = None) -> dict:
    """Audit the zero set of the i-th family field seeded at s1.

    Seeded at an invariant time, the zeros must reproduce the later
    invariant times; seeded elsewhere, consecutive zeros must straddle
    exactly one invariant time.
    """
    if T is None:
        T = trace.T
    S = invariant_times(trace, i)
    tol_t = 1e-6
    in_S = bool(len(S)) and bool(np.min(np.abs(S - s1)) < 1e-4)
    if in_S:
        s1 = float(S[np.argmin(np.abs(S - s1))])
        fld = FamilyField(trace, i, s1 + 1e-9, options=options)
        zeros = fld.zeros(s1 + 0.05, T)
        expected = S[(S > s1 + 1e-6) & (S < T)]
        matched = (len(zeros) == len(expected)
                   and np.allclose(zeros, expected, atol=1e-5))
        gap = (float(np.max(np.abs(zeros - expected)))
               if len(zeros) == len(expected) and len(zeros) else None)
        return {"seed_on_invariant_set": True, "zeros": zeros, "expected": expected,
                "matched": bool(matched), "max_gap": gap}
    fld = FamilyField(trace, i, s1, options=options)
    zeros = fld.zeros(s1 + 1e-3, T)
    counts = []
    for k in range(len(zeros) - 1):
        counts.append(int(np.sum((S > zeros[k] + tol_t) & (S < zeros[k + 1] - tol_t))))
    return {"seed_on_invariant_set": False, "zeros": zeros, "invariant_times": S,
            "interval_counts": counts,
            "alternation_ok": all(c == 1 for c in counts)}


# ---------------------------------------------------------------------------
# degenerate pair angle


def compute_theta(trace: GeodesicTrace, s1: float, s2: float, j: int) -> float:
    """Rotation angle of the degenerate pair with coincident roots
    b_j = b_{j-1} (the pinned coordinate sits at their common value).

    Defined through the singular-weight orbit sums: the sum over moving
    coordinates of the variation integrals of
    (-1)^l G(f) A(f) / ( |f - v0| sqrt(R_red(f)) ),
    with both coincident roots removed from G and the radicand, balances
    2 theta times the closed-form coefficient at the pinned value v0.
    Antisymmetric in (s1, s2) and additive over concatenation.
    """
    man = trace.manifold
    n = man.n
    b = trace.b.roots
    tolband = 100.0 * man.degeneracy_band()
    if not 2 <= j <= n - 1:
        raise GeodesicError(f"pair index {j} out of range")
    if abs(b[j - 1] - b[j - 2]) > tolband:
        raise GeodesicError("roots of the pair are not coincident")
    v0 = 0.5 * (b[j - 1] + b[j - 2])
    keep = np.array([b[k] for k in range(n - 1) if k not in (j - 1, j - 2)])
    a = np.array(man.spectrum.a)
    red_roots = np.concatenate([keep, a])
    A = man.generator

    total = 0.0
    for l in range(1, n + 1):
        if l == j:
            continue
        sign = (-1.0) ** l

        def num(lam, sign=sign):
            poly = np.prod(lam[:, None] - keep[None, :], axis=1) if len(keep) else 1.0
            return sign * poly * A(lam) / np.abs(lam - v0)

        lo = trace.b.a_plus(l)
        hi = trace.b.a_minus(l - 1)
        if hi - lo < 1e-13 * man.spectrum.width:
            continue
        lo_t, hi_t = (s1, s2) if s2 >= s1 else (s2, s1)
        seg_total = 0.0
        for fa, fb in trace.legs(l, lo_t, hi_t):
            seg = (min(fa, fb), max(fa, fb))
            seg_total += band_segment_integral(num, red_roots, lo, hi, seg=seg)
        total += seg_total if s2 >= s1 else -seg_total

    Gv = np.prod(v0 - keep) if len(keep) else 1.0
    rad = np.prod(v0 - keep) * np.prod(v0 - a) if len(keep) else np.prod(v0 - a)
    coeff = (-1.0) ** j * Gv * A(np.array([v0]))[0] / math.sqrt(rad)
    return float(-total / (2.0 * coeff))
