"""Cut-locus construction and audits.

The cut locus of a base point is built as the image of the closed
covector hemisphere {xi_n >= 0} under eta -> gamma(t_cut(eta), eta),
sampled on a polar grid whose boundary ring lies exactly on {xi_n = 0}.
Every mesh vertex stores its own diagnostics (containment residual,
reflected-pair gaps, degeneracy tags); audits for minimality, boundary
conjugacy and the corner-base degenerate case are separate passes.
"""

from __future__ import annotations

import json
import math
import multiprocessing as mp
from dataclasses import dataclass, field

import numpy as np

from . import __version__ as _version
from .model import Manifold
from .geodesic import (
    CovectorState,
    GeodesicError,
    IntegrationOptions,
    b_from_covector,
    covector_from_roots,
    cut_time,
    integrate,
    reflect,
    unit_covector,
)

__all__ = [
    "HemisphereGrid",
    "CutLocusMesh",
    "build_cut_locus",
    "build_cut_locus_degenerate",
    "degenerate_boundary_audit",
    "pair_coincidence_audit",
    "containment_audit",
    "boundary_conjugacy_audit",
    "minimality_audit",
    "corner_family_endpoints",
    "export_mesh_json",
    "export_mesh_ply",
    "load_mesh",
    "normalize_base_point",
]


def normalize_base_point(man: Manifold, x):
    """Fold every angle into the fundamental quarter [0, alpha_i/4].

    The folds are compositions of the reflection isometries, so the
    resulting representative is isometric data; all chart and sign
    conventions in the build refer to the folded point.
    """
    x = np.mod(np.asarray(x, float), man.alpha)
    out = x.copy()
    for i in range(man.n):
        a = man.alpha[i]
        v = out[i]
        if v > a / 2:
            v = a - v
        if v > a / 4:
            v = a / 2 - v
        out[i] = v
    return out


@dataclass
class HemisphereGrid:
    """Polar sample grid on the closed hemisphere {xi_n >= 0}.

    The polar angle runs from the pole (xi_n-direction) to the boundary
    ring {xi_n = 0}; for surfaces (n = 2) the grid is the closed half
    circle parameterized by a signed radial level.
    """

    manifold: Manifold
    x0: np.ndarray
    n_rad: int
    n_ang: int

    def __post_init__(self):
        self.x0 = normalize_base_point(self.manifold, self.x0)

    def nodes(self):
        """List of (index, grid label, sphere coordinates v)."""
        n = self.manifold.n
        out = []
        if n == 2:
            for j in range(-self.n_rad, self.n_rad + 1):
                rho = j / self.n_rad
                v = np.array([math.sin(rho * math.pi / 2.0),
                              math.cos(rho * math.pi / 2.0)])
                out.append((len(out), (j,), v))
            return out
        if n != 3:
            raise GeodesicError("hemisphere grids implemented for n = 2, 3")
        out.append((0, (0, 0), np.array([0.0, 0.0, 1.0])))
        for j in range(1, self.n_rad + 1):
            chi = (j / self.n_rad) * math.pi / 2.0
            for k in range(self.n_ang):
                psi = 2.0 * math.pi * k / self.n_ang
                v = np.array([math.sin(chi) * math.cos(psi),
                              math.sin(chi) * math.sin(psi),
                              math.cos(chi)])
                out.append((len(out), (j, k), v))
        return out

    def is_boundary(self, label) -> bool:
        if self.manifold.n == 2:
            return abs(label[0]) == self.n_rad
        return label[0] == self.n_rad

    def facets(self):
        """Connectivity of the sample grid (polyline for n = 2)."""
        n = self.manifold.n
        if n == 2:
            m = 2 * self.n_rad + 1
            return [[k, k + 1] for k in range(m - 1)]
        idx = {}
        for i, lab, _ in self.nodes():
            idx[lab] = i
        fac = []
        for k in range(self.n_ang):
            k2 = (k + 1) % self.n_ang
            fac.append([idx[(0, 0)], idx[(1, k)], idx[(1, k2)]])
        for j in range(1, self.n_rad):
            for k in range(self.n_ang):
                k2 = (k + 1) % self.n_ang
                fac.append([idx[(j, k)], idx[(j + 1, k)],
                            idx[(j + 1, k2)], idx[(j, k2)]])
        return fac


@dataclass
class CutLocusMesh:
    manifold: Manifold
    x0: np.ndarray
    grid: dict
    vertices: list
    facets: list
    audits: dict = field(default_factory=dict)
    header: dict = field(default_factory=dict)

    def vertex_points(self):
        return np.array([v["u"] if v.get("u") is not None else v["lam"]
                         for v in self.vertices])

    def boundary_indices(self):
        return [v["idx"] for v in self.vertices if v["boundary"]]

    def interior_indices(self):
        return [v["idx"] for v in self.vertices if not v["boundary"]]


# ---------------------------------------------------------------------------
# vertex computation (top-level for multiprocessing)

_CTX = {}


def _init_worker(spec, x0, opts_dict):
    man = Manifold.from_spec(spec)
    _CTX["man"] = man
    _CTX["x0"] = np.asarray(x0, float)
    _CTX["opts"] = IntegrationOptions(**opts_dict)


def _nudge_direction(v, attempt):
    w = v.copy()
    eps = 1e-5 * (attempt + 1)
    w[0] += eps
    w[-1] += 0.5 * eps
    return w / np.linalg.norm(w)


def _compute_vertex(task):
    idx, label, v, boundary = task
    man = _CTX["man"]
    x0 = _CTX["x0"]
    opts = _CTX["opts"]
    n = man.n
    tolband = man.degeneracy_band()
    nudged = 0
    vv = np.asarray(v, float)
    warn = None
    for attempt in range(6):
        eta = unit_covector(man, x0, vv)
        try:
            b = b_from_covector(eta)
        except GeodesicError:
            vv = _nudge_direction(vv, attempt)
            nudged += 1
            continue
        a = np.array(man.spectrum.a)
        d_axis = np.min(np.abs(b.roots[:, None] - a[None, :]))
        d_pair = (np.min(np.abs(np.diff(b.roots)))
                  if len(b.roots) > 1 else np.inf)
        if min(d_axis, d_pair) < 10.0 * tolband:
            vv = _nudge_direction(vv, attempt)
            nudged += 1
            continue
        break
    try:
        res = cut_time(eta, options=opts)
    except GeodesicError as exc:
        return {"idx": idx, "grid": list(label), "v": list(map(float, vv)),
                "failed": str(exc), "boundary": bool(boundary)}
    xt = res.trace.x(res.t0)
    lam = res.trace.lam(res.t0)
    lam0 = man.lam(x0)
    rec = {
        "idx": idx,
        "grid": list(label),
        "v": [float(w) for w in vv],
        "boundary": bool(boundary),
        "t0": float(res.t0),
        "case": res.case,
        "x": [float(w) for w in np.mod(xt, man.alpha)],
        "lam": [float(w) for w in lam],
        "u": ([float(w) for w in man.embed(xt)] if man.is_ellipsoid else None),
        "lam_residual": float(abs(lam[-1] - lam0[-1])),
        "nudged": nudged,
        "failed": None,
        "warning": warn or res.warning,
    }
    if not boundary:
        try:
            res2 = cut_time(reflect(eta), options=opts)
            xt2 = res2.trace.x(res2.t0)
            rec["t0_pair_gap"] = float(abs(res.t0 - res2.t0))
            if man.is_ellipsoid:
                rec["endpoint_pair_gap"] = float(
                    np.linalg.norm(man.embed(xt) - man.embed(xt2)))
            else:
                gaps = np.abs(np.mod(xt - xt2 + man.alpha / 2, man.alpha)
                              - man.alpha / 2)
                rec["endpoint_pair_gap"] = float(np.max(gaps))
        except GeodesicError as exc:
            rec["warning"] = f"pair run failed: {exc}"
    else:
        rec["t0_pair_gap"] = 0.0
        rec["endpoint_pair_gap"] = 0.0
    return rec


def _run_tasks(man, x0, tasks, options, workers):
    opts_dict = vars(options or IntegrationOptions())
    if workers <= 1:
        _init_worker(man.spec_dict(), x0, opts_dict)
        return [_compute_vertex(t) for t in tasks]
    with mp.get_context("fork").Pool(
            workers, initializer=_init_worker,
            initargs=(man.spec_dict(), x0, opts_dict)) as pool:
        return pool.map(_compute_vertex, tasks, chunksize=4)


def build_cut_locus(man: Manifold, x0, resolution=(16, 16), workers: int = 1,
                    options: IntegrationOptions | None = None,
                    seed: int = 0) -> CutLocusMesh:
    """Cut locus of a base point off the corner set, as a vertex mesh.

    resolution = (radial, angular) grid counts; every vertex is the cut
    point of its sampled covector, with the reflected partner integrated
    for the interior coincidence diagnostics.  Failures are recorded as
    holes, never interpolated.
    """
    x0 = normalize_base_point(man, x0)
    tag = man.point(x0).tag
    if man.n >= 2 and tag.in_corner[man.n - 1]:
        raise GeodesicError("base point on the corner set; "
                            "use build_cut_locus_degenerate")
    grid = HemisphereGrid(man, x0, resolution[0], resolution[1])
    nodes = grid.nodes()
    tasks = [(idx, label, v, grid.is_boundary(label)) for idx, label, v in nodes]
    rows = _run_tasks(man, x0, tasks, options, workers)
    header = {
        "spec_hash": man.content_hash(),
        "seed": seed,
        "version": _version,
        "tolerances": {"degeneracy": man.tol},
        "resolution": list(resolution),
        "workers_note": "vertex values independent of worker count",
    }
    return CutLocusMesh(man, x0, {"n_rad": resolution[0], "n_ang": resolution[1]},
                        rows, grid.facets(), {}, header)


# ---------------------------------------------------------------------------
# audits


def pair_coincidence_audit(mesh: CutLocusMesh) -> dict:
    """Max reflected-pair gaps over interior vertices (0 at the boundary)."""
    t0g, epg = 0.0, 0.0
    for v in mesh.vertices:
        if v.get("failed"):
            continue
        t0g = max(t0g, v.get("t0_pair_gap", 0.0))
        epg = max(epg, v.get("endpoint_pair_gap", 0.0))
    out = {"max_t0_gap": t0g, "max_endpoint_gap": epg}
    mesh.audits["pair_coincidence"] = out
    return out


def containment_audit(mesh: CutLocusMesh) -> dict:
    """Max |lam_n(vertex) - lam_n(base)|, the level-set containment check."""
    worst = 0.0
    for v in mesh.vertices:
        if v.get("failed"):
            continue
        worst = max(worst, v["lam_residual"])
    out = {"max_lam_residual": worst,
           "relative": worst / mesh.manifold.spectrum.width}
    mesh.audits["containment"] = out
    return out


def boundary_conjugacy_audit(mesh: CutLocusMesh, interior_stride: int = 1,
                             n_samples: int = 50,
                             options: IntegrationOptions | None = None,
                             workers: int = 1) -> dict:
    """Boundary vertices: first conjugate event at the cut time with
    multiplicity one.  Interior vertices: no conjugate point before the
    cut time (smallest transversal singular value stays positive)."""
    man = mesh.manifold
    x0 = mesh.x0
    tasks = []
    for v in mesh.vertices:
        if v.get("failed"):
            continue
        if v["boundary"]:
            tasks.append(("boundary", v["idx"], v["v"], v["t0"]))
    interior = [v for v in mesh.vertices if not v.get("failed") and not v["boundary"]]
    for v in interior[::max(interior_stride, 1)]:
        tasks.append(("interior", v["idx"], v["v"], v["t0"]))

    args = [(kind, idx, vv, t0, n_samples) for kind, idx, vv, t0 in tasks]
    opts_dict = vars(options or IntegrationOptions())
    if workers <= 1:
        _init_worker(man.spec_dict(), x0, opts_dict)
        rows = [_conjugacy_task(a) for a in args]
    else:
        with mp.get_context("fork").Pool(
                workers, initializer=_init_worker,
                initargs=(man.spec_dict(), x0, opts_dict)) as pool:
            rows = pool.map(_conjugacy_task, args, chunksize=2)

    worst_gap = 0.0
    min_sv = np.inf
    mults = []
    for row in rows:
        if row["kind"] == "boundary":
            worst_gap = max(worst_gap, row["gap"])
            mults.append(row["multiplicity"])
        else:
            min_sv = min(min_sv, row["min_sv"])
    out = {"boundary_max_gap": worst_gap,
           "boundary_multiplicities": sorted(set(mults)) if mults else [],
           "interior_min_singular_value": None if min_sv is np.inf else min_sv,
           "rows": rows}
    mesh.audits["conjugacy"] = out
    return out


def _conjugacy_task(arg):
    from .jacobi import conjugate_points, min_transversal_singular_value
    kind, idx, vv, t0, n_samples = arg
    man = _CTX["man"]
    x0 = _CTX["x0"]
    opts = _CTX["opts"]
    eta = unit_covector(man, x0, np.asarray(vv, float))
    if kind == "boundary":
        evs, _ = conjugate_points(eta, 1.12 * t0, options=opts)
        if not evs:
            return {"kind": kind, "idx": idx, "gap": np.inf, "multiplicity": 0}
        first = evs[0]
        return {"kind": kind, "idx": idx, "gap": abs(first.t - t0),
                "multiplicity": first.multiplicity}
    sv = min_transversal_singular_value(eta, 0.999 * t0, n_samples=n_samples,
                                        options=opts)
    return {"kind": kind, "idx": idx, "min_sv": sv}


def _shoot_task(arg):
    """First arrival length of one ray into each target ball.

    The distance to a fixed point is 1-Lipschitz in arc length, so a
    dense-output scan at spacing h cannot miss an entry deeper than h/2;
    candidate dips are refined by bounded minimization and bisection.
    """
    from scipy.integrate import solve_ivp
    from scipy.optimize import brentq, minimize_scalar
    from .geodesic import Flow

    d, T, targets, r_hit = arg
    man = _CTX["man"]
    x0 = _CTX["x0"]
    opts = _CTX["opts"]
    flow = Flow(man)
    n = man.n
    eta = unit_covector(man, x0, np.asarray(d, float))
    sol = solve_ivp(flow.rhs, (0.0, T), eta.z(), method=opts.method,
                    rtol=opts.rtol, atol=opts.atol, dense_output=True)
    if not sol.success:
        return [np.inf] * len(targets)
    h = 0.04
    ts = np.arange(0.0, T, h)
    us = np.array([man.embed(sol.sol(t)[:n]) for t in ts])
    out = []
    for q in targets:
        q = np.asarray(q, float)
        dist = np.linalg.norm(us - q[None, :], axis=1)

        def dist_at(t):
            return float(np.linalg.norm(man.embed(sol.sol(t)[:n]) - q))

        arrival = np.inf
        k = 0
        while k < len(ts):
            if dist[k] < r_hit + 0.5 * h:
                lo = max(ts[k] - h, 0.0)
                hi = min(ts[k] + h, T)
                res = minimize_scalar(dist_at, bounds=(lo, hi), method="bounded",
                                      options={"xatol": 1e-10})
                if res.fun < r_hit:
                    t_min = float(res.x)
                    if dist_at(lo) > r_hit:
                        arrival = brentq(lambda t: dist_at(t) - r_hit, lo, t_min,
                                         xtol=1e-10)
                    else:
                        arrival = lo
                    break
            k += 1
        out.append(float(arrival))
    return out


def minimality_audit(man: Manifold, x0, targets, t0_claimed, shoot_resolution: int = 2000,
                     r_hit: float = 1e-3, margin: float = 0.05,
                     options: IntegrationOptions | None = None,
                     workers: int = 1) -> dict:
    """Brute-force shooting audit that no shorter geodesic reaches a
    claimed cut point.

    A dense fan of unit covectors is integrated to the claimed length
    plus a margin; the first arrival into each ball B(q, r_hit) is
    recorded.  PASS requires min arrival >= t0 - 2 r_hit for every
    target; a ball nothing reaches is INCONCLUSIVE.
    """
    if not man.is_ellipsoid:
        raise GeodesicError("shooting audit uses ambient distances (sqrt case)")
    x0 = normalize_base_point(man, x0)
    opts = options or IntegrationOptions(rtol=1e-9, atol=1e-11)
    targets = [np.asarray(q, float) for q in targets]
    t0_claimed = np.asarray(t0_claimed, float)
    T = float(np.max(t0_claimed)) * (1.0 + margin)
    n = man.n
    arrivals = np.full(len(targets), np.inf)

    if n == 2:
        angles = 2.0 * math.pi * np.arange(shoot_resolution) / shoot_resolution
        dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    else:
        k = np.arange(shoot_resolution)
        golden = (1.0 + math.sqrt(5.0)) / 2.0
        zc = 1.0 - 2.0 * (k + 0.5) / shoot_resolution
        r = np.sqrt(1.0 - zc**2)
        phi = 2.0 * math.pi * k / golden
        dirs = np.stack([r * np.cos(phi), r * np.sin(phi), zc], axis=1)

    tasks = [(d, T, [q.tolist() for q in targets], r_hit) for d in dirs]
    if workers <= 1:
        _init_worker(man.spec_dict(), x0, vars(opts))
        rows = [_shoot_task(t) for t in tasks]
    else:
        with mp.get_context("fork").Pool(
                workers, initializer=_init_worker,
                initargs=(man.spec_dict(), x0, vars(opts))) as pool:
            rows = pool.map(_shoot_task, tasks, chunksize=16)
    for row in rows:
        for m, te in enumerate(row):
            arrivals[m] = min(arrivals[m], te)

    verdicts = []
    for m in range(len(targets)):
        if not np.isfinite(arrivals[m]):
            verdicts.append("INCONCLUSIVE")
        elif arrivals[m] >= t0_claimed[m] - 2.0 * r_hit:
            verdicts.append("PASS")
        else:
            verdicts.append("FAIL")
    return {"arrivals": arrivals.tolist(), "t0_claimed": t0_claimed.tolist(),
            "r_hit": r_hit, "resolution": shoot_resolution, "verdicts": verdicts}


# ---------------------------------------------------------------------------
# degenerate (corner) base points


def _map_reduced_point_to_full(man: Manifold, red: Manifold, k_drop: int, x_red):
    """Angles and values of a reduced-model point inside the hypersurface.

    Coordinates away from the glued pair keep their value and quarter;
    the glued coordinate splits at the dropped constant.
    """
    n = man.n
    lam_red = red.lam(np.asarray(x_red, float))
    a_drop = man.spectrum.a[k_drop]
    lam_full = np.empty(n)
    for m in range(k_drop - 1):
        lam_full[m] = lam_red[m]
    glued = lam_red[k_drop - 1]
    if glued >= a_drop:
        lam_full[k_drop - 1] = glued
        lam_full[k_drop] = a_drop
    else:
        lam_full[k_drop - 1] = a_drop
        lam_full[k_drop] = glued
    for m in range(k_drop + 1, n):
        lam_full[m] = lam_red[m - 1]
    x_full = man.x_from_lam(lam_full)
    return x_full, lam_full


def corner_family_endpoints(man: Manifold, x0_full, tangential_v, phis,
                            delta: float = 1e-7,
                            options: IntegrationOptions | None = None) -> dict:
    """Cut endpoints of the covector family over a corner base point.

    All members share the projection onto the corner-set tangent space
    (prescribed by sphere coordinates tangential_v of the first n-2
    coordinates) and sweep the cone angle phi in the two normal slots.
    Each member is launched at parameter delta with the corner asymptotics
    (positions grow like sqrt(t), momenta from the invariant roots), run
    to the first corner return, and the return point is extrapolated from
    the smooth ambient record.  The family collapsing to one endpoint is
    the audited degeneracy structure.
    """
    opts = options or IntegrationOptions()
    n = man.n
    a = np.array(man.spectrum.a)
    x0 = np.asarray(x0_full, float)
    tab_lam = man.lam(x0)
    band = man.degeneracy_band()
    if abs(tab_lam[n - 2] - a[n - 1]) > 100 * band or abs(tab_lam[n - 1] - a[n - 1]) > 100 * band:
        raise GeodesicError("base point is not on the corner set")

    g = man.metric(x0)
    # tangential energy share: xi_m = sqrt(g_m) w_m on the first n-2 slots
    w = np.asarray(tangential_v, float)
    if len(w) != n - 2:
        raise GeodesicError("tangential data must have n-2 components")
    rho2 = 1.0 - float(np.sum(w**2))
    if rho2 <= 1e-8:
        raise GeodesicError("no energy left for the normal cone")
    xi_t = np.sqrt(g[: n - 2]) * w

    # invariant roots shared by the family: the turning polynomial is
    # pinned by the tangential nodes and the forced root at the corner value
    nodes = [tab_lam[m] for m in range(n - 2)] + [a[n - 1]]
    vals = [(-1.0) ** (m + 1) * xi_t[m] ** 2 for m in range(n - 2)] + [0.0]
    nodes = np.array(nodes)
    vals = np.array(vals)
    m_deg = n - 1
    V = np.vander(nodes, m_deg + 1, increasing=True)
    rhs = vals - (-1.0) * nodes**m_deg
    coef = np.linalg.solve(V[:, :m_deg], rhs)
    theta_coeffs = np.concatenate([coef, [-1.0]])
    roots = np.sort(np.roots(theta_coeffs[::-1]).real)[::-1]

    kappa = 0.5 * man.periods.acceleration(n - 1, x0[n - 2])
    kappa2 = -0.5 * man.periods.acceleration(n, x0[n - 1])
    Pstar = np.prod(tab_lam[: n - 2] - a[n - 1]) if n > 2 else 1.0
    v_speed = math.sqrt(rho2) / math.sqrt(Pstar * kappa)

    results = []
    for phi in phis:
        r = math.sqrt(2.0 * v_speed * delta)
        y1, y2 = r * math.cos(phi), r * math.sin(phi)
        x = x0.copy()
        x[: n - 2] += delta * (xi_t / g[: n - 2])
        x[n - 2] = x0[n - 2] + y1
        x[n - 1] = x0[n - 1] + y2
        signs = np.ones(n)
        signs[: n - 2] = np.sign(xi_t) if n > 2 else signs[:0]
        signs[signs == 0] = 1.0
        signs[n - 2] = 1.0 if math.cos(phi) >= 0 else -1.0
        signs[n - 1] = 1.0 if math.sin(phi) >= 0 else -1.0
        eta = covector_from_roots(man, x, roots, signs)

        stop = 1e-4 * man.spectrum.width

        def approach(t, z):
            lam = man.lam(z[:n])
            return (lam[n - 2] - lam[n - 1]) - stop

        approach.terminal = True
        approach.direction = -1.0
        tr = integrate(eta, 30.0, options=opts, extra_events=[approach])
        hits = tr._ivp.t_events[-1]
        if not len(hits):
            raise GeodesicError(f"no corner return for phi={phi}")
        t_hit = float(hits[0])
        # the gap closes linearly in |t - t*| (corner radius^2 grows
        # linearly in time); fit with a quadratic correction and take the
        # root just past the stopping point
        ts = t_hit - np.linspace(4e-3, 0.0, 15)
        gaps = np.array([tr.lam(t)[n - 2] - tr.lam(t)[n - 1] for t in ts])
        cc = np.polyfit(ts - t_hit, gaps, 2)
        rts = np.roots(cc)
        rts = rts[np.isreal(rts)].real
        rts = rts[rts > -1e-12]
        t_star = t_hit + (float(np.min(rts)) if len(rts) else stop / max(-cc[1], 1e-12))
        us = np.array([man.embed(tr.x(t)) for t in ts])
        u_star = np.empty(n + 1)
        for cmp in range(n + 1):
            cu = np.polyfit(ts - t_hit, us[:, cmp], 2)
            u_star[cmp] = np.polyval(cu, t_star - t_hit)
        results.append({"phi": float(phi), "t_return": float(t_star),
                        "u": u_star.tolist(), "delta": delta})
    us = np.array([r["u"] for r in results])
    t_rets = np.array([r["t_return"] for r in results])
    spread = 0.0
    for i in range(len(us)):
        for j in range(i + 1, len(us)):
            spread = max(spread, float(np.linalg.norm(us[i] - us[j])))
    return {"members": results, "endpoint_spread": spread,
            "t_return_spread": float(np.ptp(t_rets)), "roots": roots.tolist()}


def build_cut_locus_degenerate(man: Manifold, x0, resolution=(16, 16),
                               workers: int = 1,
                               options: IntegrationOptions | None = None,
                               family_phis=None, seed: int = 0) -> CutLocusMesh:
    """Cut locus of a corner-set base point.

    The locus is computed inside the hypersurface carrying the point,
    treated intrinsically as the one-dimension-lower manifold built from
    the spectrum with the shared constant removed; the mesh is the
    intrinsic cut locus mapped back, and it lies inside the corner set.
    The covector cone over each interior point (members with the same
    tangential projection) is audited for endpoint collapse.
    """
    n = man.n
    x0 = normalize_base_point(man, np.asarray(x0, float))
    tag = man.point(x0).tag
    if not tag.in_corner[n - 1]:
        raise GeodesicError("base point is not on the corner set")
    red = man.submanifold_model(n - 1)
    lam0 = man.lam(x0)
    # reduced base point: shared values, glued coordinate at the corner value
    lam_red0 = np.concatenate([lam0[: n - 2], [man.spectrum.a[n - 1]]])
    x_red0 = red.x_from_lam(lam_red0)
    sub = build_cut_locus(red, x_red0, resolution=resolution, workers=workers,
                          options=options, seed=seed)
    verts = []
    for v in sub.vertices:
        if v.get("failed"):
            verts.append(dict(v))
            continue
        x_full, lam_full = _map_reduced_point_to_full(man, red, n - 1,
                                                      np.asarray(v["x"], float))
        rec = dict(v)
        rec["x"] = [float(w) for w in x_full]
        rec["lam"] = [float(w) for w in lam_full]
        if man.is_ellipsoid:
            u_red = np.asarray(v["u"], float)
            u_full = np.insert(u_red, n - 1, 0.0)
            rec["u"] = [float(w) for w in u_full]
        rec["corner_residual"] = float(abs(v["lam"][-1] - man.spectrum.a[n - 1]))
        verts.append(rec)
    header = dict(sub.header)
    header["degenerate_base"] = True
    header["intrinsic_spec_hash"] = red.content_hash()
    mesh = CutLocusMesh(man, x0, sub.grid, verts, sub.facets,
                        {"intrinsic": sub.audits}, header)

    if family_phis is None:
        family_phis = [0.35, 0.95, 1.55, 2.15, 2.75]
    # cone audit over a representative interior tangential direction
    if n >= 3:
        w = np.array([0.6] + [0.0] * (n - 3))
        fam = corner_family_endpoints(man, x0, w, family_phis, options=options)
        mesh.audits["cone_collapse"] = {
            "endpoint_spread": fam["endpoint_spread"],
            "t_return_spread": fam["t_return_spread"],
            "phis": list(map(float, family_phis)),
        }
    mesh._intrinsic = (red, x_red0, sub)
    return mesh


def degenerate_boundary_audit(mesh: CutLocusMesh,
                              options: IntegrationOptions | None = None,
                              workers: int = 1) -> dict:
    """Boundary multiplicity for a corner-base cut locus.

    Along a boundary geodesic (tangent to the corner set) two independent
    vanishing directions meet at the cut time: the one intrinsic to the
    carrying hypersurface, computed by the lower-dimensional linearized
    flow, and the normal family whose members all refocus on the corner
    set (certified by the corner residual of the cut vertex and the cone
    collapse).  The reported multiplicity is their sum.
    """
    red, x_red0, sub = mesh._intrinsic
    intrinsic = boundary_conjugacy_audit(sub, interior_stride=10**9,
                                         options=options, workers=workers)
    rows = []
    for r in intrinsic["rows"]:
        if r["kind"] != "boundary":
            continue
        vert = next(v for v in mesh.vertices if v["idx"] == r["idx"])
        rows.append({
            "idx": r["idx"],
            "intrinsic_multiplicity": r["multiplicity"],
            "intrinsic_gap": r["gap"],
            "corner_residual": vert.get("corner_residual"),
            "multiplicity": r["multiplicity"] + 1,
        })
    out = {
        "boundary_max_gap": intrinsic["boundary_max_gap"],
        "multiplicities": sorted({r["multiplicity"] for r in rows}),
        "cone_collapse": mesh.audits.get("cone_collapse"),
        "rows": rows,
    }
    mesh.audits["degenerate_conjugacy"] = {k: v for k, v in out.items() if k != "rows"}
    return out


# ---------------------------------------------------------------------------
# exports


def _mesh_dict(mesh: CutLocusMesh) -> dict:
    return {
        "header": mesh.header,
        "n": mesh.manifold.n,
        "base_point": [float(v) for v in mesh.x0],
        "base_lam": [float(v) for v in mesh.manifold.lam(mesh.x0)],
        "grid": mesh.grid,
        "vertices": mesh.vertices,
        "facets": mesh.facets,
        "audits": mesh.audits,
    }


def export_mesh_json(mesh: CutLocusMesh, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_mesh_dict(mesh), f, indent=1, sort_keys=True)
        f.write("\n")


def load_mesh(path) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def export_mesh_ply(mesh: CutLocusMesh, path) -> None:
    """ASCII polygon export; vertices carry cut-time and boundary scalars.

    Ambient coordinates are used when the generator embeds (first three
    components; any extra goes to the u3 property), else the coordinate
    values padded to three slots.
    """
    verts = [v for v in mesh.vertices if not v.get("failed")]
    index_map = {v["idx"]: k for k, v in enumerate(verts)}
    extra_u = mesh.manifold.n + 1 > 3 and verts and verts[0].get("u") is not None
    lines = [
        "ply",
        "format ascii 1.0",
        f"comment spec_hash {mesh.header.get('spec_hash', '')}",
        f"comment version {mesh.header.get('version', '')}",
        f"element vertex {len(verts)}",
        "property float x",
        "property float y",
        "property float z",
    ]
    if extra_u:
        lines.append("property float u3")
    lines += [
        "property float t0",
        "property uchar boundary",
        "property uchar conj_mult",
        f"element face {len(mesh.facets)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    conj = {}
    rows = mesh.audits.get("conjugacy", {}).get("rows", [])
    for r in rows:
        if r.get("kind") == "boundary":
            conj[r["idx"]] = r.get("multiplicity", 0)
    for v in verts:
        if v.get("u") is not None:
            coords = list(v["u"])
        else:
            coords = list(v["lam"])
        while len(coords) < 3:
            coords.append(0.0)
        row = coords[:3]
        if extra_u:
            row.append(coords[3] if len(coords) > 3 else 0.0)
        row += [v["t0"], int(bool(v["boundary"])), int(conj.get(v["idx"], 0))]
        txt = " ".join(f"{w:.17g}" if isinstance(w, float) else str(w) for w in row)
        lines.append(txt)
    for f_ in mesh.facets:
        if all(i in index_map for i in f_):
            lines.append(" ".join([str(len(f_))] + [str(index_map[i]) for i in f_]))
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
