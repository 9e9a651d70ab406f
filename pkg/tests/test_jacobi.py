import numpy as np
import pytest

from liouville.geodesic import (
    CovectorState,
    covector_from_roots,
    cut_time,
    integrate,
    unit_covector,
)
from liouville.jacobi import (
    FamilyField,
    compute_theta,
    conjugate_points,
    first_position_zero,
    invariant_gradient_covector,
    invariant_gradient_norm,
    invariant_times,
    linearized_flow,
    min_transversal_singular_value,
    symplectic_product,
    zero_pattern_audit,
)
from liouville.model import metric_at


@pytest.fixture(scope="module")
def generic3(ell3_session):
    man = ell3_session
    x0 = np.array([0.2, 0.15, 0.22]) * man.alpha
    eta = unit_covector(man, x0, np.array([0.5, 0.6, 0.63]))
    trace = integrate(eta, 12.0)
    return man, x0, eta, trace


@pytest.fixture(scope="session")
def ell3_session(request):
    from liouville import Manifold
    return Manifold.ellipsoid((4.0, 3.0, 2.0, 1.0))


def test_symplectic_conservation(generic3):
    man, x0, eta, trace = generic3
    fr = linearized_flow(eta, 10.0)
    n = man.n
    I = np.eye(2 * n)
    drift = 0.0
    for t in np.linspace(0.5, 10.0, 12):
        S = fr.stm(t)
        for a_ in range(2 * n):
            for b_ in range(a_ + 1, 2 * n):
                drift = max(drift, abs(symplectic_product(S[:, a_], S[:, b_], n)
                                       - symplectic_product(I[:, a_], I[:, b_], n)))
    assert drift < 1e-8


def test_flow_direction_mode(generic3):
    # seeding along the initial momentum reproduces the reparameterization
    # mode: the displacement stays parallel to the velocity
    man, x0, eta, trace = generic3
    fr = linearized_flow(eta, 4.0)
    n = man.n
    dz0 = np.concatenate([np.zeros(n), eta.xi])
    for t in (1.0, 2.5, 4.0):
        d = fr.propagate(t, dz0)
        x, xi = fr.state(t)
        vel = xi / metric_at(man.lam(x))
        cosang = d[:n] @ vel / (np.linalg.norm(d[:n]) * np.linalg.norm(vel))
        assert abs(abs(cosang) - 1.0) < 1e-8


def test_position_block_small_time(generic3):
    man, x0, eta, trace = generic3
    fr = linearized_flow(eta, 0.01)
    t = 1e-3
    g0 = metric_at(man.lam(x0))
    P = fr.position_block(t)
    xt, _ = fr.state(t)
    gt = metric_at(man.lam(xt))
    for k in range(man.n):
        dxi = np.eye(man.n)[k]
        Y = P @ dxi
        lhs = np.sqrt(np.sum(gt * Y * Y))
        rhs = t * np.sqrt(np.sum(dxi**2 / g0))
        assert abs(lhs - rhs) <= 1e-4 * rhs


def test_linearized_matches_finite_differences(generic3):
    man, x0, eta, trace = generic3
    fr = linearized_flow(eta, 5.0)
    g = metric_at(man.lam(x0))
    w = eta.xi / g
    dxi = np.array([0.3, -0.5, 0.2])
    dxi -= w * (dxi @ w) / (w @ w)  # tangent to the energy level
    h = 1e-5
    trp = integrate(CovectorState(man, x0, eta.xi + h * dxi).unit(), 5.0)
    trm = integrate(CovectorState(man, x0, eta.xi - h * dxi).unit(), 5.0)
    for t in (1.0, 3.0, 5.0):
        fd = (trp.x(t) - trm.x(t)) / (2 * h)
        lin = fr.propagate(t, np.concatenate([np.zeros(3), dxi]))[:3]
        assert np.max(np.abs(fd - lin)) <= 1e-4 * max(np.max(np.abs(lin)), 1e-6)


def test_gradient_norm_closed_form(generic3):
    man, x0, eta, trace = generic3
    for i in (1, 2):
        for t in (1.1, 2.37, 5.3):
            x, xi = trace.state(t)
            v = invariant_gradient_covector(man, x, xi, trace.b.roots, i)
            g = metric_at(man.lam(x))
            direct = np.sqrt(np.sum(v**2 / g))
            printed = invariant_gradient_norm(man, x, xi, trace.b.roots, i)
            assert abs(direct - printed) <= 1e-8 * printed


def test_family_orthogonality(generic3):
    # columns seeded along distinct root gradients keep vanishing pairing
    man, x0, eta, trace = generic3
    from liouville.jacobi import jacobi_seed
    fr = linearized_flow(eta, 8.0)
    n = man.n
    s1 = jacobi_seed(man, x0, eta.xi, trace.b.roots, 1)
    s2 = jacobi_seed(man, x0, eta.xi, trace.b.roots, 2)
    d1 = np.concatenate([np.zeros(n), s1])
    d2 = np.concatenate([np.zeros(n), s2])
    w0 = symplectic_product(d1, d2, n)
    assert abs(w0) < 1e-10
    for t in (2.0, 6.0):
        S = fr.stm(t)
        assert abs(symplectic_product(S @ d1, S @ d2, n) - w0) < 1e-8


def test_zero_pattern_seeded_on_invariant_times(generic3):
    man, x0, eta, trace = generic3
    for i in (1, 2):
        S = invariant_times(trace, i)
        assert len(S) >= 2
        rep = zero_pattern_audit(trace, i, float(S[0]))
        assert rep["seed_on_invariant_set"]
        assert rep["matched"]
        assert rep["max_gap"] < 1e-6


def test_zero_pattern_alternation(generic3):
    man, x0, eta, trace = generic3
    for i in (1, 2):
        rep = zero_pattern_audit(trace, i, 0.8)
        assert not rep["seed_on_invariant_set"]
        assert len(rep["zeros"]) >= 2
        assert rep["alternation_ok"]


def test_window_nonvanishing(generic3, rng):
    # within one band period of every clock the seeded field cannot vanish
    man, x0, eta, trace = generic3
    n = man.n
    checked = 0
    for i in (1, 2):
        S = invariant_times(trace, i)
        for s1 in (0.4, 1.7, 2.9):
            if len(S) and np.min(np.abs(S - s1)) < 1e-3:
                continue
            fld = FamilyField(trace, i, s1)
            for ds in (0.3, 0.9, 1.6):
                s2 = s1 + ds
                sig1, sig2 = trace.sigma_all(s1), trace.sigma_all(s2)
                ok = all(sig2[l] - sig1[l] <= 2 * (trace.b.a_minus(l) - trace.b.a_plus(l + 1))
                         for l in range(n))
                if not ok:
                    continue
                assert fld.norm(s2) > 1e-8
                checked += 1
    assert checked >= 5


def test_no_conjugate_before_cut_generic(generic3):
    man, x0, eta, trace = generic3
    res = cut_time(eta)
    sv = min_transversal_singular_value(eta, 0.999 * res.t0)
    assert sv > 1e-6
    evs, _ = conjugate_points(eta, 0.995 * res.t0)
    assert evs == []


def test_boundary_conjugate_multiplicity_one(ell3_session):
    man = ell3_session
    x0 = np.array([0.2, 0.15, 0.22]) * man.alpha
    eta = unit_covector(man, x0, np.array([0.5, 0.6, 0.0]))
    res = cut_time(eta)
    evs, _ = conjugate_points(eta, 1.12 * res.t0)
    assert len(evs) >= 1
    assert abs(evs[0].t - res.t0) < 1e-6
    assert evs[0].multiplicity == 1


def test_sheet_contained_normal_field_nonvanishing(ell3_session):
    # geodesic inside the middle hypersurface avoiding the corner set:
    # the normal field stays nonzero through the cut time
    man = ell3_session
    a = man.spectrum.a
    x0 = np.array([0.2 * man.alpha[0], 0.0,
                   man.periods.position_of_value(3, 1.3, 0)])
    b = np.array([a[2], 1.55])  # sheet root first: f_2 pinned at a_2
    eta = covector_from_roots(man, x0, b, signs=np.ones(3))
    tr = integrate(eta, 8.0)
    assert max(abs(tr.lam(t)[1] - a[2]) for t in np.linspace(0, 8, 81)) < 1e-9
    res = cut_time(eta)
    assert res.case == "generic"
    fr = linearized_flow(eta, min(1.5 * res.t0, 8.0))
    tz = first_position_zero(fr, 1)  # normal slot is the pinned coordinate
    y_t0 = fr.stm(res.t0)[1, man.n + 1]
    assert abs(y_t0) > 1e-6
    if tz is not None:
        assert tz > res.t0 + 1e-6


def test_theta_structure_and_bound(ell3_session):
    man = ell3_session
    lam0 = 2.6
    x0 = np.array([0.21 * man.alpha[0],
                   man.periods.position_of_value(2, lam0, 0),
                   0.17 * man.alpha[2]])
    eta = covector_from_roots(man, x0, np.array([lam0, lam0]), signs=np.ones(3))
    tr = integrate(eta, 10.0)
    th1 = compute_theta(tr, 0.0, 3.0, 2)
    th2 = compute_theta(tr, 3.0, 7.0, 2)
    assert abs(compute_theta(tr, 2.0, 2.0, 2)) < 1e-12
    assert abs(th1 + th2 - compute_theta(tr, 0.0, 7.0, 2)) < 1e-9
    assert abs(compute_theta(tr, 3.0, 0.0, 2) + th1) < 1e-12
    res = cut_time(eta)
    th_cut = compute_theta(res.trace, 0.0, res.t0, 2)
    assert th_cut < np.pi - 1e-3


def test_theta_oscillation_phase_oracle(ell3_session):
    # independent oracle: unwrapped oscillation phase of the collapsed
    # band along a nearby regular geodesic converges to the pair angle
    man = ell3_session
    lam0 = 2.6
    x0 = np.array([0.21 * man.alpha[0],
                   man.periods.position_of_value(2, lam0, 0),
                   0.17 * man.alpha[2]])
    eta = covector_from_roots(man, x0, np.array([lam0, lam0]), signs=np.ones(3))
    tr = integrate(eta, 6.0)
    t_ref = 5.0
    th_exact = compute_theta(tr, 0.0, t_ref, 2)
    errs = []
    for u in (0.05, 0.025):
        eta_u = covector_from_roots(man, x0, np.array([lam0 + u**2, lam0]),
                                    signs=np.ones(3))
        tru = integrate(eta_u, 6.0)
        ts = np.linspace(0, t_ref, 3001)
        f2 = np.array([tru.lam(t)[1] for t in ts])
        s2 = np.clip((f2 - lam0) / u**2, 0.0, 1.0)
        raw = np.arcsin(np.sqrt(s2))
        acc = raw[0] + np.concatenate([[0.0], np.cumsum(np.abs(np.diff(raw)))])
        errs.append(abs(acc[-1] - th_exact))
    assert errs[-1] < 2e-3
    assert errs[-1] < errs[0]
