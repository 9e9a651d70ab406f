import json

import numpy as np
import pytest
from scipy.integrate import quad

from liouville import Manifold, classify_point, elliptic_coords
from liouville.model import (
    AxisSpectrum,
    GeneratorFunction,
    ModelError,
    ellipsoid_squares,
    energy,
    first_integral_matrix,
    first_integrals,
    metric_at,
)


def test_spectrum_validation():
    with pytest.raises(ModelError):
        AxisSpectrum((1.0, 2.0, 3.0))
    with pytest.raises(ModelError):
        AxisSpectrum((3.0, 2.0, -1.0))
    with pytest.raises(ModelError):
        AxisSpectrum((3.0, 2.0))
    s = AxisSpectrum((4.0, 3.0, 2.0, 1.0))
    assert s.n == 3
    assert s.drop(2).a == (4.0, 3.0, 1.0)


def test_generator_variants_and_derivatives():
    lam = np.linspace(1.0, 3.0, 11)
    for gen, exact in [
        (GeneratorFunction.sqrt(), lambda x: np.sqrt(x)),
        (GeneratorFunction.const(2.5), lambda x: 2.5 * np.ones_like(x)),
        (GeneratorFunction.poly([1.0, 0.5, 0.25]), lambda x: 1 + 0.5 * x + 0.25 * x**2),
    ]:
        np.testing.assert_allclose(gen(lam), exact(lam), rtol=1e-14)
        h = 1e-6
        fd = (gen(lam + h) - gen(lam - h)) / (2 * h)
        np.testing.assert_allclose(gen.derivative(lam, 1), fd, rtol=1e-6)

    grid = np.linspace(1.0, 3.0, 40)
    tab = GeneratorFunction("table", table=(grid, np.sqrt(grid)))
    np.testing.assert_allclose(tab(lam), np.sqrt(lam), rtol=1e-8)
    fd = (tab(lam + 1e-5) - tab(lam - 1e-5)) / 2e-5
    np.testing.assert_allclose(tab.derivative(lam, 1), fd, rtol=1e-6)


def test_periods_against_adaptive_quadrature_oracle(ell2):
    # independent oracle: algebraic-endpoint-weight quadrature at tight tolerance
    a = np.array(ell2.spectrum.a)
    n = ell2.n
    for i in range(1, n + 1):
        lo, hi = a[i], a[i - 1]
        others = np.array([a[j] for j in range(n + 1) if j not in (i, i - 1)])
        sign = (-1.0) ** (i - 1)

        def smooth(lam):
            return np.sqrt(lam) / np.sqrt(sign * np.prod(lam - others))

        val, err = quad(smooth, lo, hi, weight="alg", wvar=(-0.5, -0.5),
                        epsabs=1e-13, epsrel=1e-13)
        assert abs(ell2.alpha[i - 1] - 2 * val) <= 1e-9 * abs(2 * val)


def test_coordinate_function_endpoints_and_symmetry(ell3):
    a = ell3.spectrum.a
    for i in range(1, ell3.n + 1):
        al = ell3.alpha[i - 1]
        assert abs(ell3.periods.value(i, 0.0) - a[i]) < 1e-12
        assert abs(ell3.periods.value(i, al / 4) - a[i - 1]) < 1e-12
        for x in np.linspace(0.0, al, 23):
            assert abs(ell3.periods.value(i, -x) - ell3.periods.value(i, x)) < 1e-10
            assert abs(ell3.periods.value(i, al / 2 - x) - ell3.periods.value(i, x)) < 1e-10


def test_coordinate_ode_consistency(ell3, rng):
    # (f')^2 = 4 (-1)^i prod (f - a_j) / A(f)^2 and f'' matches differences
    a = np.array(ell3.spectrum.a)
    for i in range(1, ell3.n + 1):
        for _ in range(10):
            x = rng.uniform(0, ell3.alpha[i - 1])
            f = ell3.periods.value(i, x)
            fp = ell3.periods.velocity(i, x)
            rhs = 4.0 * (-1.0) ** i * np.prod(f - a) / f
            assert abs(fp**2 - rhs) < 1e-9
            h = 1e-5
            fd2 = (ell3.periods.value(i, x + h) - 2 * f + ell3.periods.value(i, x - h)) / h**2
            assert abs(ell3.periods.acceleration(i, x) - fd2) < 2e-4


def test_metric_n2_closed_form(ell2, rng):
    # g = ((f1 - f2), (f1 - f2)) for surfaces
    x = rng.uniform(0, ell2.alpha)
    lam = ell2.lam(x)
    g = metric_at(lam)
    np.testing.assert_allclose(g, [lam[0] - lam[1], lam[0] - lam[1]], rtol=1e-13)


def test_metric_positivity_random_sweep(ell2, ell3, rng):
    for man in (ell2, ell3):
        for _ in range(10_000 // 4):
            x = rng.uniform(0, man.alpha)
            assert np.all(metric_at(man.lam(x)) > 0)


def test_metric_matches_ambient_pullback(ell3, rng):
    for _ in range(5):
        x = (0.05 + 0.15 * rng.random(3)) * ell3.alpha
        g = ell3.metric(x)
        h = 1e-6
        J = np.empty((4, 3))
        for k in range(3):
            xp, xm = x.copy(), x.copy()
            xp[k] += h
            xm[k] -= h
            J[:, k] = (ell3.embed(xp) - ell3.embed(xm)) / (2 * h)
        G = J.T @ J
        assert np.max(np.abs(G - np.diag(g))) < 1e-6 * np.max(g)


def test_first_integrals_relations(ell3, rng):
    x = (0.1 + 0.1 * rng.random(3)) * ell3.alpha
    lam = ell3.lam(x)
    xi = rng.standard_normal(3)
    F = first_integrals(ell3.spectrum, lam, xi)
    B = first_integral_matrix(ell3.spectrum, lam)
    np.testing.assert_allclose(B @ F, xi**2, rtol=1e-10, atol=1e-12)
    # last entry is twice the energy, matching the explicit formula
    assert abs(F[-1] - energy(lam, xi)) < 1e-10 * max(1.0, abs(F[-1]))
    # homogeneity
    np.testing.assert_allclose(first_integrals(ell3.spectrum, lam, 2.0 * xi),
                               4.0 * F, rtol=1e-10)
    assert np.allclose(first_integrals(ell3.spectrum, lam, 0.0 * xi), 0.0)


def test_embed_round_trip(ell2, ell3, rng):
    for man in (ell2, ell3):
        worst = 0.0
        for _ in range(10_000 // 8):
            x = rng.uniform(0, man.alpha)
            u = man.embed(x)
            assert abs(np.sum(u**2 / np.array(man.spectrum.a)) - 1.0) < 1e-12
            lam = man.coords_from_ambient(u)
            worst = max(worst, np.max(np.abs(lam - man.lam(x))))
        assert worst < 1e-10


def test_elliptic_coords_identity_residual(ell2, rng):
    a = np.array(ell2.spectrum.a)
    x = rng.uniform(0, ell2.alpha)
    u = ell2.embed(x)
    lam = elliptic_coords(ell2.spectrum, u)
    for probe in (2.7, 1.3, 0.4):
        lhs = np.sum(u**2 / (a - probe)) - 1.0
        rhs = probe * np.prod(lam - probe) / np.prod(a - probe)
        assert abs(lhs - rhs) < 1e-9


def test_elliptic_coords_companion_oracle(ell2, rng):
    # DERIVED oracle: roots of the degree-n numerator polynomial by
    # companion matrix
    a = np.array(ell2.spectrum.a)
    poly = np.polynomial.polynomial
    for _ in range(20):
        x = rng.uniform(0, ell2.alpha)
        u = ell2.embed(x)
        lam = elliptic_coords(ell2.spectrum, u)
        # p(t) = sum_i u_i^2 prod_{j != i}(a_j - t) - prod_j (a_j - t)
        #      = t prod_k (lam_k - t); prod(a_j - t) = (-1)^deg polyfromroots
        pcoef = -np.array(poly.polyfromroots(a)) * (-1.0) ** len(a)
        for i in range(len(a)):
            q = np.array(poly.polyfromroots(np.delete(a, i))) * (-1.0) ** (len(a) - 1)
            pcoef[: len(q)] += u[i] ** 2 * q
        assert abs(pcoef[0]) < 1e-10  # root at t = 0 on the quadric
        roots = np.sort(np.roots(pcoef[1:][::-1]))[::-1]
        np.testing.assert_allclose(roots, lam, rtol=0, atol=1e-9)


def test_vertex_behavior(ell2):
    a = np.array(ell2.spectrum.a)
    u = np.array([np.sqrt(a[0]), 0.0, 0.0])
    lam = elliptic_coords(ell2.spectrum, u)
    np.testing.assert_allclose(lam, a[1:], atol=1e-9)
    # closed-form squares at lam_k = a_k place zeros in the right slots
    u2 = ellipsoid_squares(ell2.spectrum, a[1:])
    assert u2[0] > 0 and abs(u2[1]) < 1e-12 and abs(u2[2]) < 1e-12


def test_classify_point(ell3):
    a = ell3.spectrum.a
    n = ell3.n
    # x_k = 0 puts f_k at a_k
    x = np.array([0.0, 0.13 * ell3.alpha[1], 0.21 * ell3.alpha[2]])
    tag = ell3.classify(x)
    assert tag.in_hypersurface[1] and not tag.in_corner[1]
    # corner: f_2 = f_3 = a_2
    x = np.array([0.1 * ell3.alpha[0], 0.0, ell3.alpha[2] / 4])
    tag = ell3.classify(x)
    assert tag.in_corner[2] and tag.in_hypersurface[2]
    # generic interior point: all flags off
    x = np.array([0.1, 0.12, 0.11]) * ell3.alpha
    tag = ell3.classify(x)
    assert not any(tag.in_hypersurface) and not any(tag.in_corner)


def test_constant_generator_constant_curvature(sphere2, rng):
    # Gaussian curvature of the diagonal metric by finite differences;
    # all samples must agree for the constant generator
    man = sphere2

    def gcoef(x):
        return metric_at(man.lam(x))

    def curvature(x, h=1e-4):
        def E(p):
            return gcoef(p)[0]

        def G(p):
            return gcoef(p)[1]

        def d(fun, k, p):
            pp, pm = p.copy(), p.copy()
            pp[k] += h
            pm[k] -= h
            return (fun(pp) - fun(pm)) / (2 * h)

        def term1(p):
            return d(G, 0, p) / np.sqrt(E(p) * G(p))

        def term2(p):
            return d(E, 1, p) / np.sqrt(E(p) * G(p))

        return -(d(term1, 0, x) + d(term2, 1, x)) / (2.0 * np.sqrt(E(x) * G(x)))

    vals = []
    for _ in range(100):
        x = (0.05 + 0.15 * rng.random(2)) * man.alpha
        vals.append(curvature(x))
    vals = np.array(vals)
    spread = (vals.max() - vals.min()) / abs(np.mean(vals))
    assert spread < 1e-4
    assert np.mean(vals) > 0


def test_spec_file_round_trip(tmp_path, ell2):
    spec = ell2.spec_dict()
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(spec))
    man = Manifold.from_file(p)
    assert man.content_hash() == ell2.content_hash()
    np.testing.assert_allclose(man.alpha, ell2.alpha, rtol=1e-14)


def test_period_table_sidecar(tmp_path, ell2):
    path = tmp_path / f"{ell2.content_hash()}.npz"
    ell2.periods.save(path)
    data = np.load(path)
    np.testing.assert_allclose(data["alpha_0"][0], ell2.alpha[0], rtol=1e-15)


def test_submanifold_model_metric_restriction(ell3):
    # dropping a_k yields the hypersurface metric: compare band structure
    red = ell3.submanifold_model(2)
    assert red.n == 2
    assert red.spectrum.a == (4.0, 3.0, 1.0)
    # glued band of the reduced coordinate covers [a_3, a_1]
    assert red.periods.branches[1].lo == 1.0
    assert red.periods.branches[1].hi == 3.0
