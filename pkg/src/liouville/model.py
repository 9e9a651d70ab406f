"""Confocal-type integrable metrics on the n-sphere.

A manifold of this family is built from n+1 constants a_0 > ... > a_n > 0
(the axis spectrum) and a positive weight function A on [a_n, a_0] (the
generator).  Separated coordinates x_1, ..., x_n live on circles of
lengths alpha_1, ..., alpha_n; each carries a coordinate function f_i
with values lam_i = f_i(x_i) in the band [a_i, a_{i-1}], and the metric
is diagonal with coefficients formed from products of differences of the
lam_i.  For A(lam) = sqrt(lam) the manifold is isometric to the ellipsoid
sum_i u_i^2 / a_i = 1 and (lam_1, ..., lam_n) is the classical elliptic
coordinate system of the confocal quadric family.

Everything here is immutable after construction and safe to share
between processes.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.chebyshev import Chebyshev
from scipy.optimize import brentq

__all__ = [
    "AxisSpectrum",
    "GeneratorFunction",
    "PeriodTable",
    "BandPoint",
    "SubmanifoldTag",
    "Manifold",
    "compute_periods",
    "metric_at",
    "first_integrals",
    "ellipsoid_embed",
    "elliptic_coords",
    "classify_point",
]

# Absolute tolerance for "equals a_k / equals b_l" classifications,
# scaled by the spectrum width (a_0 - a_n).
DEGENERACY_TOL = 1e-9


class ModelError(ValueError):
    """Invalid manifold data (spectrum, generator, or coordinates)."""


@dataclass(frozen=True)
class AxisSpectrum:
    """The ordered axis constants a_0 > a_1 > ... > a_n > 0, n >= 2."""

    a: tuple

    def __post_init__(self):
        a = tuple(float(v) for v in self.a)
        object.__setattr__(self, "a", a)
        if len(a) < 3:
            raise ModelError("spectrum needs at least 3 constants (n >= 2)")
        if a[-1] <= 0.0:
            raise ModelError(f"smallest axis constant must be positive, got {a[-1]}")
        for i in range(len(a) - 1):
            if not a[i] > a[i + 1]:
                raise ModelError(
                    f"spectrum must be strictly decreasing: a[{i}]={a[i]} <= a[{i+1}]={a[i+1]}"
                )

    @property
    def n(self) -> int:
        return len(self.a) - 1

    @property
    def width(self) -> float:
        return self.a[0] - self.a[-1]

    def band(self, i: int) -> tuple:
        """Value band [a_i, a_{i-1}] of the i-th coordinate, i = 1..n."""
        return (self.a[i], self.a[i - 1])

    def drop(self, k: int) -> "AxisSpectrum":
        """Spectrum with a_k removed (hypersurface submanifold model)."""
        if not 0 < k < self.n:
            # dropping a_0 or a_n is also legitimate (boundary hypersurfaces)
            if k not in (0, self.n):
                raise ModelError(f"index {k} out of range")
        return AxisSpectrum(tuple(v for j, v in enumerate(self.a) if j != k))


class GeneratorFunction:
    """Positive weight A(lam) on [a_n, a_0] with derivatives.

    Variants: ``sqrt`` (A = sqrt(lam)), ``const`` (A = c), ``poly``
    (coefficients in ascending order), ``table`` (smooth Chebyshev fit of
    sampled values).  Derivatives are exact for the first three variants
    and spectral for the table variant.
    """

    def __init__(self, kind: str, coeffs=None, table=None, domain=None):
        self.kind = kind
        self.coeffs = None
        self._cheb = None
        if kind == "sqrt":
            pass
        elif kind == "const":
            c = 1.0 if coeffs is None else float(np.atleast_1d(coeffs)[0])
            self.coeffs = (c,)
        elif kind == "poly":
            if coeffs is None:
                raise ModelError("poly generator needs coefficients")
            self.coeffs = tuple(float(c) for c in coeffs)
        elif kind == "table":
            if table is None:
                raise ModelError("table generator needs (lam, values) samples")
            lam, val = np.asarray(table[0], float), np.asarray(table[1], float)
            if domain is None:
                domain = (lam.min(), lam.max())
            deg = min(len(lam) - 1, 64)
            self._cheb = Chebyshev.fit(lam, val, deg, domain=list(domain))
        else:
            raise ModelError(f"unknown generator kind {kind!r}")

    @classmethod
    def sqrt(cls) -> "GeneratorFunction":
        return cls("sqrt")

    @classmethod
    def const(cls, c: float = 1.0) -> "GeneratorFunction":
        return cls("const", coeffs=(c,))

    @classmethod
    def poly(cls, coeffs) -> "GeneratorFunction":
        return cls("poly", coeffs=coeffs)

    def __call__(self, lam):
        lam = np.asarray(lam, float)
        if self.kind == "sqrt":
            return np.sqrt(lam)
        if self.kind == "const":
            return np.full_like(lam, self.coeffs[0])
        if self.kind == "poly":
            return np.polynomial.polynomial.polyval(lam, self.coeffs)
        return self._cheb(lam)

    def derivative(self, lam, k: int = 1):
        """k-th derivative A^(k)(lam); k = 0 returns A itself."""
        lam = np.asarray(lam, float)
        if k == 0:
            return self(lam)
        if self.kind == "sqrt":
            # d^k/dlam^k lam^(1/2) = (1/2)(1/2-1)...(1/2-k+1) lam^(1/2-k)
            c = 1.0
            for j in range(k):
                c *= 0.5 - j
            return c * lam ** (0.5 - k)
        if self.kind == "const":
            return np.zeros_like(lam)
        if self.kind == "poly":
            dc = np.polynomial.polynomial.polyder(self.coeffs, k)
            return np.polynomial.polynomial.polyval(lam, dc)
        return self._cheb.deriv(k)(lam)

    def check_positive(self, lo: float, hi: float, samples: int = 512) -> None:
        grid = np.linspace(lo, hi, samples)
        vals = self(grid)
        if np.any(vals <= 0.0):
            bad = grid[np.argmin(vals)]
            raise ModelError(f"generator not positive on [{lo}, {hi}] (A({bad}) = {vals.min()})")

    def spec_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.coeffs is not None:
            d["coeffs"] = list(self.coeffs)
        if self._cheb is not None:
            d["coeffs"] = [float(c) for c in self._cheb.coef]
            d["domain"] = [float(v) for v in self._cheb.domain]
        return d

    @classmethod
    def from_spec(cls, d) -> "GeneratorFunction":
        if isinstance(d, str):
            d = {"kind": d}
        kind = d["kind"]
        if kind == "table":
            return cls("table", table=(d["lambda"], d["values"]))
        return cls(kind, coeffs=d.get("coeffs"))


def _cheb_interpolate(fn, domain, tol=1e-13, max_deg=2048):
    """Adaptive Chebyshev interpolant: degree doubles until the tail decays."""
    deg = 32
    while True:
        ch = Chebyshev.interpolate(fn, deg, domain=list(domain))
        scale = np.max(np.abs(ch.coef))
        tail = np.max(np.abs(ch.coef[-4:]))
        if tail <= tol * max(scale, 1e-300) or deg >= max_deg:
            return ch
        deg *= 2


class _QuarterBranch:
    """Monotone quarter branch of one coordinate function.

    On the quarter period [0, alpha_i/4] the value runs from a_i up to
    a_{i-1}.  Internally the value is parameterized as
    lam(theta) = a_i + (a_{i-1}-a_i) sin^2(theta), theta in [0, pi/2],
    which removes the square-root turning singularities at both ends.
    """

    def __init__(self, spectrum: AxisSpectrum, generator: GeneratorFunction, i: int):
        self.i = i
        a = np.array(spectrum.a)
        self.lo, self.hi = spectrum.band(i)
        self.h = self.hi - self.lo
        others = np.array([a[j] for j in range(len(a)) if j not in (i, i - 1)])
        sign = -1.0 if (i - 1) % 2 else 1.0  # (-1)^(i-1)

        def reduced_poly(lam):
            # (-1)^(i-1) prod_{j != i-1, i} (lam - a_j)  > 0 on the band
            lam = np.asarray(lam, float)
            return sign * np.prod(lam[..., None] - others, axis=-1)

        self._reduced_poly = reduced_poly
        self._A = generator

        def dx_dtheta(theta):
            lam = self.lo + self.h * np.sin(theta) ** 2
            return generator(lam) / np.sqrt(reduced_poly(lam))

        self._speed = _cheb_interpolate(dx_dtheta, (0.0, math.pi / 2))
        self._x_of_theta = self._speed.integ(lbnd=0.0)
        self.quarter = float(self._x_of_theta(math.pi / 2))
        self.alpha = 4.0 * self.quarter

        # Inverse map theta(x), spectral interpolant built by Newton/brentq.
        def theta_of_x_nodes(xs):
            out = np.empty_like(xs)
            for k, xv in enumerate(np.atleast_1d(xs)):
                xv = min(max(xv, 0.0), self.quarter)
                th = brentq(lambda t: self._x_of_theta(t) - xv, 0.0, math.pi / 2,
                            xtol=1e-15, rtol=8.9e-16)
                out[k] = th
            return out

        self._theta_of_x = _cheb_interpolate(theta_of_x_nodes, (0.0, self.quarter),
                                             tol=1e-13, max_deg=1024)

    def value_from_quarter(self, s):
        """lam at quarter position s in [0, alpha/4]."""
        th = self._theta_of_x(s)
        return self.lo + self.h * np.sin(th) ** 2

    def theta(self, s):
        return self._theta_of_x(s)

    def position_of_value(self, lam):
        """Quarter position s with value lam (inverse of value_from_quarter)."""
        lam = np.clip(lam, self.lo, self.hi)
        th = np.arcsin(np.sqrt((lam - self.lo) / self.h))
        return self._x_of_theta(th)


class PeriodTable:
    """Circle lengths alpha_i and coordinate functions f_i for one manifold.

    f_i is even, has period alpha_i/2 ... alpha_i in the sense
    f_i(-x) = f_i(x) = f_i(alpha_i/2 - x), increases from a_i to a_{i-1}
    on [0, alpha_i/4], and solves
    (df_i/dx)^2 = 4 (-1)^i prod_j (f_i - a_j) / A(f_i)^2.
    """

    def __init__(self, spectrum: AxisSpectrum, generator: GeneratorFunction):
        self.spectrum = spectrum
        self.generator = generator
        generator.check_positive(spectrum.a[-1], spectrum.a[0])
        self.branches = [_QuarterBranch(spectrum, generator, i)
                         for i in range(1, spectrum.n + 1)]
        self.alpha = np.array([b.alpha for b in self.branches])

    def _fold(self, i: int, x):
        """Map x to (quarter position s in [0, alpha/4], direction +-1)."""
        br = self.branches[i - 1]
        u = np.mod(x, br.alpha)
        q = np.minimum(np.floor(u / br.quarter).astype(int), 3)
        s = u - q * br.quarter
        rising = (q % 2 == 0)
        s_q = np.where(rising, s, br.quarter - s)
        direction = np.where(rising, 1.0, -1.0)
        return s_q, direction

    def value(self, i: int, x):
        """f_i(x)."""
        s, _ = self._fold(i, x)
        return self.branches[i - 1].value_from_quarter(s)

    def velocity(self, i: int, x):
        """f_i'(x), sign included (closed form from the defining ODE)."""
        br = self.branches[i - 1]
        s, direction = self._fold(i, x)
        th = br.theta(s)
        lam = br.lo + br.h * np.sin(th) ** 2
        mag = br.h * np.sin(2.0 * th) * np.sqrt(br._reduced_poly(lam)) / self.generator(lam)
        return direction * mag

    def acceleration(self, i: int, x):
        """f_i''(x) = (1/2) d/df [ 4 (-1)^i prod(f-a_j) / A(f)^2 ]."""
        lam = self.value(i, x)
        return 0.5 * self._ode_rhs_derivative(i, lam)

    def _ode_rhs_derivative(self, i: int, lam):
        a = np.array(self.spectrum.a)
        lam = np.asarray(lam, float)
        diffs = lam[..., None] - a
        prod = np.prod(diffs, axis=-1)
        dprod = np.zeros_like(lam)
        for m in range(len(a)):
            dprod = dprod + np.prod(np.delete(diffs, m, axis=-1), axis=-1)
        A = self.generator(lam)
        Ap = self.generator.derivative(lam, 1)
        sign = -1.0 if i % 2 else 1.0
        return 4.0 * sign * (dprod - 2.0 * prod * Ap / A) / A**2

    def values(self, x):
        """All f_i(x_i) for a coordinate vector x."""
        x = np.asarray(x, float)
        return np.array([self.value(i + 1, x[i]) for i in range(len(x))])

    def velocities(self, x):
        x = np.asarray(x, float)
        return np.array([self.velocity(i + 1, x[i]) for i in range(len(x))])

    def accelerations(self, x):
        x = np.asarray(x, float)
        return np.array([self.acceleration(i + 1, x[i]) for i in range(len(x))])

    def position_of_value(self, i: int, lam, quarter: int = 0):
        """x with f_i(x) = lam, placed on the requested monotone quarter."""
        br = self.branches[i - 1]
        s = br.position_of_value(lam)
        if quarter == 0:
            return s
        if quarter == 1:
            return 2.0 * br.quarter - s
        if quarter == 2:
            return 2.0 * br.quarter + s
        return 4.0 * br.quarter - s

    def save(self, path):
        data = {}
        for k, br in enumerate(self.branches):
            data[f"speed_{k}"] = br._speed.coef
            data[f"theta_{k}"] = br._theta_of_x.coef
            data[f"alpha_{k}"] = np.array([br.alpha])
        np.savez(path, **data)


# ---------------------------------------------------------------------------
# point-level operations


def metric_at(lam):
    """Diagonal metric coefficients g_i = (-1)^(n-i) prod_{l!=i} (lam_l - lam_i).

    lam is the vector of coordinate values at the point.  Positive away
    from the degenerate set where consecutive values collide.
    """
    lam = np.asarray(lam, float)
    n = len(lam)
    diffs = lam[:, None] - lam[None, :]
    np.fill_diagonal(diffs, 1.0)
    col = np.prod(diffs, axis=0)  # prod_{l != i} (lam_l - lam_i)
    signs = np.array([(-1.0) ** (n - (i + 1)) for i in range(n)])
    return signs * col


def first_integral_matrix(spectrum: AxisSpectrum, lam):
    """Matrix B with B[i,j] multiplying the j-th invariant in B F = xi^2."""
    a = np.array(spectrum.a)
    n = spectrum.n
    inner = a[1:n]  # a_1 ... a_{n-1}
    lam = np.asarray(lam, float)
    B = np.empty((n, n))
    for i in range(n):
        sign = (-1.0) ** (i + 1)
        d = lam[i] - inner
        for j in range(n - 1):
            B[i, j] = sign * np.prod(np.delete(d, j))
        B[i, n - 1] = -sign * np.prod(d)
    return B


def first_integrals(spectrum: AxisSpectrum, lam, xi):
    """Invariant values (F_1, ..., F_{n-1}, 2E) at a covector.

    Solves the linear relations sum_j B_ij(lam_i) F_j = xi_i^2; requires
    the point off the degenerate set (B invertible there).
    """
    B = first_integral_matrix(spectrum, lam)
    xi = np.asarray(xi, float)
    try:
        F = np.linalg.solve(B, xi**2)
    except np.linalg.LinAlgError as exc:
        raise ModelError("invariant system singular (point on degenerate set)") from exc
    return F


def energy(lam, xi):
    """Energy 2E = sum_i (-1)^(n-i) xi_i^2 / prod_{l != i}(lam_l - lam_i)."""
    g = metric_at(lam)
    xi = np.asarray(xi, float)
    return float(np.sum(xi**2 / g))


def ellipsoid_squares(spectrum: AxisSpectrum, lam):
    """Squared ambient coordinates u_i^2 from coordinate values lam."""
    a = np.array(spectrum.a)
    lam = np.asarray(lam, float)
    u2 = np.empty(len(a))
    for i in range(len(a)):
        num = a[i] * np.prod(lam - a[i])
        den = np.prod(np.delete(a, i) - a[i])
        u2[i] = num / den
    return u2


def elliptic_coords(spectrum: AxisSpectrum, u, tol: float = 1e-10):
    """Coordinate values lam_1 >= ... >= lam_n of an ambient point.

    The lam_k are the roots (one per band [a_k, a_{k-1}]) of
    p(lam) = sum_i u_i^2 prod_{j != i}(a_j - lam) - prod_j (a_j - lam),
    whose remaining root is lam = 0.  Roots are bracketed per band and
    polished with Brent's method; u must satisfy sum u_i^2/a_i = 1.
    """
    a = np.array(spectrum.a)
    u = np.asarray(u, float)
    n = spectrum.n
    if abs(np.sum(u**2 / a) - 1.0) > tol * 100:
        raise ModelError("point not on the unit confocal quadric")

    u2 = u**2

    def p(lam):
        d = a - lam
        total = -np.prod(d)
        for i in range(n + 1):
            total += u2[i] * np.prod(np.delete(d, i))
        return total

    width = spectrum.width
    lam_out = np.full(n, np.nan)
    unresolved = []
    for k in range(1, n + 1):
        lo, hi = a[k], a[k - 1]
        eps = 1e-13 * width
        plo, phi = p(lo + eps), p(hi - eps)
        if np.sign(plo) == np.sign(phi) or plo == 0.0 or phi == 0.0:
            # root pinned at an edge (some u vanishes); resolved globally below
            unresolved.append(k)
            continue
        lam_out[k - 1] = brentq(p, lo + eps, hi - eps, xtol=1e-14, rtol=8.9e-16)
    if unresolved:
        # assemble the polynomial p(t)/t and assign its sorted roots per band
        poly = np.polynomial.polynomial
        pcoef = -np.array(poly.polyfromroots(a)) * (-1.0) ** (n + 1)
        for i in range(n + 1):
            q = np.array(poly.polyfromroots(np.delete(a, i))) * (-1.0) ** n
            pcoef[: len(q)] += u2[i] * q
        roots = np.sort(np.roots(pcoef[1:][::-1]).real)[::-1]
        for j, k in enumerate(sorted(unresolved)):
            pool = [r for r in roots if a[k] - 1e-9 * width <= r <= a[k - 1] + 1e-9 * width]
            taken = set(np.round(lam_out[np.isfinite(lam_out)], 12))
            pool = [r for r in pool if np.round(r, 12) not in taken] or pool
            lam_out[k - 1] = np.clip(sorted(pool)[0] if pool else a[k], a[k], a[k - 1])
    return lam_out


@dataclass(frozen=True)
class SubmanifoldTag:
    """Membership flags for the coordinate hypersurfaces and their corners.

    in_hypersurface[k] is true when the point lies on N_k (some coordinate
    value equals a_k); in_corner[k] when both adjacent values do (J_k).
    """

    in_hypersurface: tuple
    in_corner: tuple

    def __post_init__(self):
        for k in range(1, len(self.in_corner) - 1):
            if self.in_corner[k] and not self.in_hypersurface[k]:
                raise ModelError("corner membership requires hypersurface membership")


def classify_point(spectrum: AxisSpectrum, lam, tol: float = DEGENERACY_TOL):
    """Tag a point by proximity of its coordinate values to the spectrum."""
    a = spectrum.a
    n = spectrum.n
    band = tol * spectrum.width
    lam = np.asarray(lam, float)
    in_N = [False] * (n + 1)
    in_J = [False] * (n + 1)
    for k in range(n + 1):
        hit_k = k >= 1 and abs(lam[k - 1] - a[k]) < band      # lam_k = a_k
        hit_k1 = k + 1 <= n and abs(lam[k] - a[k]) < band     # lam_{k+1} = a_k
        in_N[k] = bool(hit_k or hit_k1)
        if 1 <= k <= n - 1:
            in_J[k] = bool(hit_k and hit_k1)
    return SubmanifoldTag(tuple(in_N), tuple(in_J))


# ---------------------------------------------------------------------------
# manifold facade


class Manifold:
    """Axis spectrum + generator + period tables, with coordinate services."""

    def __init__(self, spectrum: AxisSpectrum, generator: GeneratorFunction,
                 tol: float = DEGENERACY_TOL):
        self.spectrum = spectrum
        self.generator = generator
        self.tol = tol
        self.periods = PeriodTable(spectrum, generator)
        self._sub_cache = {}

    # -- construction -------------------------------------------------------

    @classmethod
    def from_spec(cls, spec: dict) -> "Manifold":
        a = spec["a"]
        n = spec.get("n")
        if n is not None and n != len(a) - 1:
            raise ModelError(f"n = {n} inconsistent with len(a) = {len(a)}")
        gen = GeneratorFunction.from_spec(spec.get("A", {"kind": "sqrt"}))
        tol = float(spec.get("tolerances", {}).get("degeneracy", DEGENERACY_TOL))
        return cls(AxisSpectrum(tuple(a)), gen, tol=tol)

    @classmethod
    def from_file(cls, path) -> "Manifold":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_spec(json.load(f))

    @classmethod
    def ellipsoid(cls, axes) -> "Manifold":
        return cls(AxisSpectrum(tuple(axes)), GeneratorFunction.sqrt())

    def spec_dict(self) -> dict:
        return {
            "n": self.n,
            "a": list(self.spectrum.a),
            "A": self.generator.spec_dict(),
            "tolerances": {"degeneracy": self.tol},
        }

    def content_hash(self) -> str:
        blob = json.dumps(self.spec_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    # -- basic queries -------------------------------------------------------

    @property
    def n(self) -> int:
        return self.spectrum.n

    @property
    def alpha(self):
        return self.periods.alpha

    @property
    def is_ellipsoid(self) -> bool:
        return self.generator.kind == "sqrt"

    def lam(self, x):
        return self.periods.values(x)

    def point(self, x) -> "BandPoint":
        return BandPoint(self, np.asarray(x, float))

    def metric(self, x):
        return metric_at(self.lam(x))

    def classify(self, x) -> SubmanifoldTag:
        return classify_point(self.spectrum, self.lam(x), self.tol)

    def degeneracy_band(self) -> float:
        return self.tol * self.spectrum.width

    # -- ambient embedding (sqrt generator only) -----------------------------

    def embed_signs(self, x):
        """Ambient coordinate signs from the covering-circle parities.

        The chart convention makes every u_i positive on the open cell
        0 < x_k < alpha_k/4; u_i flips sign across each of its zero
        hypersurfaces (x_i through multiples of alpha_i/2, and x_{i+1}
        through alpha_{i+1}/4 plus multiples of alpha_{i+1}/2).
        """
        x = np.asarray(x, float)
        n = self.n
        signs = np.ones(n + 1)
        for i in range(n + 1):
            s = 1.0
            if i >= 1:
                t = np.mod(x[i - 1] / self.alpha[i - 1], 1.0)
                if t >= 0.5:
                    s = -s
            if i <= n - 1:
                t = np.mod(x[i] / self.alpha[i], 1.0)
                if 0.25 <= t < 0.75:
                    s = -s
            signs[i] = s
        return signs

    def embed(self, x):
        """Ambient point u on the ellipsoid; requires the sqrt generator."""
        if not self.is_ellipsoid:
            raise ModelError("ambient embedding defined for the sqrt generator only")
        lam = self.lam(x)
        u2 = ellipsoid_squares(self.spectrum, lam)
        floor = -1e-12 * self.spectrum.a[0]
        if np.any(u2 < floor):
            raise ModelError(f"negative ambient square {u2.min()} (coordinate inconsistency)")
        return self.embed_signs(x) * np.sqrt(np.clip(u2, 0.0, None))

    def coords_from_ambient(self, u):
        """Coordinate values of an ambient point (inverse of embed up to signs)."""
        return elliptic_coords(self.spectrum, u)

    def x_from_lam(self, lam, quarters=None):
        """Angles x with f_i(x_i) = lam_i, one representative per quarter choice."""
        lam = np.asarray(lam, float)
        if quarters is None:
            quarters = [0] * self.n
        return np.array([self.periods.position_of_value(i + 1, lam[i], quarters[i])
                         for i in range(self.n)])

    # -- hypersurface submanifold model --------------------------------------

    def submanifold_model(self, k: int) -> "Manifold":
        """The hypersurface {some coordinate value = a_k} as a manifold of
        dimension n-1, built from the spectrum with a_k removed and the
        same generator."""
        if k not in self._sub_cache:
            self._sub_cache[k] = Manifold(self.spectrum.drop(k), self.generator, tol=self.tol)
        return self._sub_cache[k]


@dataclass
class BandPoint:
    """A point in separated coordinates with cached coordinate values."""

    manifold: Manifold
    x: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, float)
        if len(self.x) != self.manifold.n:
            raise ModelError("coordinate vector has wrong length")
        self._lam = None

    @property
    def lam(self):
        if self._lam is None:
            self._lam = self.manifold.lam(self.x)
        return self._lam

    @property
    def tag(self) -> SubmanifoldTag:
        return classify_point(self.manifold.spectrum, self.lam, self.manifold.tol)

    def metric(self):
        return metric_at(self.lam)

    def embed(self):
        return self.manifold.embed(self.x)

    def normalized(self) -> "BandPoint":
        """Representative with every angle reduced modulo its circle."""
        return BandPoint(self.manifold, np.mod(self.x, self.manifold.alpha))


def compute_periods(spectrum: AxisSpectrum, generator: GeneratorFunction) -> PeriodTable:
    """Build the period table (circle lengths + coordinate interpolants)."""
    return PeriodTable(spectrum, generator)
