"""Hyperelliptic band integrals with inverse-square-root endpoints.

All integrals here have the shape

    integral over [c, d] of  N(lam) dlam / sqrt(R(lam)),

where R(lam) = -prod_k (lam - b_k) * prod_k (lam - a_k) is positive on the
open oscillation band (lo, hi) = (a_i^+, a_{i-1}^-) and has simple zeros
at the band edges.  The substitution lam = mid - halfwidth*cos(theta)
removes both endpoint singularities exactly: with the two edge roots
cancelled analytically the transformed integrand is smooth, and
Gauss-Legendre with order doubling gives a convergence certificate.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import AxisSpectrum, GeneratorFunction

__all__ = [
    "PeriodIntegrand",
    "band_edges",
    "period_integral",
    "band_segment_integral",
    "flat_identity_residual",
    "flat_identity_terms",
    "prop_negativity",
    "prop_derivative_positivity",
    "sign_pattern_poly",
    "cond2_certify",
    "random_admissible_roots",
]


class QuadratureError(ValueError):
    pass


REL_TOL = 1e-10
MAX_NODES = 8192


@lru_cache(maxsize=64)
def _gl_nodes(m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    return x, w


def band_edges(a, b):
    """Oscillation bands [a_i^+, a_{i-1}^-], i = 1..n.

    a_i^+ = max(a_i, b_i) (with a_n^+ = a_n) and
    a_i^- = min(a_i, b_i) (with a_0^- = a_0).
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    n = len(a) - 1
    a_plus = np.empty(n + 1)   # index i = 0..n, a_i^+
    a_minus = np.empty(n + 1)  # index i = 0..n, a_i^-
    a_plus[n] = a[n]
    a_minus[0] = a[0]
    for i in range(1, n):
        a_plus[i] = max(a[i], b[i - 1])
        a_minus[i] = min(a[i], b[i - 1])
    a_plus[0] = a[0]
    a_minus[n] = a[n]
    return [(a_plus[i], a_minus[i - 1]) for i in range(1, n + 1)]


def _edge_reduced_roots(roots, lo, hi, width):
    """Remove one root matching each band edge; error on double edge roots."""
    roots = list(roots)
    out = []
    tol = 1e-12 * width
    lo_used = hi_used = False
    for r in roots:
        if not lo_used and abs(r - lo) <= tol:
            lo_used = True
            continue
        if not hi_used and abs(r - hi) <= tol:
            hi_used = True
            continue
        out.append(r)
    if not (lo_used and hi_used):
        raise QuadratureError(
            f"band edges ({lo}, {hi}) are not simple zeros of the radicand")
    rem = np.array(out)
    inside = (rem > lo + tol) & (rem < hi - tol)
    if np.any(inside):
        raise QuadratureError("interior zero of the radicand (invalid root configuration)")
    if np.any(np.abs(rem - lo) <= tol) or np.any(np.abs(rem - hi) <= tol):
        raise QuadratureError("degenerate (double) zero at a band edge")
    return rem


def band_segment_integral(num, roots, lo, hi, seg=None, rel_tol=REL_TOL):
    """integral of num(lam)/sqrt(R(lam)) over seg (default the whole band).

    R(lam) = -prod(lam - roots); the two roots at the band edges are
    cancelled analytically so the integrand in the angle variable is
    smooth.  num must be vectorized.
    """
    if hi <= lo:
        return 0.0
    c, d = seg if seg is not None else (lo, hi)
    c = min(max(c, lo), hi)
    d = min(max(d, lo), hi)
    if d <= c:
        return 0.0
    width = max(abs(r) for r in roots) - min(min(roots), 0.0) + (hi - lo)
    rem = _edge_reduced_roots(roots, lo, hi, width)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    # Edge-relative arccos arguments avoid the cancellation (mid - c)/half,
    # which chops an O(sqrt(eps/half)) sliver off narrow bands.
    th_c = np.arccos(np.clip(1.0 - (c - lo) / half, -1.0, 1.0))
    th_d = np.arccos(np.clip((hi - d) / half - 1.0, -1.0, 1.0))

    def integrand(th):
        lam = mid - half * np.cos(th)
        W = np.prod(lam[:, None] - rem[None, :], axis=1) if len(rem) else np.ones_like(lam)
        return num(lam) / np.sqrt(W)

    # Doubling with two consecutive agreements guards against an
    # accidental early match between successive orders.
    m = 24
    prev = None
    agreements = 0
    while True:
        xg, wg = _gl_nodes(m)
        th = 0.5 * (th_c + th_d) + 0.5 * (th_d - th_c) * xg
        val = 0.5 * (th_d - th_c) * np.dot(wg, integrand(th))
        if prev is not None and abs(val - prev) <= rel_tol * max(abs(val), 1e-300):
            agreements += 1
            if agreements >= 2:
                return val
        else:
            agreements = 0
        if m >= MAX_NODES:
            return val
        prev = val
        m *= 2


@dataclass
class PeriodIntegrand:
    """One band integral: numerator polynomial G, generator A, data (a, b, i)."""

    G: np.ndarray                  # polynomial coefficients, ascending
    A: GeneratorFunction | None    # weight; None means 1
    a: np.ndarray
    b: np.ndarray
    i: int                         # band index, 1..n

    def roots(self):
        return np.concatenate([np.asarray(self.b, float), np.asarray(self.a, float)])

    def band(self):
        return band_edges(self.a, self.b)[self.i - 1]


def period_integral(pi: PeriodIntegrand, rel_tol=REL_TOL) -> float:
    """Value of one band integral of G(lam) A(lam) / sqrt(R(lam))."""
    lo, hi = pi.band()
    G = np.asarray(pi.G, float)

    def num(lam):
        out = np.polynomial.polynomial.polyval(lam, G)
        if pi.A is not None:
            out = out * pi.A(lam)
        return out

    return band_segment_integral(num, pi.roots(), lo, hi, rel_tol=rel_tol)


def flat_identity_terms(G, a, b, rel_tol=REL_TOL):
    """Per-band signed terms (-1)^i * integral of G/sqrt(R); their sum is 0
    exactly for deg G <= n-2 (closed hyperelliptic contour argument)."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    n = len(a) - 1
    G = np.atleast_1d(np.asarray(G, float))
    if len(G) - 1 > n - 2:
        raise QuadratureError(f"degree {len(G)-1} numerator exceeds n-2 = {n-2}")
    terms = np.empty(n)
    for i in range(1, n + 1):
        val = period_integral(PeriodIntegrand(G, None, a, b, i), rel_tol=rel_tol)
        terms[i - 1] = (-1.0) ** i * val
    return terms


def flat_identity_residual(G, a, b, rel_tol=REL_TOL) -> float:
    """Sum of the signed band integrals of G/sqrt(R); 0 in exact arithmetic."""
    return float(np.sum(flat_identity_terms(G, a, b, rel_tol=rel_tol)))


def prop_negativity(A: GeneratorFunction, a, b, subset, rel_tol=REL_TOL) -> float:
    """Signed sum whose negativity the derivative-alternation condition forces.

    Value of  sum_i integral over band i of
    (-1)^(n-i+#I) A(lam) prod_{j in I}(lam-b_j) / sqrt(R);  contract: < 0
    when A satisfies the alternation condition and #I <= n-2.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    n = len(a) - 1
    subset = sorted(subset)
    if len(subset) > n - 2:
        raise QuadratureError(f"subset size {len(subset)} exceeds n-2 = {n-2}")
    sel = np.array([b[j - 1] for j in subset])  # subset holds 1-based indices
    roots = np.concatenate([b, a])
    bands = band_edges(a, b)
    total = 0.0
    for i in range(1, n + 1):
        sign = (-1.0) ** (n - i + len(subset))

        def num(lam, sign=sign):
            poly = np.prod(lam[:, None] - sel[None, :], axis=1) if len(sel) else np.ones_like(lam)
            return sign * A(lam) * poly

        lo, hi = bands[i - 1]
        total += band_segment_integral(num, roots, lo, hi, rel_tol=rel_tol)
    return float(total)


def _second_divided_difference(A: GeneratorFunction, lam, c, width):
    """A[lam, c, c] = (A(lam) - A(c) - (lam-c) A'(c)) / (lam-c)^2, stable near c."""
    lam = np.asarray(lam, float)
    d = lam - c
    out = np.empty_like(lam)
    near = np.abs(d) < 1e-5 * width
    far = ~near
    out[far] = (A(lam[far]) - A(np.full(1, c))[0] - d[far] * A.derivative(np.full(1, c), 1)[0]) / d[far] ** 2
    if np.any(near):
        c2 = A.derivative(np.full(1, c), 2)[0] / 2.0
        c3 = A.derivative(np.full(1, c), 3)[0] / 6.0
        out[near] = c2 + c3 * d[near]
    return out


def prop_derivative_positivity(A: GeneratorFunction, a, b, l: int, rel_tol=REL_TOL) -> float:
    """d/db_l of the signed band sum with numerator G_l A, in regularized form.

    Using the partial-fraction split A(lam)/(lam-b_l) = A(b_l)/(lam-b_l) + B
    and the vanishing of flat (degree <= n-2, weightless) sums, the
    derivative collapses to

        (1/2) sum_i integral (-1)^i B1(lam, b_l) prod_j (lam-b_j) / sqrt(R),

    with B1 the second divided difference A[lam, b_l, b_l].  Contract:
    value > 0 under the alternation condition.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    n = len(a) - 1
    if not 1 <= l <= n - 1:
        raise QuadratureError(f"index l = {l} out of range")
    bl = b[l - 1]
    width = a[0] - a[-1]
    roots = np.concatenate([b, a])
    bands = band_edges(a, b)
    total = 0.0
    for i in range(1, n + 1):
        sign = (-1.0) ** i

        def num(lam, sign=sign):
            poly = np.prod(lam[:, None] - b[None, :], axis=1)
            return sign * _second_divided_difference(A, lam, bl, width) * poly

        lo, hi = bands[i - 1]
        total += band_segment_integral(num, roots, lo, hi, rel_tol=rel_tol)
    return 0.5 * float(total)


def prop_derivative_fd(A: GeneratorFunction, a, b, l: int, step=1e-5) -> float:
    """Centered finite difference of the signed G_l A band sum in b_l."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    n = len(a) - 1

    def total(bv):
        bands = band_edges(a, bv)
        roots = np.concatenate([bv, a])
        s = 0.0
        others = np.delete(bv, l - 1)
        for i in range(1, n + 1):
            sign = (-1.0) ** i

            def num(lam, sign=sign):
                poly = (np.prod(lam[:, None] - others[None, :], axis=1)
                        if len(others) else np.ones_like(lam))
                return sign * A(lam) * poly

            lo, hi = bands[i - 1]
            s += band_segment_integral(num, roots, lo, hi)
        return s

    bp = b.copy()
    bp[l - 1] += step
    bm = b.copy()
    bm[l - 1] -= step
    return (total(bp) - total(bm)) / (2.0 * step)


def sign_pattern_poly(I1, b, n: int):
    """Degree <= n-2 polynomial positive (after the (-1)^i weighting) exactly
    on the bands indexed by I1.

    The factor (lam - b_k) appears whenever bands k and k+1 lie in the
    same group; the overall sign is fixed by whether band 1 is selected.
    Returns ascending coefficients.
    """
    I1 = set(I1)
    I2 = set(range(1, n + 1)) - I1
    if not I1 or not I2:
        raise QuadratureError("both the subset and its complement must be nonempty")
    b = np.asarray(b, float)
    K = [k for k in range(1, n) if (k in I1) == ((k + 1) in I1)]
    coeffs = np.array([1.0])
    for k in K:
        coeffs = np.polynomial.polynomial.polymul(coeffs, np.array([-b[k - 1], 1.0]))
    if 1 in I1:
        coeffs = -coeffs
    if len(coeffs) - 1 > n - 2:
        raise QuadratureError("sign-pattern polynomial degree exceeded n-2")
    return coeffs


def cond2_certify(A: GeneratorFunction, spectrum: AxisSpectrum, grid: int = 1000) -> dict:
    """Check the derivative alternation (-1)^(k-1) A^(k) > 0 on [a_n, a_0].

    Orders run to n-1, but at least to 2 (the surface case needs both).
    Report-only: returns per-order minima and an overall flag.
    """
    lo, hi = spectrum.a[-1], spectrum.a[0]
    lam = np.linspace(lo, hi, grid)
    kmax = max(spectrum.n - 1, 2)
    minima = {}
    for k in range(1, kmax + 1):
        vals = (-1.0) ** (k - 1) * A.derivative(lam, k)
        minima[k] = float(np.min(vals))
    ok = all(v > 0.0 for v in minima.values())
    return {"minima": minima, "passed": ok, "orders": kmax}


def random_admissible_roots(spectrum: AxisSpectrum, rng, margin: float = 0.05):
    """Strictly interlacing roots a_{i+1} < b_i < a_{i-1}, b_{i+1} < b_i,
    kept away from every a_k by a relative margin."""
    a = spectrum.a
    n = spectrum.n
    width = spectrum.width
    gap = margin * width / (2 * n)
    for _ in range(1000):
        b = np.empty(n - 1)
        ok = True
        prev = a[0] - gap  # upper cap for the next b (must decrease)
        for i in range(1, n):
            lo = a[i + 1] + gap
            hi = min(a[i - 1] - gap, prev - gap)
            if hi <= lo:
                ok = False
                break
            b[i - 1] = rng.uniform(lo, hi)
            prev = b[i - 1]
        if not ok:
            continue
        if np.all(np.abs(b - np.array(a[1:n])) > gap):
            return b
    raise QuadratureError("could not sample admissible roots")
