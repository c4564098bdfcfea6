"""Closed-form targets for the Monte Carlo checks.

All formulas take the finite-size aspect ratio c = p / n.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams


@dataclass(frozen=True)
class TheoryParams:
    l: float
    clt_mean: float
    clt_var: float
    correction: float
    c: float
    a: float
    b: float


def mp_edges(c, sigma):
    root = math.sqrt(c)
    s2 = sigma * sigma
    return s2 * (1.0 - root) ** 2, s2 * (1.0 + root) ** 2


def clt_params(p, n, mu, sigma):
    if p < 1 or n < 1:
        raise InvalidParams(f"p and n must be >= 1, got p={p}, n={n}")
    if sigma < 0:
        raise InvalidParams(f"sigma must be >= 0, got {sigma}")
    c = p / n
    s2 = sigma * sigma
    a, b = mp_edges(c, sigma)
    return TheoryParams(
        l=estimator_expectation(p, mu, sigma),
        clt_mean=p * mu * mu + (1.0 + c) * s2,
        clt_var=4.0 * c * mu * mu * s2,
        correction=p * s2 / n,
        c=c,
        a=a,
        b=b,
    )


def estimator_expectation(p, mu, sigma):
    """Mean of the one-step estimator, p mu^2 + sigma^2 (exact)."""
    return p * mu * mu + sigma * sigma


def estimator_variance(p, n, mu, sigma):
    """Leading-order variance of the one-step estimator, 4 mu^2 sigma^2 p / n."""
    if n < 1:
        raise InvalidParams(f"n must be >= 1, got {n}")
    return 4.0 * mu * mu * sigma * sigma * p / n


def mp_density(x, c, sigma):
    """Marchenko-Pastur density of the continuous part; 0 outside (a, b).

    Accepts scalars or arrays. The atom at zero for c > 1 is not included,
    see ``mp_point_mass``.
    """
    if c <= 0 or sigma <= 0:
        raise InvalidParams("mp_density needs c > 0 and sigma > 0")
    a, b = mp_edges(c, sigma)
    x = np.asarray(x, dtype=np.float64)
    inside = (x > a) & (x < b) & (x > 0)
    safe = np.where(inside, x, 1.0)
    dens = np.sqrt(np.clip((b - safe) * (safe - a), 0.0, None)) / (
        2.0 * math.pi * safe * c * sigma * sigma
    )
    out = np.where(inside, dens, 0.0)
    return float(out) if out.ndim == 0 else out


def mp_point_mass(c):
    if c <= 0:
        raise InvalidParams("c must be positive")
    return 1.0 - 1.0 / c if c > 1 else 0.0


def mp_moment(k, c=1.0, sigma=1.0):
    """k-th moment of the standard law (c = 1, sigma = 1): the Catalan number."""
    if k < 0:
        raise InvalidParams(f"moment order must be >= 0, got {k}")
    if c != 1.0 or sigma != 1.0:
        raise InvalidParams("mp_moment is only defined here for c = 1, sigma = 1")
    return float(math.comb(2 * k, k) // (k + 1))


def adaptive_simpson(f, lo, hi, tol=1e-12, max_depth=48, min_depth=5):
    """Adaptive Simpson quadrature with Richardson correction.

    The first ``min_depth`` levels always subdivide; without that, a periodic
    integrand can make the coarse and refined estimates agree by accident.
    """

    def simpson(a, fa, b, fb):
        m = 0.5 * (a + b)
        fm = f(m)
        return m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, fa, b, fb, m, fm, whole, eps, depth):
        lm, flm, left = simpson(a, fa, m, fm)
        rm, frm, right = simpson(m, fm, b, fb)
        delta = left + right - whole
        settled = max_depth - depth >= min_depth and abs(delta) <= 15.0 * eps
        if depth <= 0 or settled:
            return left + right + delta / 15.0
        return recurse(a, fa, m, fm, lm, flm, left, eps / 2.0, depth - 1) + recurse(
            m, fm, b, fb, rm, frm, right, eps / 2.0, depth - 1
        )

    if hi == lo:
        return 0.0
    flo, fhi = f(lo), f(hi)
    m, fm, whole = simpson(lo, flo, hi, fhi)
    return recurse(lo, flo, hi, fhi, m, fm, whole, tol, max_depth)


def _angle(x, a, b):
    """Inverse of x = a + (b - a) sin^2(theta / 2) on [a, b]."""
    frac = min(max((x - a) / (b - a), 0.0), 1.0)
    return 2.0 * math.asin(math.sqrt(frac))


def mp_integrate(g, c, sigma, lo=None, hi=None, tol=1e-12):
    """Integral of g(x) f_MP(x) over [lo, hi] (default: the whole support).

    Substituting x = a + (b - a) sin^2(theta / 2) turns sqrt((b - x)(x - a)) dx
    into a smooth multiple of sin^2(theta) d(theta); when a = 0 the 1/x factor
    cancels analytically, so the integrand stays bounded at both edges.
    """
    a, b = mp_edges(c, sigma)
    width = b - a
    scale = 1.0 / (2.0 * math.pi * c * sigma * sigma)
    t_lo = 0.0 if lo is None else _angle(lo, a, b)
    t_hi = math.pi if hi is None else _angle(hi, a, b)
    if t_hi <= t_lo:
        return 0.0

    def integrand(theta):
        s2 = math.sin(0.5 * theta) ** 2
        x = a + width * s2
        # sqrt((b - x)(x - a)) dx = width^2 s2 (1 - s2) dtheta
        if a == 0.0:
            ratio = width * (1.0 - s2)
        else:
            ratio = width * width * s2 * (1.0 - s2) / x
        return g(x) * scale * ratio

    return adaptive_simpson(integrand, t_lo, t_hi, tol=tol)
