"""Parametric distributions with raw moments and CF/MGF derivatives.

Six parametric families cover every benchmark: Normal, Uniform,
TruncNormal, Gamma, TruncGamma and Beta.  Normal takes its second
parameter as the *variance*.  Each family exposes

* ``raw_moment(k)``      -- E[X^k], closed form where available,
* ``cf_derivative(n,t)`` -- d^n/dt^n E[exp(itX)],
* ``mgf_derivative(n,t)``-- d^n/dt^n E[exp(tX)],
* ``pdf`` / ``cdf`` / ``quantile``.

CF/MGF derivatives use closed forms for Normal and Gamma; for the
bounded-support families they are computed by differentiating under the
integral (E[(iX)^n e^{itX}] resp. E[X^n e^{tX}]) with the shared
Gauss-Legendre scheme.  ``raw_moment_mp`` returns an ``mpmath`` value for
high-precision Gram-Schmidt in the PCE module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath as mp
import numpy as np
from scipy import stats

from . import quadrature
from .errors import MgfDiverges, UnsupportedOrder

MAX_ORDER = 16


@dataclass(frozen=True)
class Distribution:
    kind: str
    params: tuple

    # -- basic law -------------------------------------------------------

    @property
    def support(self):
        return _support(self)

    def pdf(self, x):
        return _frozen(self).pdf(x)

    def cdf(self, x):
        return _frozen(self).cdf(x)

    def quantile(self, p):
        return _frozen(self).ppf(p)

    def sample_from_uniform(self, u):
        """Inverse-CDF transform; u is an array of U(0,1) variates."""
        return _frozen(self).ppf(u)

    # -- moments ----------------------------------------------------------

    def raw_moment(self, k: int) -> float:
        if k < 0:
            raise ValueError("moment order must be non-negative")
        return _raw_moment(self, k)

    def raw_moment_mp(self, k: int):
        return _raw_moment_mp(self, k)

    def mean(self):
        return self.raw_moment(1)

    def variance(self):
        return self.raw_moment(2) - self.raw_moment(1) ** 2

    # -- transform derivatives ---------------------------------------------

    def cf_derivative(self, order: int, t: float) -> complex:
        """d^order/dt^order of Phi(t) = E[exp(itX)]."""
        if not 0 <= order <= MAX_ORDER:
            raise UnsupportedOrder(f"CF derivative order {order} (max {MAX_ORDER})")
        return _cf_derivative(self, order, float(t))

    def mgf_derivative(self, order: int, t: float) -> float:
        """d^order/dt^order of M(t) = E[exp(tX)]."""
        if not 0 <= order <= MAX_ORDER:
            raise UnsupportedOrder(f"MGF derivative order {order} (max {MAX_ORDER})")
        t = float(t)
        lo, hi = _mgf_domain(self)
        if not lo < t < hi:
            raise MgfDiverges(t, f"{self.describe()} has finite MGF only on ({lo}, {hi})")
        return _mgf_derivative(self, order, t)

    def describe(self) -> str:
        inner = ", ".join(_fmt(p) for p in self.params)
        return f"{self.kind}({inner})"


def _fmt(x):
    return repr(float(x))


# --- constructors ----------------------------------------------------------


def normal(mu, var):
    if var <= 0:
        raise ValueError("Normal variance must be positive")
    return Distribution("Normal", (float(mu), float(var)))


def uniform(a, b):
    if not b > a:
        raise ValueError("Uniform needs a < b")
    return Distribution("Uniform", (float(a), float(b)))


def trunc_normal(mu, var, a, b):
    if var <= 0 or not b > a:
        raise ValueError("TruncNormal needs positive variance and a < b")
    return Distribution("TruncNormal", (float(mu), float(var), float(a), float(b)))


def gamma(shape, scale):
    if shape <= 0 or scale <= 0:
        raise ValueError("Gamma needs positive shape and scale")
    return Distribution("Gamma", (float(shape), float(scale)))


def trunc_gamma(shape, scale, a, b):
    if shape <= 0 or scale <= 0 or not 0 <= a < b:
        raise ValueError("TruncGamma needs positive parameters and 0 <= a < b")
    return Distribution("TruncGamma", (float(shape), float(scale), float(a), float(b)))


def beta(alpha_, beta_):
    if alpha_ <= 0 or beta_ <= 0:
        raise ValueError("Beta needs positive shape parameters")
    return Distribution("Beta", (float(alpha_), float(beta_)))


CONSTRUCTORS = {
    "Normal": (normal, 2),
    "Uniform": (uniform, 2),
    "TruncNormal": (trunc_normal, 4),
    "Gamma": (gamma, 2),
    "TruncGamma": (trunc_gamma, 4),
    "Beta": (beta, 2),
}


# --- frozen scipy objects ---------------------------------------------------


@lru_cache(maxsize=None)
def _frozen(d: Distribution):
    k, p = d.kind, d.params
    if k == "Normal":
        return stats.norm(p[0], math.sqrt(p[1]))
    if k == "Uniform":
        return stats.uniform(p[0], p[1] - p[0])
    if k == "TruncNormal":
        mu, var, a, b = p
        s = math.sqrt(var)
        return stats.truncnorm((a - mu) / s, (b - mu) / s, loc=mu, scale=s)
    if k == "Gamma":
        return stats.gamma(p[0], scale=p[1])
    if k == "TruncGamma":
        shape, scale, a, b = p
        base = stats.gamma(shape, scale=scale)
        return _TruncatedFrozen(base, a, b)
    if k == "Beta":
        return stats.beta(p[0], p[1])
    raise ValueError(f"unknown distribution kind {k!r}")


class _TruncatedFrozen:
    """Truncation wrapper over a scipy frozen distribution."""

    def __init__(self, base, a, b):
        self.base = base
        self.a, self.b = a, b
        self.fa = base.cdf(a)
        self.fb = base.cdf(b)
        self.mass = self.fb - self.fa

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = self.base.pdf(x) / self.mass
        return np.where((x >= self.a) & (x <= self.b), out, 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        c = (self.base.cdf(np.clip(x, self.a, self.b)) - self.fa) / self.mass
        return np.clip(c, 0.0, 1.0)

    def ppf(self, p):
        return self.base.ppf(self.fa + np.asarray(p) * self.mass)


def _support(d: Distribution):
    k, p = d.kind, d.params
    if k == "Normal":
        return (-math.inf, math.inf)
    if k == "Uniform":
        return (p[0], p[1])
    if k == "TruncNormal":
        return (p[2], p[3])
    if k == "Gamma":
        return (0.0, math.inf)
    if k == "TruncGamma":
        return (p[2], p[3])
    if k == "Beta":
        return (0.0, 1.0)
    raise ValueError(k)


def _mgf_domain(d: Distribution):
    k, p = d.kind, d.params
    if k == "Gamma":
        return (-math.inf, 1.0 / p[1])
    if k == "TruncGamma" and not math.isfinite(p[3]):
        return (-math.inf, 1.0 / p[1])
    if k == "TruncNormal" and not (math.isfinite(p[2]) and math.isfinite(p[3])):
        return (-math.inf, math.inf)
    return (-math.inf, math.inf)


# --- raw moments -------------------------------------------------------------


@lru_cache(maxsize=None)
def _raw_moment(d: Distribution, k: int) -> float:
    kind, p = d.kind, d.params
    if kind == "Normal":
        mu, var = p
        s = math.sqrt(var)
        return sum(
            math.comb(k, j) * mu ** (k - j) * s**j * _std_normal_moment(j)
            for j in range(0, k + 1)
        )
    if kind == "Uniform":
        a, b = p
        return (b ** (k + 1) - a ** (k + 1)) / ((k + 1) * (b - a))
    if kind == "Gamma":
        shape, scale = p
        out = 1.0
        for r in range(k):
            out *= (shape + r) * scale
        return out
    if kind == "Beta":
        al, be = p
        out = 1.0
        for r in range(k):
            out *= (al + r) / (al + be + r)
        return out
    # truncated families: quadrature
    return quadrature.expect(d, lambda x: x ** float(k))


def _std_normal_moment(j: int) -> float:
    if j % 2 == 1:
        return 0.0
    return float(math.prod(range(1, j, 2))) if j else 1.0


@lru_cache(maxsize=None)
def _raw_moment_mp(d: Distribution, k: int):
    """High-precision raw moment (mpmath), for basis construction."""
    kind, p = d.kind, d.params
    with mp.workdps(60):
        if kind == "Normal":
            mu, var = mp.mpf(p[0]), mp.mpf(p[1])
            s = mp.sqrt(var)
            tot = mp.mpf(0)
            for j in range(0, k + 1, 1):
                if j % 2:
                    continue
                dd = mp.mpf(1)
                for r in range(1, j, 2):
                    dd *= r
                tot += mp.binomial(k, j) * mu ** (k - j) * s**j * dd
            return tot
        if kind == "Uniform":
            a, b = mp.mpf(p[0]), mp.mpf(p[1])
            return (b ** (k + 1) - a ** (k + 1)) / ((k + 1) * (b - a))
        if kind == "Gamma":
            shape, scale = mp.mpf(p[0]), mp.mpf(p[1])
            out = mp.mpf(1)
            for r in range(k):
                out *= (shape + r) * scale
            return out
        if kind == "Beta":
            al, be = mp.mpf(p[0]), mp.mpf(p[1])
            out = mp.mpf(1)
            for r in range(k):
                out *= (al + r) / (al + be + r)
            return out
        if kind == "TruncNormal":
            mu, var, a, b = (mp.mpf(v) for v in p)
            s = mp.sqrt(var)
            lo = a if mp.isfinite(a) else mu - 40 * s
            hi = b if mp.isfinite(b) else mu + 40 * s
            dens = lambda x: mp.npdf(x, mu, s)
            # split points hugging the peak keep mp.quad accurate when
            # the support is many sigma wide
            pts = sorted(
                {lo, hi}
                | {
                    mp.mpf(max(lo, min(hi, mu + c * s)))
                    for c in (-20, -8, -3, -1, 0, 1, 3, 8, 20)
                }
            )
            mass = mp.quad(dens, pts)
            val = mp.quad(lambda x: x**k * dens(x), pts)
            return val / mass
        if kind == "TruncGamma":
            shape, scale, a, b = (mp.mpf(v) for v in p)
            dens = lambda x: x ** (shape - 1) * mp.e ** (-x / scale)
            hi = b if mp.isfinite(b) else (shape + 40) * scale * 4
            mode = max(a, min(hi, (shape - 1) * scale))
            sd = mp.sqrt(shape) * scale
            pts = sorted(
                {a, hi}
                | {
                    mp.mpf(max(a, min(hi, mode + c * sd)))
                    for c in (-8, -3, -1, 0, 1, 3, 8, 20)
                }
            )
            mass = mp.quad(dens, pts)
            val = mp.quad(lambda x: x**k * dens(x), pts)
            return val / mass
    raise ValueError(kind)


# --- CF / MGF derivatives ------------------------------------------------------


def _exp_poly_derivs(linear, quad, order):
    """Coefficient arrays q_n with d^n/dt^n exp(linear*t + quad*t^2/2)
    = q_n(t) * exp(...), for n = 0..order."""
    polys = [np.array([1.0 + 0.0j])]
    for _ in range(order):
        q = polys[-1]
        dq = np.polynomial.polynomial.polyder(q) if len(q) > 1 else np.array([0.0j])
        mult = np.polynomial.polynomial.polymul(q, np.array([linear, quad]))
        n = max(len(dq), len(mult))
        out = np.zeros(n, dtype=complex)
        out[: len(dq)] += dq
        out[: len(mult)] += mult
        polys.append(out)
    return polys


@lru_cache(maxsize=None)
def _cf_derivative(d: Distribution, order: int, t: float) -> complex:
    kind, p = d.kind, d.params
    if kind == "Normal":
        mu, var = p
        q = _exp_poly_derivs(1j * mu, -var, order)[order]
        val = np.polynomial.polynomial.polyval(t, q)
        return complex(val * np.exp(1j * mu * t - 0.5 * var * t * t))
    if kind == "Gamma":
        shape, scale = p
        rising = 1.0
        for r in range(order):
            rising *= shape + r
        return complex((1j * scale) ** order * rising * (1 - 1j * scale * t) ** (-shape - order))
    # bounded support (or cheaply clipped): differentiate under the integral
    return quadrature.expect_complex(
        d, lambda x: (1j * x) ** order * np.exp(1j * t * x), tol=1e-12
    )


@lru_cache(maxsize=None)
def _mgf_derivative(d: Distribution, order: int, t: float) -> float:
    kind, p = d.kind, d.params
    if kind == "Normal":
        mu, var = p
        q = _exp_poly_derivs(complex(mu), complex(var), order)[order]
        val = np.polynomial.polynomial.polyval(t, q).real
        return float(val * math.exp(mu * t + 0.5 * var * t * t))
    if kind == "Gamma":
        shape, scale = p
        rising = 1.0
        for r in range(order):
            rising *= shape + r
        return float(scale**order * rising * (1 - scale * t) ** (-shape - order))
    return quadrature.expect(d, lambda x: x ** float(order) * np.exp(t * x), tol=1e-12)


# --- ad-hoc densities for PCE bases ---------------------------------------------


class CustomDensity:
    """A density given as a callable on a finite support.

    Quacks like Distribution for the purposes of PCE basis construction
    and quadrature (pdf / quantile / support / raw_moment)."""

    def __init__(self, pdf, support, name="custom"):
        self._pdf = pdf
        self.support = (float(support[0]), float(support[1]))
        self.kind = name
        self._moment_cache = {}

    def pdf(self, x):
        return self._pdf(np.asarray(x, dtype=float))

    def quantile(self, p):
        a, b = self.support
        # linear-in-p placement is enough for panel cuts on a finite support
        return a + (b - a) * np.asarray(p)

    def raw_moment(self, k: int) -> float:
        if k not in self._moment_cache:
            self._moment_cache[k] = quadrature.expect(self, lambda x: x ** float(k))
        return self._moment_cache[k]

    def raw_moment_mp(self, k: int):
        return mp.mpf(self.raw_moment(k))

    def describe(self):
        return self.kind
