"""Exact mixed trigonometric/exponential moments of a single variable.

For a random variable X with characteristic function Phi and moment
generating function M,

  E[X^a1 cos^a2(X) sin^a3(X)]
    = 1/(i^{a1+a3} 2^{a2+a3}) * sum_{k1=0}^{a2} sum_{k2=0}^{a3}
      C(a2,k1) C(a3,k2) (-1)^{a3-k2} Phi^(a1)(2(k1+k2) - a2 - a3)

  E[X^a1 exp^a2(X)] = M^(a1)(a2)

Binomial coefficients stay in exact integer arithmetic; the complex sum
must come out real up to a tiny residue, which is asserted and stripped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .distributions import Distribution
from .errors import ImaginaryResidueTooLarge, UnsupportedOrder

ORDER_CAP = 16
IMAG_TOL = 1e-9


@dataclass(frozen=True)
class MixedMomentQuery:
    alpha1: int  # power of X
    alpha2: int  # power of cos(X), or of exp(X) for flavor "Exp"
    alpha3: int  # power of sin(X); must be 0 for flavor "Exp"
    flavor: str  # "Trig" | "Exp"

    def __post_init__(self):
        if min(self.alpha1, self.alpha2, self.alpha3) < 0:
            raise ValueError("moment powers must be non-negative")
        if self.flavor not in ("Trig", "Exp"):
            raise ValueError(f"unknown flavor {self.flavor!r}")
        if self.flavor == "Exp" and self.alpha3 != 0:
            raise ValueError("exponential queries take alpha3 = 0")
        if self.alpha1 + self.alpha2 + self.alpha3 > ORDER_CAP:
            raise UnsupportedOrder(
                f"mixed moment order {self.alpha1 + self.alpha2 + self.alpha3} "
                f"exceeds cap {ORDER_CAP}"
            )


def mixed_trig_moment(d: Distribution, q: MixedMomentQuery) -> float:
    """E[X^a1 cos^a2(X) sin^a3(X)] via CF derivatives."""
    assert q.flavor == "Trig"
    a1, a2, a3 = q.alpha1, q.alpha2, q.alpha3
    total = 0j
    for k1 in range(a2 + 1):
        c1 = math.comb(a2, k1)
        for k2 in range(a3 + 1):
            sign = -1 if (a3 - k2) % 2 else 1
            t = float(2 * (k1 + k2) - a2 - a3)
            total += sign * c1 * math.comb(a3, k2) * d.cf_derivative(a1, t)
    total /= (1j) ** (a1 + a3) * 2 ** (a2 + a3)
    return _strip_imag(total)


def mixed_exp_moment(d: Distribution, q: MixedMomentQuery) -> float:
    """E[X^a1 exp(X)^a2] via MGF derivatives."""
    assert q.flavor == "Exp"
    return d.mgf_derivative(q.alpha1, float(q.alpha2))


# -- generalized helpers used by the engine -----------------------------------
#
# After expansion into complex exponentials, iteration-body expectations
# reduce to E[X^p e^{iAX}] (trig sites, real A) and E[X^p e^{BX}] (exp
# sites, real B):


def poly_cis_moment(d: Distribution, p: int, a: float) -> complex:
    """E[X^p e^{iaX}] = i^{-p} Phi^(p)(a)."""
    return d.cf_derivative(p, a) / (1j) ** p


def poly_exp_moment(d: Distribution, p: int, b: float) -> float:
    """E[X^p e^{bX}] = M^(p)(b)."""
    return d.mgf_derivative(p, b)


def _strip_imag(z: complex) -> float:
    if abs(z.imag) > IMAG_TOL * max(1.0, abs(z.real)):
        raise ImaginaryResidueTooLarge(
            f"imaginary residue {z.imag!r} on value {z.real!r}"
        )
    return float(z.real)
