"""Mixed trigonometric / exponential moments against closed forms."""

import cmath
import math

import numpy as np
import pytest

from loopmoments import quadrature
from loopmoments.distributions import normal, trunc_normal, uniform
from loopmoments.errors import ImaginaryResidueTooLarge, UnsupportedOrder
from loopmoments.mixed_moments import (
    MixedMomentQuery,
    mixed_exp_moment,
    mixed_trig_moment,
    poly_cis_moment,
    poly_exp_moment,
)


def test_spot_value_x_sin_cos():
    # E[X sin X cos X] = (1/2) E[X sin 2X] = e^{-2} for X ~ N(0,1)
    d = normal(0.0, 1.0)
    q = MixedMomentQuery(1, 1, 1, "Trig")
    assert mixed_trig_moment(d, q) == pytest.approx(math.exp(-2.0), abs=1e-12)


def test_spot_value_x_exp_2x():
    # E[X e^{2X}] = 2 e^2 for X ~ N(0,1)
    d = normal(0.0, 1.0)
    q = MixedMomentQuery(1, 2, 0, "Exp")
    assert mixed_exp_moment(d, q) == pytest.approx(2.0 * math.exp(2.0), abs=1e-12 * 2 * math.e ** 2)


@pytest.mark.parametrize("d", [normal(0.4, 0.7), uniform(-1.0, 2.0),
                               trunc_normal(1.0, 1.0, 0.0, 2.0)],
                         ids=lambda d: d.kind)
@pytest.mark.parametrize("a1,a2,a3", [(0, 1, 0), (0, 0, 1), (1, 1, 1),
                                      (2, 2, 0), (3, 0, 2), (2, 1, 2)])
def test_trig_moment_matches_quadrature(d, a1, a2, a3):
    q = MixedMomentQuery(a1, a2, a3, "Trig")
    got = mixed_trig_moment(d, q)
    want = quadrature.expect(
        d, lambda x: x ** a1 * np.cos(x) ** a2 * np.sin(x) ** a3)
    assert got == pytest.approx(want, rel=1e-9, abs=1e-11)


@pytest.mark.parametrize("a1,a2", [(0, 1), (1, 1), (2, 1), (3, 2)])
def test_exp_moment_matches_quadrature(a1, a2):
    d = normal(-0.2, 0.49)
    q = MixedMomentQuery(a1, a2, 0, "Exp")
    got = mixed_exp_moment(d, q)
    want = quadrature.expect(d, lambda x: x ** a1 * np.exp(a2 * x))
    assert got == pytest.approx(want, rel=1e-9)


def test_poly_cis_moment():
    d = normal(0.0, 1.0)
    # E[X e^{iaX}] for N(0,1): derivative of e^{-a^2/2} wrt (ia) = ia e^{-a^2/2}
    a = 0.8
    got = poly_cis_moment(d, 1, a)
    want = 1j * a * cmath.exp(-a * a / 2)
    assert abs(got - want) < 1e-12


def test_poly_exp_moment():
    d = normal(0.0, 1.0)
    b = 0.5
    # E[X e^{bX}] = b e^{b^2/2}
    assert poly_exp_moment(d, 1, b) == pytest.approx(b * math.exp(b * b / 2), rel=1e-12)


def test_query_validation():
    with pytest.raises(ValueError):
        MixedMomentQuery(1, 1, 1, "Exp")
    with pytest.raises(ValueError):
        MixedMomentQuery(-1, 0, 0, "Trig")
    with pytest.raises(UnsupportedOrder):
        MixedMomentQuery(1000, 0, 0, "Trig")
