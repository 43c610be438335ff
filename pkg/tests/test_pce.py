"""Orthonormal bases, Fourier coefficients, and truncation-error regressions."""

import math

import numpy as np
import pytest

from loopmoments import pce, quadrature
from loopmoments.distributions import (
    CustomDensity,
    normal,
    trunc_gamma,
    trunc_normal,
    uniform,
)
from loopmoments.errors import UnboundedSupport

ALL_DISTS = [
    normal(0.0, 1.0),
    normal(2.0, 0.01),
    uniform(-1.0, 1.0),
    trunc_normal(4.0, 1.0, 3.0, 5.0),
    trunc_gamma(1.0, 3.0, 0.5, 1.0),
]


# --- orthonormality -----------------------------------------------------------


@pytest.mark.parametrize("d", ALL_DISTS, ids=lambda d: d.describe())
def test_gram_identity(d):
    basis = pce.orthonormal_basis(d, 6)
    nodes, weights = quadrature.weighted_nodes(d, 40)
    vals = basis.eval_all(nodes)
    gram = (vals * weights) @ vals.T
    assert np.max(np.abs(gram - np.eye(7))) < 1e-8


def test_uniform_degree_one_is_sqrt3_x():
    basis = pce.orthonormal_basis(uniform(-1.0, 1.0), 1)
    coeffs = basis.polys[1]
    assert coeffs[1] == pytest.approx(math.sqrt(3.0), abs=1e-10)
    assert coeffs[0] == pytest.approx(0.0, abs=1e-10)


def fy_density():
    return CustomDensity(lambda y: 0.75 * (1.0 - y * y), (-1.0, 1.0), "fy")


def test_custom_density_degree_two_basis():
    # p2(y) = 1.25*sqrt(14)*y^2 - 0.25*sqrt(14)
    basis = pce.orthonormal_basis(fy_density(), 2)
    p2 = basis.polys[2]
    assert p2[2] == pytest.approx(1.25 * math.sqrt(14.0), abs=1e-6)
    assert p2[0] == pytest.approx(-0.25 * math.sqrt(14.0), abs=1e-6)
    assert p2[1] == pytest.approx(0.0, abs=1e-8)


# --- two-variable expansion of sqrt(x^2 + y^2) ---------------------------------


@pytest.fixture(scope="module")
def worked_example():
    g = lambda x, y: np.sqrt(x * x + y * y)
    dists = [uniform(-1.0, 1.0), fy_density()]
    return pce.expand(g, dists, [2, 2])


def test_worked_example_coefficients(worked_example):
    est = worked_example
    idx = {tuple(row): i for i, row in enumerate(est.D)}
    assert est.coeffs[idx[(0, 0)]] == pytest.approx(0.677408, abs=1e-5)
    assert est.coeffs[idx[(0, 2)]] == pytest.approx(0.154109, abs=1e-5)
    assert est.coeffs[idx[(2, 0)]] == pytest.approx(0.216390, abs=1e-5)
    assert est.coeffs[idx[(2, 2)]] == pytest.approx(-0.040153, abs=1e-5)


def test_worked_example_assembled_polynomial(worked_example):
    a = worked_example.assembled
    assert a[(2, 2)] == pytest.approx(-0.629900, abs=1e-5)
    assert a[(2, 0)] == pytest.approx(0.851774, abs=1e-5)
    assert a[(0, 2)] == pytest.approx(0.930747, abs=1e-5)
    assert a[(0, 0)] == pytest.approx(0.249327, abs=1e-5)


# --- degree matrix / estimator structure ---------------------------------------


def test_degree_matrix_shape_and_order():
    D = pce.degree_matrix((2, 3))
    assert D.shape == (12, 2)
    assert tuple(D[0]) == (0, 0)
    L = pce.degree_matrix((3, 3, 3))
    assert len(L) == 4 ** 3


def test_parseval_gap_for_polynomial_g():
    # g is itself polynomial: expansion is exact, Parseval holds to 1e-6.
    g = lambda x: x ** 3 - 2.0 * x + 1.0
    d = normal(0.0, 1.0)
    est = pce.expand(g, [d], [5])
    second_moment = quadrature.expect(d, lambda x: g(x) ** 2)
    assert float(np.sum(est.coeffs ** 2)) == pytest.approx(second_moment, abs=1e-6)
    assert est.se < 1e-6


def test_se_monotone_in_degree():
    g = lambda x: 0.3 * np.cos(x) + 0.7 * np.sin(x)
    ses = [pce.expand(g, [normal(0.0, 1.0)], [d]).se for d in range(1, 7)]
    for lo, hi in zip(ses[1:], ses[:-1]):
        assert lo <= hi + 1e-12


# --- truncation-error regression table -----------------------------------------

XI = 0.3
ROW1 = (lambda x1, x2: XI * np.exp(-x1) + (XI - XI * XI / 2) * np.exp(x2 - x1),
        [normal(0.0, 1.0), normal(2.0, 0.01)])
ROW2 = (lambda x1, x2: 0.3 * np.exp(x1 - x2) + 0.6 * np.exp(-x2),
        [trunc_normal(4.0, 1.0, 3.0, 5.0), trunc_normal(2.0, 0.01, 0.0, 4.0)])
ROW3 = (lambda x1, x2: np.exp(x1 * x2),
        [trunc_normal(4.0, 1.0, 3.0, 5.0), trunc_gamma(1.0, 3.0, 0.5, 1.0)])
ROW4 = (lambda x1, x2, x3: 0.3 * np.exp(x1 - x2) + 0.6 * np.exp(x2 - x3)
        + 0.1 * np.exp(x3 - x1),
        [trunc_normal(4.0, 1.0, 3.0, 5.0), trunc_gamma(1.0, 3.0, 0.5, 1.0),
         uniform(4.0, 8.0)])
ROW5 = (lambda x1: 0.3 * np.cos(x1) + 0.7 * np.sin(x1), [normal(0.0, 1.0)])

ERROR_TABLE = {
    2: (ROW2, {1: 0.343870, 2: 0.057076, 3: 0.007112, 4: 0.000709, 5: 0.000059}),
    3: (ROW3, {1: 5.745048, 2: 1.035060, 3: 0.142816, 4: 0.016118, 5: 0.001543}),
    4: (ROW4, {1: 1.637981, 2: 0.303096, 3: 0.066869}),
    5: (ROW5, {1: 0.222627, 2: 0.181681, 3: 0.054450, 4: 0.039815, 5: 0.009115}),
}


def _sig3(x: float) -> float:
    if x == 0:
        return 0.0
    from math import floor, log10
    k = 2 - floor(log10(abs(x)))
    return round(x, k)


@pytest.mark.parametrize("row", sorted(ERROR_TABLE))
def test_error_table_rows(row):
    (g, dists), table = ERROR_TABLE[row]
    for degree, want in table.items():
        est = pce.expand(g, dists, [degree] * len(dists))
        assert _sig3(est.se) == pytest.approx(_sig3(want), rel=5e-3), (
            f"row {row} degree {degree}: got {est.se}, table says {want}")


def row1_closed_form_error(degree: int) -> float:
    """Exact se for row 1 via Gaussian exponential-moment identities.

    For x1 ~ N(0,1) the orthonormal basis is He_k(x1)/sqrt(k!) and
    E[e^{s x1} He_k(x1)] = e^{s^2/2} s^k; for x2 ~ N(2, 0.01) substitute
    x2 = 2 + 0.1 z.  With g = a e^{-x1} + b e^{x2 - x1}:
      c_{k1 k2} = (-1)^{k1}/sqrt(k1! k2!) * e^{1/2}
                  * (a [k2 = 0] + b e^{2.005} 0.1^{k2})
      E[g^2]    = a^2 e^2 + 2ab e^{2 + 2.005} + b^2 e^{2 + 4.02}.
    """
    a, b = XI, XI - XI * XI / 2
    e_g2 = (a * a * math.exp(2.0)
            + 2 * a * b * math.exp(2.0 + 2.005)
            + b * b * math.exp(2.0 + 4.02))
    total = 0.0
    for k1 in range(degree + 1):
        for k2 in range(degree + 1):
            c = (math.exp(0.5) / math.sqrt(math.factorial(k1) * math.factorial(k2))
                 * ((a if k2 == 0 else 0.0)
                    + b * math.exp(2.005) * 0.1 ** k2))
            if k1 % 2:
                c = -c
            total += c * c
    return math.sqrt(e_g2 - total)


def test_row1_matches_closed_form():
    g, dists = ROW1
    reference = {1: 3.076846, 2: 1.696078, 3: 0.825399}
    for degree in range(1, 6):
        want = row1_closed_form_error(degree)
        est = pce.expand(g, dists, [degree, degree])
        assert est.se == pytest.approx(want, rel=1e-5), f"degree {degree}"
        if degree in reference:
            assert _sig3(est.se) == pytest.approx(_sig3(reference[degree]), rel=5e-3)


@pytest.mark.parametrize("row", [2, 3, 4])
def test_theorem1_bound_dominates_measured_error(row):
    (g, dists), table = ERROR_TABLE[row]
    supports = [d.support for d in dists]
    bound = pce.error_bound(g, supports)
    assert math.isfinite(bound)
    for degree in table:
        est = pce.expand(g, dists, [degree] * len(dists))
        assert est.se ** 2 < bound, f"degree {degree}: {est.se**2} !< {bound}"


def test_error_bound_requires_finite_support():
    with pytest.raises(UnboundedSupport):
        pce.error_bound(lambda x: np.cos(x), [(0.0, math.inf)])


def test_conditional_estimator_interpolates():
    g = lambda x: np.cos(x)
    per_iter = tuple(
        pce.expand(g, [normal(0.0, 0.1 * (i + 1))], [3]) for i in range(3)
    )
    stitched = pce.conditional_estimator(per_iter)
    for n0, est in enumerate(per_iter, start=1):
        for x in (-0.7, 0.0, 1.3):
            want = est(x)
            got = sum(
                coef * x ** kx * n0 ** kc
                for (kx, kc), coef in stitched.items()
            )
            assert got == pytest.approx(float(want), abs=1e-9)
