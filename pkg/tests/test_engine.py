"""Moment closure, matrix powering, and the finite-horizon fallback."""

import numpy as np
import pytest

from loopmoments import dsl, engine, transform
from loopmoments.errors import ClosureExplosion

from conftest import BENCH_SUITE, bench_path

RANDOM_WALK = """
x = 2
while true:
    z = Normal(0.5, 1)
    x = x + z
end
"""


def test_random_walk_moments():
    p = dsl.parse_program(RANDOM_WALK)
    vals = engine.moments_at(p, ["x", "x^2"], 10)
    # x_n = 2 + sum of n iid N(0.5, 1)
    assert vals["x"] == pytest.approx(7.0, rel=1e-12)
    assert vals["x^2"] == pytest.approx(10.0 + 7.0 ** 2, rel=1e-12)


def test_n_zero_returns_initial_expectation():
    p = dsl.parse_program(RANDOM_WALK)
    vals = engine.moments_at(p, ["x", "x^2"], 0)
    assert vals["x"] == pytest.approx(2.0)
    assert vals["x^2"] == pytest.approx(4.0)


def _engine_ready(stem, target):
    p = dsl.parse_file(bench_path(stem))
    klass = dsl.classify(p).klass
    if klass == "ProbSolvableAfterExactRewrite":
        return transform.rewrite_all(p)
    if klass == "RequiresPce":
        return transform.pce_substitute_all(p, degree=4, mode="unconditional").program
    return p


@pytest.mark.parametrize("stem,target,n", [
    (s, t, n) for s, t, n, _ in BENCH_SUITE if s != "stochastic_decay"
])
def test_matrix_power_matches_naive_iteration(stem, target, n):
    p = _engine_ready(stem, target)
    rec = engine.moment_closure(p, [target])
    fast = engine.evaluate_moments(rec, n)
    slow = engine.naive_iterate(rec, n)
    np.testing.assert_allclose(fast, slow, rtol=1e-9, atol=1e-300)


def test_closure_explosion_on_unbounded_family():
    # x = x * l with l an accumulator needs ever-higher moments of l.
    p = dsl.parse_program("""
l = 0
x = 1
while true:
    z = Normal(0.1, 0.0625)
    l = l + z
    x = x * l
end
""")
    with pytest.raises(ClosureExplosion):
        engine.moment_closure(p, ["x"])


def test_unrolled_fallback_handles_non_closing_family():
    p = dsl.parse_program("""
l = 0
x = 1
while true:
    z = Normal(0.0, 1.0)
    l = l + z
    x = x * l
end
""")
    got = engine.moments_at_unrolled(p, ["x"], 4)["x"]
    # E[prod l_i] for a driftless Gaussian accumulator, brute quadrature check
    import itertools

    import numpy as np

    nodes, weights = np.polynomial.hermite_e.hermegauss(40)
    total = 0.0
    for idx in itertools.product(range(40), repeat=4):
        w = np.prod([weights[i] for i in idx]) / (2 * np.pi) ** 2
        ls = np.cumsum([nodes[i] for i in idx])
        total += w * np.prod(ls)
    assert got == pytest.approx(total, rel=1e-9)


def test_unrolled_fallback_matches_closure_when_both_apply():
    p = dsl.parse_program(RANDOM_WALK)
    for n in (0, 1, 7, 33):
        a = engine.moments_at(p, ["x", "x^2"], n)
        b = engine.moments_at_unrolled(p, ["x", "x^2"], n)
        for k in a:
            assert a[k] == pytest.approx(b[k], rel=1e-10)


def test_monomial_string_roundtrip():
    for s in ("x", "x^2", "x*y", "x^3*y^2"):
        m = engine.monomial_from_string(s)
        assert engine.monomial_from_string(engine.monomial_to_string(m)) == m


def test_linear_cyclic_dependency_accepted():
    # The c/s pair from the trig rewrite forms a linear cycle; closure works.
    src = """
c = 1
s = 0
while true:
    z = Normal(0, 0.04)
    c, s = c * cos(z) - s * sin(z), s * cos(z) + c * sin(z)
end
"""
    p = dsl.parse_program(src)
    vals = engine.moments_at(p, ["c", "s"], 25)
    # c_n + i s_n = prod e^{i z_k}: E = (E[cos z] , E[sin z]) rotation
    import math
    want_c = math.exp(-25 * 0.04 / 2)
    assert vals["c"] == pytest.approx(want_c, rel=1e-9)
    assert vals["s"] == pytest.approx(0.0, abs=1e-12)
