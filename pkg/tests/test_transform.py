"""Exact exp/trig rewrites and PCE substitution."""

import math

import numpy as np
import pytest

from loopmoments import dsl, engine, mixed_moments, simulate, transform
from loopmoments.distributions import normal
from loopmoments.errors import ConditionsViolated
from loopmoments.mixed_moments import MixedMomentQuery

from conftest import BENCH_SUITE, bench_path

EXACT_STEMS = [s for s, *_ in BENCH_SUITE if s not in ("planar_aerial", "taylor_rule")]

EXP_TOY = """
l = 0
m = 1
while true:
    z = Normal(0.1, 0.04)
    l = l + z
    m = 2 * exp(-l) + l
end
"""

TRIG_TOY = """
theta = 0.3
x = 0
while true:
    z = Normal(0.05, 0.01)
    theta = theta + z
    x = x + cos(theta) + 0.5 * sin(theta)
end
"""


# After the rewrite the only nonpolynomial calls left take iteration-stable
# or frozen arguments, which the moment engine handles directly.
ENGINE_READY = ("ProbSolvable", "ProbSolvableAfterExactRewrite")


def test_rewrite_output_is_engine_ready():
    for src in (EXP_TOY, TRIG_TOY):
        p = dsl.parse_program(src)
        assert dsl.classify(p).klass == "ProbSolvableAfterExactRewrite"
        r = transform.rewrite_all(p)
        assert dsl.classify(r).klass in ENGINE_READY
        # no nonpoly call argument depends on accumulating state anymore
        stable = dsl.iteration_stable_vars(r) | dsl.frozen_random_vars(r)
        for st in r.body:
            for e in st.exprs:
                for call in dsl.nonpoly_calls(e):
                    assert dsl.free_vars(call.arg) <= stable


@pytest.mark.parametrize("stem", EXACT_STEMS)
def test_rewrite_benchmarks_become_engine_ready(stem):
    p = dsl.parse_file(bench_path(stem))
    assert dsl.classify(transform.rewrite_all(p)).klass in ENGINE_READY


@pytest.mark.parametrize("src", [EXP_TOY, TRIG_TOY], ids=["exp", "trig"])
@pytest.mark.parametrize("n", [1, 5, 10])
def test_pathwise_rewrite_equivalence(src, n):
    """Original and rewritten programs agree sample-by-sample (1e-12)."""
    p = dsl.parse_program(src)
    r = transform.rewrite_all(p)
    target = "m" if "m = " in src else "x"
    a = simulate.run_trajectory(p, n, 500, seed=7)
    b = simulate.run_trajectory(r, n, 500, seed=7)
    np.testing.assert_allclose(a[target], b[target], rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("stem", EXACT_STEMS)
def test_pathwise_rewrite_equivalence_benchmarks(stem):
    p = dsl.parse_file(bench_path(stem))
    r = transform.rewrite_all(p)
    target = next(t for s, t, *_ in BENCH_SUITE if s == stem).split("^")[0]
    a = simulate.run_trajectory(p, 5, 300, seed=11)
    b = simulate.run_trajectory(r, 5, 300, seed=11)
    np.testing.assert_allclose(a[target], b[target], rtol=1e-12, atol=1e-12)


def test_pythagorean_closure_mixed_moment_level():
    # E[cos^2 X + sin^2 X] = 1 exactly, via the mixed-moment machinery.
    d = normal(0.4, 0.09)
    c2 = mixed_moments.mixed_trig_moment(d, MixedMomentQuery(0, 2, 0, "Trig"))
    s2 = mixed_moments.mixed_trig_moment(d, MixedMomentQuery(0, 0, 2, "Trig"))
    assert c2 + s2 == pytest.approx(1.0, abs=1e-12)


def test_pythagorean_closure_propagated():
    # After the trig rewrite, E[c^2 + s^2] stays 1 for all n.
    p = dsl.parse_program(TRIG_TOY)
    r = transform.rewrite_all(p)
    pair = [v for v in r.variables if v.endswith("_cos") or v.endswith("_sin")]
    assert len(pair) == 2
    targets = [f"{v}^2" for v in pair]
    for n in (0, 1, 7, 40):
        vals = engine.moments_at(r, targets, n)
        assert sum(vals.values()) == pytest.approx(1.0, abs=1e-10), n


def test_trig_rewrite_initials():
    p = dsl.parse_program(TRIG_TOY)
    r = transform.rewrite_all(p)
    vals = engine.moments_at(
        r, [v for v in r.variables if v.endswith(("_cos", "_sin"))], 0)
    got = sorted(vals.values())
    assert got == pytest.approx(sorted([math.cos(0.3), math.sin(0.3)]))


def test_pce_substitution_stable_mode_requires_stable_args():
    p = dsl.parse_program(TRIG_TOY)  # theta accumulates: not iteration-stable
    with pytest.raises(ConditionsViolated):
        transform.pce_substitute_all(p, degree=3, mode="stable")


def test_pce_substitution_output_is_polynomial():
    p = dsl.parse_program(TRIG_TOY)
    rep = transform.pce_substitute_all(p, degree=4, mode="unconditional")
    assert dsl.classify(rep.program).klass == "ProbSolvable"
    assert rep.mode == "unconditional"
    assert all(est.se >= 0.0 for est in rep.estimates)


def test_pce_substitution_conditional_counter():
    p = dsl.parse_program(TRIG_TOY)
    rep = transform.pce_substitute_all(p, degree=3, mode="conditional", n_iters=4)
    assert dsl.classify(rep.program).klass == "ProbSolvable"


def test_stable_mode_is_unbiased_on_iteration_stable_program():
    src = """
x = 0
while true:
    d = Uniform(9.9, 10.1)
    t = Normal(1.3, 0.01)
    x = x + d * cos(t)
end
"""
    p = dsl.parse_program(src)
    exact = engine.moments_at(transform.rewrite_all(p), ["x"], 50)["x"]
    for degree in (1, 2, 3):
        rep = transform.pce_substitute_all(p, degree=degree, mode="stable")
        approx = engine.moments_at(rep.program, ["x"], 50)["x"]
        assert approx == pytest.approx(exact, rel=1e-9)
