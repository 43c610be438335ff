"""Parser, pretty-printer round trips, and classification."""

import pytest

from loopmoments import dsl
from loopmoments.errors import DslSyntaxError

from conftest import BENCH_SUITE, bench_path

POLY_TOY = """
x = 1
y = 0
while true:
    z = Normal(0, 1)
    x = x + z
    y = y + x * x
end
"""


def test_parse_poly_toy():
    p = dsl.parse_program(POLY_TOY)
    assert p.variables == ("x", "y", "z")
    assert len(p.body) == 3


@pytest.mark.parametrize("stem", [s for s, *_ in BENCH_SUITE])
def test_roundtrip_pretty_print(stem):
    p = dsl.parse_file(bench_path(stem))
    again = dsl.parse_program(dsl.pretty_print(p))
    assert again == dsl.parse_program(dsl.pretty_print(again))
    assert again.initials == p.initials
    assert again.body == p.body


def test_classify_poly_toy_is_prob_solvable():
    assert dsl.classify(dsl.parse_program(POLY_TOY)).klass == "ProbSolvable"


@pytest.mark.parametrize("stem, expected", [
    ("turning_vehicle", "ProbSolvableAfterExactRewrite"),
    ("turning_vehicle_trunc", "ProbSolvableAfterExactRewrite"),
    ("rimless_wheel", "ProbSolvableAfterExactRewrite"),
    ("robotic_arm", "ProbSolvableAfterExactRewrite"),
    ("underwater", "ProbSolvableAfterExactRewrite"),
    ("planar_aerial", "RequiresPce"),
    ("aerial_3d", "ProbSolvableAfterExactRewrite"),
    ("diff_drive", "ProbSolvableAfterExactRewrite"),
    ("mobile_arm", "ProbSolvableAfterExactRewrite"),
    ("taylor_rule", "RequiresPce"),
    ("stochastic_decay", "ProbSolvableAfterExactRewrite"),
])
def test_classify_benchmarks(stem, expected):
    assert dsl.classify(dsl.parse_file(bench_path(stem))).klass == expected


def test_accumulator_detection():
    p = dsl.parse_program(POLY_TOY)
    accs = dsl.detect_accumulators(p)
    assert [a for a, _ in accs] == ["x"]
    assert accs[0][1].kind == "Normal"


def test_iteration_stable_vars():
    p = dsl.parse_program("""
x = 0
while true:
    d = Uniform(9.9, 10.1)
    x = x + d * cos(d)
end
""")
    assert dsl.iteration_stable_vars(p) == {"d"}


def test_frozen_random_vars():
    p = dsl.parse_program("""
theta = Normal(0.5, 0.01)
x = 0
while true:
    x = x + cos(theta)
end
""")
    assert dsl.frozen_random_vars(p) == {"theta"}
    assert dsl.classify(p).klass == "ProbSolvableAfterExactRewrite"


def test_unknown_function_rejected_at_parse():
    from loopmoments.errors import UnknownFunction
    with pytest.raises(UnknownFunction, match="tan"):
        dsl.parse_program("""
x = 0
while true:
    x = x + tan(x)
end
""")


def test_syntax_error_reports_location():
    with pytest.raises(DslSyntaxError) as exc:
        dsl.parse_program("x = \nwhile true:\nend\n")
    assert exc.value.line == 1


def test_undefined_variable_rejected():
    with pytest.raises(Exception):
        dsl.parse_program("""
x = 0
while true:
    x = x + q
end
""")
