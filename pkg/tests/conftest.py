import pathlib

import pytest

ROOT = pathlib.Path(__file__).resolve().parent.parent
BENCH_DIR = ROOT / "benchmarks"

# (stem, target monomial, iteration count, PCE degrees) for the shipped suite.
BENCH_SUITE = (
    ("turning_vehicle", "x", 20, (3, 5, 9)),
    ("turning_vehicle_trunc", "x", 20, (3, 5, 9)),
    ("rimless_wheel", "x", 2000, (1, 2, 3)),
    ("robotic_arm", "x", 100, (1, 2, 3)),
    ("underwater", "x^2", 10, (3, 5, 8)),
    ("planar_aerial", "y", 10, (6, 8, 10)),
    ("aerial_3d", "x", 20, (3, 5, 8)),
    ("diff_drive", "x^2", 25, (8, 10, 12)),
    ("mobile_arm", "x", 2000, (2, 3, 4)),
    ("taylor_rule", "i", 20, (3, 5, 9)),
    ("stochastic_decay", "m", 10, (6, 8, 10)),
)


def bench_path(stem: str) -> pathlib.Path:
    return BENCH_DIR / f"{stem}.pp"


@pytest.fixture(scope="session")
def programs():
    from loopmoments import dsl

    return {stem: dsl.parse_file(bench_path(stem))
            for stem, *_ in BENCH_SUITE}
