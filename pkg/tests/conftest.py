import numpy as np
import pytest

from samproj.space import BasisSpec, build_candidate_set, evaluate_basis

# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE_RESULTS: dict = {}


def make_eval(family, n, domain, **params):
    return evaluate_basis(BasisSpec(family, n, params), build_candidate_set(domain))


def interval(size, a=-1.0, b=1.0):
    return {"kind": "interval", "bounds": [a, b], "size": size}


def torus(size):
    return {"kind": "torus", "size": size}


def random_table_eval(n, size, seed):
    rng = np.random.default_rng(seed)
    table = rng.standard_normal((n, size))
    return evaluate_basis(BasisSpec("custom-table", n, {"table": table.tolist()}),
                          build_candidate_set({"kind": "points", "points": list(range(size))}))


@pytest.fixture
def poly3():
    return make_eval("algebraic", 3, interval(33))


@pytest.fixture
def trig5():
    return make_eval("trigonometric", 5, torus(128))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
