import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import interval, make_eval, torus
from samproj.design import (
    DesignMeasure,
    caratheodory_reduce,
    christoffel_values,
    dim_product_space,
    kw_certificate,
    optimize_design,
)
from samproj.space import SingularGramError, gram


def simplex_grid(s, units):
    for cuts in itertools.combinations(range(1, units), s - 1):
        edges = (0,) + cuts + (units,)
        yield np.diff(edges) / units


def brute_max_det(ev, s, units):
    """Largest det over designs on exactly ``s`` candidates with weights in 1/units steps."""
    F = ev.values
    W = np.array(list(simplex_grid(s, units)))
    best = -np.inf
    for subset in itertools.combinations(range(ev.size), s):
        E = F[:, subset]
        G = np.einsum("bs,is,js->bij", W, E, E.conj())
        best = max(best, np.real(np.linalg.det(G)).max())
    return best


def test_linear_on_three_points():
    ev = make_eval("algebraic", 2, {"kind": "points", "points": [-1, 0, 1]})
    res = optimize_design(ev, epsilon=1e-6)
    d = res.design
    assert res.certified
    assert set(d.support) == {0, 2}
    assert np.allclose(d.weights, [0.5, 0.5], atol=1e-6)
    det = np.linalg.det(gram(ev, d))
    assert det == pytest.approx(1.0, abs=1e-6)
    # independent route: the 2-simplex over all three points at step 1e-3
    assert det >= brute_max_det(ev, 3, 1000) - 1e-9


def test_constant_basis():
    ev = make_eval("algebraic", 1, interval(7))
    res = optimize_design(ev)
    assert res.certified
    assert res.certificate.sup_value == pytest.approx(1.0)


def test_quadratic_on_33_points():
    ev = make_eval("algebraic", 3, interval(33))
    res = optimize_design(ev)
    assert res.certified and res.certificate.sup_value <= 3.03
    fine = optimize_design(ev, epsilon=1e-6)
    det = np.linalg.det(gram(ev, fine.design))
    # classical optimum: mass 1/3 on -1, 0, 1 gives det 4/27
    assert det == pytest.approx(4 / 27, rel=1e-5)
    brute = max(brute_max_det(ev, 3, 60), brute_max_det(ev, 2, 60))
    assert abs(det - brute) <= 1e-3 * brute or det > brute


def test_brute_four_point_supports_do_not_beat_optimum():
    ev = make_eval("algebraic", 3, interval(9))
    det = np.linalg.det(gram(ev, optimize_design(ev, epsilon=1e-6).design))
    assert brute_max_det(ev, 4, 12) <= det * (1 + 1e-9)


# -- certificate -------------------------------------------------------------

def test_certificate_endpoints_design():
    ev = make_eval("algebraic", 2, {"kind": "points", "points": [-1, 0, 1]})
    cert = kw_certificate(ev, DesignMeasure((0, 2), [0.5, 0.5]), 0.0)
    assert cert.sup_value == pytest.approx(2.0)
    assert cert.argmax_index == 0  # tie between the endpoints goes to the lower index
    assert cert.satisfied


def test_certificate_uniform_design_not_satisfied():
    ev = make_eval("algebraic", 2, {"kind": "points", "points": [-1, 0, 1]})
    cert = kw_certificate(ev, DesignMeasure.uniform([0, 1, 2]), 0.1)
    assert cert.sup_value == pytest.approx(2.5)
    assert not cert.satisfied


def test_singular_design_rejected(poly3):
    with pytest.raises(SingularGramError):
        kw_certificate(poly3, DesignMeasure((0, 1), [0.5, 0.5]), 0.1)


def test_christoffel_matches_direct_solve(trig5):
    G = gram(trig5, DesignMeasure.uniform(range(0, 128, 7)))
    d = christoffel_values(trig5.values, G)
    F = trig5.values
    direct = np.einsum("ik,ik->k", F.conj(), np.linalg.solve(G, F)).real
    assert np.allclose(d, direct)


def test_uncertified_result_is_reported(poly3):
    res = optimize_design(poly3, epsilon=1e-9, max_iters=1,
                          seed_design=DesignMeasure.uniform([0, 1, 2]))
    assert not res.certified
    assert res.certificate.sup_value > 3


def test_design_json_round_trip(poly3):
    d = optimize_design(poly3).design
    again = DesignMeasure.from_json(d.to_json(poly3.candidates))
    assert again.support == d.support and np.array_equal(again.weights, d.weights)


# -- properties -------------------------------------------------------------

@settings(max_examples=15, deadline=None)
@given(st.sampled_from(["algebraic", "trigonometric"]), st.integers(1, 6), st.integers(8, 40))
def test_mean_trace_identity(family, n, size):
    dom = interval(size) if family == "algebraic" else torus(size)
    if size < n:
        return
    ev = make_eval(family, n, dom)
    res = optimize_design(ev)
    d = res.design
    vals = christoffel_values(ev.values[:, list(d.support)], gram(ev, d))
    assert abs(np.dot(d.weights, vals) - n) <= 1e-10
    assert res.certificate.sup_value >= n - 1e-9


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 6))
def test_multiplicative_sweeps_do_not_decrease_logdet(n):
    ev = make_eval("algebraic", n, interval(41))
    res = optimize_design(ev, epsilon=1e-4)
    hist = res.logdet_history
    for k, kind in enumerate(res.step_kinds):
        if kind == "multiplicative":
            assert hist[k + 1] >= hist[k] - 1e-12
    assert hist[-1] >= hist[0]


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000))
def test_basis_change_invariance(seed):
    rng = np.random.default_rng(seed)
    ev = make_eval("algebraic", 4, interval(25))
    T = rng.standard_normal((4, 4)) + 4 * np.eye(4)
    a = optimize_design(ev, epsilon=1e-6)
    b = optimize_design(ev.transformed(T), epsilon=1e-6)
    wa = np.zeros(25)
    wb = np.zeros(25)
    wa[list(a.design.support)] = a.design.weights
    wb[list(b.design.support)] = b.design.weights
    assert np.abs(wa - wb).max() <= 1e-4
    assert abs(a.certificate.sup_value - b.certificate.sup_value) <= 1e-6


# -- Caratheodory -----------------------------------------------------------

def test_reduce_constant_space():
    ev = make_eval("algebraic", 1, interval(5))
    red = caratheodory_reduce(ev, DesignMeasure.uniform(range(5)))
    assert len(red) <= 2
    assert gram(ev, red)[0, 0] == pytest.approx(1.0)


def test_reduce_linear_uniform_ten_points():
    ev = make_eval("algebraic", 2, interval(10))
    d = DesignMeasure.uniform(range(10))
    red = caratheodory_reduce(ev, d)
    assert len(red) <= 4
    assert np.allclose(gram(ev, red), gram(ev, d), atol=1e-12)


def test_reduce_small_support_unchanged():
    ev = make_eval("algebraic", 2, interval(10))
    d = DesignMeasure((0, 9), [0.5, 0.5])
    red = caratheodory_reduce(ev, d)
    assert red.support == d.support and np.allclose(red.weights, d.weights)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_real_polynomial_product_dimension(n):
    ev = make_eval("algebraic", n, interval(3 * n))
    assert dim_product_space(ev) == 2 * n - 1


def test_product_dimension_complex_trig():
    ev = make_eval("trigonometric", 3, torus(8), form="complex")
    # products e^{i(j-k)t} for j, k in {0, 1, -1} have frequencies -2..2
    freqs = {j - k for j in (0, 1, -1) for k in (0, 1, -1)}
    assert dim_product_space(ev) == len(freqs) == 5


def test_product_dimension_constant():
    assert dim_product_space(make_eval("algebraic", 1, interval(4))) == 1


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5))
def test_reduce_preserves_gram(seed, n):
    rng = np.random.default_rng(seed)
    ev = make_eval("algebraic", n, interval(30))
    w = rng.dirichlet(np.ones(30))
    d = DesignMeasure.from_dense(w)
    red = caratheodory_reduce(ev, d)
    G0, G1 = gram(ev, d), gram(ev, red)
    assert len(red) <= dim_product_space(ev) + 1
    assert np.abs(G0 - G1).max() <= 1e-10 * np.trace(G0)
    assert np.all(red.weights > 0) and abs(red.weights.sum() - 1) <= 1e-12
