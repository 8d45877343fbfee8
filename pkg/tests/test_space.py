import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import interval, make_eval, torus
from samproj.design import DesignMeasure
from samproj.space import (
    BasisSpec,
    CandidateSet,
    RankDeficientError,
    build_candidate_set,
    evaluate_basis,
    gram,
    gram_from_weights,
    load_table_csv,
    select_invertible_points,
    trig_frequencies,
)


def naive_gram(F, w):
    """Entry-by-entry sum over the support."""
    n, M = F.shape
    G = np.zeros((n, n), dtype=complex)
    for k in range(M):
        for i in range(n):
            for j in range(n):
                G[i, j] += w[k] * F[i, k] * np.conj(F[j, k])
    return G


# -- candidate sets ------------------------------------------------------

def test_interval_endpoints_and_uniform_weights():
    c = build_candidate_set(interval(5))
    assert np.allclose(c.points[:, 0], [-1, -0.5, 0, 0.5, 1])
    assert np.allclose(c.ground_weights, 0.2)


def test_torus_angles():
    c = build_candidate_set(torus(4))
    assert np.allclose(c.points[:, 0], [0, np.pi / 2, np.pi, 3 * np.pi / 2])


def test_single_point_set():
    c = build_candidate_set({"kind": "points", "points": [0.0]})
    assert len(c) == 1 and c.ground_weights[0] == 1.0


def test_ground_measure_normalized():
    c = build_candidate_set(interval(3), ground_measure=[1, 2, 1])
    assert np.allclose(c.ground_weights, [0.25, 0.5, 0.25])


@pytest.mark.parametrize("domain", [
    {"kind": "points", "points": []},
    {"kind": "points", "points": [0.0, float("nan")]},
    {"kind": "points", "points": [1.0, 1.0]},
    {"kind": "ball"},
])
def test_invalid_candidate_sets(domain):
    with pytest.raises(ValueError):
        build_candidate_set(domain)


def test_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        CandidateSet(np.array([0.0, 1.0]), np.array([0.5, 0.6]))


# -- basis evaluation ----------------------------------------------------

def test_linear_basis_values():
    ev = make_eval("algebraic", 2, {"kind": "points", "points": [-1, 0, 1]})
    assert np.array_equal(ev.values, [[1, 1, 1], [-1, 0, 1]])
    assert ev.is_real and ev.n == 2 and ev.size == 3


def test_rank_deficient_single_point():
    with pytest.raises(RankDeficientError):
        make_eval("algebraic", 2, {"kind": "points", "points": [0.0]})


def test_trig_rank_by_minors():
    ev = make_eval("trigonometric", 3, torus(8))
    # independent rank check: some 3x3 minor is nonzero
    minors = [abs(np.linalg.det(ev.values[:, list(c)])) for c in itertools.combinations(range(8), 3)]
    assert max(minors) > 0.1
    assert np.allclose(ev.values[1], np.cos(2 * np.pi * np.arange(8) / 8))
    assert np.allclose(ev.values[2], np.sin(2 * np.pi * np.arange(8) / 8))


def test_complex_trig_frequencies():
    assert trig_frequencies(5) == [0, 1, -1, 2, -2]
    ev = make_eval("trigonometric", 3, torus(8), form="complex")
    assert not ev.is_real
    t = 2 * np.pi * np.arange(8) / 8
    assert np.allclose(ev.values[2], np.exp(-1j * t))


@pytest.mark.parametrize("kind", ["monomial", "chebyshev", "legendre"])
def test_polynomial_kinds_span_same_space(kind):
    ev = make_eval("algebraic", 4, interval(9), kind=kind)
    mono = make_eval("algebraic", 4, interval(9))
    T = np.linalg.lstsq(mono.values.T, ev.values.T, rcond=None)[0]
    assert np.allclose(mono.values.T @ T, ev.values.T)


def test_values_read_only(poly3):
    with pytest.raises(ValueError):
        poly3.values[0, 0] = 2.0


def test_custom_table_csv(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b,c\n1,2,3\n0,1,0\n")
    table, labels = load_table_csv(path)
    assert labels == ["a", "b", "c"]
    assert np.array_equal(table, [[1, 2, 3], [0, 1, 0]])


def test_basis_spec_json_round_trip():
    spec = BasisSpec("trigonometric", 5, {"form": "complex"})
    again = BasisSpec.from_json(spec.to_json())
    assert again.family == "trigonometric" and again.n == 5 and again.parameters == {"form": "complex"}


def test_unknown_family():
    with pytest.raises(ValueError):
        BasisSpec("wavelet", 3, {})


# -- Gram ------------------------------------------------------------------

def test_gram_uniform_three_points():
    ev = make_eval("algebraic", 2, {"kind": "points", "points": [-1, 0, 1]})
    G = gram(ev, DesignMeasure.uniform([0, 1, 2]))
    assert np.allclose(G, [[1, 0], [0, 2 / 3]])
    assert np.allclose(G, naive_gram(ev.values, np.full(3, 1 / 3)))


def test_gram_endpoints_identity():
    ev = make_eval("algebraic", 2, {"kind": "points", "points": [-1, 0, 1]})
    assert np.allclose(gram(ev, DesignMeasure((0, 2), [0.5, 0.5])), np.eye(2))


def test_gram_single_atom_rank_one(poly3):
    G = gram(poly3, DesignMeasure((5,), [1.0]))
    f = poly3.values[:, 5]
    assert np.allclose(G, np.outer(f, f))
    assert np.linalg.matrix_rank(G) == 1


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=9, max_size=9), st.booleans())
def test_gram_hermitian_psd(raw, complex_form):
    w = np.asarray(raw)
    if w.sum() == 0:
        w[0] = 1.0
    w = w / w.sum()
    ev = make_eval("trigonometric", 3, torus(9), form="complex" if complex_form else "real")
    G = gram_from_weights(ev.values, w)
    assert np.allclose(G, G.conj().T, atol=1e-14)
    assert np.linalg.eigvalsh(G).min() >= -1e-12
    assert np.allclose(G, naive_gram(ev.values, w), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_gram_transforms_congruently(seed):
    rng = np.random.default_rng(seed)
    ev = make_eval("algebraic", 3, interval(11))
    T = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    w = rng.dirichlet(np.ones(11))
    lhs = gram_from_weights(ev.transformed(T).values, w)
    G = gram_from_weights(ev.values, w)
    assert np.allclose(lhs, T @ G @ T.conj().T, atol=1e-10 * np.abs(lhs).max())


# -- seed points -----------------------------------------------------------

def test_invertible_points_quadratic():
    ev = make_eval("algebraic", 3, {"kind": "points", "points": [-1, -0.5, 0.5, 1]})
    idx = select_invertible_points(ev)
    assert len(set(idx)) == 3
    x = ev.candidates.points[idx, 0]
    vander = abs(np.prod([x[j] - x[i] for i in range(3) for j in range(i + 1, 3)]))
    assert vander > 0.1


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(0, 1000))
def test_invertible_points_give_pd_gram(n, seed):
    rng = np.random.default_rng(seed)
    pts = np.sort(rng.choice(np.linspace(-1, 1, 200), size=n + 5, replace=False))
    ev = make_eval("algebraic", n, {"kind": "points", "points": pts.tolist()})
    idx = select_invertible_points(ev)
    G = gram(ev, DesignMeasure.uniform(idx))
    assert len(idx) == n
    assert np.linalg.eigvalsh(G).min() > 0
