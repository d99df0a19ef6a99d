from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import multigammaln

from cgwishart.colored_graph import ColoredGraph
from cgwishart.errors import DimensionMismatch, NotInDualCone, PatternMismatch
from cgwishart.exact import (
    Hyperparams,
    bind_family,
    dual_cone_check,
    exact_mean,
    log_norm,
    mc_norm_oracle,
    star_all_mean,
)
from cgwishart.harness import builtin_fixture
from conftest import FIG1, REFERENCE_MEAN, small_tree


def log_wishart_const(delta, D):
    """log of the integral over the full PD cone: 2^{np/2} Gamma_p(n/2) |D|^{-n/2}."""
    p = D.shape[0]
    n = delta + p - 1
    return 0.5 * n * p * math.log(2) + multigammaln(0.5 * n, p) - 0.5 * n * np.linalg.slogdet(D)[1]


def _permuted(graph, D, perm):
    """Relabel vertex ``v`` as ``perm[v-1]``."""
    f = lambda v: perm[v - 1]
    g = ColoredGraph.from_parts(
        graph.p,
        [(f(i), f(j)) for i, j in graph.edges],
        [[f(v) for v in c] for c in graph.vertex_classes],
        [[(f(i), f(j)) for i, j in c] for c in graph.edge_classes],
    )
    inv = np.argsort(np.array(perm) - 1)
    return g, D[np.ix_(inv, inv)]


def test_family_detection():
    tags = {name: bind_family(builtin_fixture(name).graph).tag for name in FIG1}
    assert tags == {
        "fig1a": "Tree",
        "fig1b": "StarLeaves",
        "fig1c": "StarAll",
        "fig1d": "Triangle",
        "fig1e": "Decomp4",
    }
    assert bind_family(builtin_fixture("fig1d").graph).roles == (1, 2, 3)
    with pytest.raises(PatternMismatch):
        bind_family(builtin_fixture("cycle20a").graph)
    with pytest.raises(PatternMismatch):
        bind_family(builtin_fixture("fig1d").graph, "Tree")


@pytest.mark.parametrize("name", FIG1)
def test_fixture_means_match_reference(name):
    fx = builtin_fixture(name)
    E = exact_mean(bind_family(fx.graph), fx.delta, fx.D)
    np.testing.assert_allclose(E, REFERENCE_MEAN[name], atol=1e-3, rtol=0)


def test_triangle_hand_derivatives():
    fx = builtin_fixture("fig1d")
    E = exact_mean(bind_family(fx.graph), fx.delta, fx.D)
    assert E[2, 2] == pytest.approx(36 / 29, abs=1e-7)
    assert E[0, 2] == pytest.approx(-16 / 29, abs=1e-7)
    assert E[1, 2] == E[0, 2]


def test_star_all_analytic_mean_matches_finite_differences():
    fx = builtin_fixture("fig1c")
    fam = bind_family(fx.graph)
    np.testing.assert_allclose(star_all_mean(fam, fx.delta, fx.D), exact_mean(fam, fx.delta, fx.D), atol=1e-8)


@pytest.mark.parametrize("delta", [1.0, 2.5, 3.0, 4.0, 7.0])
def test_single_edge_equals_wishart(delta):
    D = np.array([[2.0, 0.7], [0.7, 1.5]])
    g = ColoredGraph.from_parts(2, [(1, 2)])
    want = log_wishart_const(delta, D)
    assert log_norm(bind_family(g, "Tree"), delta, D) == pytest.approx(want, rel=1e-9)
    if delta >= 1:
        assert log_norm(bind_family(g, "StarLeaves"), delta, D) == pytest.approx(want, rel=1e-9)


@pytest.mark.parametrize("delta", [1.0, 3.0])
def test_tree_closed_forms_continuous_in_delta(delta):
    g = small_tree(4)
    D = np.diag([2.0, 3.0, 1.5, 4.0])
    for i, j in g.edges:
        D[i - 1, j - 1] = D[j - 1, i - 1] = 0.4
    fam = bind_family(g)
    closed = log_norm(fam, delta, D)
    near = [log_norm(fam, delta + s, D) for s in (-1e-6, 1e-6)]
    assert closed == pytest.approx(0.5 * sum(near), abs=1e-7)


@pytest.mark.parametrize("name", FIG1)
def test_relabelling_invariance(name, rng):
    fx = builtin_fixture(name)
    perm = list(rng.permutation(fx.graph.p) + 1)
    g2, D2 = _permuted(fx.graph, fx.D, perm)
    a = log_norm(bind_family(fx.graph), fx.delta, fx.D)
    assert log_norm(bind_family(g2), fx.delta, D2) == pytest.approx(a, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(FIG1), st.floats(0.2, 5.0), st.floats(1.0, 6.0))
def test_homogeneity(name, t, delta):
    fx = builtin_fixture(name)
    fam = bind_family(fx.graph)
    m = fam.fmap.n_free
    p = fx.graph.p
    # substituting K -> K / t in the defining integral
    expo = -m - p * (delta - 2) / 2
    diff = log_norm(fam, delta, t * fx.D) - log_norm(fam, delta, fx.D)
    assert diff == pytest.approx(expo * math.log(t), abs=1e-7)


def test_dual_cone_examples():
    g = ColoredGraph.from_parts(3, [(1, 2), (1, 3)], [[1, 2, 3]], None)
    fam = bind_family(g)
    assert fam.tag == "StarAll"
    D = lambda b: np.array([[1.0, b, b], [b, 1.0, 0], [b, 0, 1.0]])
    # (n + 1) a' > 2 |b'|: 3 > 2 * sqrt(2) b
    assert dual_cone_check(fam, D(1.0))  # D itself is indefinite here
    assert not np.all(np.linalg.eigvalsh(D(1.0)) > 0)
    assert not dual_cone_check(fam, D(1.1))
    with pytest.raises(NotInDualCone):
        log_norm(fam, 3.0, D(1.1))
    tree = bind_family(ColoredGraph.from_parts(2, [(1, 2)]))
    assert dual_cone_check(tree, np.array([[1.0, 0.99], [0.99, 1.0]]))
    assert not dual_cone_check(tree, np.array([[1.0, 1.01], [1.01, 1.0]]))
    for name in FIG1:
        fx = builtin_fixture(name)
        fam = bind_family(fx.graph)
        assert dual_cone_check(fam, fx.D)
        assert not dual_cone_check(fam, -fx.D)


def test_scale_outside_colored_span():
    fx = builtin_fixture("fig1d")
    D = fx.D.copy()
    D[1, 2] = D[2, 1] = 2.5  # breaks the tie with (1,3)
    with pytest.raises(PatternMismatch):
        log_norm(bind_family(fx.graph), 3.0, D)
    with pytest.raises(DimensionMismatch):
        log_norm(bind_family(fx.graph), 3.0, np.eye(4))


def test_hyperparams_validation():
    with pytest.raises(ValueError):
        Hyperparams(0.0, np.eye(2))
    with pytest.raises(DimensionMismatch):
        Hyperparams(3.0, np.ones(3))


@pytest.mark.parametrize("delta", [1.0, 2.5, 3.0])
def test_oracle_one_dimensional(delta):
    g = ColoredGraph.from_parts(1, [])
    d = 1.7
    est = mc_norm_oracle(g, delta, np.array([[d]]), n_draws=1000)
    want = 0.5 * delta * math.log(2) + math.lgamma(0.5 * delta) - 0.5 * delta * math.log(d)
    # nothing to complete, so every weight is the same constant
    assert est.rel_std_err == 0
    assert est.log_estimate == pytest.approx(want, rel=1e-12)


def test_oracle_complete_graph_is_exact(rng):
    from conftest import random_spd

    D = random_spd(4, rng)
    est = mc_norm_oracle(ColoredGraph.complete(4), 3.5, D, n_draws=1000)
    assert est.rel_std_err < 1e-12
    assert est.log_estimate == pytest.approx(log_wishart_const(3.5, D), rel=1e-12)


@pytest.mark.parametrize("name", ["fig1d", "fig1e"])
def test_oracle_agrees_with_closed_form(name):
    fx = builtin_fixture(name)
    est = mc_norm_oracle(fx.graph, fx.delta, fx.D, n_draws=200_000, seed=3)
    exact = log_norm(bind_family(fx.graph), fx.delta, fx.D)
    assert abs(est.log_estimate - exact) < 4 * est.rel_std_err


def test_oracle_is_deterministic():
    fx = builtin_fixture("fig1d")
    a = mc_norm_oracle(fx.graph, 3.0, fx.D, n_draws=50_000, seed=11, chunk=20_000)
    b = mc_norm_oracle(fx.graph, 3.0, fx.D, n_draws=50_000, seed=11, chunk=20_000)
    assert a == b
