import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from smpkit import intrinsic as it
from smpkit.cone import r_catalogue
from smpkit.errors import FiberInconsistent, NotFiberConstant, NotInCatalogue
from smpkit.kernels import Tag, TestFunction, constant

IND_NEG = TestFunction(lambda X: (X[:, 0] < 0).astype(float), 1, 1.0, {("nonnegative",)},
                       [(0, 0.0)], "ind(x<0)")


def spec(eid):
    return it.embedding_spec(eid)


def test_embed_examples():
    s = spec("sticky")
    assert it.embed(s, [2.0]).coords == (2.0,)
    assert it.embed(s, [-0.5]).coords == (-1.5,)
    sev = spec("severed")
    assert it.embed(sev, [-1.0]).coords == it.embed(sev, [0.0]).coords == (0.0,)
    assert it.embed(spec("fork"), [0.0, 2.0]).coords == (0.0, 3.0)
    assert it.embed(s, [1.0]).tag is Tag.ORIGINAL


def test_intrinsic_points_examples():
    g = it.intrinsic_points(spec("sticky"))
    added = [p for p in g.points if p.tag is Tag.CLOSURE_ADDED]
    assert [p.coords for p in added] == [(-1.0,)]
    assert not np.any((g.coords[:, 0] > -1) & (g.coords[:, 0] < 0))
    fork = it.intrinsic_points(spec("fork"))
    assert sorted(p.coords for p in fork.points if p.tag is Tag.CLOSURE_ADDED) == [(0.0, -1.0), (0.0, 1.0)]
    assert not any(p.tag is Tag.CLOSURE_ADDED for p in it.intrinsic_points(spec("brownian")).points)
    ab = it.intrinsic_points(spec("absorbing_brownian")).coords
    assert set(ab[:, -1]) == {0.0, 1.0}
    assert np.array_equal(ab[ab[:, -1] == 1], [[0.0, 1.0]])
    assert len(it.intrinsic_points(spec("collapse"))) == 1


def test_closure_points_disjoint_from_image():
    for eid in ("sticky", "fork", "absorbing_brownian"):
        s = spec(eid)
        img = s.identify(it.original_grid(s.example))
        for c in s.closure_array():
            assert np.min(np.max(np.abs(img - c), axis=1)) > 1e-9


def test_lift_examples():
    sev = spec("severed")
    f = r_catalogue(sev.example)[1]
    lf = it.lift_function(sev, f)
    assert lf.values([[0.0]])[0] == pytest.approx(float(f.values([[-1.0]])[0]), abs=1e-12)
    origin = TestFunction(lambda X: (X[:, 0] == 0).astype(float), 1, 1.0, name="ind{0}")
    with pytest.raises(NotFiberConstant):
        it.lift_function(sev, origin)
    s = spec("sticky")
    c = it.lift_function(s, constant(3.0))
    assert c.extended_values == {"0-": 3.0}
    U = s.example.resolvent()
    g = it.lift_function(s, U.apply(1.0, IND_NEG))
    assert g.extended_values["0-"] == pytest.approx(1.0, abs=1e-3)


def test_extension_depends_on_approach():
    # sin(1/y) on the upper branch has no limit at the closure point (0, 1)
    s = spec("fork")
    f = TestFunction(lambda X: 0.5 * (1 + np.sin(1 / np.maximum(X[:, 1], 1e-300))), 2, 1.0,
                     {("nonnegative",)})
    it.check_fibre_constant(s, f)
    with pytest.raises(FiberInconsistent):
        it.extension_limits(s, f)


def test_lifted_resolvent_examples():
    s = spec("sticky")
    one = it.lift_function(s, constant(1.0))
    for a in (0.5, 2.0):
        for xi in ([-1.0], [0.0], [-3.0], [2.5]):
            assert it.lifted_resolvent(s, a, one, xi) == pytest.approx(1 / a, abs=1e-9)
    g = it.lift_function(s, IND_NEG)
    assert it.lifted_resolvent(s, 1.0, g, [-1.0]) == pytest.approx(1.0, abs=1e-3)
    bare = it.LiftedFunction(TestFunction(lambda X: X[:, 0], 1, None, name="x"), {}, s)
    with pytest.raises(NotInCatalogue):
        it.lifted_resolvent(s, 1.0, bare, [0.0])


def test_fork_closure_value_matches_branch_limit():
    s = spec("fork")
    f = TestFunction(lambda X: np.exp(-(X[:, 0] ** 2 + X[:, 1] ** 2) / 8), 2, 1.0, {("nonnegative",)})
    g = it.lift_function(s, f)
    want, _ = integrate.quad(lambda t: math.exp(-t) * math.exp(-t * t / 8), 0, np.inf)
    assert it.lifted_resolvent(s, 1.0, g, [0.0, 1.0]) == pytest.approx(want, abs=2e-3)
    down, _ = integrate.quad(lambda t: math.exp(-t) * math.exp(-t * t / 8), 0, np.inf)
    assert it.lifted_resolvent(s, 1.0, g, [0.0, -1.0]) == pytest.approx(down, abs=2e-3)


@pytest.mark.parametrize("eid", ["sticky", "fork"])
def test_lifted_resolvent_identity(eid):
    s = spec(eid)
    f = r_catalogue(s.example)[1]
    g = it.lift_function(s, f)
    xi = it.intrinsic_points(s, h=1.0).coords
    a, b = 1.0, 2.0
    vb = it.lifted_resolvent_function(s, b, g)
    lhs = it.lifted_resolvent_function(s, a, g).values(xi) - vb.values(xi)
    rhs = (b - a) * it.lifted_resolvent_function(s, a, vb).values(xi)
    assert np.max(np.abs(lhs - rhs)) < 1e-6


def test_lifted_resolvent_monotone_ladder():
    s = spec("sticky")
    U = s.example.resolvent()
    f = U.apply(1.0, IND_NEG, materialize=True)
    xi = np.array([[-1.0], [-2.0], [0.0], [1.5]])
    prev = None
    for n in (1, 2, 4, 16, 256):
        fn = TestFunction(lambda X, n=n: np.minimum(f.values(X), 1.0 / n), 1, 1.0 / n,
                          {("nonnegative",)}, f.breaks, f"ladder{n}")
        v = it.lifted_resolvent(s, 1.0, it.lift_function(s, fn), xi)
        if prev is not None:
            assert np.all(v <= prev + 1e-9)
        prev = v
    assert np.max(prev) < 1e-2


def test_transfer_map_examples():
    s = spec("sticky")
    assert it.transfer_map(s, s).ok
    assert it.transfer_map(s, it.rescaled(s, 2.0, 1.0)).ok
    sev = it.EmbeddingSpec("sticky", spec("severed").coord_functions, [], s.example)
    with pytest.raises(FiberInconsistent) as err:
        it.transfer_map(s, sev)
    assert err.value.witness is not None


def test_fork_canonicity():
    s = spec("fork")
    v = it.transfer_map(s, it.rescaled(s, 2.0, 1.0))
    assert v.ok and v.n_probes == 8


@pytest.mark.parametrize("eid", ["uniform", "sticky", "fork", "absorbing_brownian", "pure_jump"])
def test_fibres_and_separation_on_intrinsic(eid):
    s = spec(eid)
    for f in r_catalogue(s.example)[:6]:
        it.check_fibre_constant(s, f)
    assert it.separation_on_intrinsic(s) == []


def test_collapse_single_point():
    s = spec("collapse")
    assert len(it.intrinsic_points(s)) == 1
    lf = it.lift_function(s, r_catalogue(s.example)[1])
    assert lf.values([[1.0]]).shape == (1,)


def test_c0_distance_reported():
    d = it.c0_distance(spec("sticky").example)
    assert 0.0 <= d < 0.05


@settings(max_examples=30, deadline=None)
@given(st.floats(-6, 6).filter(lambda x: x >= 0 or x < -1e-9))
def test_sticky_psi_inverse_round_trip(x):
    s = spec("sticky")
    xi = s.identify([[x]])
    assert np.allclose(s.identify(s.psi_inverse(xi)), xi)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 4.0), st.floats(-3.0, 3.0))
def test_rescaled_embedding_is_affine(a, b):
    s = spec("fork")
    r = it.rescaled(s, a, b)
    X = np.array([[1.0, 0.0], [0.0, 2.0], [0.0, -0.5]])
    assert np.allclose(r.identify(X), a * s.identify(X) + b)
    assert np.allclose(r.closure_array(), a * s.closure_array() + b)
