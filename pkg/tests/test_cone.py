import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smpkit import cone
from smpkit import resolvent as rs
from smpkit.errors import DepthExceeded
from smpkit.kernels import TestFunction, constant
from smpkit.zoo import get_example


def sticky_generators():
    U = get_example("sticky").resolvent()
    left = TestFunction(lambda X: (X[:, 0] <= 0).astype(float), 1, 1.0, {("nonnegative",)},
                        [(0, 0.0)], "ind(x<=0)")
    right = TestFunction(lambda X: (X[:, 0] >= 0).astype(float), 1, 1.0, {("nonnegative",)},
                         [(0, 0.0)], "ind(x>=0)")
    return [U.apply(1.0, left, materialize=True), U.apply(1.0, right, materialize=True)]


def test_depth_zero_is_generator_list():
    gens = sticky_generators()
    elems = cone.build_cone(gens, depth=0)
    assert [e.leaf for e in elems] == gens


def test_depth_limits_and_uncertified_leaf():
    with pytest.raises(DepthExceeded):
        cone.build_cone(sticky_generators(), depth=4)
    with pytest.raises(ValueError):
        cone.leaf(TestFunction(lambda X: X[:, 0], 1, None, name="x"))
    with pytest.raises(ValueError):
        cone.combo_node([(0.0, cone.leaf(sticky_generators()[0]))])


def test_constant_generator_gives_constants():
    U = get_example("sticky").resolvent()
    one = constant(1.0).with_claims(("alpha_supermedian", 0.0))
    X = np.linspace(-3, 3, 13)[:, None]
    for e in cone.build_cone([one], depth=2):
        assert np.ptp(e.function(U).values(X)) < 1e-9, e.key


def test_sticky_depth2_certificates_hold():
    ex = get_example("sticky")
    U = ex.resolvent()
    X = ex.probe_points()[::2]
    elems = cone.build_cone(sticky_generators(), depth=2, max_new=24)
    assert max(e.depth for e in elems) == 2
    for e in elems:
        grid = rs.default_beta_grid(max(e.certificate_alpha, 0.5))[:8]
        assert rs.is_alpha_supermedian(e.function(U), e.certificate_alpha, U, grid, X), e.key


def test_levels_are_nested_and_min_closed():
    gens = sticky_generators()
    levels = [cone.build_cone(gens, depth=n) for n in range(4)]
    for a, b in zip(levels, levels[1:]):
        assert {e.key for e in a} <= {e.key for e in b}
    r1 = levels[1]
    for a in r1[:6]:
        for b in r1[:6]:
            if a.key != b.key:
                m = cone.min_node(a, b)
                assert m.depth <= 2 and cone.in_cone(m, gens, depth=2)


def test_certificate_propagation():
    a, b = (cone.leaf(g) for g in sticky_generators())
    hi = cone.leaf(TestFunction(lambda X: np.ones(len(X)), 1, 1.0, {("alpha_supermedian", 2.0)}, name="h"))
    assert cone.min_node(a, hi).certificate_alpha == 2.0
    assert cone.combo_node([(0.5, a), (2.0, hi)]).certificate_alpha == 2.0
    assert cone.resolvent_node(hi, 0.5).certificate_alpha == 2.0
    assert cone.resolvent_node(a, 1.0).depth == 1
    assert cone.min_node(a, b).key == cone.min_node(b, a).key


def test_cone_json_round_trip():
    elems = cone.build_cone(sticky_generators(), depth=1, max_new=5)
    data = json.loads(cone.cone_to_json(elems))
    assert len(data) == len(elems)
    assert all(d["certificate_alpha"] >= 0 for d in data)


# --------------------------------------------------------------------------- uniformity


def test_uniformity_reflexive():
    ex = get_example("sticky")
    cat = cone.r_catalogue(ex)
    v = cone.uniformity_equivalent(cat, cat, cone.probe_library(ex))
    assert v.equivalent and not v.witnesses


def test_sticky_embedding_generates_catalogue_uniformity():
    ex = get_example("sticky")
    H = ex.coord_functions()
    G = cone.r_catalogue(ex)
    probes = {p.label: p for p in cone.probe_library(ex)}
    alt = probes["(-1)^n/n"]
    assert not cone.is_cauchy(H, alt) and not cone.is_cauchy(G, alt)
    assert cone.is_cauchy(H, probes["-1/n"]) and cone.is_cauchy(G, probes["-1/n"])
    assert cone.uniformity_equivalent(H, G, list(probes.values())).equivalent


def test_uniform_motion_divergent_probe_has_bounded_witness():
    ex = get_example("uniform")
    H = ex.coord_functions()
    G = cone.r_catalogue(ex)
    probes = cone.probe_library(ex)
    v = cone.uniformity_equivalent(H, G, probes)
    assert v.equivalent, v.witnesses
    n = [p for p in probes if p.label == "n"][0]
    assert any(cone.oscillation(g, n) > cone.CAUCHY_TOL for g in G if "osc" in g.name)


def test_witness_reported():
    H = [TestFunction(lambda X: X[:, 0], 1, None, name="x")]
    G = [constant(1.0)]
    p = cone.ProbeSequence(np.arange(1.0, 50.0), label="n")
    v = cone.uniformity_equivalent(H, G, [p])
    assert not v.equivalent and v.witnesses == [("n", False, True)]


# --------------------------------------------------------------------------- separation


def test_separation_examples():
    sev = get_example("severed")
    assert not cone.separates_points(cone.r_catalogue(sev), [-1.0], [0.0])
    assert cone.separates_points(cone.r_catalogue(sev), [-2.0], [0.0])
    col = get_example("collapse")
    assert not cone.separates_points(cone.r_catalogue(col), [-1.0], [2.0])
    e = get_example("uniform").coord_functions()
    assert cone.separates_points(e, [0.0], [0.5])


@settings(max_examples=40, deadline=None)
@given(st.floats(-4, 4), st.floats(-4, 4))
def test_separation_symmetric_and_irreflexive(x, y):
    cat = cone.r_catalogue(get_example("uniform"))[:6]
    assert cone.separates_points(cat, [x], [y]) == cone.separates_points(cat, [y], [x])
    assert not cone.separates_points(cat, [x], [x])


# --------------------------------------------------------------------------- probes


def test_probe_sequence_and_csv():
    with pytest.raises(ValueError):
        cone.ProbeSequence(np.empty((0, 1)))
    lib = cone.probe_library(get_example("fork"))
    back = cone.probes_from_csv(cone.probes_to_csv(lib[:3]))
    assert [p.label for p in back] == [p.label for p in lib[:3]]
    assert np.array_equal(back[1].points, lib[1].points)
    assert lib[0].tail().shape == (cone.CAUCHY_WINDOW, 2)


def test_constant_pair_probe_is_cauchy_only_for_unseparating_functions():
    # (x, y, x, y, ...) is Cauchy for h iff h(x) = h(y)
    sev = get_example("severed")
    cat = cone.r_catalogue(sev)
    pair = cone.ProbeSequence([[-1.0], [0.0]] * 20)
    assert cone.is_cauchy(cat, pair)
    pair2 = cone.ProbeSequence([[-2.0], [0.0]] * 20)
    assert not cone.is_cauchy(cat, pair2)
