import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.linalg import expm

from smpkit.errors import NotInCatalogue, OutOfDomain, SideConditionViolated
from smpkit.kernels import TestFunction, constant
from smpkit.zoo import (EXAMPLE_IDS, PureJump, check_generator_pair, eval_Pt, eval_Ua,
                        get_example, smooth_functions_1d)

BUMP = smooth_functions_1d()[1]
GAUSS = TestFunction(lambda X: np.exp(-X[:, 0] ** 2 / 2), 1, 1.0, {("nonnegative",)}, name="gauss")
ORIGIN = TestFunction(lambda X: (X[:, 0] == 0).astype(float), 1, 1.0, {("nonnegative",)})
IND_LEFT = TestFunction(lambda X: (X[:, 0] <= 0).astype(float), 1, 1.0, {("nonnegative",)},
                        [(0, 0.0)])


def test_registry():
    assert len(EXAMPLE_IDS) == 8
    with pytest.raises(NotInCatalogue):
        get_example("nope")
    assert get_example("sticky") is get_example("sticky")
    assert get_example("sticky", "intrinsic").id == "sticky@intrinsic"


# --------------------------------------------------------------------------- eval_Pt


def test_uniform_shift():
    assert eval_Pt("uniform", 1.0, BUMP, [3.0]) == pytest.approx(float(BUMP.values([[2.0]])[0]), abs=1e-15)


@pytest.mark.parametrize("s", [0.1, 0.5, 2.0])
def test_sticky_atom_at_origin(s):
    assert eval_Pt("sticky", s, ORIGIN, [0.0]) == pytest.approx(math.exp(-s), abs=1e-12)


def test_sticky_transition_mass():
    # the atom at the origin plus the continuous part integrate to one for 0 <= x < t
    ex = get_example("sticky")
    for x, t in [(0.0, 0.5), (0.3, 1.0), (0.9, 3.0)]:
        atom = eval_Pt("sticky", t, ORIGIN, [x])
        assert atom == pytest.approx(math.exp(x - t), abs=1e-12)
        assert ex.pt(t, constant(1.0), [[x]])[0] == pytest.approx(1.0, abs=1e-12)


def test_pure_jump_identity_q():
    ex = PureJump(np.eye(3))
    f = ex.test_functions()[4]
    X = ex.space.coords
    for t in (0.0, 0.4, 5.0):
        assert np.allclose(ex.pt(t, f, X), f.values(X), atol=1e-12)


def test_pure_jump_semigroup_matches_matrix_exponential():
    ex = get_example("pure_jump")
    f = ex.test_functions()[5]
    for t in (0.3, 1.0, 4.0):
        want = expm(ex.lam * t * (ex.q - np.eye(3))) @ f.values(ex.space.coords)
        assert np.allclose(ex.pt(t, f, ex.space.coords), want, atol=1e-11)


def test_pure_jump50_is_stochastic():
    ex = get_example("pure_jump50")
    assert len(ex.probe_points()) >= 20
    assert np.allclose(ex.pt(3.0, constant(1.0), ex.space.coords), 1.0, atol=1e-9)


def test_brownian_heat_oracle():
    # E exp(-(x+B_t)^2/2) = exp(-x^2/(2(1+t))) / sqrt(1+t)
    ex = get_example("brownian")
    for t in (0.1, 1.0, 3.0):
        for x in (-2.0, 0.0, 1.3):
            want = math.exp(-x * x / (2 * (1 + t))) / math.sqrt(1 + t)
            assert ex.pt(t, GAUSS, [[x]])[0] == pytest.approx(want, abs=1e-7)


def test_brownian_resolvent_oracle():
    ex = get_example("brownian")
    a = 1.5
    c = math.sqrt(2 * a)
    for x in (-1.0, 0.0, 2.5):
        h = lambda y: math.exp(-c * abs(x - y)) / c * math.exp(-y * y / 8)
        want = integrate.quad(h, -np.inf, x)[0] + integrate.quad(h, x, np.inf)[0]
        assert ex.ua(a, BUMP, [[x]])[0] == pytest.approx(want, abs=1e-8)


def test_brownian2_resolvent_oracle():
    # d = 2, f = exp(-|x|^2/2): P_t f(0) = 1/(1+t), so U^a f(0) = int e^{-at}/(1+t) dt
    ex = get_example("brownian2")
    g = TestFunction(lambda X: np.exp(-np.sum(X ** 2, axis=1) / 2), 2, 1.0)
    want, _ = integrate.quad(lambda t: math.exp(-t) / (1 + t), 0, np.inf)
    assert ex.ua(1.0, g, [[0.0, 0.0]])[0] == pytest.approx(want, abs=1e-4)


def test_absorbing_brownian_origin_is_absorbing():
    ex = get_example("absorbing_brownian")
    assert ex.pt(2.0, ORIGIN, [[0.0]])[0] == 1.0
    assert ex.pt(2.0, ORIGIN, [[0.5]])[0] == 0.0
    assert ex.ua(2.0, ORIGIN, [[0.0]])[0] == pytest.approx(0.5)
    assert ex.pt(1.0, GAUSS, [[1.0]])[0] == pytest.approx(get_example("brownian").pt(1.0, GAUSS, [[1.0]])[0])


def test_fork_branches_equally():
    ex = get_example("fork")
    f = TestFunction(lambda X: X[:, 0] + 3 * X[:, 1] + 10, 2, 30.0)
    assert ex.pt(1.0, f, [[1.5, 0.0]])[0] == pytest.approx(10.5)
    up = ex.pt(2.0, TestFunction(lambda X: (X[:, 1] > 0).astype(float), 2, 1.0), [[1.5, 0.0]])[0]
    assert up == pytest.approx(0.5)
    assert ex.pt(1.0, f, [[0.0, 1.0]])[0] == pytest.approx(16.0)
    assert ex.pt(1.0, f, [[0.0, -1.0]])[0] == pytest.approx(4.0)


def test_out_of_domain():
    with pytest.raises(OutOfDomain):
        eval_Pt("fork", 1.0, constant(1.0, 2), [1.0, 1.0])
    with pytest.raises(OutOfDomain):
        eval_Ua("severed", 1.0, BUMP, [-0.5])
    with pytest.raises(OutOfDomain):
        eval_Pt("pure_jump", 1.0, BUMP, [0.5])


# --------------------------------------------------------------------------- eval_Ua


@pytest.mark.parametrize("eid", EXAMPLE_IDS)
def test_resolvent_of_constant(eid):
    ex = get_example(eid)
    X = ex.probe_points()
    for a in (0.5, 3.0):
        assert np.allclose(ex.ua(a, constant(1.0, ex.dim), X), 1 / a, atol=1e-6)


def test_uniform_resolvent_of_indicator():
    assert eval_Ua("uniform", 1.0, IND_LEFT, [1.0]) == pytest.approx(math.exp(-1), abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 10), st.integers(0, 4))
def test_severed_glues_zero_and_minus_one(alpha, k):
    ex = get_example("severed")
    f = ex.test_functions()[k]
    assert ex.ua(alpha, f, [[0.0]])[0] == pytest.approx(ex.ua(alpha, f, [[-1.0]])[0], abs=1e-12)


def test_collapse_resolvent_is_constant():
    ex = get_example("collapse")
    X = ex.probe_points()
    v = ex.ua(2.0, BUMP, X)
    assert np.ptp(v) == 0.0
    want, _ = integrate.quad(lambda y: math.exp(-y * y / 2 - y * y / 8), -5, 5)
    z = math.sqrt(2 * math.pi) * (1 - 2 * 2.866515718791939e-07)
    assert v[0] == pytest.approx(want / z / 2.0, abs=1e-10)
    assert np.allclose(ex.pt(0.0, BUMP, X), 2.0 * v)


def test_fork_resolvent_against_laplace_quadrature():
    ex = get_example("fork")
    f = TestFunction(lambda X: np.exp(-(X[:, 0] ** 2 + X[:, 1] ** 2) / 8), 2, 1.0)
    for x in ([1.5, 0.0], [0.0, 0.7], [0.0, -2.0], [0.0, 0.0]):
        want, _ = integrate.quad(lambda t: math.exp(-t) * ex.pt(t, f, [x])[0], 0, 60,
                                 points=[x[0]], limit=400)
        assert ex.ua(1.0, f, [x])[0] == pytest.approx(want, abs=1e-8)


@pytest.mark.parametrize("eid", ["sticky", "fork", "absorbing_brownian"])
def test_intrinsic_resolvent_matches_original(eid):
    # U'g(psi(x)) = U(g o psi)(x) for g defined on the intrinsic coordinates
    ex, ei = get_example(eid), get_example(eid, "intrinsic")
    g = TestFunction(lambda Y: 1 / (1 + np.sum(Y ** 2, axis=1)), ei.dim, 1.0)
    f = TestFunction(lambda X: g.values(ex.psi(X)), ex.dim, 1.0)
    X = ex.probe_points()
    assert np.allclose(ei.ua(1.0, g, ex.psi(X)), ex.ua(1.0, f, X), atol=1e-8)
    assert np.allclose(ei.pt(0.7, g, ex.psi(X)), ex.pt(0.7, f, X), atol=1e-12)


def test_intrinsic_stochastic():
    for eid in ("sticky", "fork", "absorbing_brownian", "collapse", "severed"):
        ei = get_example(eid, "intrinsic")
        X = ei.probe_points()
        assert np.allclose(ei.pt(1.3, constant(1.0, ei.dim), X), 1.0, atol=1e-9), eid
        assert np.allclose(ei.ua(2.0, constant(1.0, ei.dim), X), 0.5, atol=1e-6), eid


# --------------------------------------------------------------------------- generator pairs


def test_uniform_generator_pair():
    g = TestFunction(lambda X: np.exp(-X[:, 0] ** 2), 1, 1.0, name="gauss")
    assert check_generator_pair("uniform", g, 1.0) < 1e-5


def test_brownian_generator_pair():
    assert check_generator_pair("brownian", GAUSS, 2.0) < 1e-4


def test_sticky_side_condition():
    g = TestFunction(lambda X: np.exp(-(X[:, 0] - 1) ** 2), 1, 1.0, name="tilted")
    with pytest.raises(SideConditionViolated):
        check_generator_pair("sticky", g, 1.0)
    assert check_generator_pair("sticky", GAUSS, 1.0) < 1e-5


@pytest.mark.parametrize("eid", EXAMPLE_IDS)
def test_catalogued_generator_pairs(eid):
    ex = get_example(eid)
    for p in ex.generator_pairs():
        if p.expect_valid:
            assert check_generator_pair(ex, p.g, p.alpha) < 1e-5, p.name
        else:
            with pytest.raises(SideConditionViolated):
                check_generator_pair(ex, p.g, p.alpha)


def test_pure_jump_generator_pair_exact():
    ex = get_example("pure_jump")
    p = ex.generator_pairs()[0]
    assert check_generator_pair(ex, p.g, p.alpha) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 4.0), st.floats(-4.0, 4.0))
def test_uniform_semigroup_property(t, x):
    ex = get_example("uniform")
    assert ex.pt(t, BUMP, [[x]])[0] == pytest.approx(float(BUMP.values([[x - t]])[0]), abs=1e-14)
