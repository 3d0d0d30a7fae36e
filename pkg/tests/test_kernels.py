import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from smpkit.errors import MismatchedSpace, Overflow, UnboundedFunction
from smpkit.kernels import (GridStateSpace, SignedKernel, StatePoint, Tag, TestFunction,
                            apply, apply_function, compose, constant, identity, norm, power)

SPACE5 = GridStateSpace([StatePoint((float(i),)) for i in range(5)])
entries5 = arrays(np.float64, (5, 5), elements=st.floats(-3, 3, allow_nan=False))


def stochastic(space, rng):
    m = rng.random((len(space), len(space)))
    return SignedKernel(space, m / m.sum(axis=1, keepdims=True))


def test_state_point_rejects_nonfinite():
    with pytest.raises(ValueError):
        StatePoint((np.nan,))
    p = StatePoint((-1.0,), "closure_added", "0-")
    assert p.tag is Tag.CLOSURE_ADDED and p.dim == 1


def test_space_invariants():
    with pytest.raises(ValueError):
        GridStateSpace([StatePoint((0.0,)), StatePoint((1e-13,))])
    with pytest.raises(ValueError):
        GridStateSpace([StatePoint((0.0,)), StatePoint((1.0,))], cell_weights=[1.0, 0.0])
    with pytest.raises(ValueError):
        GridStateSpace([StatePoint((0.0,)), StatePoint((1.0, 2.0))])
    g = GridStateSpace.uniform_1d(-1, 1, 0.5)
    assert len(g) == 5 and g.index_of(0.26) == 3


def test_permutation_squares_to_identity():
    sp = GridStateSpace([StatePoint((0.0,)), StatePoint((1.0,))])
    q = SignedKernel(sp, [[0, 1], [1, 0]])
    assert np.array_equal(compose(q, q).entries, np.eye(2))


def test_identity_is_unit_and_power_zero():
    k = SignedKernel(SPACE5, np.arange(25.0).reshape(5, 5) - 12)
    assert np.array_equal(compose(identity(SPACE5), k).entries, k.entries)
    assert np.array_equal(compose(k, identity(SPACE5)).entries, k.entries)
    assert np.array_equal(power(k, 0).entries, np.eye(5))
    with pytest.raises(ValueError):
        power(k, -1)


def test_power_associativity_and_stochastic_closure():
    rng = np.random.default_rng(3)
    q = stochastic(SPACE5, rng)
    assert power(q, 7).is_stochastic()
    k = SignedKernel(SPACE5, rng.normal(size=(5, 5)))
    p2 = power(k, 2)
    assert np.max(np.abs(power(k, 4).entries - compose(p2, p2).entries)) <= 1e-12 * norm(k) ** 4


def test_norm_examples():
    rng = np.random.default_rng(0)
    assert norm(stochastic(SPACE5, rng)) == pytest.approx(1.0, abs=1e-12)
    assert norm(SignedKernel(SPACE5, np.zeros((5, 5)))) == 0.0


def test_random_submultiplicativity_and_triangle():
    # brute-force oracle over 100 random signed kernels
    rng = np.random.default_rng(11)
    for _ in range(100):
        a = SignedKernel(SPACE5, rng.normal(size=(5, 5)))
        b = SignedKernel(SPACE5, rng.normal(size=(5, 5)))
        assert norm(compose(a, b)) <= norm(a) * norm(b) + 1e-12
        assert norm(a + b) <= norm(a) + norm(b) + 1e-12


@settings(max_examples=60, deadline=None)
@given(entries5, entries5, st.floats(-4, 4))
def test_algebra_properties(e1, e2, c):
    a, b = SignedKernel(SPACE5, e1), SignedKernel(SPACE5, e2)
    assert norm(a @ b) <= norm(a) * norm(b) + 1e-12
    assert norm(a + b) <= norm(a) + norm(b) + 1e-12
    assert norm(c * a) == pytest.approx(abs(c) * norm(a), rel=1e-12, abs=1e-12)
    assert np.array_equal(a.row_tv, np.abs(a.entries).sum(axis=1))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (5, 5), elements=st.floats(0.01, 1)),
       arrays(np.float64, 5, elements=st.floats(-10, 10)))
def test_stochastic_contraction(m, fv):
    k = SignedKernel(SPACE5, m / m.sum(axis=1, keepdims=True))
    assert k.is_stochastic()
    assert np.allclose(apply(k, constant(1.0)), 1.0, atol=1e-12)
    assert np.max(np.abs(apply(k, fv))) <= np.max(np.abs(fv)) + 1e-12
    assert compose(k, k).is_stochastic()


def test_apply_shift_kernel():
    g = GridStateSpace.uniform_1d(0, 4, 1.0)
    shift = np.zeros((5, 5))
    shift[np.arange(5), np.clip(np.arange(5) + 1, 0, 4)] = 1.0
    k = SignedKernel(g, shift)
    f = TestFunction(lambda X: X[:, 0] ** 2)
    assert np.array_equal(apply(k, f), [1, 4, 9, 16, 16])
    kf = apply_function(k, f)
    assert kf([2.0]) == 9.0
    assert np.array_equal(apply(identity(g), f), f.values(g.coords))


def test_errors():
    other = GridStateSpace([StatePoint((float(i) + 0.5,)) for i in range(5)])
    a = identity(SPACE5)
    with pytest.raises(MismatchedSpace):
        compose(a, identity(other))
    big = SignedKernel(SPACE5, np.full((5, 5), 1e200))
    with pytest.raises(Overflow):
        compose(big, big)
    with pytest.raises(Overflow):
        SignedKernel(SPACE5, np.full((5, 5), np.inf))
    with pytest.raises(UnboundedFunction), np.errstate(divide="ignore"):
        apply(a, TestFunction(lambda X: 1 / (X[:, 0] - 2)))


def test_density_and_csv_round_trip():
    g = GridStateSpace.uniform_1d(0, 1, 0.25)
    k = SignedKernel.from_density(g, np.full((5, 5), 0.8))
    assert np.allclose(k.entries.sum(axis=1), 0.8 * 1.25)
    back = SignedKernel.from_csv(g, k.to_csv())
    assert np.array_equal(back.entries, k.entries)
    with pytest.raises(ValueError):
        k.entries[0, 0] = 1.0
