"""Closed-form transition functions and resolvents for the eight worked examples.

Every example evaluates ``P_t f`` and ``U^alpha f`` for arbitrary bounded
``TestFunction`` arguments, so resolvents can be composed with themselves.
Integrals along the deterministic motion are computed with
:func:`smpkit.quadrature.laplace_line`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import stats

from .errors import NotInCatalogue, OutOfDomain, SideConditionViolated
from .kernels import (GridStateSpace, SignedKernel, StatePoint, Tag, TestFunction,
                      as_points, table_function)
from .quadrature import (Branch, gauss_legendre, gauss_normal_expectation,
                         laplace_line, materialize)
from .resolvent import ResolventSpec, SemigroupSpec

INF = np.inf
DIFF_STEP = 1e-5
LAPLACIAN_STEP = 1e-3
SIDE_TOL = 1e-9


# ---------------------------------------------------------------------------
# catalogued test functions


def _tf(fn, dim=1, bound=1.0, breaks=(), name=""):
    return TestFunction(fn, dim, bound, {("nonnegative",)}, breaks, name)


def smooth_functions_1d() -> list[TestFunction]:
    return [
        _tf(lambda X: np.ones(len(X)), name="const(1)"),
        _tf(lambda X: np.exp(-X[:, 0] ** 2 / 8), name="bump"),
        _tf(lambda X: 0.5 * (1 + np.tanh(X[:, 0] / 2)), name="sigmoid"),
        _tf(lambda X: 1 / (1 + X[:, 0] ** 2 / 4), name="lorentz"),
        _tf(lambda X: np.exp(-(X[:, 0] - 1) ** 2 / 18), name="bump_wide"),
    ]


def drift_functions_1d() -> list[TestFunction]:
    fs = smooth_functions_1d()[:4]
    fs.append(_tf(lambda X: (X[:, 0] <= 0).astype(float), breaks=[(0, 0.0)],
                  name="ind(x<=0)"))
    fs.append(_tf(lambda X: (X[:, 0] < -0.5) * np.exp(-X[:, 0] ** 2 / 8),
                  breaks=[(0, -0.5)], name="ind(x<-0.5)*bump"))
    return fs


def fork_functions() -> list[TestFunction]:
    r2 = lambda X: X[:, 0] ** 2 + X[:, 1] ** 2
    return [
        _tf(lambda X: np.ones(len(X)), 2, name="const(1)"),
        _tf(lambda X: np.exp(-r2(X) / 8), 2, name="bump"),
        _tf(lambda X: 0.5 * (1 + np.tanh((X[:, 0] + X[:, 1]) / 2)), 2, name="sigmoid"),
        _tf(lambda X: 1 / (1 + r2(X) / 4), 2, name="lorentz"),
        _tf(lambda X: (X[:, 1] > 0).astype(float), 2, breaks=[(1, 0.0)], name="ind(up)"),
    ]


TIE = 1e-12


def _before(a, b):
    """a < b for event times, with times closer than TIE treated as equal."""
    return a < b - TIE * np.maximum(1.0, np.abs(b))


def _approach():
    """Two null sequences: 1/m^2 (m <= 200) and 2^-m (m <= 34)."""
    m = np.arange(1, 201, dtype=float)
    return 1 / m ** 2, 2.0 ** -np.arange(1, 35, dtype=float)


@dataclass
class GeneratorPair:
    name: str
    g: TestFunction
    alpha: float
    expect_valid: bool = True


# ---------------------------------------------------------------------------


class Example:
    """Base class: subclasses implement ``_pt`` and ``_ua`` on validated rows."""

    id = ""
    title = ""
    dim = 1
    p0_identity = True
    resolvent_kind = "closed_form"
    semigroup_kind = "closed_form"
    drift = True

    # -- domain -----------------------------------------------------------
    def contains(self, X) -> np.ndarray:
        return np.ones(as_points(X, self.dim).shape[0], bool)

    def _check(self, X) -> np.ndarray:
        X = as_points(X, self.dim)
        bad = ~self.contains(X)
        if np.any(bad):
            raise OutOfDomain(f"{X[bad][0].tolist()} is not in the state space of {self.id}")
        return X

    # -- evaluators ---------------------------------------------------------
    def pt(self, t, f: TestFunction, X) -> np.ndarray:
        X = self._check(X)
        t = np.broadcast_to(np.asarray(t, dtype=float), (X.shape[0],)).copy()
        if np.any(t < 0):
            raise ValueError("t must be nonnegative")
        return self._pt(t, f, X)

    def ua(self, alpha: float, f: TestFunction, X) -> np.ndarray:
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        return self._ua(float(alpha), f, self._check(X))

    def pt_times(self, ts, f, x) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        return self.pt(ts, f, np.repeat(as_points(x, self.dim), ts.size, axis=0))

    def time_breaks(self, f, x) -> list:
        return []

    def structural_breaks(self) -> list:
        return []

    def pt_out_breaks(self, t, f) -> list:
        shifted = [(a, v + s) for a, v in f.breaks for s in (t, -t)]
        return list(f.breaks) + shifted + self.structural_breaks() + \
            [(a, v + s) for a, v in self.structural_breaks() for s in (t, -t)]

    def ua_out_breaks(self, f) -> list:
        return list(f.breaks) + self.structural_breaks()

    # -- materialisation ------------------------------------------------------
    def branches(self) -> list[Branch]:
        return [Branch((0.0,), (1.0,), -INF, INF)]

    def locate(self, X):
        return np.zeros(X.shape[0], int), X[:, 0].copy()

    def materialize(self, f: TestFunction) -> TestFunction:
        brs = self.branches()
        if not brs:
            return f
        return materialize(f, brs, self.locate)

    # -- specs --------------------------------------------------------------
    def semigroup(self) -> SemigroupSpec:
        return SemigroupSpec(self.pt, self.semigroup_kind, self.dim, self.time_breaks,
                             lambda t, f: self.pt_out_breaks(t, f), self.pt_times,
                             self.materialize, self.p0_identity)

    def resolvent(self) -> ResolventSpec:
        return ResolventSpec(self.ua, self.resolvent_kind, self.dim, self.ua_out_breaks,
                             getattr(self, "grid_kernel", None), self.materialize)

    # -- catalogue ------------------------------------------------------------
    def probe_points(self) -> np.ndarray:
        return np.linspace(-5, 5, 21)[:, None]

    def test_functions(self) -> list[TestFunction]:
        return drift_functions_1d()

    def coord_functions(self) -> list[TestFunction]:
        return [TestFunction(lambda X: X[:, 0], 1, None, {("coordinate", 0)}, name="e1")]

    def psi(self, X) -> np.ndarray:
        X = as_points(X, self.dim)
        return np.stack([e.values(X) for e in self.coord_functions()], axis=1)

    def psi_inverse(self, Xi) -> np.ndarray:
        """One original point in each fibre of the embedding."""
        return np.array(as_points(Xi, self.dim), dtype=float)

    def closure_points(self) -> list[StatePoint]:
        return []

    def approach_sequences(self) -> dict:
        """closure point label -> list of original-space sequences converging to it."""
        return {}

    def velocity(self, X) -> np.ndarray:
        return np.full_like(as_points(X, self.dim), -1.0)

    def generator_f(self, g: TestFunction, alpha: float) -> TestFunction:
        """f = alpha g - D_v g for deterministic drift with velocity v."""
        ex = self

        def fn(X):
            v = ex.velocity(X)
            return alpha * g.values(X) - ex._directional(g, X, v)

        return TestFunction(fn, self.dim, None, breaks=g.breaks + tuple(self.structural_breaks()),
                            name=f"gen[{alpha:g}]{g.name}")

    def _directional(self, g, X, v, h=DIFF_STEP) -> np.ndarray:
        """Branch-aware derivative of g along v.

        Central where both neighbours share the branch of x, otherwise a
        second-order one-sided quotient taken on the side that does.
        """
        idx0, _ = self.locate(X)
        fwd, back = X + h * v, X - h * v
        ok_fwd = self._same_branch(idx0, fwd)
        ok_back = self._same_branch(idx0, back)
        g0 = g.values(X)
        central = (g.values(fwd) - g.values(back)) / (2 * h)
        forward = (-3 * g0 + 4 * g.values(fwd) - g.values(X + 2 * h * v)) / (2 * h)
        backward = (3 * g0 - 4 * g.values(back) + g.values(X - 2 * h * v)) / (2 * h)
        return np.where(ok_fwd & ok_back, central, np.where(ok_back, backward, forward))

    def _same_branch(self, idx0, Y) -> np.ndarray:
        ok = self.contains(Y)
        idx = np.full(Y.shape[0], -2)
        if np.any(ok):
            idx[ok], _ = self.locate(Y[ok])
        return ok & (idx == idx0)

    def side_conditions(self, g: TestFunction) -> None:
        return None

    def generator_pairs(self) -> list[GeneratorPair]:
        return []


# ---------------------------------------------------------------------------
# uniform motion


class Uniform(Example):
    id = "uniform"
    title = "Uniform motion"

    def _pt(self, t, f, X):
        return f.values(X - t[:, None])

    def _ua(self, alpha, f, X):
        return laplace_line(f, X, [-1.0], alpha, INF)

    def time_breaks(self, f, x):
        return [x[0] - v for a, v in f.breaks if a == 0]

    def generator_pairs(self):
        g = _tf(lambda X: np.exp(-X[:, 0] ** 2), name="gauss")
        g2 = _tf(lambda X: 0.5 * (1 + np.tanh(X[:, 0])), name="tanh")
        return [GeneratorPair("gauss", g, 1.0), GeneratorPair("tanh", g2, 0.5)]

    @lru_cache(maxsize=8)
    def grid_space(self, radius: float = 10.0, h: float = 0.01) -> GridStateSpace:
        return GridStateSpace.uniform_1d(-radius, radius, h)

    def grid_kernel(self, alpha: float, radius: float = 10.0, h: float = 0.01) -> SignedKernel:
        """U^alpha on a uniform grid with hat-function (linear split) cell masses.

        Splitting the exponential displacement law between the two neighbouring
        grid points keeps its mean exact; mass leaving the grid goes to cell 0.
        """
        space = self.grid_space(radius, h)
        n = len(space)
        u = alpha * h
        m0 = 1 + math.expm1(-u) / u
        c = 4 * math.sinh(u / 2) ** 2 / u
        k = np.arange(n)
        with np.errstate(under="ignore"):
            row = np.where(k == 0, m0, c * np.exp(-u * k))
        i = k[:, None]
        j = k[None, :]
        e = np.where(j <= i, row[np.clip(i - j, 0, n - 1)], 0.0)
        e[:, 0] += 1 - e.sum(axis=1)
        return SignedKernel(space, e / alpha)


# ---------------------------------------------------------------------------
# Brownian motion


class Brownian(Example):
    title = "Brownian motion"
    drift = False

    def __init__(self, d: int = 1):
        self.dim = d
        self.id = "brownian" if d == 1 else f"brownian{d}"
        self.resolvent_kind = "closed_form" if d == 1 else "quadrature"

    def _pt(self, t, f, X):
        out = np.empty(X.shape[0])
        zero = t == 0
        out[zero] = f.values(X[zero])
        if np.any(~zero):
            out[~zero] = gauss_normal_expectation(f, X[~zero], np.sqrt(t[~zero]))
        return out

    def _ua(self, alpha, f, X):
        if self.dim == 1:
            c = math.sqrt(2 * alpha)
            return (laplace_line(f, X, [-1.0], c, INF) + laplace_line(f, X, [1.0], c, INF)) / c
        u, w = np.polynomial.laguerre.laggauss(48)
        acc = np.zeros(X.shape[0])
        for ui, wi in zip(u, w):
            acc += wi * gauss_normal_expectation(f, X, math.sqrt(ui / alpha))
        return acc / alpha

    def test_functions(self):
        fs = smooth_functions_1d()
        if self.dim == 1:
            return fs
        r2 = lambda X: np.sum(X ** 2, axis=1)
        return [
            _tf(lambda X: np.ones(len(X)), 2, name="const(1)"),
            _tf(lambda X: np.exp(-r2(X) / 8), 2, name="bump"),
            _tf(lambda X: 0.5 * (1 + np.tanh((X[:, 0] - X[:, 1]) / 3)), 2, name="sigmoid"),
            _tf(lambda X: 1 / (1 + r2(X) / 9), 2, name="lorentz"),
            _tf(lambda X: np.exp(-((X[:, 0] - 1) ** 2 + X[:, 1] ** 2) / 18), 2, name="bump_wide"),
        ]

    def probe_points(self):
        if self.dim == 1:
            return np.linspace(-5, 5, 21)[:, None]
        a = np.linspace(-3, 3, 5)
        return np.array([(x, y) for x in a for y in a])[:21]

    def branches(self):
        return super().branches() if self.dim == 1 else []

    def coord_functions(self):
        return [TestFunction(lambda X, i=i: X[:, i], self.dim, None, {("coordinate", i)},
                             name=f"e{i + 1}") for i in range(self.dim)]

    def laplacian(self, g, X, h=LAPLACIAN_STEP):
        out = np.zeros(X.shape[0])
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = h
            out += (-g.values(X + 2 * e) + 16 * g.values(X + e) - 30 * g.values(X)
                    + 16 * g.values(X - e) - g.values(X - 2 * e)) / (12 * h * h)
        return out

    def generator_f(self, g, alpha):
        return TestFunction(lambda X: alpha * g.values(X) - 0.5 * self.laplacian(g, X),
                            self.dim, None, name=f"gen[{alpha:g}]{g.name}")

    def generator_pairs(self):
        g = _tf(lambda X: np.exp(-np.sum(X ** 2, axis=1) / 2), self.dim, name="gauss")
        return [GeneratorPair("gauss", g, 2.0)]


# ---------------------------------------------------------------------------
# pure jump process


class PureJump(Example):
    title = "Pure jump process"
    drift = False
    POISSON_TAIL = 1e-12

    def __init__(self, q=None, lam: float = 2.0, name: str = "pure_jump"):
        if q is None:
            q = [[0.1, 0.6, 0.3], [0.4, 0.2, 0.4], [0.5, 0.3, 0.2]]
        self.q = np.asarray(q, dtype=float)
        self.lam = float(lam)
        self.id = name
        self.m = self.q.shape[0]
        self.space = GridStateSpace([StatePoint((i,)) for i in range(self.m)])

    @classmethod
    def birth_death(cls, m: int = 50, p_up: float = 0.45, lam: float = 2.0):
        q = np.zeros((m, m))
        for i in range(m):
            q[i, min(i + 1, m - 1)] += p_up
            q[i, max(i - 1, 0)] += 1 - p_up
        return cls(q, lam, name="pure_jump50")

    def contains(self, X):
        X = as_points(X, 1)
        k = np.rint(X[:, 0])
        return (np.abs(X[:, 0] - k) < 1e-9) & (k >= 0) & (k < self.m)

    def vector(self, f) -> np.ndarray:
        return f.values(self.space.coords)

    def _rows(self, X):
        return np.rint(X[:, 0]).astype(int)

    def q_powers(self, f, n_max: int) -> np.ndarray:
        v = self.vector(f)
        out = [v]
        for _ in range(n_max):
            v = self.q @ v
            out.append(v)
        return np.array(out)  # (n_max + 1, m)

    def _poisson_weights(self, lt: np.ndarray) -> np.ndarray:
        """Poisson(lt) probabilities for n = 0..n_max, built by the ratio recursion."""
        top = float(lt.max())
        n_max = int(stats.poisson.isf(self.POISSON_TAIL, top)) + 2 if top > 0 else 0
        ratios = lt[:, None] / np.arange(1, n_max + 1)[None, :]
        w = np.empty((lt.size, n_max + 1))
        w[:, 0] = np.exp(-lt)
        w[:, 1:] = w[:, :1] * np.cumprod(ratios, axis=1)
        return w

    def _pt(self, t, f, X):
        w = self._poisson_weights(self.lam * t)
        Qn = self.q_powers(f, w.shape[1] - 1)
        return np.einsum("kn,nk->k", w, Qn[:, self._rows(X)])

    def pt_times(self, ts, f, x):
        x = self._check(x)
        w = self._poisson_weights(self.lam * np.asarray(ts, dtype=float))
        return w @ self.q_powers(f, w.shape[1] - 1)[:, self._rows(x)[0]]

    def resolvent_matrix(self, alpha: float) -> np.ndarray:
        A = (alpha + self.lam) * np.eye(self.m) - self.lam * self.q
        return np.linalg.inv(A)

    def _ua(self, alpha, f, X):
        u = np.linalg.solve((alpha + self.lam) * np.eye(self.m) - self.lam * self.q, self.vector(f))
        return u[self._rows(X)]

    def grid_kernel(self, alpha: float) -> SignedKernel:
        return SignedKernel(self.space, self.resolvent_matrix(alpha))

    def semigroup_matrix(self, t: float) -> np.ndarray:
        from scipy.linalg import expm
        return expm(self.lam * t * (self.q - np.eye(self.m)))

    def branches(self):
        return []

    def probe_points(self):
        return self.space.coords[:: max(1, self.m // 25)]

    def test_functions(self):
        rng = np.random.default_rng(7)
        fs = [table_function(np.ones(self.m), "const(1)"),
              table_function(np.arange(self.m) / max(1, self.m - 1), "ramp"),
              table_function((np.arange(self.m) == self.m - 1).astype(float), "ind(last)"),
              table_function(np.exp(-np.arange(self.m) / 3), "decay")]
        fs += [table_function(rng.uniform(0, 1, self.m), f"table{k}") for k in range(2)]
        return [f.with_claims(("nonnegative",)) for f in fs]

    def generator_f(self, g, alpha):
        gv = self.vector(g)
        fv = self.lam * (gv - self.q @ gv) + alpha * gv
        return table_function(fv, f"gen[{alpha:g}]{g.name}")

    def generator_pairs(self):
        g = table_function(np.cos(np.arange(self.m)) + 2, "cos+2")
        return [GeneratorPair("cos+2", g, 1.0)]


# ---------------------------------------------------------------------------
# uniform motion with sticky origin


class Sticky(Example):
    id = "sticky"
    title = "Uniform motion with sticky origin"

    def _pt(self, t, f, X):
        x = X[:, 0]
        out = f.values(X - t[:, None])
        m = (x >= 0) & (x < t)
        if np.any(m):
            L = t[m] - x[m]
            start = (x[m] - t[m])[:, None]
            atom = np.exp(-L) * f.values(np.zeros((1, 1)))[0]
            out[m] = atom + laplace_line(f, start, [1.0], 1.0, L)
        return out

    def pt_times(self, ts, f, x):
        ts = np.asarray(ts, dtype=float)
        x0 = float(as_points(x, 1)[0, 0])
        self._check([[x0]])
        out = f.values(x0 - ts[:, None])
        m = (x0 >= 0) & (ts > x0)
        if not np.any(m):
            return out
        L = ts[m] - x0
        # H(L) = int_0^L e^v f(-v) dv accumulated over the sorted L grid
        cuts = [-v for a, v in f.breaks if a == 0 and v < 0]
        grid = np.unique(np.concatenate([[0.0], L, [c for c in cuts if c < L.max()]]))
        z, w = gauss_legendre(6)
        a, b = grid[:-1], grid[1:]
        v = (a + b)[:, None] / 2 + (b - a)[:, None] / 2 * z
        vals = f.values(-v.reshape(-1, 1)).reshape(v.shape)
        piece = np.sum((b - a)[:, None] / 2 * w * np.exp(v - b[:, None]) * vals, axis=1)
        # running H scaled by e^{-L} to stay O(1)
        H = np.zeros(grid.size)
        for k in range(piece.size):
            H[k + 1] = H[k] * math.exp(a[k] - b[k]) + piece[k]
        scaled = H[np.searchsorted(grid, L)]
        out[m] = np.exp(-L) * f.values(np.zeros((1, 1)))[0] + scaled
        return out

    def _ua(self, alpha, f, X):
        x = X[:, 0]
        out = np.empty(X.shape[0])
        neg = x < 0
        if np.any(neg):
            out[neg] = laplace_line(f, X[neg], [-1.0], alpha, INF)
        pos = ~neg
        if np.any(pos):
            f0 = f.values(np.zeros((1, 1)))[0]
            tail = laplace_line(f, np.zeros((1, 1)), [-1.0], alpha, INF)[0]
            xp = x[pos]
            out[pos] = (np.exp(-alpha * xp) / (1 + alpha) * (f0 + tail)
                        + laplace_line(f, X[pos], [-1.0], alpha, xp))
        return out

    def structural_breaks(self):
        return [(0, 0.0)]

    def time_breaks(self, f, x):
        out = [x[0] - v for a, v in f.breaks if a == 0]
        if x[0] >= 0:
            out.append(x[0])
        return out

    def branches(self):
        return [Branch((0.0,), (1.0,), -INF, 0.0), Branch((0.0,), (1.0,), 0.0, INF)]

    def locate(self, X):
        return (X[:, 0] >= 0).astype(int), X[:, 0].copy()

    def coord_functions(self):
        return [TestFunction(lambda X: np.where(X[:, 0] >= 0, X[:, 0], X[:, 0] - 1), 1, None,
                             {("coordinate", 0)}, name="e")]

    def psi_inverse(self, Xi):
        x = as_points(Xi, 1)[:, 0]
        return np.where(x >= 0, x, x + 1)[:, None]

    def closure_points(self):
        return [StatePoint((-1.0,), Tag.CLOSURE_ADDED, "0-")]

    def approach_sequences(self):
        a, b = _approach()
        return {"0-": [-a[:, None], -b[:, None]]}

    def side_conditions(self, g):
        h = DIFF_STEP
        g0 = g.values([[0.0]])[0]
        dplus = (-3 * g0 + 4 * g.values([[h]])[0] - g.values([[2 * h]])[0]) / (2 * h)
        gminus = 2 * g.values([[-h]])[0] - g.values([[-2 * h]])[0]
        if abs(dplus - (g0 - gminus)) > SIDE_TOL:
            raise SideConditionViolated("g'(0+) = g(0) - g(0-)",
                                        f"g'(0+)={dplus:.6g}, g(0)-g(0-)={g0 - gminus:.6g}")

    def generator_pairs(self):
        smooth = _tf(lambda X: np.exp(-X[:, 0] ** 2), name="gauss")
        jump = _tf(lambda X: np.where(X[:, 0] >= 0, 0.5 + 0.2 * X[:, 0] * np.exp(-X[:, 0]),
                                      0.3 + 0.2 * X[:, 0] * np.exp(X[:, 0])),
                   breaks=[(0, 0.0)], name="split")
        bad = _tf(lambda X: np.exp(-(X[:, 0] - 1) ** 2), name="gauss(x-1)")
        return [GeneratorPair("gauss", smooth, 1.0), GeneratorPair("split", jump, 2.0),
                GeneratorPair("gauss(x-1)", bad, 1.0, expect_valid=False)]


# ---------------------------------------------------------------------------
# severed uniform motion


class Severed(Example):
    id = "severed"
    title = "Uniform motion with a jump"

    def contains(self, X):
        x = as_points(X, 1)[:, 0]
        return (x <= -1) | (x >= 0)

    def _pt(self, t, f, X):
        x = X[:, 0]
        shift = np.where((x >= 0) & _before(x, t), t + 1, t)
        return f.values(X - shift[:, None])

    def _ua(self, alpha, f, X):
        x = X[:, 0]
        out = np.empty(X.shape[0])
        neg = x <= -1
        if np.any(neg):
            out[neg] = laplace_line(f, X[neg], [-1.0], alpha, INF)
        pos = ~neg
        if np.any(pos):
            xp = x[pos]
            tail = laplace_line(f, [[-1.0]], [-1.0], alpha, INF)[0]
            out[pos] = np.exp(-alpha * xp) * tail + laplace_line(f, X[pos], [-1.0], alpha, xp)
        return out

    def structural_breaks(self):
        return [(0, 0.0), (0, -1.0)]

    def time_breaks(self, f, x):
        out = [x[0] - v for a, v in f.breaks if a == 0]
        out += [x[0] - 1 - v for a, v in f.breaks if a == 0]
        if x[0] >= 0:
            out.append(x[0])
        return out

    def branches(self):
        return [Branch((0.0,), (1.0,), -INF, -1.0), Branch((0.0,), (1.0,), 0.0, INF)]

    def locate(self, X):
        return (X[:, 0] >= 0).astype(int), X[:, 0].copy()

    def probe_points(self):
        return np.concatenate([np.linspace(-6, -1, 11), np.linspace(0, 5, 11)])[:, None]

    def coord_functions(self):
        return [TestFunction(lambda X: np.where(X[:, 0] >= 0, X[:, 0], X[:, 0] + 1), 1, None,
                             {("coordinate", 0)}, name="e")]

    def psi_inverse(self, Xi):
        x = as_points(Xi, 1)[:, 0]
        return np.where(x >= 0, x, x - 1)[:, None]

    def side_conditions(self, g):
        gap = abs(g.values([[-1.0]])[0] - g.values([[0.0]])[0])
        if gap > SIDE_TOL:
            raise SideConditionViolated("g(-1) = g(0)", f"|g(-1) - g(0)| = {gap:.3g}")

    def generator_pairs(self):
        good = _tf(lambda X: np.where(X[:, 0] >= 0, 1 / (1 + X[:, 0] ** 2),
                                      1 / (1 + (X[:, 0] + 1) ** 2)), breaks=[(0, 0.0)],
                   name="lorentz-glued")
        bad = _tf(lambda X: np.exp(-X[:, 0] ** 2), name="gauss")
        return [GeneratorPair("lorentz-glued", good, 1.0),
                GeneratorPair("gauss", bad, 1.0, expect_valid=False)]


# ---------------------------------------------------------------------------
# fork in the road


class Fork(Example):
    id = "fork"
    title = "Uniform motion with fork in the road"
    dim = 2

    def contains(self, X):
        X = as_points(X, 2)
        x, y = X[:, 0], X[:, 1]
        return ((y == 0) & (x >= 0)) | ((x == 0) & (y != 0))

    @staticmethod
    def _parts(X):
        x, y = X[:, 0], X[:, 1]
        R = (y == 0) & (x >= 0)
        return R, (~R) & (y > 0), (~R) & (y < 0)

    def _pt(self, t, f, X):
        R, Up, Lo = self._parts(X)
        x, y = X[:, 0], X[:, 1]
        out = np.empty(X.shape[0])
        pts = np.zeros_like(X)
        pts[Up, 1] = y[Up] + t[Up]
        pts[Lo, 1] = y[Lo] - t[Lo]
        straight = R & ~_before(x, t)
        pts[straight, 0] = x[straight] - t[straight]
        out[Up | Lo | straight] = f.values(pts[Up | Lo | straight])
        split = R & _before(x, t)
        if np.any(split):
            d = t[split] - x[split]
            up = np.stack([np.zeros_like(d), d], axis=1)
            out[split] = 0.5 * f.values(up) + 0.5 * f.values(-up)
        return out

    def _ua(self, alpha, f, X):
        R, Up, Lo = self._parts(X)
        out = np.empty(X.shape[0])
        if np.any(Up):
            out[Up] = laplace_line(f, X[Up], [0.0, 1.0], alpha, INF)
        if np.any(Lo):
            out[Lo] = laplace_line(f, X[Lo], [0.0, -1.0], alpha, INF)
        if np.any(R):
            x = X[R, 0]
            origin = np.zeros((1, 2))
            branch = 0.5 * (laplace_line(f, origin, [0.0, 1.0], alpha, INF)[0]
                            + laplace_line(f, origin, [0.0, -1.0], alpha, INF)[0])
            out[R] = laplace_line(f, X[R], [-1.0, 0.0], alpha, x) + np.exp(-alpha * x) * branch
        return out

    def structural_breaks(self):
        return [(0, 0.0), (1, 0.0)]

    def time_breaks(self, f, x):
        if x[1] == 0:
            return [x[0]] + [x[0] - v for a, v in f.breaks if a == 0] + \
                [x[0] + abs(v) for a, v in f.breaks if a == 1]
        return [abs(v - x[1]) for a, v in f.breaks if a == 1]

    def branches(self):
        o = (0.0, 0.0)
        return [Branch(o, (1.0, 0.0), 0.0, INF), Branch(o, (0.0, 1.0), 0.0, INF),
                Branch(o, (0.0, -1.0), 0.0, INF)]

    def locate(self, X):
        R, Up, Lo = self._parts(X)
        onaxis = (X[:, 0] == 0)
        idx = np.where(R, 0, np.where(Up & onaxis, 1, np.where(Lo & onaxis, 2, -1)))
        s = np.where(R, X[:, 0], np.abs(X[:, 1]))
        return idx, s

    def velocity(self, X):
        X = as_points(X, 2)
        R, Up, Lo = self._parts(X)
        v = np.zeros_like(X)
        v[R, 0] = -1.0
        v[Up, 1] = 1.0
        v[Lo, 1] = -1.0
        return v

    def probe_points(self):
        R = [(x, 0.0) for x in np.linspace(0, 4, 9)]
        ys = [0.25, 0.5, 1.0, 1.5, 2.0, 3.0]
        return np.array(R + [(0.0, y) for y in ys] + [(0.0, -y) for y in ys])

    def test_functions(self):
        return fork_functions()

    def coord_functions(self):
        def e2(X):
            x, y = X[:, 0], X[:, 1]
            R = (y == 0) & (x >= 0)
            return np.where(R, 0.0, np.where(y > 0, y + 1, y - 1))

        return [TestFunction(lambda X: np.where(X[:, 1] == 0, X[:, 0], 0.0), 2, None,
                             {("coordinate", 0)}, name="e1"),
                TestFunction(e2, 2, None, {("coordinate", 1)}, name="e2")]

    def psi_inverse(self, Xi):
        Xi = as_points(Xi, 2)
        e1, e2 = Xi[:, 0], Xi[:, 1]
        y = np.where(e2 > 0, e2 - 1, np.where(e2 < 0, e2 + 1, 0.0))
        return np.stack([np.where(e2 == 0, e1, 0.0), y], axis=1)

    def closure_points(self):
        return [StatePoint((0.0, 1.0), Tag.CLOSURE_ADDED, "fork_up"),
                StatePoint((0.0, -1.0), Tag.CLOSURE_ADDED, "fork_down")]

    def approach_sequences(self):
        a, b = _approach()
        up1 = np.stack([np.zeros_like(a), a], axis=1)
        up2 = np.stack([np.zeros_like(b), b], axis=1)
        return {"fork_up": [up1, up2], "fork_down": [-up1, -up2]}

    def side_conditions(self, g):
        h = DIFF_STEP
        g0 = g.values([[0.0, 0.0]])[0]
        up = 2 * g.values([[0.0, h]])[0] - g.values([[0.0, 2 * h]])[0]
        dn = 2 * g.values([[0.0, -h]])[0] - g.values([[0.0, -2 * h]])[0]
        if abs(g0 - 0.5 * (up + dn)) > SIDE_TOL:
            raise SideConditionViolated("g(0,0) = (g(0,0+) + g(0,0-)) / 2",
                                        f"g(0,0)={g0:.6g}, average={(up + dn) / 2:.6g}")

    def generator_pairs(self):
        def g(X):
            x, y = X[:, 0], X[:, 1]
            R = (y == 0) & (x >= 0)
            return np.where(R, np.exp(-x ** 2),
                            np.where(y > 0, 0.6 + 0.6 * np.exp(-y ** 2), 0.4 + 0.4 * np.exp(-y ** 2)))

        good = _tf(g, 2, breaks=[(1, 0.0)], name="branch-avg")
        bad = _tf(lambda X: np.where(X[:, 1] > 0, 2.0, 1.0), 2, 2.0, breaks=[(1, 0.0)],
                  name="unbalanced")
        return [GeneratorPair("branch-avg", good, 1.0),
                GeneratorPair("unbalanced", bad, 1.0, expect_valid=False)]


# ---------------------------------------------------------------------------
# Brownian motion with an absorbing state


class AbsorbingBrownian(Brownian):
    title = "Brownian motion with an absorbing state"

    def __init__(self, d: int = 1):
        super().__init__(d)
        self.id = "absorbing_brownian" if d == 1 else f"absorbing_brownian{d}"

    @staticmethod
    def _origin(X):
        return np.all(X == 0, axis=1)

    def _pt(self, t, f, X):
        o = self._origin(X)
        out = np.empty(X.shape[0])
        out[o] = f.values(X[o])
        if np.any(~o):
            out[~o] = super()._pt(t[~o], f, X[~o])
        return out

    def _ua(self, alpha, f, X):
        o = self._origin(X)
        out = np.empty(X.shape[0])
        out[o] = f.values(X[o]) / alpha
        if np.any(~o):
            out[~o] = super()._ua(alpha, f, X[~o])
        return out

    def locate(self, X):
        idx, s = super().locate(X)
        idx[self._origin(X)] = -1
        return idx, s

    def coord_functions(self):
        fs = super().coord_functions()
        fs.append(TestFunction(lambda X: np.all(X == 0, axis=1).astype(float), self.dim,
                               1.0, {("coordinate", self.dim)}, name=f"e{self.dim + 1}"))
        return fs

    def psi_inverse(self, Xi):
        Xi = as_points(Xi, self.dim + 1)
        X = Xi[:, :-1].copy()
        X[Xi[:, -1] == 1] = 0.0
        return X

    def closure_points(self):
        return [StatePoint((0.0,) * (self.dim + 1), Tag.CLOSURE_ADDED, "origin_hyperplane")]

    def approach_sequences(self):
        a, b = _approach()
        e1 = np.zeros((a.size, self.dim))
        e1[:, 0] = a
        e2 = np.zeros((b.size, self.dim))
        e2[:, 0] = -b
        return {"origin_hyperplane": [e1, e2]}

    def generator_f(self, g, alpha):
        base = super().generator_f(g, alpha)

        def fn(X):
            out = base.values(X)
            o = self._origin(X)
            out[o] = alpha * g.values(X[o])
            return out

        return TestFunction(fn, self.dim, None, name=base.name)


# ---------------------------------------------------------------------------
# instantaneous jump to a limiting distribution


class Collapse(Example):
    id = "collapse"
    title = "Instantaneous jump to limiting distribution"
    p0_identity = False
    drift = False
    LO, HI = -5.0, 5.0

    def __init__(self):
        self.Z = stats.norm.cdf(self.HI) - stats.norm.cdf(self.LO)

    def pi_mean(self, f: TestFunction) -> float:
        """Integral of f against the standard normal truncated to [-5, 5]."""
        cuts = [v for a, v in f.breaks if a == 0 and self.LO < v < self.HI]
        edges = np.unique(np.concatenate([np.linspace(self.LO, self.HI, 41), cuts]))
        z, w = gauss_legendre(12)
        a, b = edges[:-1], edges[1:]
        y = (a + b)[:, None] / 2 + (b - a)[:, None] / 2 * z
        wt = (b - a)[:, None] / 2 * w * stats.norm.pdf(y) / self.Z
        return float(np.sum(wt * f.values(y.reshape(-1, 1)).reshape(y.shape)))

    def pi_sample(self, rng, size=None):
        return stats.truncnorm.rvs(self.LO, self.HI, size=size, random_state=rng)

    def _pt(self, t, f, X):
        return np.full(X.shape[0], self.pi_mean(f))

    def _ua(self, alpha, f, X):
        return np.full(X.shape[0], self.pi_mean(f) / alpha)

    def pt_out_breaks(self, t, f):
        return []

    def ua_out_breaks(self, f):
        return []

    def branches(self):
        return []

    def coord_functions(self):
        return [TestFunction(lambda X: np.ones(X.shape[0]), 1, 1.0, {("coordinate", 0)}, name="e")]

    def psi_inverse(self, Xi):
        return np.zeros((as_points(Xi, 1).shape[0], 1))

    def velocity(self, X):
        return np.zeros_like(as_points(X, 1))


# ---------------------------------------------------------------------------
# intrinsic-space versions of the examples whose completion adds points


class StickyIntrinsic(Example):
    """Sticky motion on E' = (-inf, -1] u [0, inf): the hold ends with a jump to -1."""

    id = "sticky@intrinsic"
    title = "Sticky origin on the intrinsic space"

    def contains(self, X):
        x = as_points(X, 1)[:, 0]
        return (x <= -1) | (x >= 0)

    def _pt(self, t, f, X):
        x = X[:, 0]
        out = f.values(X - t[:, None])
        m = (x >= 0) & (x < t)
        if np.any(m):
            L = t[m] - x[m]
            f0 = f.values(np.zeros((1, 1)))[0]
            out[m] = np.exp(-L) * f0 + laplace_line(f, (-1 - L)[:, None], [1.0], 1.0, L)
        nonneg_pass = (x >= 0) & (x >= t)
        out[nonneg_pass] = f.values(X[nonneg_pass] - t[nonneg_pass, None])
        return out

    def _ua(self, alpha, f, X):
        x = X[:, 0]
        out = np.empty(X.shape[0])
        neg = x <= -1
        if np.any(neg):
            out[neg] = laplace_line(f, X[neg], [-1.0], alpha, INF)
        pos = ~neg
        if np.any(pos):
            f0 = f.values(np.zeros((1, 1)))[0]
            tail = laplace_line(f, [[-1.0]], [-1.0], alpha, INF)[0]
            xp = x[pos]
            out[pos] = np.exp(-alpha * xp) / (1 + alpha) * (f0 + tail) + \
                laplace_line(f, X[pos], [-1.0], alpha, xp)
        return out

    def structural_breaks(self):
        return [(0, 0.0), (0, -1.0)]

    def time_breaks(self, f, x):
        return [x[0]] + [x[0] - v for a, v in f.breaks if a == 0] + \
            [x[0] - 1 - v for a, v in f.breaks if a == 0]

    def branches(self):
        return [Branch((0.0,), (1.0,), -INF, -1.0), Branch((0.0,), (1.0,), 0.0, INF)]

    def locate(self, X):
        return (X[:, 0] >= 0).astype(int), X[:, 0].copy()

    def probe_points(self):
        return np.concatenate([np.linspace(-6, -1, 11), np.linspace(0, 5, 11)])[:, None]


class ForkIntrinsic(Fork):
    """Fork on E': the path enters (0, +-1) at the branch time and never sits at (0, 0)."""

    id = "fork@intrinsic"
    title = "Fork in the road on the intrinsic space"

    def contains(self, X):
        X = as_points(X, 2)
        x, y = X[:, 0], X[:, 1]
        return ((y == 0) & (x >= 0)) | ((x == 0) & (np.abs(y) >= 1))

    def _pt(self, t, f, X):
        R, Up, Lo = self._parts(X)
        x, y = X[:, 0], X[:, 1]
        out = np.empty(X.shape[0])
        pts = np.zeros_like(X)
        pts[Up, 1] = y[Up] + t[Up]
        pts[Lo, 1] = y[Lo] - t[Lo]
        straight = R & _before(t, x)
        pts[straight, 0] = x[straight] - t[straight]
        sel = Up | Lo | straight
        out[sel] = f.values(pts[sel])
        split = R & ~straight
        if np.any(split):
            d = 1 + t[split] - x[split]
            up = np.stack([np.zeros_like(d), d], axis=1)
            out[split] = 0.5 * f.values(up) + 0.5 * f.values(-up)
        return out

    def _ua(self, alpha, f, X):
        R, Up, Lo = self._parts(X)
        out = np.empty(X.shape[0])
        if np.any(Up):
            out[Up] = laplace_line(f, X[Up], [0.0, 1.0], alpha, INF)
        if np.any(Lo):
            out[Lo] = laplace_line(f, X[Lo], [0.0, -1.0], alpha, INF)
        if np.any(R):
            x = X[R, 0]
            branch = 0.5 * (laplace_line(f, [[0.0, 1.0]], [0.0, 1.0], alpha, INF)[0]
                            + laplace_line(f, [[0.0, -1.0]], [0.0, -1.0], alpha, INF)[0])
            out[R] = laplace_line(f, X[R], [-1.0, 0.0], alpha, x) + np.exp(-alpha * x) * branch
        return out

    def probe_points(self):
        R = [(x, 0.0) for x in np.linspace(0, 4, 9)]
        ys = [1.0, 1.25, 1.5, 2.0, 3.0, 4.0]
        return np.array(R + [(0.0, y) for y in ys] + [(0.0, -y) for y in ys])

    def branches(self):
        return [Branch((0.0, 0.0), (1.0, 0.0), 0.0, INF), Branch((0.0, 1.0), (0.0, 1.0), 0.0, INF),
                Branch((0.0, -1.0), (0.0, -1.0), 0.0, INF)]

    def locate(self, X):
        idx, s = super().locate(X)
        return idx, np.where(idx > 0, s - 1, s)


class AbsorbingIntrinsic(Example):
    """Brownian motion on the hyperplane x_{d+1} = 0 plus the absorbing point e_{d+1}."""

    title = "Absorbing Brownian motion on the intrinsic space"
    drift = False

    def __init__(self, d: int = 1):
        self.d = d
        self.dim = d + 1
        self.id = "absorbing_brownian@intrinsic"
        self._bm = Brownian(d)

    def contains(self, X):
        X = as_points(X, self.dim)
        plane = X[:, -1] == 0
        point = (X[:, -1] == 1) & np.all(X[:, :-1] == 0, axis=1)
        return plane | point

    def _lift(self, f):
        return TestFunction(lambda Y: f.values(np.hstack([Y, np.zeros((len(Y), 1))])), self.d)

    def _pt(self, t, f, X):
        iso = X[:, -1] == 1
        out = np.empty(X.shape[0])
        out[iso] = f.values(X[iso])
        if np.any(~iso):
            out[~iso] = self._bm._pt(t[~iso], self._lift(f), X[~iso, :-1])
        return out

    def _ua(self, alpha, f, X):
        iso = X[:, -1] == 1
        out = np.empty(X.shape[0])
        out[iso] = f.values(X[iso]) / alpha
        if np.any(~iso):
            out[~iso] = self._bm._ua(alpha, self._lift(f), X[~iso, :-1])
        return out

    def branches(self):
        return []

    def probe_points(self):
        plane = np.hstack([self._bm.probe_points(), np.zeros((len(self._bm.probe_points()), 1))])
        point = np.zeros((1, self.dim))
        point[0, -1] = 1.0
        return np.vstack([plane, point])

    def test_functions(self):
        return [_tf(lambda X: np.exp(-np.sum(X[:, :-1] ** 2, axis=1) / 8) * (1 - X[:, -1]) + X[:, -1],
                    self.dim, name="bump+atom"),
                _tf(lambda X: 1 / (1 + np.sum(X ** 2, axis=1)), self.dim, name="lorentz")]


class SinglePoint(Example):
    id = "collapse@intrinsic"
    title = "Collapsed single-point space"
    drift = False

    def contains(self, X):
        return np.all(as_points(X, 1) == 1, axis=1)

    def _pt(self, t, f, X):
        return f.values(X)

    def _ua(self, alpha, f, X):
        return f.values(X) / alpha

    def branches(self):
        return []

    def probe_points(self):
        return np.ones((1, 1))


# ---------------------------------------------------------------------------
# registry


EXAMPLE_IDS = ("uniform", "brownian", "pure_jump", "sticky", "severed", "fork",
               "absorbing_brownian", "collapse")

_FACTORIES: dict[str, Callable[[], Example]] = {
    "uniform": Uniform,
    "brownian": lambda: Brownian(1),
    "brownian2": lambda: Brownian(2),
    "pure_jump": PureJump,
    "pure_jump50": PureJump.birth_death,
    "sticky": Sticky,
    "severed": Severed,
    "fork": Fork,
    "absorbing_brownian": lambda: AbsorbingBrownian(1),
    "absorbing_brownian2": lambda: AbsorbingBrownian(2),
    "collapse": Collapse,
}

_INTRINSIC: dict[str, Callable[[], Example]] = {
    "uniform": Uniform,
    "brownian": lambda: Brownian(1),
    "brownian2": lambda: Brownian(2),
    "pure_jump": PureJump,
    "pure_jump50": PureJump.birth_death,
    "sticky": StickyIntrinsic,
    "severed": Uniform,
    "fork": ForkIntrinsic,
    "absorbing_brownian": lambda: AbsorbingIntrinsic(1),
    "collapse": SinglePoint,
}

_CACHE: dict[tuple, Example] = {}


def get_example(example_id: str, space: str = "original") -> Example:
    table = _FACTORIES if space == "original" else _INTRINSIC
    if example_id not in table:
        raise NotInCatalogue(f"unknown example {example_id!r} on the {space} space")
    key = (example_id, space)
    if key not in _CACHE:
        _CACHE[key] = table[example_id]()
    return _CACHE[key]


def all_example_ids() -> list[str]:
    return list(_FACTORIES)


def eval_Pt(example_id: str, t, f: TestFunction, x):
    ex = get_example(example_id)
    v = ex.pt(t, f, x)
    return float(v[0]) if v.size == 1 else v


def eval_Ua(example_id: str, alpha: float, f: TestFunction, x):
    ex = get_example(example_id)
    v = ex.ua(alpha, f, x)
    return float(v[0]) if v.size == 1 else v


def check_generator_pair(example_id: str, g: TestFunction, alpha: float, probes=None) -> float:
    """max |U^alpha f - g| over probes, where f is assembled from g by differentiation."""
    ex = get_example(example_id) if isinstance(example_id, str) else example_id
    ex.side_conditions(g)
    f = ex.generator_f(g, alpha)
    X = ex.probe_points() if probes is None else as_points(probes, ex.dim)
    return float(np.max(np.abs(ex.ua(alpha, f, X) - g.values(X))))
