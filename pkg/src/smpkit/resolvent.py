"""Numerical calculus linking transition functions and resolvents."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (CompositionUnavailable, KernelUnavailable, NegativeFunction,
                     NotMonotone, OrderTooHigh, TruncationTooLoose)
from .kernels import SignedKernel, TestFunction, as_points
from .quadrature import simpson


def _identity(f):
    return f


@dataclass
class SemigroupSpec:
    """``eval_Ptf(t, f, X)`` returns P_t f at the rows of X (t broadcasts)."""

    eval_Ptf: Callable
    kind: str
    dim: int = 1
    time_breaks: Callable = lambda f, x: ()
    out_breaks: Callable = lambda t, f: f.breaks
    eval_times: Callable | None = None
    materialize: Callable = _identity
    p0_identity: bool = True

    def __call__(self, t, f: TestFunction, x):
        X = as_points(x, self.dim)
        v = self.eval_Ptf(t, f, X)
        return float(v[0]) if X.shape[0] == 1 else v

    def at_times(self, ts, f: TestFunction, x) -> np.ndarray:
        """P_t f(x) for one point and many times."""
        ts = np.asarray(ts, dtype=float)
        X = as_points(x, self.dim)
        if self.eval_times is not None:
            return self.eval_times(ts, f, X[0])
        return self.eval_Ptf(ts, f, np.repeat(X, ts.size, axis=0))

    def apply(self, t: float, f: TestFunction) -> TestFunction:
        return TestFunction(lambda X: self.eval_Ptf(t, f, X), f.dim, f.sup_bound,
                            breaks=self.out_breaks(t, f), name=f"P[{t:g}]{f.name}")


@dataclass
class ResolventSpec:
    """``eval_Uaf(alpha, f, X)`` returns U^alpha f at the rows of X."""

    eval_Uaf: Callable | None
    kind: str
    dim: int = 1
    out_breaks: Callable = lambda f: f.breaks
    kernel: Callable[[float], SignedKernel] | None = None
    materialize: Callable = _identity
    accepts_functions: bool = True

    def __call__(self, alpha: float, f: TestFunction, x):
        X = as_points(x, self.dim)
        v = self.values(alpha, f, X)
        return float(v[0]) if X.shape[0] == 1 else v

    def values(self, alpha: float, f: TestFunction, X) -> np.ndarray:
        if self.eval_Uaf is None:
            K = self.grid_kernel(alpha)
            idx = [K.space.index_of(x) for x in as_points(X, self.dim)]
            return (K.entries @ f.values(K.space.coords))[idx]
        return self.eval_Uaf(alpha, f, as_points(X, self.dim))

    def apply(self, alpha: float, f: TestFunction, materialize: bool = False) -> TestFunction:
        if not self.accepts_functions:
            raise CompositionUnavailable("resolvent cannot act on non-catalogued functions")
        bound = None if f.sup_bound is None else f.sup_bound / alpha
        g = TestFunction(lambda X: self.values(alpha, f, X), f.dim, bound,
                         {("nonnegative",), ("in_C_plus",), ("alpha_supermedian", float(alpha))}
                         if _nonnegative(f) else (),
                         self.out_breaks(f), name=f"U[{alpha:g}]{f.name}")
        return self.materialize(g) if materialize else g

    def grid_kernel(self, alpha: float) -> SignedKernel:
        if self.kernel is None:
            raise KernelUnavailable("no grid kernel was built for this resolvent")
        return self.kernel(alpha)


def _nonnegative(f: TestFunction) -> bool:
    return ("nonnegative",) in f.claims or ("in_C_plus",) in f.claims \
        or f.certificate is not None


@dataclass
class MonotonicityReport:
    beta_grid: np.ndarray
    orders_checked: int
    sign_violations: list = field(default_factory=list)
    tolerance: float = 0.0

    @property
    def completely_monotone(self) -> bool:
        return not self.sign_violations

    @property
    def verdict(self) -> str:
        if self.completely_monotone:
            return f"completely monotone up to order {self.orders_checked} on grid"
        return f"{len(self.sign_violations)} sign violations"


# ---------------------------------------------------------------------------


def truncation_bound(alpha: float, T: float, sup_f: float) -> float:
    return math.exp(-alpha * T) * sup_f / alpha


def laplace_forward(P: SemigroupSpec, alpha: float, f: TestFunction, x,
                    T: float | None = None, h: float = 1e-3,
                    tol: float | None = None, with_bound: bool = False):
    """Composite Simpson approximation of int_0^T exp(-alpha t) P_t f(x) dt."""
    if alpha <= 0 or h <= 0:
        raise ValueError("alpha and h must be positive")
    T = max(10.0 / alpha, 40.0) if T is None else T
    if T <= 0:
        raise ValueError("horizon must be positive")
    xp = as_points(x, P.dim)[0]
    sup = f.sup_bound if f.sup_bound is not None else 1.0
    bound = truncation_bound(alpha, T, sup)
    if tol is not None and bound > tol:
        raise TruncationTooLoose(f"truncation bound {bound:.3g} exceeds {tol:.3g}")
    breaks = [b for b in P.time_breaks(f, xp) if 0 < b < T]
    value = simpson(lambda ts: np.exp(-alpha * ts) * P.at_times(ts, f, xp), 0.0, T, h, breaks)
    return (value, bound) if with_bound else value


def check_resolvent_identity(U: ResolventSpec, alpha: float, beta: float,
                             f: TestFunction, x) -> np.ndarray | float:
    """|U^b f - U^a f - (a - b) U^a (U^b f)| at x."""
    X = as_points(x, U.dim)
    if alpha == beta:
        r = np.zeros(X.shape[0])
    else:
        inner = U.apply(beta, f, materialize=True)
        ub = U.values(beta, f, X)
        ua = U.values(alpha, f, X)
        uab = U.values(alpha, inner, X)
        r = np.abs(ub - ua - (alpha - beta) * uab)
    return float(r[0]) if X.shape[0] == 1 else r


def is_alpha_supermedian(f: TestFunction, alpha: float, U: ResolventSpec,
                         beta_grid: Sequence[float], probe_points, tol: float = 1e-9) -> bool:
    X = as_points(probe_points, U.dim)
    fx = f.values(X)
    if np.any(fx < -tol):
        raise NegativeFunction("supermedian test needs a nonnegative function")
    for beta in beta_grid:
        if np.any(fx < (beta - alpha) * U.values(beta, f, X) - tol):
            return False
    return True


def default_beta_grid(alpha: float) -> list[float]:
    base = alpha if alpha > 0 else 1.0
    return [base * 2.0 ** k for k in range(-2, 11)]


def supermedian_limit(f: TestFunction, U: ResolventSpec, x, alpha_schedule=None,
                      beta: float | None = None, check: bool = True) -> float:
    """lim alpha U^alpha f(x) for a beta-supermedian f, along an increasing schedule."""
    beta = f.certificate if beta is None else beta
    beta = 0.0 if beta is None else beta
    sched = [2.0 ** k for k in range(1, 21)] if alpha_schedule is None else list(alpha_schedule)
    X = as_points(x, U.dim)
    vals = np.array([U.values(a, f, X)[0] for a in sched])
    seq = (np.array(sched) - beta) * vals
    if check:
        usable = np.array(sched) > beta
        drops = np.diff(seq[usable])
        if np.any(drops < -1e-7):
            raise NotMonotone("(alpha - beta) U^alpha f(x) decreased along the schedule")
    return float(sched[-1] * vals[-1])


def resolvent_derivative(U: ResolventSpec, f: TestFunction, x, n: int, beta: float) -> float:
    """d^n/dbeta^n U^beta f(x) = (-1)^n n! (U^beta)^{n+1} f(x), via kernel powers."""
    if n > 10:
        raise OrderTooHigh("derivatives above order 10 are not supported")
    K = U.grid_kernel(beta)
    v = f.values(K.space.coords)
    for _ in range(n + 1):
        v = K.entries @ v
    i = K.space.index_of(as_points(x, U.dim)[0])
    return (-1) ** n * math.factorial(n) * float(v[i])


def resolvent_derivative_fd(U: ResolventSpec, f: TestFunction, x, n: int, beta: float,
                            rel_step: float = 1e-3) -> float:
    """Central finite-difference estimate of the same derivative."""
    if n > 10:
        raise OrderTooHigh("derivatives above order 10 are not supported")
    h = rel_step * beta
    X = as_points(x, U.dim)
    if n == 0:
        return float(U.values(beta, f, X)[0])
    ks = np.arange(n + 1)
    coeff = np.array([(-1) ** k * math.comb(n, k) for k in ks], dtype=float)
    pts = beta + (n / 2 - ks) * h
    vals = np.array([U.values(b, f, X)[0] for b in pts])
    return float(coeff @ vals / h ** n)


def complete_monotonicity_check(g: Callable, beta_grid, N: int,
                                tol: float | None = None) -> MonotonicityReport:
    """Sign pattern of forward differences (-1)^n Delta^n g on a uniform grid."""
    grid = np.asarray(beta_grid, dtype=float)
    vals = np.asarray(g(grid), dtype=float) if _vectorised(g) else np.array([g(b) for b in grid])
    tol = 1e-8 * float(np.max(np.abs(vals))) if tol is None else tol
    report = MonotonicityReport(grid, N, [], tol)
    d = vals.copy()
    for n in range(0, N + 1):
        if n:
            d = np.diff(d)
        signed = (-1) ** n * d
        for k in np.nonzero(signed < -tol)[0]:
            report.sign_violations.append((n, float(grid[k]), float(-signed[k])))
    return report


def _vectorised(g) -> bool:
    try:
        out = np.asarray(g(np.array([1.0, 2.0])))
        return out.shape == (2,)
    except Exception:
        return False


def post_widder_invert(U: ResolventSpec, f: TestFunction, x, t: float, n: int) -> float:
    """(n/t)^{n+1} ((U^{n/t})^{n+1} f)(x), the n-th Post-Widder approximant of P_t f(x)."""
    if t <= 0 or n < 1:
        raise ValueError("need t > 0 and n >= 1")
    beta = n / t
    K = U.grid_kernel(beta)
    v = f.values(K.space.coords)
    M = beta * K.entries  # stochastic
    for _ in range(n + 1):
        v = M @ v
    return float(v[K.space.index_of(as_points(x, U.dim)[0])])


def check_chapman_kolmogorov(P: SemigroupSpec, s: float, t: float, f: TestFunction, x):
    X = as_points(x, P.dim)
    inner = P.materialize(P.apply(t, f))
    r = np.abs(P.eval_Ptf(s + t, f, X) - P.eval_Ptf(s, inner, X))
    return float(r[0]) if X.shape[0] == 1 else r


def check_strong_continuity(f: TestFunction, P: SemigroupSpec, t_schedule, probe_points,
                            alpha: float | None = None, g: TestFunction | None = None,
                            tol: float = 1e-3, return_details: bool = False):
    """sup |P_t f - f| along t -> 0, with the envelope (1 - e^{-at})||f|| + t||g|| for f = U^a g."""
    X = as_points(probe_points, P.dim)
    fx = f.values(X)
    gaps, ok_env = [], True
    for t in t_schedule:
        gap = float(np.max(np.abs(P.eval_Ptf(t, f, X) - fx)))
        gaps.append(gap)
        if alpha is not None and g is not None:
            env = (1 - math.exp(-alpha * t)) * np.max(np.abs(fx)) + t * g.sup_on(X)
            ok_env &= gap <= env + 1e-9
    ok = gaps[-1] < tol and ok_env
    return (ok, gaps) if return_details else ok
