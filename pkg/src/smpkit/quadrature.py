"""Vectorised quadrature primitives used by the closed-form evaluators.

Everything here integrates piecewise smooth bounded functions along straight
lines in the state space, splitting panels at the break hyperplanes declared
by the integrand.  Accuracy is ~1e-12 for the smooth fixtures in the catalogue.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as C
from numpy.polynomial import hermite, legendre

from .kernels import TestFunction, as_points

TAIL_EXPONENT = 40.0  # exp(-40) ~ 4e-18 truncation of half-line integrals
N_PANELS = 48
GL_ORDER = 12
ONE_SIDED = 1e-11


@lru_cache(maxsize=None)
def gauss_legendre(m: int):
    return legendre.leggauss(m)


@lru_cache(maxsize=None)
def gauss_hermite(m: int):
    """Nodes/weights for E[g(Z)], Z ~ N(0, 1)."""
    z, w = hermite.hermgauss(m)
    return np.sqrt(2.0) * z, w / np.sqrt(np.pi)


def _break_params(f: TestFunction, starts: np.ndarray, direction: np.ndarray) -> np.ndarray:
    cols = []
    for axis, value in f.breaks:
        d = direction[axis]
        if d != 0:
            cols.append((value - starts[:, axis]) / d)
    if not cols:
        return np.empty((starts.shape[0], 0))
    return np.stack(cols, axis=1)


def laplace_line(f: TestFunction, starts, direction, rate: float, lengths,
                 extra_breaks=None, n_panels: int = N_PANELS,
                 order: int = GL_ORDER) -> np.ndarray:
    """Integral of exp(-rate s) f(start + s * direction) over 0 <= s <= length.

    ``lengths`` may contain ``inf``; half-lines are truncated where the weight
    drops below exp(-40).  Returns one value per start point.
    """
    starts = as_points(starts, f.dim)
    n = starts.shape[0]
    direction = np.asarray(direction, dtype=float).reshape(-1)
    lengths = np.broadcast_to(np.asarray(lengths, dtype=float), (n,))
    cap = TAIL_EXPONENT / rate if rate > 0 else np.inf
    span = np.minimum(lengths, cap)
    if not np.all(np.isfinite(span)):
        raise ValueError("unbounded integration range with zero decay rate")
    live = span > 0
    if not np.all(live):
        # zero-length rows contribute nothing; skip evaluating f there
        out = np.zeros(n)
        if np.any(live):
            eb = None if extra_breaks is None else \
                np.asarray(extra_breaks, dtype=float).reshape(n, -1)[live]
            out[live] = laplace_line(f, starts[live], direction, rate, span[live], eb,
                                     n_panels, order)
        return out
    grid = (np.arange(n_panels + 1) / n_panels) ** 2
    edges = span[:, None] * grid[None, :]
    extra = _break_params(f, starts, direction)
    if extra_breaks is not None:
        eb = np.asarray(extra_breaks, dtype=float).reshape(n, -1)
        extra = np.concatenate([extra, eb], axis=1)
    if extra.shape[1]:
        extra = np.clip(extra, 0.0, span[:, None])
        edges = np.sort(np.concatenate([edges, extra], axis=1), axis=1)
    a, b = edges[:, :-1], edges[:, 1:]
    z, w = gauss_legendre(order)
    mid, half = (a + b) / 2, (b - a) / 2
    s = mid[..., None] + half[..., None] * z  # (n, panels, order)
    weights = half[..., None] * w * np.exp(-rate * s)
    pts = starts[:, None, None, :] + s[..., None] * direction
    vals = f.values(pts.reshape(-1, f.dim)).reshape(s.shape)
    return np.sum(weights * vals, axis=(1, 2))


WIDE_SCALE = 1.0


@lru_cache(maxsize=None)
def _normal_panels(reach: float = 9.0, width: float = 0.5, m: int = GL_ORDER):
    """Composite Gauss-Legendre nodes/weights for E[g(Z)] on |z| <= reach."""
    z0, w0 = gauss_legendre(m)
    left = np.arange(-reach, reach, width)
    z = (left[:, None] + width / 2 * (1 + z0[None, :])).ravel()
    w = (np.broadcast_to(width / 2 * w0, (left.size, m))).ravel()
    return z, w * np.exp(-z * z / 2) / np.sqrt(2 * np.pi)


def gauss_normal_expectation(f: TestFunction, centers, scale, order: int = 32) -> np.ndarray:
    """E f(x + scale * Z) with Z standard normal in f.dim dimensions.

    ``scale`` is a scalar or one value per center.
    """
    X = as_points(centers, f.dim)
    n, d = X.shape
    scale = np.broadcast_to(np.asarray(scale, dtype=float), (n,))
    wide = scale > WIDE_SCALE
    if d == 1 and np.any(wide):
        # Hermite nodes get too sparse for wide kernels; use panels in z instead
        out = np.empty(n)
        if np.any(~wide):
            out[~wide] = gauss_normal_expectation(f, X[~wide], scale[~wide], order)
        z, w = _normal_panels()
        pts = X[wide, 0][:, None] + scale[wide][:, None] * z[None, :]
        out[wide] = f.values(pts.reshape(-1, 1)).reshape(pts.shape) @ w
        return out
    z, w = gauss_hermite(order)
    if d == 1:
        Z, W = z[:, None], w
    else:
        grids = np.meshgrid(*([z] * d), indexing="ij")
        Z = np.stack([g.ravel() for g in grids], axis=1)
        W = np.prod(np.meshgrid(*([w] * d), indexing="ij"), axis=0).ravel()
    pts = X[:, None, :] + scale[:, None, None] * Z[None, :, :]
    vals = f.values(pts.reshape(-1, d)).reshape(n, -1)
    return vals @ W


def simpson(fn, a: float, b: float, h: float, breaks=()) -> float:
    """Composite Simpson rule for a vectorised ``fn`` on [a, b], split at breaks."""
    cuts = sorted({a, b, *[c for c in breaks if a < c < b]})
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        m = max(2, int(np.ceil((hi - lo) / h)))
        m += m % 2
        t = np.linspace(lo, hi, m + 1)
        # one-sided limits at the piece ends, so jumps at breaks are not sampled
        nudge = ONE_SIDED * (hi - lo)
        t[0], t[-1] = lo + nudge, hi - nudge
        y = fn(t)
        hh = (hi - lo) / m
        total += hh / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum())
    return float(total)


# ---------------------------------------------------------------------------
# materialisation: piecewise Chebyshev interpolants on 1-d branches


@dataclass(frozen=True)
class Branch:
    """Half-line or line ``origin + s * direction`` with s in [lo, hi]."""

    origin: tuple
    direction: tuple
    lo: float
    hi: float


CHEB_ORDER = 16
_CORE, _CORE_WIDTH, _GROWTH, _REACH = 16.0, 0.25, 1.15, 150.0


def _panel_edges(lo: float, hi: float, cuts) -> np.ndarray:
    right = [0.0]
    x = 0.0
    w = _CORE_WIDTH
    while x < _REACH:
        x += w
        right.append(x)
        if x >= _CORE:
            w *= _GROWTH
    right = np.array(right)
    edges = np.concatenate([-right[:0:-1], right])
    lo_c, hi_c = max(lo, -_REACH), min(hi, _REACH)
    edges = edges[(edges > lo_c) & (edges < hi_c)]
    inner = [c for c in cuts if lo_c < c < hi_c]
    return np.unique(np.concatenate([[lo_c], edges, inner, [hi_c]]))


@lru_cache(maxsize=None)
def _cheb_basis(m: int):
    k = np.arange(m)
    u = np.cos(np.pi * (k + 0.5) / m)
    inv = np.linalg.inv(C.chebvander(u, m - 1))
    return u, inv


class _BranchFit:
    def __init__(self, f: TestFunction, branch: Branch, m: int):
        o = np.asarray(branch.origin, float)
        d = np.asarray(branch.direction, float)
        cuts = [(v - o[a]) / d[a] for a, v in f.breaks if d[a] != 0]
        self.edges = _panel_edges(branch.lo, branch.hi, cuts)
        u, inv = _cheb_basis(m)
        a, b = self.edges[:-1], self.edges[1:]
        s = (a + b)[:, None] / 2 + (b - a)[:, None] / 2 * u[None, :]
        vals = f.values(o + s.reshape(-1, 1) * d).reshape(s.shape)
        self.coef = vals @ inv.T
        self.m = m
        self.cuts = np.asarray(sorted(cuts), dtype=float)

    def on_cut(self, s: np.ndarray) -> np.ndarray:
        if self.cuts.size == 0:
            return np.zeros(s.shape, bool)
        d = np.min(np.abs(s[:, None] - self.cuts[None, :]), axis=1)
        return d <= 1e-12 * np.maximum(1.0, np.abs(s))

    def __call__(self, s: np.ndarray) -> np.ndarray:
        e = self.edges
        s = np.clip(s, e[0], e[-1])
        k = np.clip(np.searchsorted(e, s, side="right") - 1, 0, len(e) - 2)
        u = (2 * s - e[k] - e[k + 1]) / (e[k + 1] - e[k])
        V = C.chebvander(u, self.m - 1)
        return np.einsum("ij,ij->i", V, self.coef[k])


def materialize(f: TestFunction, branches, locate, m: int = CHEB_ORDER) -> TestFunction:
    """Replace ``f`` by a cheap piecewise Chebyshev interpolant.

    ``locate(X)`` returns ``(branch_index, s)`` arrays; index -1 marks points
    that are evaluated with the original ``f``, as are points lying exactly on
    a declared break (the interpolant only knows one-sided limits there).
    """
    fits = [_BranchFit(f, br, m) for br in branches]

    def fn(X):
        idx, s = locate(X)
        idx = idx.copy()
        out = np.empty(X.shape[0])
        for i, fit in enumerate(fits):
            sel = idx == i
            if np.any(sel):
                exact = np.zeros(X.shape[0], bool)
                exact[sel] = fit.on_cut(s[sel])
                idx[exact] = -1
                sel &= ~exact
                out[sel] = fit(s[sel])
        rest = idx < 0
        if np.any(rest):
            out[rest] = f.values(X[rest])
        return out

    return TestFunction(fn, f.dim, f.sup_bound, f.claims, f.breaks, f.name)
