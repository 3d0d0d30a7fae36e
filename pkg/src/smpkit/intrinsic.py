"""Embedding into coordinate space, the intrinsic state space and lifted resolvents."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cone import ProbeSequence, probe_library, r_catalogue
from .errors import (CauchyBroken, FiberInconsistent, NotBijective, NotFiberConstant,
                     NotInCatalogue)
from .kernels import GridStateSpace, StatePoint, Tag, TestFunction, as_points
from .zoo import Example, get_example

FIBER_TOL = 1e-9
EXTENSION_TOL = 2e-3


@dataclass
class EmbeddingSpec:
    example_id: str
    coord_functions: list
    closure_points: list
    example: Example = field(repr=False, default=None)
    psi_inverse: Callable | None = field(repr=False, default=None)
    approach: dict = field(repr=False, default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.coord_functions)

    def identify(self, X) -> np.ndarray:
        X = as_points(X, self.example.dim)
        return np.stack([e.values(X) for e in self.coord_functions], axis=1)

    def closure_array(self) -> np.ndarray:
        return np.array([p.coords for p in self.closure_points]).reshape(-1, self.dim)


def embedding_spec(example_id: str) -> EmbeddingSpec:
    ex = get_example(example_id)
    return EmbeddingSpec(ex.id, ex.coord_functions(), ex.closure_points(), ex,
                         ex.psi_inverse, ex.approach_sequences())


def rescaled(spec: EmbeddingSpec, scale: float = 2.0, shift: float = 1.0) -> EmbeddingSpec:
    """Embedding with coordinates a * e_i + b; closure points move accordingly."""
    coords = [TestFunction(lambda X, e=e: scale * e.values(X) + shift, e.dim, None,
                           name=f"{scale:g}*{e.name}+{shift:g}") for e in spec.coord_functions]
    closure = [StatePoint(tuple(scale * c + shift for c in p.coords), p.tag, p.label)
               for p in spec.closure_points]
    inv = spec.psi_inverse
    return EmbeddingSpec(spec.example_id, coords, closure, spec.example,
                         None if inv is None else (lambda Xi: inv((as_points(Xi, spec.dim) - shift) / scale)),
                         spec.approach)


def embed(spec: EmbeddingSpec, x) -> StatePoint:
    if isinstance(x, StatePoint):
        label = x.label
    else:
        label = None
    return StatePoint(tuple(spec.identify(x)[0]), Tag.ORIGINAL, label)


def original_grid(example: Example, radius: float = 5.0, h: float = 0.25) -> np.ndarray:
    """Grid of original-space points used for catalogue-wide checks."""
    eid = example.id.split("@")[0]
    line = np.round(np.arange(-radius, radius + h / 2, h), 12)
    if eid.startswith("pure_jump"):
        return example.space.coords
    if eid == "fork":
        pos = line[line > 0]
        R = np.stack([np.concatenate([[0.0], pos]), np.zeros(pos.size + 1)], axis=1)
        U = np.stack([np.zeros_like(pos), pos], axis=1)
        return np.vstack([R, U, -U])
    if example.dim == 2:
        g = np.meshgrid(line, line, indexing="ij")
        return np.stack([a.ravel() for a in g], axis=1)
    X = line[:, None]
    return X[example.contains(X)]


def intrinsic_points(spec: EmbeddingSpec, radius: float = 5.0, h: float = 0.25) -> GridStateSpace:
    """psi of the original grid (fibres merged) together with the catalogued closure points."""
    img = np.round(spec.identify(original_grid(spec.example, radius, h)), 12)
    img = np.unique(img, axis=0)
    clo = spec.closure_array()
    for c in clo:
        if np.any(np.all(np.abs(img - c) <= FIBER_TOL, axis=1)):
            raise ValueError(f"closure point {c.tolist()} already lies in psi(E)")
    pts = [StatePoint(tuple(r)) for r in img] + list(spec.closure_points)
    return GridStateSpace(pts)


# ---------------------------------------------------------------------------
# lifted functions


@dataclass
class LiftedFunction:
    base: TestFunction
    extended_values: dict
    spec: EmbeddingSpec = field(repr=False, default=None)

    def __call__(self, xi) -> np.ndarray:
        return self.values(xi)

    def values(self, Xi) -> np.ndarray:
        Xi = as_points(Xi, self.spec.dim)
        out = np.empty(Xi.shape[0])
        clo = self.spec.closure_points
        mask = np.zeros(Xi.shape[0], bool)
        for p in clo:
            hit = np.all(np.abs(Xi - p.array()) <= FIBER_TOL, axis=1)
            out[hit] = self.extended_values[p.label]
            mask |= hit
        if np.any(~mask):
            out[~mask] = self.base.values(self.spec.psi_inverse(Xi[~mask]))
        return out


def _fibres(spec: EmbeddingSpec, X: np.ndarray) -> list[np.ndarray]:
    img = np.round(spec.identify(X), 12)
    _, inv = np.unique(img, axis=0, return_inverse=True)
    inv = np.asarray(inv).reshape(-1)
    return [np.nonzero(inv == k)[0] for k in range(inv.max() + 1)]


def check_fibre_constant(spec: EmbeddingSpec, f: TestFunction, X=None, tol: float = FIBER_TOL):
    X = original_grid(spec.example) if X is None else as_points(X, spec.example.dim)
    vals = f.values(X)
    for idx in _fibres(spec, X):
        if idx.size > 1 and np.ptp(vals[idx]) > tol:
            raise NotFiberConstant(
                f"{f.name or 'f'} takes values {vals[idx].tolist()} on the fibre {X[idx].tolist()}")


def extension_limits(spec: EmbeddingSpec, f: TestFunction) -> dict:
    """Limit of f along every catalogued approach sequence; checks the limits agree."""
    out = {}
    for p in spec.closure_points:
        seqs = spec.approach.get(p.label, [])
        if len(seqs) < 2:
            raise ValueError(f"closure point {p.label} needs at least two approach sequences")
        lims = [float(f.values(s[-1:])[0]) for s in seqs]
        if max(lims) - min(lims) > EXTENSION_TOL:
            raise FiberInconsistent(f"limits at {p.label} depend on the approach: {lims}",
                                    witness=p.label)
        out[p.label] = lims[int(np.argmin([np.abs(s[-1]).max() for s in seqs]))]
    return out


def lift_function(spec: EmbeddingSpec, f: TestFunction, X=None) -> LiftedFunction:
    check_fibre_constant(spec, f, X)
    return LiftedFunction(f, extension_limits(spec, f), spec)


def _catalogued(spec: EmbeddingSpec, f: TestFunction) -> bool:
    return ("nonnegative",) in f.claims or ("in_C_plus",) in f.claims or f.certificate is not None


def lifted_resolvent_function(spec: EmbeddingSpec, alpha: float, g: LiftedFunction) -> LiftedFunction:
    """Psi-bar(U^alpha f) for g = Psi-bar f."""
    if not _catalogued(spec, g.base):
        raise NotInCatalogue(f"{g.base.name!r} is not a catalogued function")
    ex = spec.example
    uf = ex.resolvent().apply(alpha, ex.materialize(g.base), materialize=True)
    return LiftedFunction(uf, extension_limits(spec, uf), spec)


def lifted_resolvent(spec: EmbeddingSpec, alpha: float, g: LiftedFunction, xi) -> float | np.ndarray:
    v = lifted_resolvent_function(spec, alpha, g).values(xi)
    return float(v[0]) if v.size == 1 else v


# ---------------------------------------------------------------------------
# canonicity


@dataclass
class TransferVerdict:
    fibre_consistent: bool
    bijective: bool
    cauchy_preserving: bool
    n_points: int
    n_probes: int

    @property
    def ok(self) -> bool:
        return self.fibre_consistent and self.bijective and self.cauchy_preserving


def _same(A: np.ndarray, i, j, tol=FIBER_TOL) -> bool:
    return bool(np.max(np.abs(A[i] - A[j])) <= tol)


def _psi_cauchy(spec: EmbeddingSpec, p: ProbeSequence) -> bool:
    T = spec.identify(p.tail())
    return bool(np.max(np.ptp(T, axis=0)) <= p.cauchy_tol)


def transfer_map(specA: EmbeddingSpec, specB: EmbeddingSpec,
                 probes: Sequence[ProbeSequence] | None = None, X=None) -> TransferVerdict:
    """Check that psi_B o psi_A^{-1} is a well defined, Cauchy-preserving bijection on the grid."""
    ex = specA.example
    probes = probe_library(ex) if probes is None else probes
    pts = [original_grid(ex) if X is None else as_points(X, ex.dim)]
    pts += [p.tail() for p in probes]
    P = np.unique(np.vstack(pts), axis=0)
    P = P[ex.contains(P)]
    A, B = np.round(specA.identify(P), 12), np.round(specB.identify(P), 12)
    for idx in _fibres(specA, P):
        for j in idx[1:]:
            if not _same(B, idx[0], j):
                raise FiberInconsistent("psi_A identifies points that psi_B separates",
                                        witness=(P[idx[0]].tolist(), P[j].tolist()))
    for idx in _fibres(specB, P):
        for j in idx[1:]:
            if not _same(A, idx[0], j):
                raise NotBijective("psi_B identifies points that psi_A separates",
                                   witness=(P[idx[0]].tolist(), P[j].tolist()))
    for p in probes:
        ca, cb = _psi_cauchy(specA, p), _psi_cauchy(specB, p)
        if ca != cb:
            raise CauchyBroken(f"probe {p.label!r}: Cauchy under A={ca}, under B={cb}",
                               witness=p.label)
    return TransferVerdict(True, True, True, P.shape[0], len(probes))


# ---------------------------------------------------------------------------
# empirical checks


def separation_on_intrinsic(spec: EmbeddingSpec, catalogue=None, grid=None, tol: float = 1e-9):
    """Pairs of distinct intrinsic points that no lifted catalogue function separates."""
    cat = r_catalogue(spec.example) if catalogue is None else catalogue
    G = intrinsic_points(spec, h=0.5).coords if grid is None else grid
    vals = np.array([lift_function(spec, f).values(G) for f in cat])  # (k, n)
    bad = []
    for i in range(G.shape[0]):
        gap = np.max(np.abs(vals[:, i + 1:] - vals[:, i:i + 1]), axis=0)
        for j in np.nonzero(gap <= tol)[0]:
            bad.append((G[i].tolist(), G[i + 1 + j].tolist()))
    return bad


def c0_distance(example: Example, catalogue=None, centres=None, width: float = 1.0) -> float:
    """Sup-norm least-squares distance of C_0 bumps to span(catalogue) on the original grid."""
    cat = r_catalogue(example) if catalogue is None else catalogue
    X = original_grid(example)
    centres = np.linspace(-3, 3, 7) if centres is None else centres
    M = np.array([f.values(X) for f in cat]).T
    M = np.hstack([M, np.ones((X.shape[0], 1))])
    worst = 0.0
    for c in centres:
        target = np.exp(-np.sum((X - c) ** 2, axis=1) / (2 * width ** 2))
        coef, *_ = np.linalg.lstsq(M, target, rcond=None)
        worst = max(worst, float(np.max(np.abs(M @ coef - target))))
    return worst
