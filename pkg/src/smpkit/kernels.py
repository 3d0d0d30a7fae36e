"""Kernels on finite grid state spaces and the functions they act on.

A kernel is stored as a dense matrix of cell masses: ``entries[i, j]`` is the
mass that the row measure ``k(x_i, .)`` puts on the cell represented by grid
point ``j``.  Atoms and densities therefore live in the same representation;
densities are converted to masses with the per-cell quadrature weights.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import MismatchedSpace, Overflow, UnboundedFunction

POINT_TOL = 1e-12
STOCHASTIC_TOL = 1e-9


class Tag(str, Enum):
    ORIGINAL = "original"
    CLOSURE_ADDED = "closure_added"


@dataclass(frozen=True)
class StatePoint:
    coords: tuple
    tag: Tag = Tag.ORIGINAL
    label: str | None = None

    def __post_init__(self):
        coords = tuple(float(c) for c in np.atleast_1d(self.coords))
        if not all(np.isfinite(coords)):
            raise ValueError(f"non-finite coordinates {coords}")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "tag", Tag(self.tag))

    @property
    def dim(self) -> int:
        return len(self.coords)

    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)


class GridStateSpace:
    """Ordered, finite set of state points with per-point cell weights."""

    def __init__(self, points: Sequence[StatePoint], cell_weights=None):
        points = [p if isinstance(p, StatePoint) else StatePoint(p) for p in points]
        if not points:
            raise ValueError("empty state space")
        dims = {p.dim for p in points}
        if len(dims) != 1:
            raise ValueError(f"mixed point dimensions {sorted(dims)}")
        self.points = tuple(points)
        self.dim = dims.pop()
        if cell_weights is None:
            cell_weights = np.ones(len(points))
        w = np.asarray(cell_weights, dtype=float)
        if w.shape != (len(points),) or not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("cell weights must be strictly positive and finite")
        self.cell_weights = w
        self.cell_weights.setflags(write=False)
        coords = self.coords
        if len(points) > 1:
            order = np.lexsort(coords.T[::-1])
            gaps = np.abs(np.diff(coords[order], axis=0)).max(axis=1)
            if np.any(gaps <= POINT_TOL):
                raise ValueError("state points are not pairwise distinct")

    @classmethod
    def uniform_1d(cls, lo: float, hi: float, h: float) -> "GridStateSpace":
        n = int(round((hi - lo) / h)) + 1
        xs = lo + h * np.arange(n)
        return cls([StatePoint((x,)) for x in xs], np.full(n, h))

    @cached_property
    def coords(self) -> np.ndarray:
        return np.array([p.coords for p in self.points], dtype=float)

    def __len__(self) -> int:
        return len(self.points)

    def index_of(self, x) -> int:
        x = np.atleast_1d(np.asarray(getattr(x, "coords", x), dtype=float))
        d = np.abs(self.coords - x).max(axis=1)
        return int(np.argmin(d))


def as_points(x, dim: int) -> np.ndarray:
    """Coerce a point, a sequence of points or an array to shape (n, dim)."""
    if isinstance(x, StatePoint):
        return x.array()[None, :]
    if isinstance(x, GridStateSpace):
        return x.coords
    if isinstance(x, (list, tuple)) and x and isinstance(x[0], StatePoint):
        return np.array([p.coords for p in x], dtype=float)
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        return arr.reshape(-1, 1) if dim == 1 else arr.reshape(1, dim)
    return arr


class TestFunction:
    """A bounded real function on a state space, evaluated on arrays of points.

    ``fn`` maps an ``(n, dim)`` coordinate array to ``n`` values.  ``breaks`` lists
    ``(axis, value)`` hyperplanes across which the function may fail to be
    smooth; quadrature rules split their panels there.
    """

    __test__ = False  # not a pytest class

    def __init__(
        self,
        fn: Callable[[np.ndarray], np.ndarray],
        dim: int = 1,
        sup_bound: float | None = None,
        claims: Iterable = (),
        breaks: Iterable = (),
        name: str = "",
    ):
        self.fn = fn
        self.dim = dim
        self.sup_bound = sup_bound
        self.claims = frozenset(claims)
        self.breaks = tuple(sorted(set((int(a), float(v)) for a, v in breaks)))
        self.name = name

    def values(self, x) -> np.ndarray:
        X = as_points(x, self.dim)
        out = np.asarray(self.fn(X), dtype=float)
        return np.broadcast_to(out, (X.shape[0],)).copy()

    def __call__(self, x):
        many = not (
            isinstance(x, StatePoint)
            or np.ndim(x) == 0
            or (self.dim > 1 and np.ndim(x) == 1 and not isinstance(x[0], StatePoint))
        )
        v = self.values(x)
        return v if many else float(v[0])

    def __repr__(self) -> str:
        return f"TestFunction({self.name or self.fn!r})"

    @property
    def certificate(self) -> float | None:
        alphas = [c[1] for c in self.claims if c[0] == "alpha_supermedian"]
        return min(alphas) if alphas else None

    def with_claims(self, *claims) -> "TestFunction":
        return TestFunction(self.fn, self.dim, self.sup_bound,
                            self.claims | set(claims), self.breaks, self.name)

    def sup_on(self, points) -> float:
        return float(np.max(np.abs(self.values(points))))


def constant(c: float, dim: int = 1) -> TestFunction:
    c = float(c)
    claims = {("in_C_plus",)} if c >= 0 else set()
    if c >= 0:
        claims.add(("alpha_supermedian", 0.0))
    return TestFunction(lambda X: np.full(X.shape[0], c), dim, abs(c),
                        claims, name=f"const({c:g})")


def coordinate(i: int, dim: int = 1) -> TestFunction:
    return TestFunction(lambda X: X[:, i], dim, None, {("coordinate", i)},
                        name=f"e{i + 1}")


def indicator(pred: Callable[[np.ndarray], np.ndarray], dim: int = 1,
              breaks: Iterable = (), name: str = "") -> TestFunction:
    return TestFunction(lambda X: pred(X).astype(float), dim, 1.0,
                        breaks=breaks, name=name)


def table_function(values, name: str = "") -> TestFunction:
    """Function on the integer-labelled states 0..n-1 of a countable space."""
    v = np.asarray(values, dtype=float)

    def fn(X):
        idx = np.rint(X[:, 0]).astype(int)
        return v[idx]

    return TestFunction(fn, 1, float(np.max(np.abs(v))), name=name or "table")


def linear_combination(terms: Sequence[tuple[float, TestFunction]],
                       name: str = "") -> TestFunction:
    terms = [(float(c), f) for c, f in terms]
    dim = terms[0][1].dim
    bound = None
    if all(f.sup_bound is not None for _, f in terms):
        bound = sum(abs(c) * f.sup_bound for c, f in terms)
    breaks = [b for _, f in terms for b in f.breaks]
    return TestFunction(lambda X: sum(c * f.values(X) for c, f in terms),
                        dim, bound, breaks=breaks, name=name)


def pointwise_min(fs: Sequence[TestFunction], name: str = "") -> TestFunction:
    dim = fs[0].dim
    bounds = [f.sup_bound for f in fs]
    bound = None if any(b is None for b in bounds) else max(bounds)
    breaks = [b for f in fs for b in f.breaks]
    return TestFunction(lambda X: np.min([f.values(X) for f in fs], axis=0),
                        dim, bound, breaks=breaks, name=name)


# ---------------------------------------------------------------------------
# signed kernels


@dataclass(frozen=True)
class SignedKernel:
    space: GridStateSpace
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        n = len(self.space)
        if e.shape != (n, n):
            raise ValueError(f"kernel shape {e.shape} does not match space of size {n}")
        if not np.all(np.isfinite(e)):
            raise Overflow("kernel has non-finite entries")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @classmethod
    def from_density(cls, space: GridStateSpace, density) -> "SignedKernel":
        return cls(space, np.asarray(density, dtype=float) * space.cell_weights[None, :])

    @cached_property
    def row_tv(self) -> np.ndarray:
        return np.abs(self.entries).sum(axis=1)

    def norm(self) -> float:
        return float(self.row_tv.max())

    def is_stochastic(self, tol: float = STOCHASTIC_TOL) -> bool:
        return bool(np.all(self.entries >= 0)
                    and np.all(np.abs(self.entries.sum(axis=1) - 1) <= tol))

    def __add__(self, other: "SignedKernel") -> "SignedKernel":
        _same_space(self, other)
        return SignedKernel(self.space, self.entries + other.entries)

    def __sub__(self, other: "SignedKernel") -> "SignedKernel":
        _same_space(self, other)
        return SignedKernel(self.space, self.entries - other.entries)

    def __mul__(self, c: float) -> "SignedKernel":
        return SignedKernel(self.space, float(c) * self.entries)

    __rmul__ = __mul__

    def __matmul__(self, other: "SignedKernel") -> "SignedKernel":
        return compose(self, other)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "col", "mass"])
        for i, j in zip(*np.nonzero(self.entries)):
            w.writerow([int(i), int(j), repr(float(self.entries[i, j]))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, space: GridStateSpace, text: str) -> "SignedKernel":
        e = np.zeros((len(space), len(space)))
        for row in csv.DictReader(io.StringIO(text)):
            e[int(row["row"]), int(row["col"])] = float(row["mass"])
        return cls(space, e)


def _same_space(k: SignedKernel, k2: SignedKernel) -> None:
    if k.space is not k2.space and not (
        len(k.space) == len(k2.space)
        and np.array_equal(k.space.coords, k2.space.coords)
        and np.array_equal(k.space.cell_weights, k2.space.cell_weights)
    ):
        raise MismatchedSpace("kernels live on different state spaces")


def identity(space: GridStateSpace) -> SignedKernel:
    return SignedKernel(space, np.eye(len(space)))


def compose(k: SignedKernel, k2: SignedKernel) -> SignedKernel:
    """(k * k2)(x, B) = sum_y k(x, dy) k2(y, B)."""
    _same_space(k, k2)
    with np.errstate(over="ignore", invalid="ignore"):
        out = k.entries @ k2.entries
    if not np.all(np.isfinite(out)):
        raise Overflow("kernel composition overflowed")
    return SignedKernel(k.space, out)


def power(k: SignedKernel, n: int) -> SignedKernel:
    if n < 0:
        raise ValueError("kernel powers are defined for n >= 0")
    result = identity(k.space)
    base = k
    while n:
        if n & 1:
            result = compose(result, base)
        n >>= 1
        if n:
            base = compose(base, base)
    return result


def norm(k: SignedKernel) -> float:
    return k.norm()


def apply(k: SignedKernel, f) -> np.ndarray:
    """(Kf)(x_i) for every grid point; ``f`` is a TestFunction or value vector."""
    vals = f.values(k.space.coords) if isinstance(f, TestFunction) else np.asarray(f, float)
    if not np.all(np.isfinite(vals)):
        raise UnboundedFunction("function has no finite bound on the grid")
    return k.entries @ vals


def apply_function(k: SignedKernel, f: TestFunction) -> TestFunction:
    """Kf as a TestFunction on the grid (nearest grid point lookup)."""
    vals = apply(k, f)
    space = k.space
    bound = float(np.max(np.abs(vals)))

    def fn(X):
        idx = [space.index_of(x) for x in X]
        return vals[idx]

    return TestFunction(fn, space.dim, bound, name=f"K({f.name})")
