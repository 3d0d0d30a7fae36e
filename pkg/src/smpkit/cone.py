"""Finite-depth enumeration of the Ray cone and uniformity/separation tests.

Elements are expression trees over catalogued generators.  Three node kinds
build level ``n`` from level ``n - 1``: nonnegative combinations with
coefficients from a fixed lattice, resolvent application and pointwise
minimum.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DepthExceeded
from .kernels import StatePoint, TestFunction, as_points, pointwise_min
from .resolvent import ResolventSpec

COEFFS = (0.0, 0.5, 1.0, 2.0)
ALPHAS = (0.5, 1.0, 2.0)
MAX_DEPTH = 3
MAX_NEW_PER_LEVEL = 48
CAUCHY_TOL = 1e-3
CAUCHY_WINDOW = 16
SEPARATION_TOL = 1e-9


@dataclass(eq=False)
class ConeElement:
    """Node of an expression tree; ``kind`` is leaf, combo, resolvent or min."""

    kind: str
    children: tuple = ()
    coeffs: tuple = ()
    alpha: float | None = None
    leaf: TestFunction | None = None
    certificate_alpha: float = 0.0
    depth: int = 0
    key: str = ""
    _fn: TestFunction | None = field(default=None, repr=False)

    def __hash__(self):
        return hash(self.key)

    def __eq__(self, other):
        return isinstance(other, ConeElement) and self.key == other.key

    def function(self, U: ResolventSpec) -> TestFunction:
        """Evaluable TestFunction; resolvent nodes are materialised once and cached."""
        if self._fn is not None:
            return self._fn
        if self.kind == "leaf":
            fn = self.leaf
        elif self.kind == "resolvent":
            fn = U.apply(self.alpha, self.children[0].function(U), materialize=True)
        elif self.kind == "min":
            fn = pointwise_min([c.function(U) for c in self.children], name=self.key)
        else:
            fs = [c.function(U) for c in self.children]
            cs = self.coeffs
            fn = TestFunction(lambda X: sum(c * f.values(X) for c, f in zip(cs, fs)),
                              fs[0].dim, None, breaks=[b for f in fs for b in f.breaks],
                              name=self.key)
        fn = fn.with_claims(("nonnegative",), ("alpha_supermedian", self.certificate_alpha))
        self._fn = fn
        return fn

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "certificate_alpha": self.certificate_alpha, "depth": self.depth}
        if self.kind == "leaf":
            d["name"] = self.leaf.name
        if self.alpha is not None:
            d["alpha"] = self.alpha
        if self.coeffs:
            d["coeffs"] = list(self.coeffs)
        if self.children:
            d["children"] = [c.to_dict() for c in self.children]
        return d


def leaf(f: TestFunction) -> ConeElement:
    cert = f.certificate
    if cert is None:
        raise ValueError(f"generator {f.name!r} carries no supermedian certificate")
    return ConeElement("leaf", leaf=f, certificate_alpha=cert, depth=0, key=f.name)


def resolvent_node(e: ConeElement, alpha: float) -> ConeElement:
    return ConeElement("resolvent", (e,), alpha=float(alpha),
                       certificate_alpha=e.certificate_alpha, depth=e.depth + 1,
                       key=f"U{alpha:g}({e.key})")


def min_node(a: ConeElement, b: ConeElement) -> ConeElement:
    a, b = sorted((a, b), key=lambda e: e.key)
    return ConeElement("min", (a, b), certificate_alpha=max(a.certificate_alpha, b.certificate_alpha),
                       depth=1 + max(a.depth, b.depth), key=f"min({a.key},{b.key})")


def combo_node(terms: Sequence[tuple[float, ConeElement]]) -> ConeElement:
    terms = sorted(((float(c), e) for c, e in terms if c != 0), key=lambda t: t[1].key)
    if not terms:
        raise ValueError("a combination needs a nonzero coefficient")
    if any(c < 0 for c, _ in terms):
        raise ValueError("combination coefficients must be nonnegative")
    kids = tuple(e for _, e in terms)
    return ConeElement("combo", kids, tuple(c for c, _ in terms),
                       certificate_alpha=max(e.certificate_alpha for e in kids),
                       depth=1 + max(e.depth for e in kids),
                       key="+".join(f"{c:g}*{e.key}" for c, e in terms))


def _candidates(prev: list[ConeElement], alphas) -> list[ConeElement]:
    out = [resolvent_node(e, a) for e in prev for a in alphas]
    for i, a in enumerate(prev):
        for c in COEFFS[1:]:
            if c != 1.0:
                out.append(combo_node([(c, a)]))
        for b in prev[i + 1:]:
            out.append(min_node(a, b))
            for ca in COEFFS[1:]:
                for cb in COEFFS[1:]:
                    out.append(combo_node([(ca, a), (cb, b)]))
    return out


def build_cone(generators: Sequence[TestFunction], alphas: Iterable[float] = ALPHAS,
               depth: int = 1, max_new: int = MAX_NEW_PER_LEVEL) -> list[ConeElement]:
    """Deterministic finite fragment of R_depth.

    Each level keeps every element of the previous one and adds at most
    ``max_new`` new candidates, spread evenly over the key-sorted candidate list.
    """
    if depth > MAX_DEPTH:
        raise DepthExceeded(f"depth {depth} exceeds the supported maximum {MAX_DEPTH}")
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    alphas = tuple(float(a) for a in alphas)
    elems = [leaf(g) for g in generators]
    seen = {e.key for e in elems}
    for _ in range(depth):
        cands = {c.key: c for c in _candidates(elems, alphas) if c.key not in seen}
        ordered = [cands[k] for k in sorted(cands)]
        if len(ordered) > max_new:
            pick = np.linspace(0, len(ordered) - 1, max_new).round().astype(int)
            ordered = [ordered[i] for i in np.unique(pick)]
        elems = elems + ordered
        seen.update(e.key for e in ordered)
    return elems


def in_cone(e: ConeElement, generators: Sequence[TestFunction], alphas: Iterable[float] = ALPHAS,
            depth: int = MAX_DEPTH) -> bool:
    """Structural membership in the lattice-restricted R_depth (no enumeration cap)."""
    names = {g.name for g in generators}
    alphas = {float(a) for a in alphas}

    def ok(node):
        if node.kind == "leaf":
            return node.leaf.name in names
        if node.kind == "resolvent" and node.alpha not in alphas:
            return False
        if node.kind == "combo" and any(c not in COEFFS for c in node.coeffs):
            return False
        return all(ok(c) for c in node.children)

    return e.depth <= depth and ok(e)


def cone_to_json(elements: Sequence[ConeElement]) -> str:
    return json.dumps([e.to_dict() for e in elements], indent=1, sort_keys=True)


# ---------------------------------------------------------------------------
# uniformity and separation


@dataclass
class ProbeSequence:
    points: np.ndarray
    cauchy_tol: float = CAUCHY_TOL
    window: int = CAUCHY_WINDOW
    label: str = ""

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        if self.points.shape[0] == 0:
            raise ValueError("probe sequence must be nonempty")

    def tail(self) -> np.ndarray:
        return self.points[-self.window:]


def oscillation(h: TestFunction, probe: ProbeSequence) -> float:
    v = h.values(probe.tail())
    return float(v.max() - v.min())


def is_cauchy(H: Sequence[TestFunction], probe: ProbeSequence) -> bool:
    return all(oscillation(h, probe) <= probe.cauchy_tol for h in H)


@dataclass
class UniformityVerdict:
    equivalent: bool
    witnesses: list = field(default_factory=list)  # (label, cauchy_H, cauchy_G)
    per_probe: list = field(default_factory=list)


def uniformity_equivalent(H: Sequence[TestFunction], G: Sequence[TestFunction],
                          probes: Sequence[ProbeSequence]) -> UniformityVerdict:
    verdict = UniformityVerdict(True)
    for p in probes:
        ch, cg = is_cauchy(H, p), is_cauchy(G, p)
        verdict.per_probe.append((p.label, ch, cg))
        if ch != cg:
            verdict.equivalent = False
            verdict.witnesses.append((p.label, ch, cg))
    return verdict


def separates_points(H: Sequence[TestFunction], x, y, tol: float = SEPARATION_TOL) -> bool:
    dim = H[0].dim if H else 1
    X = np.vstack([as_points(x, dim), as_points(y, dim)])
    if np.array_equal(X[0], X[1]):
        return False
    return any(abs(d) > tol for h in H for d in [np.subtract(*h.values(X))])


# ---------------------------------------------------------------------------
# per-example catalogues


def oscillating_function(dim: int = 1) -> TestFunction:
    """Bounded, nonconvergent at infinity along every axis direction."""
    return TestFunction(lambda X: 0.5 * (1 + np.sin(X.sum(axis=1))), dim, 1.0,
                        {("nonnegative",)}, name="osc")


def r_catalogue(example, alphas: Iterable[float] = ALPHAS) -> list[TestFunction]:
    """U^alpha g for the example's test functions and an oscillating probe function."""
    U = example.resolvent()
    base = list(example.test_functions())
    if example.drift or example.id.startswith("brownian") or example.id.startswith("absorbing"):
        base.append(oscillating_function(example.dim))
    return [U.apply(a, g) for a in alphas for g in base]


PROBE_LENGTH = 8192


def _seq(f, n=PROBE_LENGTH):
    return np.array([f(k) for k in range(1, n + 1)], dtype=float)


def probe_library(example) -> list[ProbeSequence]:
    """Split-point, divergent and constant-pair sequences inside the state space."""
    eid = example.id.split("@")[0]
    alt = lambda k: (-1) ** k
    if eid == "fork":
        P = [
            ProbeSequence(_seq(lambda k: (1 / k, 0.0)), label="R->0"),
            ProbeSequence(_seq(lambda k: (0.0, 1 / k)), label="U->0"),
            ProbeSequence(_seq(lambda k: (0.0, -1 / k)), label="L->0"),
            ProbeSequence(_seq(lambda k: (0.0, alt(k) / k)), label="U/L alternating"),
            ProbeSequence(_seq(lambda k: (1 / k, 0.0) if k % 2 else (0.0, 1 / k)), label="R/U alternating"),
            ProbeSequence(_seq(lambda k: (float(k), 0.0)), label="R->inf"),
            ProbeSequence(_seq(lambda k: (0.0, float(k))), label="U->inf"),
            ProbeSequence(_seq(lambda k: (2.0, 0.0) if k % 2 else (0.0, 1.0)), label="pair"),
        ]
        return P
    if eid.startswith("pure_jump"):
        m = example.m
        return [ProbeSequence(_seq(lambda k: k % 2), label="pair(0,1)"),
                ProbeSequence(_seq(lambda k: 1), label="const(1)"),
                ProbeSequence(_seq(lambda k: (k % 2) * (m - 1)), label=f"pair(0,{m - 1})")]
    if eid == "collapse":
        return [ProbeSequence(_seq(lambda k: 1 / k), label="+1/n"),
                ProbeSequence(_seq(lambda k: float(k)), label="n"),
                ProbeSequence(_seq(lambda k: alt(k)), label="pair(-1,1)")]
    P = [ProbeSequence(_seq(lambda k: 1 / k), label="+1/n"),
         ProbeSequence(_seq(lambda k: float(k)), label="n"),
         ProbeSequence(_seq(lambda k: 2.0 if k % 2 else 1.0), label="pair(1,2)")]
    if eid == "severed":
        P += [ProbeSequence(_seq(lambda k: -1 - 1 / k), label="-1-1/n"),
              ProbeSequence(_seq(lambda k: 1 / k if k % 2 else -1 - 1 / k), label="0+/-1- alternating"),
              ProbeSequence(_seq(lambda k: -float(k)), label="-n")]
    else:
        P += [ProbeSequence(_seq(lambda k: -1 / k), label="-1/n"),
              ProbeSequence(_seq(lambda k: alt(k) / k), label="(-1)^n/n"),
              ProbeSequence(_seq(lambda k: -float(k)), label="-n")]
    return P


def probes_to_csv(probes: Sequence[ProbeSequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    dim = probes[0].points.shape[1]
    w.writerow(["sequence", "index"] + [f"x{i}" for i in range(dim)])
    for p in probes:
        for i, row in enumerate(p.points):
            w.writerow([p.label, i] + [repr(float(v)) for v in row])
    return buf.getvalue()


def probes_from_csv(text: str, cauchy_tol: float = CAUCHY_TOL) -> list[ProbeSequence]:
    rows: dict[str, list] = {}
    for r in csv.DictReader(io.StringIO(text)):
        coords = [float(v) for k, v in r.items() if k.startswith("x")]
        rows.setdefault(r["sequence"], []).append((int(r["index"]), coords))
    return [ProbeSequence([c for _, c in sorted(v)], cauchy_tol, label=k) for k, v in rows.items()]
