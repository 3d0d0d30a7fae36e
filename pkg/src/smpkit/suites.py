"""Analytic verification suites; each returns a list of check records."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import cone, intrinsic, resolvent as rs
from .errors import FiberInconsistent, SideConditionViolated
from .kernels import TestFunction, constant
from .zoo import get_example

ALPHAS = (0.5, 1.0, 2.0, 4.0)
CK_TIMES = (0.3, 0.9, 2.1)

DEFAULT_TOLERANCES = {
    "closed_form": 1e-6,
    "quadrature": 1e-4,
    "chapman_kolmogorov": 1e-6,
    "chapman_kolmogorov_brownian": 1e-3,
    "laplace": 1e-4,
    "supermedian": 1e-9,
    "monotonicity_rel": 1e-8,
    "generator": 1e-4,
    "post_widder_rel": 0.05,
    "separation": 1e-9,
}


@dataclass
class Record:
    check: str
    example: str
    params: dict
    statistic: float
    null_value: float
    tolerance: float | None
    passed: bool

    def to_dict(self) -> dict:
        return {"check": self.check, "example": self.example, "params": self.params,
                "statistic": _clean(self.statistic), "null_value": _clean(self.null_value),
                "tolerance": _clean(self.tolerance), "pass": bool(self.passed)}


def _clean(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else str(v)


@dataclass
class SuiteContext:
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    grid_h: float = 0.01
    grid_radius: float = 10.0

    def tol(self, key: str) -> float:
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))


def _fixture(example_id: str):
    ex = get_example(example_id)
    return ex, ex.test_functions()[:5], ex.probe_points()


def resolvent_identity(example_id: str, ctx: SuiteContext, alphas=ALPHAS) -> list[Record]:
    ex, fs, X = _fixture(example_id)
    U = ex.resolvent()
    tol = ctx.tol("quadrature" if U.kind == "quadrature" else "closed_form")
    out = []
    for a in alphas:
        for b in alphas:
            worst = max(float(np.max(rs.check_resolvent_identity(U, a, b, f, X))) for f in fs)
            out.append(Record("resolvent_identity", example_id, {"alpha": a, "beta": b,
                              "n_functions": len(fs), "n_probes": len(X)}, worst, 0.0, tol, worst <= tol))
    return out


def chapman_kolmogorov(example_id: str, ctx: SuiteContext, times=CK_TIMES) -> list[Record]:
    ex, fs, X = _fixture(example_id)
    P = ex.semigroup()
    brown = ex.id.startswith("brownian") or ex.id.startswith("absorbing")
    tol = ctx.tol("chapman_kolmogorov_brownian" if brown else "chapman_kolmogorov")
    out = []
    for s in times:
        for t in times:
            worst = max(float(np.max(rs.check_chapman_kolmogorov(P, s, t, f, X))) for f in fs)
            out.append(Record("chapman_kolmogorov", example_id, {"s": s, "t": t}, worst, 0.0, tol,
                              worst <= tol))
    return out


def laplace_consistency(example_id: str, ctx: SuiteContext, alphas=ALPHAS) -> list[Record]:
    ex, fs, X = _fixture(example_id)
    P, U = ex.semigroup(), ex.resolvent()
    out = []
    for a in alphas:
        worst, bound = 0.0, 0.0
        for f in fs:
            direct = U.values(a, f, X)
            for x, u in zip(X, direct):
                v, b = rs.laplace_forward(P, a, f, x, with_bound=True)
                worst = max(worst, abs(v - u) - b)
                bound = max(bound, b)
        tol = ctx.tol("laplace")
        out.append(Record("laplace_consistency", example_id, {"alpha": a, "truncation_bound": bound},
                          worst, 0.0, tol, worst <= tol))
    return out


def supermedian_catalogue(example_id: str) -> list[TestFunction]:
    ex = get_example(example_id)
    return [constant(1.0, ex.dim)] + cone.r_catalogue(ex)


def supermedian_domination(example_id: str, ctx: SuiteContext,
                           t_grid=tuple(np.linspace(0.1, 3.0, 10))) -> list[Record]:
    ex = get_example(example_id)
    P = ex.semigroup()
    X = ex.probe_points()
    tol = ctx.tol("supermedian")
    worst, count = -np.inf, 0
    for f in supermedian_catalogue(example_id):
        a = f.certificate
        fx = f.values(X)
        fm = ex.materialize(f)
        for t in t_grid:
            excess = math.exp(-a * t) * ex.pt(t, fm, X) - fx
            worst = max(worst, float(excess.max()))
            count += 1
    return [Record("supermedian_domination", example_id,
                   {"n_functions": len(supermedian_catalogue(example_id)), "n_times": len(t_grid),
                    "n_probes": len(X)}, worst, 0.0, tol, worst <= tol)]


def complete_monotonicity(example_id: str, ctx: SuiteContext, order: int = 8) -> list[Record]:
    ex, fs, X = _fixture(example_id)
    U = ex.resolvent()
    betas = np.round(np.arange(0.5, 10.0 + 1e-9, 0.05), 10)
    out = []
    for f in fs[:3]:
        violations = 0
        for x in X[:: max(1, len(X) // 5)]:
            g = lambda bs, f=f, x=x: np.array([U.values(b, f, x[None, :])[0] for b in np.atleast_1d(bs)])
            rep = rs.complete_monotonicity_check(g, betas, order)
            violations += len(rep.sign_violations)
        out.append(Record("complete_monotonicity", example_id, {"function": f.name, "order": order},
                          violations, 0, 0, violations == 0))
    return out


def generator_pairs(example_id: str, ctx: SuiteContext) -> list[Record]:
    from .zoo import check_generator_pair
    ex = get_example(example_id)
    tol = ctx.tol("generator")
    out = []
    for p in ex.generator_pairs():
        try:
            r = check_generator_pair(ex, p.g, p.alpha)
            ok = p.expect_valid and r <= tol
            out.append(Record("generator_pair", example_id, {"g": p.name, "alpha": p.alpha,
                              "expect_valid": p.expect_valid}, r, 0.0, tol, ok))
        except SideConditionViolated as e:
            out.append(Record("generator_pair", example_id, {"g": p.name, "alpha": p.alpha,
                              "expect_valid": p.expect_valid, "rejected": e.condition},
                              math.nan if p.expect_valid else 0.0, 0.0, tol, not p.expect_valid))
    return out


def embedding(example_id: str, ctx: SuiteContext) -> list[Record]:
    """Closure-point catalogue, fibre constancy of the R-catalogue and separation on E'."""
    spec = intrinsic.embedding_spec(example_id)
    grid = intrinsic.intrinsic_points(spec)
    added = [p.label for p in grid.points if p.tag.value == "closure_added"]
    out = [Record("closure_points", example_id, {"added": added, "n_points": len(grid)},
                  len(added), len(spec.closure_points), 0, len(added) == len(spec.closure_points))]
    cat = cone.r_catalogue(spec.example)
    bad = 0
    for f in cat:
        try:
            intrinsic.check_fibre_constant(spec, f)
        except Exception:
            bad += 1
    out.append(Record("fibre_constant", example_id, {"n_functions": len(cat)}, bad, 0, 0, bad == 0))
    if len(grid) > 1:
        unsep = intrinsic.separation_on_intrinsic(spec, cat)
        out.append(Record("intrinsic_separation", example_id, {"pairs": unsep[:3]},
                          len(unsep), 0, 0, not unsep))
    return out


def separation(example_id: str, ctx: SuiteContext) -> list[Record]:
    """R-catalogue separation of original points: expected failures are catalogued."""
    ex = get_example(example_id)
    cat = cone.r_catalogue(ex)
    X = intrinsic.original_grid(ex)
    spec = intrinsic.embedding_spec(example_id)
    img = np.round(spec.identify(X), 12)
    tol = ctx.tol("separation")
    V = np.array([f.values(X) for f in cat])
    mismatches = 0
    for i in range(X.shape[0]):
        for j in range(i + 1, X.shape[0]):
            sep = bool(np.max(np.abs(V[:, i] - V[:, j])) > tol)
            same = bool(np.all(img[i] == img[j]))
            mismatches += sep == same
    recs = [Record("separation_matches_psi", example_id, {"n_points": int(X.shape[0])},
                   mismatches, 0, 0, mismatches == 0)]
    if example_id == "severed":
        s = cone.separates_points(cat, [-1.0], [0.0], tol)
        recs.append(Record("separates(-1,0)", example_id, {"expected": False}, float(s), 0.0, 0, not s))
    return recs


def canonicity(example_id: str, ctx: SuiteContext) -> list[Record]:
    spec = intrinsic.embedding_spec(example_id)
    try:
        v = intrinsic.transfer_map(spec, intrinsic.rescaled(spec, 2.0, 1.0))
        return [Record("canonicity", example_id, {"n_points": v.n_points, "n_probes": v.n_probes},
                       0.0, 0.0, 0, v.ok)]
    except FiberInconsistent as e:
        return [Record("canonicity", example_id, {"error": type(e).__name__, "witness": str(e.witness)},
                       1.0, 0.0, 0, False)]


def post_widder(example_id: str, ctx: SuiteContext, ts=(0.5, 1.0), ns=(16, 64)) -> list[Record]:
    ex = get_example(example_id)
    if not hasattr(ex, "grid_kernel"):
        return []
    U = ex.resolvent()
    if example_id == "uniform":
        U.kernel = lambda b: ex.grid_kernel(b, ctx.grid_radius, ctx.grid_h)
        f = TestFunction(lambda X: np.exp(-X[:, 0] ** 2 / 8), name="bump")
        xs = [0.0, 1.0, 2.0]
    else:
        f = ex.test_functions()[1]
        xs = [0.0, 1.0, 2.0]
    tol = ctx.tol("post_widder_rel")
    out = []
    for t in ts:
        for x in xs:
            exact = float(ex.pt(t, f, [[x]])[0])
            errs = [abs(rs.post_widder_invert(U, f, [x], t, n) - exact) for n in ns]
            rel = errs[-1] / abs(exact)
            out.append(Record("post_widder", example_id, {"t": t, "x": x, "n": list(ns),
                              "errors": errs}, rel, 0.0, tol, rel <= tol and errs[-1] <= errs[0]))
    return out


SUITES = {
    "resolvent": resolvent_identity,
    "chapman-kolmogorov": chapman_kolmogorov,
    "laplace": laplace_consistency,
    "supermedian": supermedian_domination,
    "monotonicity": complete_monotonicity,
    "generator": generator_pairs,
    "embedding": embedding,
    "separation": separation,
    "canonicity": canonicity,
    "post-widder": post_widder,
}


def run_suite(name: str, example_id: str, ctx: SuiteContext | None = None) -> list[Record]:
    return SUITES[name](example_id, ctx or SuiteContext())
