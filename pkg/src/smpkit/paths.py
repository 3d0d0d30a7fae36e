"""Cadlag sample paths, hitting times and Monte Carlo tests of Markov properties.

Paths are piecewise linear: a sorted list of segments, each either a drift
with constant velocity or a hold.  A segment that starts away from the left
limit of its predecessor records a jump; evaluation is right continuous.
Replication ``i`` of a run with master seed ``s`` draws from the Philox
stream ``SeedSequence(s, spawn_key=(i,))``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .errors import InsufficientSamples, TooManyCensored, UnsupportedSpace
from .kernels import TestFunction, as_points
from .zoo import get_example

EULER_STEP = 1e-3
SIGMA_LEVEL = 3.0
KS_LEVEL = 0.01
CENSOR_LIMIT = 0.01
RIGHT_LIMIT_LADDER = tuple(10.0 ** -k for k in range(3, 7))


def stream(seed: int, i: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(i,))))


class CadlagPath:
    """Right-continuous path with finitely many drift/hold segments on [0, horizon]."""

    def __init__(self, times, starts, velocities, jumps, horizon: float, y0=None,
                 kinds=None, labels=None):
        self.times = np.asarray(times, dtype=float)
        self.starts = np.atleast_2d(np.asarray(starts, dtype=float))
        self.velocities = np.atleast_2d(np.asarray(velocities, dtype=float))
        self.jump_flags = np.asarray(jumps, dtype=bool)
        self.horizon = float(horizon)
        self.y0 = None if y0 is None else np.asarray(y0, dtype=float)
        moving = np.any(self.velocities != 0, axis=1)
        self.kinds = list(kinds) if kinds is not None else \
            ["drift" if m else "hold" for m in moving]
        self.labels = list(labels) if labels is not None else [""] * len(self.times)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("segment start times must strictly increase")

    @property
    def dim(self) -> int:
        return self.starts.shape[1]

    @property
    def jumps(self) -> list:
        return [(float(t), s.copy()) for t, s, j in zip(self.times, self.starts, self.jump_flags) if j]

    def hold_durations(self, point, tol: float = 1e-12) -> np.ndarray:
        """Durations of completed hold segments sitting at ``point``."""
        p = np.asarray(point, dtype=float)
        ends = np.append(self.times[1:], np.inf)
        sel = [k for k, kind in enumerate(self.kinds)
               if kind == "hold" and np.max(np.abs(self.starts[k] - p)) <= tol and ends[k] <= self.horizon]
        return ends[sel] - self.times[sel]

    def _index(self, t):
        return np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 1)

    def at(self, t) -> np.ndarray:
        """Y_t for scalar or array t (rows follow t)."""
        t = np.asarray(t, dtype=float)
        k = self._index(t)
        out = self.starts[k] + (t - self.times[k])[..., None] * self.velocities[k]
        if self.y0 is not None:
            out = np.where((t == 0)[..., None], self.y0, out)
        return out

    def left_limit(self, t: float) -> np.ndarray:
        if t <= 0:
            raise ValueError("left limits are taken on (0, horizon]")
        k = int(np.clip(np.searchsorted(self.times, t, side="left") - 1, 0, len(self.times) - 1))
        return self.starts[k] + (t - self.times[k]) * self.velocities[k]

    def visits(self, point, tol: float = 1e-12) -> bool:
        """Exact test whether Y_t == point for some t in [0, horizon]."""
        p = np.asarray(point, dtype=float)
        ends = np.append(self.times[1:], self.horizon)
        for t0, t1, s, v in zip(self.times, ends, self.starts, self.velocities):
            d = p - s
            if not np.any(v):
                if np.max(np.abs(d)) <= tol:
                    return True
                continue
            a = np.dot(d, v) / np.dot(v, v)
            if 0 <= a and t0 + a < t1 + (t1 == self.horizon) * tol and np.max(np.abs(d - a * v)) <= tol:
                return True
        return False

    def validate(self, contains: Callable, n_check: int = 64) -> None:
        ts = np.concatenate([self.times, np.linspace(0, self.horizon, n_check)])
        Y = self.at(ts)
        if not np.all(contains(Y)):
            bad = Y[~contains(Y)][0]
            raise ValueError(f"path leaves the state space at {bad.tolist()}")

    def to_rows(self, path_id: int = 0) -> list:
        return [[path_id, k, repr(float(t)), kind, *[repr(float(c)) for c in s], label]
                for k, (t, kind, s, label) in enumerate(zip(self.times, self.kinds, self.starts, self.labels))]


def paths_to_csv(paths: Sequence[CadlagPath]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    d = paths[0].dim if paths else 1
    w.writerow(["path_id", "event_index", "t", "kind"] + [f"x{i}" for i in range(d)] + ["label"])
    for i, p in enumerate(paths):
        w.writerows(p.to_rows(i))
    return buf.getvalue()


# ---------------------------------------------------------------------------
# per-example samplers


class _Builder:
    def __init__(self, dim: int):
        self.t, self.s, self.v, self.j, self.k, self.lab = [], [], [], [], [], []
        self.dim = dim

    def add(self, t, start, vel=None, jump=False, kind=None, label=""):
        vel = np.zeros(self.dim) if vel is None else np.asarray(vel, float)
        if self.t and t <= self.t[-1]:
            # zero-length segment: the later one replaces it (right continuity)
            self.t.pop(); self.s.pop(); self.v.pop(); self.j.pop(); self.k.pop(); self.lab.pop()
        self.t.append(float(t)); self.s.append(np.asarray(start, float)); self.v.append(vel)
        self.j.append(jump); self.k.append(kind or ("drift" if np.any(vel) else "hold"))
        self.lab.append(label)

    def build(self, horizon, y0=None):
        return CadlagPath(self.t, self.s, self.v, self.j, horizon, y0, self.k, self.lab)


def _drift_1d(x0, horizon, b):
    b.add(0.0, [x0], [-1.0])


def _sticky(x0, horizon, rng, intrinsic, hold_rate):
    b = _Builder(1)
    if x0 < 0 or (intrinsic and x0 <= -1):
        b.add(0.0, [x0], [-1.0])
        return b.build(horizon)
    b.add(0.0, [x0], [-1.0])
    hold = rng.exponential(1.0 / hold_rate)
    b.add(x0, [0.0], kind="hold", label="sticky")
    if intrinsic:
        b.add(x0 + hold, [-1.0], [-1.0], jump=True)
    else:
        b.add(x0 + hold, [0.0], [-1.0])
    return b.build(horizon)


def _severed(x0, horizon):
    b = _Builder(1)
    b.add(0.0, [x0], [-1.0])
    if x0 >= 0:
        b.add(x0, [-1.0], [-1.0], jump=True)
    return b.build(horizon)


def _fork(x0, horizon, rng, intrinsic):
    b = _Builder(2)
    x, y = x0
    if y != 0 or x < 0:
        b.add(0.0, [x, y], [0.0, math.copysign(1.0, y)])
        return b.build(horizon)
    up = rng.random() < 0.5
    sign = 1.0 if up else -1.0
    y0 = None
    if x > 0:
        b.add(0.0, [x, 0.0], [-1.0, 0.0])
    if intrinsic:
        b.add(x, [0.0, sign], [0.0, sign], jump=True, label="up" if up else "down")
        if x == 0:
            y0 = [0.0, 0.0]
    else:
        b.add(x, [0.0, 0.0], [0.0, sign], label="up" if up else "down")
    return b.build(horizon, y0)


def _pure_jump(ex, x0, horizon, rng):
    b = _Builder(1)
    t, state = 0.0, int(round(x0))
    b.add(0.0, [state])
    while True:
        t += rng.exponential(1.0 / ex.lam)
        if t > horizon:
            break
        new = int(rng.choice(ex.m, p=ex.q[state]))
        b.add(t, [new], jump=new != state)
        state = new
    return b.build(horizon)


def _brownian(x0, horizon, rng, absorbing_at_origin=False, lift=False):
    x0 = np.atleast_1d(np.asarray(x0, float))
    d = x0.size - (1 if lift else 0)
    start = x0[:d]
    n = int(math.ceil(horizon / EULER_STEP))
    times = np.arange(n) * EULER_STEP
    if absorbing_at_origin and (np.all(start == 0) or (lift and x0[-1] == 1)):
        pos = np.repeat(start[None, :], n, axis=0)
    else:
        steps = rng.normal(0.0, math.sqrt(EULER_STEP), size=(n - 1, d))
        pos = np.vstack([start, start + np.cumsum(steps, axis=0)])
    if lift:
        flag = np.full((n, 1), x0[-1])
        pos = np.hstack([pos, flag])
    return CadlagPath(times, pos, np.zeros_like(pos), np.r_[False, np.ones(n - 1, bool)], horizon)


def _collapse(ex, x0, horizon, rng, intrinsic):
    if intrinsic:
        return CadlagPath([0.0], [[1.0]], [[0.0]], [False], horizon)
    target = ex.pi_sample(rng)
    return CadlagPath([0.0], [[target]], [[0.0]], [True], horizon, y0=[x0])


def sample_path(example_id: str, space: str, x0, horizon: float, rng: np.random.Generator,
                hold_rate: float = 1.0) -> CadlagPath:
    """One trajectory of the example started at x0 (given in the coordinates of ``space``)."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if space not in ("original", "intrinsic"):
        raise UnsupportedSpace(f"unknown space {space!r}")
    ex = get_example(example_id, space)
    ex._check(x0)
    intrinsic = space == "intrinsic"
    x = as_points(x0, ex.dim)[0]
    eid = example_id
    if eid == "uniform" or (eid == "severed" and intrinsic):
        b = _Builder(1)
        _drift_1d(x[0], horizon, b)
        return b.build(horizon)
    if eid == "sticky":
        return _sticky(x[0], horizon, rng, intrinsic, hold_rate)
    if eid == "severed":
        return _severed(x[0], horizon)
    if eid == "fork":
        return _fork(tuple(x), horizon, rng, intrinsic)
    if eid.startswith("pure_jump"):
        return _pure_jump(ex, x[0], horizon, rng)
    if eid.startswith("brownian"):
        return _brownian(x, horizon, rng)
    if eid == "absorbing_brownian":
        return _brownian(x, horizon, rng, absorbing_at_origin=True, lift=intrinsic)
    if eid == "collapse":
        return _collapse(ex, x[0], horizon, rng, intrinsic)
    raise UnsupportedSpace(f"no sampler for {example_id!r} on the {space} space")


def sample_paths(example_id, space, x0, horizon, N, seed, hold_rate=1.0) -> list[CadlagPath]:
    return [sample_path(example_id, space, x0, horizon, stream(seed, i), hold_rate) for i in range(N)]


# ---------------------------------------------------------------------------
# stopping times


@dataclass(frozen=True)
class StoppingRule:
    """Hitting time of the half-space {x[axis] op value}, or a fixed time."""

    kind: str
    axis: int = 0
    op: str = "<"
    value: float = 0.0
    t: float = 0.0
    description: str = ""

    @classmethod
    def hit_open(cls, axis, op, value):
        if op not in ("<", ">"):
            raise ValueError("open half-spaces use < or >")
        return cls("hit_open_set", axis, op, value, description=f"hit x[{axis}] {op} {value:g}")

    @classmethod
    def hit_closed(cls, axis, op, value):
        if op not in ("<=", ">="):
            raise ValueError("closed half-spaces use <= or >=")
        return cls("hit_closed_set", axis, op, value, description=f"hit x[{axis}] {op} {value:g}")

    @classmethod
    def fixed(cls, t):
        return cls("fixed_time", t=float(t), description=f"t = {t:g}")

    def inside(self, c: float) -> bool:
        return {"<": c < self.value, ">": c > self.value,
                "<=": c <= self.value, ">=": c >= self.value}[self.op]


def evaluate_stopping_time(path: CadlagPath, rule: StoppingRule) -> float:
    """First entrance time, scanning segments in order; inf if not before the horizon."""
    if rule.kind == "fixed_time":
        return rule.t if rule.t <= path.horizon else math.inf
    sign = -1.0 if rule.op in ("<", "<=") else 1.0
    ends = np.append(path.times[1:], path.horizon)
    if path.y0 is not None and rule.inside(path.y0[rule.axis]):
        return 0.0
    for t0, t1, s, v in zip(path.times, ends, path.starts, path.velocities):
        c, w = s[rule.axis], v[rule.axis]
        if rule.inside(c):
            return float(t0)
        if w * sign > 0:
            root = t0 + (rule.value - c) / w
            if root < t1 or (t1 == path.horizon and root <= t1):
                return float(root)
    return math.inf


# ---------------------------------------------------------------------------
# Monte Carlo reports


@dataclass
class McTestReport:
    test: str
    example: str
    space: str
    N: int
    seed: int
    statistic: float
    null_value: float
    tolerance: float | None = None
    p_value: float | None = None
    passed: bool = False
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _mean_gap(a: np.ndarray, b: np.ndarray):
    diff = b - a
    gap = float(diff.mean())
    tol = SIGMA_LEVEL * float(diff.std(ddof=1)) / math.sqrt(diff.size) if diff.size > 1 else 0.0
    return gap, tol


def markov_mc_test(example_id: str, space: str, x0, s: float, t: float, f: TestFunction,
                   N: int, seed: int) -> McTestReport:
    """|mean f(Y_{s+t}) - mean P_t f(Y_s)| against a 3 sigma band."""
    ex = get_example(example_id, space)
    paths = sample_paths(example_id, space, x0, s + t, N, seed)
    Ys = np.array([p.at(s) for p in paths])
    Yst = np.array([p.at(s + t) for p in paths])
    a = f.values(Yst)
    b = ex.pt(t, f, Ys)
    gap, tol = _mean_gap(a, b)
    return McTestReport("markov", example_id, space, N, seed, abs(gap), 0.0, tol,
                        passed=abs(gap) <= tol + 1e-12, extra={"signed_gap": gap})


def strong_markov_mc_test(example_id: str, space: str, x0, rule: StoppingRule, s: float,
                          f: TestFunction, N: int, seed: int, horizon: float = 40.0) -> McTestReport:
    """Signed gap mean P_s f(Y_tau) - mean f(Y_{tau+s}) over paths with tau < horizon - s."""
    ex = get_example(example_id, space)
    paths = sample_paths(example_id, space, x0, horizon, N, seed)
    taus = np.array([evaluate_stopping_time(p, rule) for p in paths])
    ok = taus + s <= horizon
    censored = 1.0 - ok.mean()
    if censored > CENSOR_LIMIT:
        raise TooManyCensored(f"{censored:.1%} of paths are censored at the horizon")
    Ytau = np.array([p.at(tau) for p, tau, k in zip(paths, taus, ok) if k])
    Yafter = np.array([p.at(tau + s) for p, tau, k in zip(paths, taus, ok) if k])
    a = f.values(Yafter)
    b = ex.pt(s, f, Ytau)
    gap, tol = _mean_gap(a, b)
    return McTestReport("strong_markov", example_id, space, N, seed, abs(gap), 0.0, tol,
                        passed=abs(gap) <= tol + 1e-12,
                        extra={"signed_gap": gap, "censored": float(censored),
                               "rule": rule.description})


def holding_time_test(example_id: str = "sticky", space: str = "intrinsic", N: int = 10_000,
                      seed: int = 42, hold_rate: float = 1.0, x0: float = 0.5) -> McTestReport:
    """KS test of the holds at the sticky point against Exp(1)."""
    if N < 1:
        raise InsufficientSamples("holding-time test needs at least one sample")
    if example_id != "sticky":
        raise UnsupportedSpace("holding times are catalogued for the sticky example only")
    horizon = x0 + 60.0
    holds = np.concatenate([p.hold_durations([0.0]) for p in
                            sample_paths(example_id, space, x0, horizon, N, seed, hold_rate)])
    if holds.size == 0:
        raise InsufficientSamples("no completed holds were observed")
    res = stats.kstest(holds, "expon")
    p = float(res.pvalue)
    return McTestReport("holding_time", example_id, space, N, seed, float(res.statistic), 0.0,
                        p_value=p, passed=p > KS_LEVEL,
                        extra={"n_holds": int(holds.size), "mean_hold": float(holds.mean())})


def right_limit_identity_test(example_id: str, space: str, x0, t: float, N: int,
                              seed: int) -> McTestReport:
    """Fraction of paths with Y_t away from Y_{t+eps} along the ladder eps = 1e-3..1e-6."""
    paths = sample_paths(example_id, space, x0, t + 1.0, N, seed)
    bad = 0
    for p in paths:
        yt = p.at(t)
        dist = [float(np.max(np.abs(p.at(t + e) - yt))) for e in RIGHT_LIMIT_LADDER]
        speed = float(np.max(np.abs(p.velocities))) if p.velocities.size else 0.0
        if dist[-1] > 10 * RIGHT_LIMIT_LADDER[-1] * max(speed, 1.0):
            bad += 1
    freq = bad / N
    return McTestReport("right_limit", example_id, space, N, seed, freq, 0.0, 0.0,
                        passed=freq == 0.0)


def fork_branch_test(N: int = 10_000, seed: int = 42, x0=(1.0, 0.0), horizon: float = 2.0,
                     space: str = "intrinsic") -> McTestReport:
    """Up-branch fraction and occupation of the branch point (0, 0)."""
    paths = sample_paths("fork", space, x0, horizon, N, seed)
    up = np.array([p.at(horizon)[1] > 0 for p in paths])
    frac = float(up.mean())
    tol = 3 / (2 * math.sqrt(N))
    at_origin = sum(p.visits([0.0, 0.0]) for p in paths)
    ok = abs(frac - 0.5) <= tol and (space != "intrinsic" or at_origin == 0)
    return McTestReport("fork_branch", "fork", space, N, seed, abs(frac - 0.5), 0.0, tol,
                        passed=ok, extra={"up_fraction": frac, "paths_at_origin": int(at_origin)})


def supermartingale_check(example_id: str, space: str, x0, f: TestFunction, alpha: float,
                          t_grid, N: int, seed: int) -> McTestReport:
    """Empirical means of exp(-alpha t) f(Y_t) must not increase beyond 3 sigma."""
    t_grid = np.asarray(t_grid, dtype=float)
    paths = sample_paths(example_id, space, x0, float(t_grid.max()) + 1e-9, N, seed)
    V = np.array([np.exp(-alpha * t_grid) * f.values(p.at(t_grid)) for p in paths])
    worst, excess = 0.0, 0.0
    for k in range(len(t_grid) - 1):
        gap, tol = _mean_gap(V[:, k], V[:, k + 1])
        worst = max(worst, gap)
        excess = max(excess, gap - tol)
    return McTestReport("supermartingale", example_id, space, N, seed, worst, 0.0,
                        passed=excess <= 1e-12, extra={"max_excess": excess})
