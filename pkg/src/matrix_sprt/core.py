"""Hypothesis layouts, threshold matrices and the three matrix stopping rules.

All engines operate on a batch of independent trajectories at once. A
:class:`TestRunState` holds the per-trajectory statistics for the rows that are
still running; rows are dropped from the working arrays as soon as they stop,
and their outcome is written to the per-trial result arrays.

Logarithms are natural throughout, so thresholds and statistics are in nats.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.special import logsumexp

DEFAULT_HORIZON = 10**6


class ConfigurationError(ValueError):
    """Raised for invalid layouts, budgets, thresholds or engine setups."""


def _as_vector(value: Any) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1:
        raise ConfigurationError(f"parameter must be a scalar or a flat vector, got shape {arr.shape}")
    return tuple(float(v) for v in arr)


# ---------------------------------------------------------------------------
# Parameter regions and layouts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Region:
    """Axis-aligned box in parameter space; a point when ``lo == hi``.

    ``closed`` applies to every finite bound. Infinite bounds are allowed, so
    half-lines such as ``[theta_1, inf)`` are boxes too.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    closed: bool = True

    def __post_init__(self) -> None:
        lo, hi = _as_vector(self.lo), _as_vector(self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi):
            raise ConfigurationError("region bounds have different dimensions")
        for a, b in zip(lo, hi):
            if math.isnan(a) or math.isnan(b) or a > b:
                raise ConfigurationError(f"empty region bounds lo={lo}, hi={hi}")
            if a == b and not self.closed:
                raise ConfigurationError("an open region cannot be degenerate")

    @classmethod
    def point(cls, value: Any) -> "Region":
        v = _as_vector(value)
        return cls(v, v)

    @classmethod
    def interval(cls, lo: float, hi: float, closed: bool = True) -> "Region":
        return cls((lo,), (hi,), closed)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    def contains(self, theta: Any) -> bool:
        t = np.asarray(_as_vector(theta))
        if t.size != self.dim:
            return False
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        if self.closed:
            return bool(np.all((t >= lo) & (t <= hi)))
        return bool(np.all((t > lo) & (t < hi)))

    def clip(self, theta: np.ndarray) -> np.ndarray:
        """Project ``theta`` (last axis = parameter) onto the closed box."""
        return np.clip(theta, np.asarray(self.lo), np.asarray(self.hi))

    def intersects(self, other: "Region") -> bool:
        if self.dim != other.dim:
            raise ConfigurationError("regions have different dimensions")
        for a_lo, a_hi, b_lo, b_hi in zip(self.lo, self.hi, other.lo, other.hi):
            lo, hi = max(a_lo, b_lo), min(a_hi, b_hi)
            if lo > hi:
                return False
            if lo == hi:
                # touching at a single coordinate value: shared only if both include it
                a_has = self.closed or (a_lo < lo < a_hi)
                b_has = other.closed or (b_lo < lo < b_hi)
                if not (a_has and b_has):
                    return False
        return True

    def describe(self) -> str:
        if self.is_point:
            return "{" + ", ".join(f"{v:g}" for v in self.lo) + "}"
        l, r = ("[", "]") if self.closed else ("(", ")")
        parts = [f"{l}{a:g}, {b:g}{r}" for a, b in zip(self.lo, self.hi)]
        return " x ".join(parts)


@dataclass(frozen=True)
class HypothesisLayout:
    """The N+1 hypothesis regions plus an optional indifference zone."""

    regions: tuple[Region, ...]
    indifference: Region | None = None

    def __post_init__(self) -> None:
        regions = tuple(self.regions)
        object.__setattr__(self, "regions", regions)
        if len(regions) < 2:
            raise ConfigurationError("a layout needs at least two hypotheses")
        dims = {r.dim for r in regions}
        if self.indifference is not None:
            dims.add(self.indifference.dim)
        if len(dims) != 1:
            raise ConfigurationError("all regions must share one parameter dimension")
        for i in range(len(regions)):
            for j in range(i + 1, len(regions)):
                if regions[i].intersects(regions[j]):
                    raise ConfigurationError(f"regions {i} and {j} overlap")
            if self.indifference is not None and regions[i].intersects(self.indifference):
                raise ConfigurationError(f"region {i} overlaps the indifference zone")

    @classmethod
    def simple(cls, points: Sequence[Any]) -> "HypothesisLayout":
        return cls(tuple(Region.point(p) for p in points))

    @classmethod
    def two_sided(cls, theta0: float, theta1: float) -> "HypothesisLayout":
        """H0: theta <= theta0, H1: theta >= theta1, indifference in between."""
        if not theta0 < theta1:
            raise ConfigurationError("need theta0 < theta1")
        return cls(
            (Region.interval(-math.inf, theta0), Region.interval(theta1, math.inf)),
            Region.interval(theta0, theta1, closed=False),
        )

    @property
    def count(self) -> int:
        return len(self.regions)

    @property
    def dim(self) -> int:
        return self.regions[0].dim

    @property
    def is_simple(self) -> bool:
        return all(r.is_point for r in self.regions)

    def points(self) -> np.ndarray:
        """Hypothesis points as an ``(N+1, dim)`` array (simple layouts only)."""
        if not self.is_simple:
            raise ConfigurationError("layout has composite hypotheses")
        return np.array([r.lo for r in self.regions], dtype=float)

    def locate(self, theta: Any) -> int | None:
        """Index of the hypothesis region holding ``theta``; None otherwise."""
        for i, r in enumerate(self.regions):
            if r.contains(theta):
                return i
        return None

    def label(self, theta: Any) -> str:
        i = self.locate(theta)
        if i is not None:
            return f"H{i}"
        if self.indifference is not None and self.indifference.contains(theta):
            return "in"
        return "out"


# ---------------------------------------------------------------------------
# Budgets and thresholds
# ---------------------------------------------------------------------------


def _square(matrix: Any, name: str) -> np.ndarray:
    arr = np.array(matrix, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 2:
        raise ConfigurationError(f"{name} must be a square matrix of size >= 2")
    return arr


@dataclass(frozen=True)
class ErrorBudget:
    """Matrix of error-probability constraints alpha[i, j] = P_i(accept j)."""

    alpha: np.ndarray

    def __post_init__(self) -> None:
        arr = _square(self.alpha, "alpha")
        off = ~np.eye(arr.shape[0], dtype=bool)
        bad = off & ~((arr > 0) & (arr < 1))
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise ConfigurationError(f"alpha[{i}][{j}] = {arr[i, j]!r} is outside (0, 1)")
        np.fill_diagonal(arr, 0.0)
        arr.setflags(write=False)
        object.__setattr__(self, "alpha", arr)

    @classmethod
    def uniform(cls, count: int, alpha: float) -> "ErrorBudget":
        return cls(np.full((count, count), alpha))

    @property
    def size(self) -> int:
        return self.alpha.shape[0]


@dataclass(frozen=True)
class ThresholdMatrix:
    """Log-scale thresholds a[i, j] (diagonal ignored)."""

    a: np.ndarray

    def __post_init__(self) -> None:
        arr = _square(self.a, "thresholds")
        off = ~np.eye(arr.shape[0], dtype=bool)
        bad = off & ~(arr > 0)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise ConfigurationError(f"a[{i}][{j}] = {arr[i, j]!r} must be positive")
        np.fill_diagonal(arr, 0.0)
        arr.setflags(write=False)
        object.__setattr__(self, "a", arr)

    @classmethod
    def uniform(cls, count: int, a: float) -> "ThresholdMatrix":
        return cls(np.full((count, count), a))

    @property
    def size(self) -> int:
        return self.a.shape[0]

    def implied_bounds(self) -> np.ndarray:
        """exp(-a[i, j]): the guaranteed ceiling on P_i(accept j)."""
        out = np.exp(-self.a)
        np.fill_diagonal(out, 0.0)
        return out


def build_threshold_matrix(budget: ErrorBudget) -> ThresholdMatrix:
    """a[i, j] = |log alpha[i, j]|, which caps each error probability at alpha[i, j]."""
    a = -np.log(np.where(np.eye(budget.size, dtype=bool), 0.5, budget.alpha))
    return ThresholdMatrix(a)


# ---------------------------------------------------------------------------
# Run state and decisions
# ---------------------------------------------------------------------------


class EngineKind(str, enum.Enum):
    MSPRT = "msprt"
    MMSPRT = "mmsprt"
    AMSPRT = "amsprt"


@dataclass(frozen=True)
class Decision:
    stopping_time: int
    accepted: int | None
    censored: bool = False
    ambiguous_tie: bool = False
    invalid: bool = False


@dataclass
class TestRunState:
    """Mutable statistics for a batch of trajectories driven by one engine.

    ``stats`` holds the decision statistics of the rows still running:
    the pairwise LLR matrix ``(B, N+1, N+1)`` for the MSPRT, and one
    statistic per hypothesis ``(B, N+1)`` for the mixture and adaptive tests.
    ``rows`` maps working rows back to trial indices ``0..total-1``.
    """

    __test__ = False  # keep pytest from collecting this class

    kind: EngineKind
    total: int
    n: int
    stats: np.ndarray
    hist: dict[str, np.ndarray]
    extra: dict[str, np.ndarray] = field(default_factory=dict)
    rows: np.ndarray = field(default=None)  # type: ignore[assignment]
    time: np.ndarray = field(default=None)  # type: ignore[assignment]
    accepted: np.ndarray = field(default=None)  # type: ignore[assignment]
    tie: np.ndarray = field(default=None)  # type: ignore[assignment]
    censored: np.ndarray = field(default=None)  # type: ignore[assignment]
    invalid: np.ndarray = field(default=None)  # type: ignore[assignment]
    fallback_steps: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.rows is None:
            self.rows = np.arange(self.total)
        self.time = np.zeros(self.total, dtype=np.int64)
        self.accepted = np.full(self.total, -1, dtype=np.int64)
        self.tie = np.zeros(self.total, dtype=bool)
        self.censored = np.zeros(self.total, dtype=bool)
        self.invalid = np.zeros(self.total, dtype=bool)
        self.fallback_steps = np.zeros(self.total, dtype=np.int64)

    @property
    def active(self) -> int:
        return int(self.rows.size)

    @property
    def finished(self) -> bool:
        return self.rows.size == 0

    def decision(self, k: int = 0) -> Decision | None:
        """Outcome of trial ``k``; None while it is still running."""
        if self.time[k] == 0:
            return None
        acc = int(self.accepted[k])
        return Decision(
            stopping_time=int(self.time[k]),
            accepted=acc if acc >= 0 else None,
            censored=bool(self.censored[k]),
            ambiguous_tie=bool(self.tie[k]),
            invalid=bool(self.invalid[k]),
        )

    def _keep(self, keep: np.ndarray) -> None:
        self.rows = self.rows[keep]
        self.stats = self.stats[keep]
        self.hist = {k: v[keep] for k, v in self.hist.items()}
        self.extra = {k: v[keep] for k, v in self.extra.items()}


def acceptance_margins(stats: np.ndarray, a: np.ndarray) -> np.ndarray:
    """margin[b, i] = min over j != i of (stats[b, i, j] - a[j, i]).

    Hypothesis i is accepted on row b when its margin is >= 0. ``stats`` may
    be a pairwise matrix ``(B, N+1, N+1)`` or a per-hypothesis vector
    ``(B, N+1)``, in which case entry ``[b, j]`` is compared against
    ``a[j, i]`` for every candidate ``i``.
    """
    if stats.ndim == 2:
        stats = stats[:, None, :]
    diff = stats - a.T[None, :, :]
    k = a.shape[0]
    diff = np.where(np.eye(k, dtype=bool)[None], np.inf, diff)
    return diff.min(axis=2)


def _settle(state: TestRunState, a: np.ndarray, horizon: int, bad: np.ndarray | None = None) -> np.ndarray:
    """Record rows that stopped at ``state.n`` and drop them from the batch."""
    margins = acceptance_margins(state.stats, a)
    ok = margins >= 0
    if bad is None:
        bad = np.zeros(state.active, dtype=bool)
    bad = bad | np.isnan(margins).any(axis=1)
    hit = ok.any(axis=1) & ~bad
    cens = ~hit & ~bad & (state.n >= horizon)
    done = hit | bad | cens
    if not done.any():
        return np.empty(0, dtype=np.int64)
    ids = state.rows[done]
    state.time[ids] = state.n
    first = np.argmax(ok, axis=1)
    state.accepted[state.rows[hit]] = first[hit]
    state.tie[state.rows[hit]] = ok[hit].sum(axis=1) >= 2
    state.invalid[state.rows[bad]] = True
    state.censored[state.rows[cens]] = True
    state._keep(~done)
    return ids


def msprt_step(
    state: TestRunState,
    increments: np.ndarray,
    thresholds: ThresholdMatrix,
    horizon: int = DEFAULT_HORIZON,
) -> np.ndarray:
    """Accumulate pairwise LLR increments and apply the matrix SPRT rule.

    ``increments`` has shape ``(B, N+1, N+1)`` (or ``(N+1, N+1)`` for a single
    running row) with entry ``[i, j]`` the increment of lambda_ij. Returns the
    trial indices that stopped at this step.
    """
    if state.kind is not EngineKind.MSPRT:
        raise ConfigurationError("msprt_step needs an MSPRT state")
    inc = np.asarray(increments, dtype=float)
    if inc.ndim == 2:
        inc = inc[None]
    state.n += 1
    bad = ~np.isfinite(inc).all(axis=(1, 2))
    state.stats = state.stats + np.where(bad[:, None, None], 0.0, inc)
    return _settle(state, thresholds.a, horizon, bad)


def _vector_step(state: TestRunState, stats: np.ndarray, thresholds: ThresholdMatrix, horizon: int) -> np.ndarray:
    state.n += 1
    state.stats = stats
    return _settle(state, thresholds.a, horizon, np.isnan(stats).any(axis=1))


# ---------------------------------------------------------------------------
# Prior grids for the mixture test
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PriorGrid:
    """Discrete mixing measure: grid points with normalized log-weights."""

    points: np.ndarray
    log_weights: np.ndarray

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        lw = np.asarray(self.log_weights, dtype=float).ravel()
        if pts.shape[0] != lw.size or lw.size == 0:
            raise ConfigurationError("prior grid is empty or mis-shaped")
        if not np.isfinite(lw).any():
            raise ConfigurationError("prior has no support on the working range")
        lw = lw - logsumexp(lw)
        pts.setflags(write=False)
        lw.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "log_weights", lw)

    @classmethod
    def point_mass(cls, theta: Any) -> "PriorGrid":
        return cls(np.array([_as_vector(theta)]), np.zeros(1))

    @classmethod
    def product(cls, axes: Sequence[tuple[float, float, int, str]]) -> "PriorGrid":
        """Uniform prior on a box, trapezoid weights along each axis.

        Each axis is ``(lo, hi, size, scale)``; with ``scale == "log"`` the
        nodes are log-spaced and the density is uniform in log-coordinates.
        """
        nodes, weights = [], []
        for lo, hi, size, scale in axes:
            if size < 1 or not lo <= hi:
                raise ConfigurationError(f"bad prior axis ({lo}, {hi}, {size})")
            if scale == "log":
                if lo <= 0:
                    raise ConfigurationError("log-scale prior axis needs lo > 0")
                u = np.linspace(math.log(lo), math.log(hi), size)
                x = np.exp(u)
            elif scale == "linear":
                u = x = np.linspace(lo, hi, size)
            else:
                raise ConfigurationError(f"unknown prior axis scale {scale!r}")
            if size == 1:
                w = np.ones(1)
            else:
                w = np.full(size, u[1] - u[0])
                w[[0, -1]] *= 0.5
            nodes.append(x)
            weights.append(w)
        mesh = np.meshgrid(*nodes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        wmesh = np.meshgrid(*weights, indexing="ij")
        w = np.prod(np.stack([m.ravel() for m in wmesh], axis=1), axis=1)
        return cls(pts, np.log(w))

    @classmethod
    def uniform(cls, lo: float, hi: float, size: int = 201) -> "PriorGrid":
        return cls.product([(lo, hi, size, "linear")])

    @property
    def size(self) -> int:
        return self.points.shape[0]


# ---------------------------------------------------------------------------
# Engines
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Engine:
    layout: HypothesisLayout
    thresholds: ThresholdMatrix
    model: Any
    horizon: int = DEFAULT_HORIZON

    kind = EngineKind.MSPRT

    def __post_init__(self) -> None:
        if self.thresholds.size != self.layout.count:
            raise ConfigurationError("threshold matrix size does not match the number of hypotheses")
        if self.layout.dim != self.model.dim:
            raise ConfigurationError(
                f"layout parameters have dimension {self.layout.dim}, model expects {self.model.dim}"
            )
        if self.horizon < 1:
            raise ConfigurationError("horizon must be >= 1")

    def start(self, batch: int = 1) -> TestRunState:
        raise NotImplementedError

    def step(self, state: TestRunState, x: Any) -> np.ndarray:
        raise NotImplementedError

    def run(self, xs: Sequence[float]) -> Decision | None:
        """Feed one trajectory until the engine stops; None if ``xs`` runs out."""
        state = self.start(1)
        for x in xs:
            self.step(state, x)
            if state.finished:
                return state.decision(0)
        return None


@dataclass(frozen=True)
class MSPRT(_Engine):
    """Matrix SPRT over simple hypotheses (the layout must hold points)."""

    kind = EngineKind.MSPRT

    def __post_init__(self) -> None:
        super().__post_init__()
        if not self.layout.is_simple:
            raise ConfigurationError("the MSPRT needs simple (point) hypotheses")

    def start(self, batch: int = 1) -> TestRunState:
        k = self.layout.count
        state = TestRunState(
            EngineKind.MSPRT, batch, 0, np.zeros((batch, k, k)), self.model.init_hist(batch)
        )
        if hasattr(self.model, "hypothesis_loglik"):
            state.extra["loglik"] = np.zeros((batch, k))
        return state

    def increments(self, state: TestRunState, x: np.ndarray) -> tuple[np.ndarray, dict[str, np.ndarray]]:
        """Per-pair increments for observation ``x`` and the updated history."""
        pts = self.layout.points()
        if "loglik" in state.extra:
            hist = self.model.update(state.hist, x)
            cur = self.model.hypothesis_loglik(pts, hist)
            d = cur - state.extra["loglik"]
            state.extra["loglik"] = cur
        else:
            d = self.model.logf(pts[None], x, state.hist)
            hist = self.model.update(state.hist, x)
        return d[:, :, None] - d[:, None, :], hist

    def step(self, state: TestRunState, x: Any) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        inc, state.hist = self.increments(state, x)
        return msprt_step(state, inc, self.thresholds, self.horizon)


def _log_sups(model: Any, layout: HypothesisLayout, hist: dict[str, np.ndarray]) -> np.ndarray:
    return np.stack([model.log_sup(r, hist) for r in layout.regions], axis=1)


@dataclass(frozen=True)
class MMSPRT(_Engine):
    """Matrix mixture SPRT: prior-mixture numerator, restricted-sup denominators.

    The mixture is carried as per-grid-point cumulative log-likelihoods and
    reduced with log-sum-exp. Denominators come from the model's closed-form
    restricted supremum when it has one (``sup="model"``), otherwise from the
    maximum over the grid points inside each region (``sup="grid"``).
    """

    prior: PriorGrid = None  # type: ignore[assignment]
    sup: str = "model"

    kind = EngineKind.MMSPRT

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.prior is None:
            raise ConfigurationError("the MMSPRT needs a prior grid")
        if self.prior.points.shape[1] != self.model.dim:
            raise ConfigurationError("prior grid dimension does not match the model")
        if self.sup not in ("model", "grid"):
            raise ConfigurationError(f"unknown sup mode {self.sup!r}")
        if self.sup == "grid":
            for j, r in enumerate(self.layout.regions):
                if not self._region_mask(r).any():
                    raise ConfigurationError(f"no prior grid point inside region {j}")

    def _region_mask(self, region: Region) -> np.ndarray:
        return np.array([region.contains(p) for p in self.prior.points])

    def start(self, batch: int = 1) -> TestRunState:
        k = self.layout.count
        state = TestRunState(
            EngineKind.MMSPRT, batch, 0, np.zeros((batch, k)), self.model.init_hist(batch)
        )
        state.extra["grid_loglik"] = np.zeros((batch, self.prior.size))
        state.extra["log_g"] = np.zeros(batch)
        return state

    def step(self, state: TestRunState, x: Any) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        ll = state.extra["grid_loglik"] + self.model.logf(self.prior.points[None], x, state.hist)
        state.extra["grid_loglik"] = ll
        log_g = logsumexp(ll + self.prior.log_weights[None], axis=1)
        state.extra["log_g"] = log_g
        state.hist = self.model.update(state.hist, x)
        if self.sup == "model":
            with np.errstate(divide="ignore"):
                sups = _log_sups(self.model, self.layout, state.hist)
        else:
            sups = np.stack(
                [ll[:, self._region_mask(r)].max(axis=1) for r in self.layout.regions], axis=1
            )
        return _vector_step(state, log_g[:, None] - sups, self.thresholds, self.horizon)


Estimator = Callable[[dict], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class AMSPRT(_Engine):
    """Adaptive matrix SPRT with one-step-delayed plug-in estimates.

    The numerator evaluates the conditional density of X_n at the estimate
    built from X_1..X_{n-1}. Where the estimator is undefined the configured
    ``initial_estimate`` is used for that step and the step is counted in
    ``state.fallback_steps``.
    """

    initial_estimate: tuple[float, ...] = None  # type: ignore[assignment]
    estimator: Estimator | None = None

    kind = EngineKind.AMSPRT

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.initial_estimate is None:
            raise ConfigurationError("the AMSPRT needs an initial estimate")
        init = _as_vector(self.initial_estimate)
        if len(init) != self.model.dim:
            raise ConfigurationError("initial estimate has the wrong dimension")
        object.__setattr__(self, "initial_estimate", init)

    def start(self, batch: int = 1) -> TestRunState:
        k = self.layout.count
        state = TestRunState(
            EngineKind.AMSPRT, batch, 0, np.zeros((batch, k)), self.model.init_hist(batch)
        )
        state.extra["numerator"] = np.zeros(batch)
        return state

    def predictable_estimate(self, hist: dict[str, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
        est = self.estimator or self.model.estimate
        theta, ok = est(hist)
        theta = np.where(ok[:, None], theta, np.asarray(self.initial_estimate)[None])
        return theta, ok

    def step(self, state: TestRunState, x: Any) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        theta, ok = self.predictable_estimate(state.hist)
        state.fallback_steps[state.rows] += ~ok
        num = state.extra["numerator"] + self.model.logf(theta[:, None, :], x, state.hist)[:, 0]
        state.extra["numerator"] = num
        state.hist = self.model.update(state.hist, x)
        with np.errstate(divide="ignore"):
            sups = _log_sups(self.model, self.layout, state.hist)
        return _vector_step(state, num[:, None] - sups, self.thresholds, self.horizon)


def mmsprt_step(state: TestRunState, engine: MMSPRT, x: Any) -> np.ndarray:
    return engine.step(state, x)


def amsprt_step(state: TestRunState, engine: AMSPRT, x: Any) -> np.ndarray:
    return engine.step(state, x)


def wald_sprt(llrs: Sequence[float], lower: float, upper: float) -> tuple[int, int] | None:
    """Plain two-boundary SPRT on a stream of LLR increments of H1 vs H0.

    Returns ``(T, d)`` with d=1 when the cumulative LLR reaches ``upper`` and
    d=0 when it falls to ``-lower``.
    """
    s = 0.0
    for n, inc in enumerate(llrs, start=1):
        s += inc
        if s >= upper:
            return n, 1
        if -s >= lower:
            return n, 0
    return None
