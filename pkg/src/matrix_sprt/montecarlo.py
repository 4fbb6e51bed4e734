"""Reproducible Monte Carlo runner, bound checks and convergence diagnostics.

Trial k at true-parameter point p draws its noise from a Philox stream keyed
by (seed, p, k), so results do not depend on how trials are split between
workers or chunks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from .asymptotics import PsiSpec, SeparabilityError, predict_ess
from .core import (
    AMSPRT,
    DEFAULT_HORIZON,
    MMSPRT,
    MSPRT,
    ConfigurationError,
    EngineKind,
    ErrorBudget,
    HypothesisLayout,
    PriorGrid,
    ThresholdMatrix,
    build_threshold_matrix,
)
from .models.base import ObservationModel

#: noise values pre-drawn per trial at a time
BLOCK = 64
CONFIDENCE = 0.99


def trial_generator(seed: int, point: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, point, trial])))


def _noise(gen: np.random.Generator, kind: str, size: int) -> np.ndarray:
    if kind == "uniform":
        return gen.random(size)
    return gen.standard_normal(size)


@dataclass(frozen=True)
class ExperimentPlan:
    model: ObservationModel
    layout: HypothesisLayout
    engine: EngineKind
    truths: tuple[tuple[float, ...], ...]
    trials: int
    budget: ErrorBudget | None = None
    thresholds: ThresholdMatrix | None = None
    seed: int = 0
    orders: tuple[int, ...] = (1, 2)
    workers: int = 1
    horizon: int = DEFAULT_HORIZON
    chunk: int = 2000
    prior: PriorGrid | None = None
    sup: str = "model"
    initial_estimate: tuple[float, ...] | None = None
    psi: PsiSpec | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "engine", EngineKind(self.engine))
        if (self.budget is None) == (self.thresholds is None):
            raise ConfigurationError("give exactly one of an error budget or a threshold matrix")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if self.workers < 1 or self.chunk < 1:
            raise ConfigurationError("workers and chunk must be >= 1")
        truths = tuple(tuple(float(v) for v in np.atleast_1d(t)) for t in self.truths)
        if not truths:
            raise ConfigurationError("no true-parameter points given")
        for t in truths:
            try:
                self.model.check_parameter(t)
            except ValueError as exc:
                raise ConfigurationError(f"true parameter {t}: {exc}") from None
        object.__setattr__(self, "truths", truths)
        object.__setattr__(self, "orders", tuple(int(r) for r in self.orders))
        if any(r < 1 for r in self.orders):
            raise ConfigurationError("moment orders must be >= 1")
        self.build_engine()

    @property
    def threshold_matrix(self) -> ThresholdMatrix:
        return self.thresholds if self.thresholds is not None else build_threshold_matrix(self.budget)

    @property
    def error_budget(self) -> ErrorBudget:
        """The budget, or the one implied by the thresholds (alpha = exp(-a))."""
        if self.budget is not None:
            return self.budget
        alpha = np.exp(-self.thresholds.a)
        np.fill_diagonal(alpha, 0.5)
        return ErrorBudget(alpha)

    def build_engine(self) -> MSPRT | MMSPRT | AMSPRT:
        args = (self.layout, self.threshold_matrix, self.model, self.horizon)
        if self.engine is EngineKind.MSPRT:
            return MSPRT(*args)
        if self.engine is EngineKind.MMSPRT:
            return MMSPRT(*args, prior=self.prior, sup=self.sup)
        return AMSPRT(*args, initial_estimate=self.initial_estimate)


@dataclass
class _Outcomes:
    time: np.ndarray
    accepted: np.ndarray
    tie: np.ndarray
    censored: np.ndarray
    invalid: np.ndarray
    fallback_steps: np.ndarray


def _simulate(plan: ExperimentPlan, point: int, start: int, stop: int) -> _Outcomes:
    engine = plan.build_engine()
    model = plan.model
    truth = np.asarray(plan.truths[point])
    batch = stop - start
    gens = [trial_generator(plan.seed, point, k) for k in range(start, stop)]
    buf = np.empty((batch, BLOCK))
    state = engine.start(batch)
    while not state.finished:
        col = state.n % BLOCK
        if col == 0:
            for r in state.rows:
                buf[r] = _noise(gens[r], model.noise, BLOCK)
        x = model.draw(truth, state.hist, buf[state.rows, col])
        engine.step(state, x)
    return _Outcomes(state.time, state.accepted, state.tie, state.censored, state.invalid, state.fallback_steps)


def _units(plan: ExperimentPlan) -> list[tuple[int, int, int]]:
    return [
        (p, s, min(s + plan.chunk, plan.trials))
        for p in range(len(plan.truths))
        for s in range(0, plan.trials, plan.chunk)
    ]


def _run_unit(args: tuple[ExperimentPlan, int, int, int]) -> _Outcomes:
    return _simulate(*args)


def simulate_outcomes(plan: ExperimentPlan) -> list[_Outcomes]:
    """Raw per-trial outcomes for every true-parameter point."""
    units = _units(plan)
    jobs = [(plan, p, s, e) for p, s, e in units]
    if plan.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            parts = list(pool.map(_run_unit, jobs))
    else:
        parts = [_run_unit(j) for j in jobs]
    merged = []
    for p in range(len(plan.truths)):
        mine = [part for (q, _, _), part in zip(units, parts) if q == p]
        merged.append(_Outcomes(*(np.concatenate([getattr(m, f) for m in mine]) for f in
                                  ("time", "accepted", "tie", "censored", "invalid", "fallback_steps"))))
    return merged


def wilson_interval(count: int, total: int, confidence: float = CONFIDENCE) -> tuple[float, float]:
    lo, hi = proportion_confint(count, total, alpha=1.0 - confidence, method="wilson")
    return float(lo), float(hi)


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    if values.size == 0:
        return math.nan, math.nan
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else math.nan
    return mean, se


@dataclass
class PointSummary:
    index: int
    theta: tuple[float, ...]
    location: str
    home: int | None
    trials: int
    counts: list[int]
    censored: int
    invalid: int
    ties: int
    fallback_steps: int
    alpha_hat: list[float]
    wilson: list[tuple[float, float]]
    #: r -> (mean, standard error) of T^r over trials that stopped
    moments: dict[int, tuple[float, float]]
    #: r -> (mean, standard error) of min(T, horizon)^r over valid trials
    truncated: dict[int, tuple[float, float]]
    predicted: dict[int, float | None]
    ratio: dict[int, float | None]
    note: str = ""

    def error_cells(self) -> list[tuple[int, int]]:
        """(i, j) pairs constrained at this point: i is the true hypothesis."""
        if self.home is None:
            return []
        return [(self.home, j) for j in range(len(self.counts)) if j != self.home]

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "theta": list(self.theta),
            "location": self.location,
            "trials": self.trials,
            "counts": self.counts,
            "censored": self.censored,
            "invalid": self.invalid,
            "ties": self.ties,
            "fallback_steps": self.fallback_steps,
            "alpha_hat": self.alpha_hat,
            "wilson": [list(w) for w in self.wilson],
            "moments": {str(r): {"mean": m, "se": s} for r, (m, s) in self.moments.items()},
            "truncated_moments": {str(r): {"mean": m, "se": s} for r, (m, s) in self.truncated.items()},
            "predicted": {str(r): v for r, v in self.predicted.items()},
            "ratio": {str(r): v for r, v in self.ratio.items()},
            "note": self.note,
        }


def summarize(plan: ExperimentPlan, point: int, out: _Outcomes) -> PointSummary:
    theta = plan.truths[point]
    k = plan.layout.count
    valid = ~out.invalid
    stopped = valid & ~out.censored
    counts = [int(np.sum(out.accepted[stopped] == j)) for j in range(k)]
    alpha_hat = [c / plan.trials for c in counts]
    wilson = [wilson_interval(c, plan.trials) for c in counts]
    t_stop = out.time[stopped].astype(float)
    t_all = out.time[valid].astype(float)
    moments = {r: _mean_se(t_stop**r) for r in plan.orders}
    truncated = {r: _mean_se(t_all**r) for r in plan.orders}
    psi = plan.psi or plan.model.psi
    predicted: dict[int, float | None] = {r: None for r in plan.orders}
    note = ""
    try:
        pred = predict_ess(plan.layout, plan.error_budget, plan.model, psi, theta, plan.orders)
        predicted = dict(pred.moments)
    except SeparabilityError as exc:
        note = str(exc)
    ratio = {
        r: (moments[r][0] / predicted[r] if predicted[r] and np.isfinite(moments[r][0]) else None)
        for r in plan.orders
    }
    return PointSummary(
        index=point,
        theta=theta,
        location=plan.layout.label(theta),
        home=plan.layout.locate(theta),
        trials=plan.trials,
        counts=counts,
        censored=int(np.sum(out.censored & valid)),
        invalid=int(np.sum(out.invalid)),
        ties=int(np.sum(out.tie)),
        fallback_steps=int(np.sum(out.fallback_steps)),
        alpha_hat=alpha_hat,
        wilson=wilson,
        moments=moments,
        truncated=truncated,
        predicted=predicted,
        ratio=ratio,
        note=note,
    )


@dataclass
class MonteCarloReport:
    engine: EngineKind
    thresholds: np.ndarray
    seed: int
    trials: int
    horizon: int
    points: list[PointSummary] = field(default_factory=list)

    @property
    def invalid(self) -> int:
        return sum(p.invalid for p in self.points)

    def to_dict(self) -> dict[str, Any]:
        return {
            "engine": self.engine.value,
            "thresholds": self.thresholds.tolist(),
            "seed": self.seed,
            "trials": self.trials,
            "horizon": self.horizon,
            "points": [p.to_dict() for p in self.points],
            "bounds": [c.to_dict() for c in bound_check(self)],
        }

    def error_rows(self) -> list[dict[str, Any]]:
        return [c.to_row(self.engine) for c in bound_check(self)]

    def moment_rows(self) -> list[dict[str, Any]]:
        rows = []
        for p in self.points:
            for r in sorted(p.moments):
                rows.append({
                    "point_id": p.index,
                    "theta": _theta_text(p.theta),
                    "r": r,
                    "ess_hat": p.moments[r][0],
                    "se": p.moments[r][1],
                    "predicted": p.predicted[r],
                    "ratio": p.ratio[r],
                })
        return rows


def _theta_text(theta: Sequence[float]) -> str:
    return ";".join(repr(float(v)) for v in theta)


def run_experiment(plan: ExperimentPlan) -> MonteCarloReport:
    outcomes = simulate_outcomes(plan)
    report = MonteCarloReport(plan.engine, plan.threshold_matrix.a.copy(), plan.seed, plan.trials, plan.horizon)
    report.points = [summarize(plan, p, out) for p, out in enumerate(outcomes)]
    return report


ERROR_COLUMNS = ("point_id", "theta", "engine", "i", "j", "alpha_hat", "wilson_lo", "wilson_hi", "bound", "margin")
MOMENT_COLUMNS = ("point_id", "theta", "r", "ess_hat", "se", "predicted", "ratio")


@dataclass(frozen=True)
class BoundCell:
    point_id: int
    theta: tuple[float, ...]
    i: int
    j: int
    alpha_hat: float
    wilson_lo: float
    wilson_hi: float
    bound: float
    margin: float
    passed: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "point_id": self.point_id,
            "theta": list(self.theta),
            "i": self.i,
            "j": self.j,
            "alpha_hat": self.alpha_hat,
            "wilson_lo": self.wilson_lo,
            "wilson_hi": self.wilson_hi,
            "bound": self.bound,
            "margin": self.margin,
            "passed": self.passed,
        }

    def to_row(self, engine: EngineKind) -> dict[str, Any]:
        row = self.to_dict()
        del row["passed"]
        row["theta"] = _theta_text(self.theta)
        row["engine"] = engine.value
        return {c: row[c] for c in ERROR_COLUMNS}


def bound_check(report: MonteCarloReport, thresholds: ThresholdMatrix | None = None) -> list[BoundCell]:
    """alpha_ij passes when its Wilson lower bound does not exceed exp(-a_ij)."""
    a = report.thresholds if thresholds is None else thresholds.a
    cells = []
    for p in report.points:
        for i, j in p.error_cells():
            bound = math.exp(-a[i, j])
            lo, hi = p.wilson[j]
            cells.append(BoundCell(p.index, p.theta, i, j, p.alpha_hat[j], lo, hi, bound,
                                   bound - p.alpha_hat[j], lo <= bound))
    return cells


def ess_ratio_trend(plans: Sequence[ExperimentPlan], point: int = 0) -> list[dict[str, Any]]:
    """Observed/predicted moment ratios at one point across a sequence of budgets."""
    rows = []
    for plan in plans:
        summary = run_experiment(plan).points[point]
        alpha = plan.error_budget.alpha
        off = alpha[~np.eye(alpha.shape[0], dtype=bool)]
        for r in plan.orders:
            pred = summary.predicted[r]
            mean, se = summary.moments[r]
            rows.append({
                "alpha": float(off.max()),
                "r": r,
                "ess_hat": mean,
                "predicted": pred,
                "ratio": summary.ratio[r],
                "ratio_se": se / pred if pred else None,
            })
    return rows


@dataclass(frozen=True)
class SllnResult:
    status: str
    target: float
    fraction: float
    band: float
    values: np.ndarray
    #: mean over trajectories of the number of t in [tail_start, n_max] outside the band
    tail_count: float
    tail_start: int


def llr_paths(model: ObservationModel, theta: Any, vartheta: Any, n_max: int, reps: int,
              seed: int = 0) -> np.ndarray:
    """Cumulative LLR lambda_{theta, vartheta}(n), n = 1..n_max, under theta; shape (reps, n_max)."""
    th = model.check_parameter(theta)
    vt = model.check_parameter(vartheta)
    pts = np.stack([th, vt])[None]
    noise = np.stack([_noise(trial_generator(seed, 0, k), model.noise, n_max) for k in range(reps)])
    hist = model.init_hist(reps)
    out = np.empty((reps, n_max))
    total = np.zeros(reps)
    for n in range(n_max):
        x = model.draw(th, hist, noise[:, n])
        lf = model.logf(pts, x, hist)
        total = total + (lf[:, 0] - lf[:, 1])
        out[:, n] = total
        hist = model.update(hist, x)
    return out


def slln_diagnostic(model: ObservationModel, theta: Any, vartheta: Any, n_max: int = 5000,
                    reps: int = 100, seed: int = 0, band: float = 0.05) -> SllnResult:
    """Share of trajectories with |lambda(n_max)/psi(n_max) - I| <= band * I."""
    target = float(model.kl(theta, vartheta))
    if target == 0.0:
        return SllnResult("degenerate", 0.0, math.nan, band, np.empty(0), math.nan, 0)
    paths = llr_paths(model, theta, vartheta, n_max, reps, seed)
    psi = model.psi.psi(np.arange(1, n_max + 1, dtype=float))
    scaled = paths / psi[None]
    final = scaled[:, -1]
    inside = np.abs(final - target) <= band * target
    start = max(1, n_max // 10)
    tail = np.abs(scaled[:, start - 1:] - target) > band * target
    return SllnResult("ok", target, float(inside.mean()), band, final, float(tail.sum(axis=1).mean()), start)


def adaptive_likelihood_ratio(model: ObservationModel, truth: Any, initial: Any, n_values: Sequence[int],
                              trials: int, seed: int = 0, chunk: int = 20000) -> dict[int, tuple[float, float]]:
    """Mean and standard error of the adaptive likelihood ratio at each n.

    The ratio is prod_t f(X_t; theta_hat_{t-1}) / f(X_t; truth) with the
    model's estimator and ``initial`` wherever the estimator is undefined.
    """
    th = model.check_parameter(truth)
    init = model.check_parameter(initial)
    n_max = max(n_values)
    sums = {n: 0.0 for n in n_values}
    squares = {n: 0.0 for n in n_values}
    for start in range(0, trials, chunk):
        stop = min(start + chunk, trials)
        noise = np.stack([_noise(trial_generator(seed, 0, k), model.noise, n_max) for k in range(start, stop)])
        hist = model.init_hist(stop - start)
        log_ratio = np.zeros(stop - start)
        for n in range(1, n_max + 1):
            est, ok = model.estimate(hist)
            est = np.where(ok[:, None], est, init[None])
            x = model.draw(th, hist, noise[:, n - 1])
            num = model.logf(est[:, None, :], x, hist)[:, 0]
            den = model.logf(th[None, None, :], x, hist)[:, 0]
            log_ratio = log_ratio + num - den
            hist = model.update(hist, x)
            if n in sums:
                ratio = np.exp(log_ratio)
                sums[n] += float(ratio.sum())
                squares[n] += float(np.square(ratio).sum())
    out = {}
    for n in n_values:
        mean = sums[n] / trials
        var = max(squares[n] / trials - mean * mean, 0.0) * trials / max(trials - 1, 1)
        out[n] = (mean, math.sqrt(var / trials))
    return out


def default_workers() -> int:
    raw = os.environ.get("MATRIX_SPRT_WORKERS", "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigurationError(f"MATRIX_SPRT_WORKERS={raw!r} is not an integer") from None
    if value < 1:
        raise ConfigurationError("MATRIX_SPRT_WORKERS must be >= 1")
    return value
