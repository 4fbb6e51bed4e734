"""First-order sample-size predictions and the K-L quantities behind them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable, Sequence

import numpy as np
from scipy.optimize import bisect, minimize, minimize_scalar

from .core import ConfigurationError, ErrorBudget, HypothesisLayout, Region

if TYPE_CHECKING:
    from .models.base import ObservationModel


class SeparabilityError(ValueError):
    """A required K-L infimum is not strictly positive."""


@dataclass(frozen=True)
class PsiSpec:
    """Power-law normalization psi(t) = t**beta with inverse t**(1/beta)."""

    beta: float = 1.0

    def __post_init__(self) -> None:
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ConfigurationError(f"psi exponent must be positive, got {self.beta}")

    def psi(self, t):
        return np.power(t, self.beta) if isinstance(t, np.ndarray) else float(t) ** self.beta

    def inverse(self, t):
        return np.power(t, 1.0 / self.beta) if isinstance(t, np.ndarray) else float(t) ** (1.0 / self.beta)


# Half-width used when a region is unbounded on one side.
_WINDOW = 50.0


def _search_box(theta: np.ndarray, region: Region) -> tuple[np.ndarray, np.ndarray]:
    lo = np.asarray(region.lo, dtype=float)
    hi = np.asarray(region.hi, dtype=float)
    span = _WINDOW * (1.0 + np.abs(theta))
    lo = np.where(np.isfinite(lo), lo, np.minimum(hi, theta) - span)
    hi = np.where(np.isfinite(hi), hi, np.maximum(lo, theta) + span)
    return lo, hi


def numeric_kl_infimum(kl: Callable[[np.ndarray], float], theta: np.ndarray, region: Region,
                       grid: int = 512, tol: float = 1e-10) -> tuple[float, np.ndarray]:
    """Grid scan followed by bounded refinement; returns (value, minimizer)."""
    lo, hi = _search_box(theta, region)
    dim = lo.size
    if region.is_point:
        pt = np.asarray(region.lo, dtype=float)
        return float(kl(pt)), pt
    if dim == 1:
        xs = np.linspace(lo[0], hi[0], grid)
        vals = np.array([kl(np.array([x])) for x in xs])
        k = int(np.nanargmin(vals))
        a, b = xs[max(k - 1, 0)], xs[min(k + 1, grid - 1)]
        if b <= a:
            return float(vals[k]), np.array([xs[k]])
        res = minimize_scalar(lambda x: kl(np.array([x])), bounds=(a, b), method="bounded",
                              options={"xatol": tol})
        if res.fun <= vals[k]:
            return float(res.fun), np.array([res.x])
        return float(vals[k]), np.array([xs[k]])
    per_axis = max(3, int(round(grid ** (1.0 / dim))))
    axes = [np.linspace(lo[d], hi[d], per_axis) for d in range(dim)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    vals = np.array([kl(p) for p in mesh])
    start = mesh[int(np.nanargmin(vals))]
    res = minimize(kl, start, method="L-BFGS-B", bounds=list(zip(lo, hi)),
                   options={"ftol": tol * 1e-2, "gtol": tol})
    if res.fun <= vals.min():
        return float(res.fun), np.asarray(res.x)
    return float(vals.min()), start


def kl_infimum(model: ObservationModel, theta: Any, region: Region) -> float:
    """inf over ``region`` of I(theta, .), closed form when the model offers one."""
    t = model.check_parameter(theta)
    closed = model.kl_to_region(t, region)
    if closed is not None:
        return float(closed)
    if region.is_point:
        return float(model.kl(t, np.asarray(region.lo)))
    value, _ = numeric_kl_infimum(lambda v: model.kl(t, v), t, region)
    return value


@dataclass(frozen=True)
class EssPrediction:
    theta: tuple[float, ...]
    location: str
    #: first-order sample-size prediction F (before raising to r)
    base: float
    #: hypothesis whose acceptance time drives the prediction
    governing: int
    kl: tuple[float, ...]
    moments: dict[int, float] = field(default_factory=dict)

    def moment(self, r: int) -> float:
        return self.moments[r]


KlProvider = Callable[[np.ndarray, int], float]


def _as_provider(layout: HypothesisLayout, kl_provider: "ObservationModel | KlProvider") -> KlProvider:
    if callable(kl_provider) and not hasattr(kl_provider, "kl"):
        return kl_provider
    model = kl_provider
    return lambda th, j: kl_infimum(model, th, layout.regions[j])


def predict_ess(layout: HypothesisLayout, budget: ErrorBudget, kl_provider: "ObservationModel | KlProvider",
                psi: PsiSpec, theta: Any, orders: Sequence[int] = (1,)) -> EssPrediction:
    """First-order prediction of E[T^r] at ``theta``.

    In region i the prediction is Psi(max_{j != i} |log alpha_ji| / I_j(theta))^r;
    elsewhere the smallest such value over i is used.
    """
    if budget.size != layout.count:
        raise ConfigurationError("budget size does not match the hypothesis count")
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    provider = _as_provider(layout, kl_provider)
    home = layout.locate(th)
    n = layout.count
    infima = [0.0 if j == home else float(provider(th, j)) for j in range(n)]

    def time_to_accept(i: int) -> float:
        worst = 0.0
        for j in range(n):
            if j == i:
                continue
            if not infima[j] > 0:
                raise SeparabilityError(f"I_{j}({th.tolist()}) = {infima[j]} is not positive")
            worst = max(worst, abs(math.log(budget.alpha[j, i])) / infima[j])
        return worst

    if home is not None:
        governing, raw = home, time_to_accept(home)
    else:
        options = [time_to_accept(i) for i in range(n)]
        governing = int(np.argmin(options))
        raw = options[governing]
    base = float(psi.inverse(raw))
    return EssPrediction(
        theta=tuple(th.tolist()),
        location=layout.label(th),
        base=base,
        governing=governing,
        kl=tuple(infima),
        moments={int(r): base ** r for r in orders},
    )


def asymmetry_ratio(alpha0: float, alpha1: float) -> float:
    """c = log(alpha0) / log(alpha1) at the given budget."""
    if not (0 < alpha0 < 1 and 0 < alpha1 < 1):
        raise ConfigurationError("error probabilities must lie in (0, 1)")
    return math.log(alpha0) / math.log(alpha1)


def worst_point_ar_mean(theta0: float, theta1: float, alpha0: float, alpha1: float,
                        tol: float = 1e-10) -> float:
    """Indifference point where the two acceptance times balance, AR-mean model.

    ``alpha0`` bounds the probability of accepting H1 under H0 and ``alpha1``
    the reverse. The closed form is cross-checked by bisection.
    """
    if not theta0 < theta1:
        raise ConfigurationError("need theta0 < theta1")
    c = asymmetry_ratio(alpha0, alpha1)
    closed = (theta1 * math.sqrt(c) + theta0) / (1.0 + math.sqrt(c))
    l0, l1 = abs(math.log(alpha0)), abs(math.log(alpha1))

    def balance(t: float) -> float:
        return l0 * (theta1 - t) ** 2 - l1 * (t - theta0) ** 2

    root = _bisect(balance, theta0, theta1, tol)
    if abs(root - closed) > 10 * tol * max(1.0, abs(closed)):
        raise ArithmeticError(f"closed form {closed} and bisection {root} disagree")
    return closed


def worst_point_unknown_variance(q0: float, q1: float, alpha0: float, alpha1: float,
                                 tol: float = 1e-10) -> float:
    """Root q* in (q0, q1) of [1 + (q1 - q)^2]^c = 1 + (q - q0)^2."""
    if not q0 < q1:
        raise ConfigurationError("need q0 < q1")
    c = asymmetry_ratio(alpha0, alpha1)
    if c == 1.0:
        return 0.5 * (q0 + q1)

    def balance(q: float) -> float:
        return c * math.log1p((q1 - q) ** 2) - math.log1p((q - q0) ** 2)

    return _bisect(balance, q0, q1, tol)


def _bisect(fn: Callable[[float], float], a: float, b: float, tol: float) -> float:
    fa, fb = fn(a), fn(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if fa * fb > 0:
        raise ConfigurationError(f"no sign change on [{a}, {b}]")
    return float(bisect(fn, a, b, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500))


def worst_point(kind: str, lower: float, upper: float, alpha0: float, alpha1: float) -> float:
    """Dispatch on the example family: "ar_mean" or "unknown_variance"."""
    if kind == "ar_mean":
        return worst_point_ar_mean(lower, upper, alpha0, alpha1)
    if kind == "unknown_variance":
        return worst_point_unknown_variance(lower, upper, alpha0, alpha1)
    raise ConfigurationError(f"no worst-point solver for model kind {kind!r}")
