"""Mean of a deterministic signal observed in Gaussian AR(p) noise.

X_n = theta * S_n + xi_n with xi_n = sum_t rho_t xi_{n-t} + w_n, w_n ~ N(0, sigma^2),
zero initial conditions, rho and sigma known. Whitening with the known
coefficients turns the likelihood into independent Gaussian terms
N(theta * S~_n, sigma^2) in the residuals X~_n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..asymptotics import PsiSpec
from ..core import ConfigurationError, Region
from .base import ObservationModel, shift_in


@dataclass(frozen=True)
class Signal:
    """Deterministic signal S_n, n >= 1 (S_n = 0 for n <= 0)."""

    kind: str = "constant"
    amplitude: float = 1.0
    degree: int = 0
    frequency: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "polynomial", "harmonic"):
            raise ConfigurationError(f"unknown signal kind {self.kind!r}")
        if self.amplitude == 0:
            raise ConfigurationError("signal amplitude must be non-zero")
        if self.kind == "polynomial" and self.degree < 0:
            raise ConfigurationError("polynomial degree must be >= 0")
        if self.kind == "harmonic" and math.sin(self.frequency) == 0.0:
            raise ConfigurationError("harmonic frequency must not be a multiple of pi")

    def __call__(self, n: np.ndarray) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        if self.kind == "constant":
            s = np.full_like(n, self.amplitude)
        elif self.kind == "polynomial":
            s = self.amplitude * n**self.degree
        else:
            s = self.amplitude * np.sin(self.frequency * n)
        return np.where(n >= 1, s, 0.0)


@dataclass(frozen=True)
class ArMeanModel(ObservationModel):
    coefficients: tuple[float, ...] = ()
    sigma: float = 1.0
    signal: Signal = field(default_factory=Signal)

    dim = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficients", tuple(float(r) for r in self.coefficients))
        if not self.sigma > 0:
            raise ConfigurationError("sigma must be positive")
        if self.order:
            roots = np.roots(np.r_[1.0, -np.asarray(self.coefficients)])
            if np.max(np.abs(roots)) >= 1:
                raise ConfigurationError("AR noise coefficients are not stable")

    @property
    def order(self) -> int:
        return len(self.coefficients)

    @property
    def rho(self) -> np.ndarray:
        return np.asarray(self.coefficients, dtype=float)

    @property
    def psi(self) -> PsiSpec:
        if self.signal.kind == "polynomial":
            return PsiSpec(2.0 * self.signal.degree + 1.0)
        return PsiSpec(1.0)

    @property
    def q_squared(self) -> float:
        """Limit of sum(S~_t^2) / (sigma^2 psi(n)), the per-unit signal-to-noise ratio."""
        a, s2 = self.signal.amplitude, self.sigma**2
        if self.signal.kind == "constant":
            return (1.0 - self.rho.sum()) ** 2 * a**2 / s2
        if self.signal.kind == "polynomial":
            return (1.0 - self.rho.sum()) ** 2 * a**2 / ((2 * self.signal.degree + 1) * s2)
        lags = np.arange(1, self.order + 1)
        gain = abs(1.0 - np.sum(self.rho * np.exp(-1j * self.signal.frequency * lags))) ** 2
        return a**2 * gain / (2.0 * s2)

    def whitened_signal(self, n: np.ndarray) -> np.ndarray:
        n = np.asarray(n)
        out = self.signal(n)
        for t, r in enumerate(self.coefficients, start=1):
            out = out - r * self.signal(n - t)
        return out

    def energy(self, n: int) -> float:
        """sum_{t<=n} S~_t^2 / sigma^2."""
        st = self.whitened_signal(np.arange(1, n + 1))
        return float(np.sum(st**2) / self.sigma**2)

    def init_hist(self, batch: int):
        return {
            "n": np.zeros(batch, dtype=np.int64),
            "xlag": np.zeros((batch, self.order)),
            "sx": np.zeros(batch),
            "ss": np.zeros(batch),
            "xx": np.zeros(batch),
        }

    def _whiten_x(self, x, hist):
        return x - hist["xlag"] @ self.rho

    def update(self, hist, x):
        st = self.whitened_signal(hist["n"] + 1)
        xt = self._whiten_x(x, hist)
        return {
            "n": hist["n"] + 1,
            "xlag": shift_in(hist["xlag"], x),
            "sx": hist["sx"] + st * xt,
            "ss": hist["ss"] + st * st,
            "xx": hist["xx"] + xt * xt,
        }

    def logf(self, theta, x, hist):
        st = self.whitened_signal(hist["n"] + 1)[:, None]
        xt = self._whiten_x(x, hist)[:, None]
        th = np.asarray(theta)[..., 0]
        s2 = self.sigma**2
        return -((xt - th * st) ** 2) / (2 * s2) - 0.5 * math.log(2 * math.pi * s2)

    def draw(self, theta, hist, noise):
        th = float(self.check_parameter(theta)[0])
        n1 = hist["n"] + 1
        lags = np.arange(1, self.order + 1)
        s_lag = self.signal(n1[:, None] - lags[None, :])
        xi_lag = hist["xlag"] - th * s_lag
        xi = xi_lag @ self.rho + self.sigma * noise
        return th * self.signal(n1) + xi

    def kl(self, theta, vartheta) -> float:
        d = float(self.check_parameter(theta)[0] - self.check_parameter(vartheta)[0])
        return 0.5 * d * d * self.q_squared

    def kl_to_region(self, theta, region: Region) -> float:
        t = self.check_parameter(theta)
        d = float((t - region.clip(t))[0])
        return 0.5 * d * d * self.q_squared

    def mle(self, hist) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(hist["ss"] > 0, hist["sx"] / hist["ss"], 0.0)

    def restricted_mle(self, region: Region, hist) -> np.ndarray:
        return np.clip(self.mle(hist), region.lo[0], region.hi[0])

    def log_sup(self, region: Region, hist):
        th = self.restricted_mle(region, hist)
        s2 = self.sigma**2
        rss = hist["xx"] - 2 * th * hist["sx"] + th * th * hist["ss"]
        return -rss / (2 * s2) - 0.5 * hist["n"] * math.log(2 * math.pi * s2)

    def estimate(self, hist):
        return self.mle(hist)[:, None], hist["ss"] > 0


def gaussian_mean(sigma: float = 1.0) -> ArMeanModel:
    """i.i.d. N(theta, sigma^2): the AR-mean model with no noise memory and S_n = 1."""
    return ArMeanModel((), sigma, Signal("constant", 1.0))


def whiten(model: ArMeanModel, xs: np.ndarray, signal_values: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Residuals (S~_t, X~_t), t = 1..n, of a raw stream under zero initial conditions.

    ``signal_values`` overrides the model's signal with an explicit S_1..S_n.
    """
    xs = np.asarray(xs, dtype=float)
    n = xs.size
    s = model.signal(np.arange(1, n + 1)) if signal_values is None else np.asarray(signal_values, dtype=float)
    s_pad = np.r_[np.zeros(model.order), s]
    x_pad = np.r_[np.zeros(model.order), xs]
    st, xt = s.copy(), xs.copy()
    for t, r in enumerate(model.coefficients, start=1):
        st -= r * s_pad[model.order - t : model.order - t + n]
        xt -= r * x_pad[model.order - t : model.order - t + n]
    return st, xt


def ar_mean_llr_increment(model: ArMeanModel, theta: float, vartheta: float, s_tilde, x_tilde):
    """LLR increment of theta against vartheta for one whitened pair."""
    s2 = model.sigma**2
    return (theta - vartheta) / s2 * s_tilde * x_tilde - (theta**2 - vartheta**2) / (2 * s2) * s_tilde**2
