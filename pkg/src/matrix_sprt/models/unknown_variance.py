"""i.i.d. N(mu, sigma^2) with both parameters unknown; theta = (mu, sigma).

Hypotheses are mu <= mu0 against mu >= mu1 with sigma free, so the natural
scale-free coordinate is q = mu / sigma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import ConfigurationError, HypothesisLayout, Region
from .base import ObservationModel

_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


@dataclass(frozen=True)
class UnknownVarianceModel(ObservationModel):
    mu0: float = 0.0
    mu1: float = 1.0

    dim = 2

    def __post_init__(self) -> None:
        if not self.mu0 < self.mu1:
            raise ConfigurationError("need mu0 < mu1")

    def layout(self) -> HypothesisLayout:
        inf = math.inf
        return HypothesisLayout(
            (Region((-inf, 0.0), (self.mu0, inf)), Region((self.mu1, 0.0), (inf, inf))),
            Region((self.mu0, 0.0), (self.mu1, inf), closed=False),
        )

    def init_hist(self, batch: int):
        return {"n": np.zeros(batch, dtype=np.int64), "mean": np.zeros(batch), "m2": np.zeros(batch)}

    def update(self, hist, x):
        n = hist["n"] + 1
        delta = x - hist["mean"]
        mean = hist["mean"] + delta / n
        return {"n": n, "mean": mean, "m2": hist["m2"] + delta * (x - mean)}

    @staticmethod
    def variance(hist) -> np.ndarray:
        """v_n^2, the unrestricted MLE of sigma^2 (0 at n = 0)."""
        return np.where(hist["n"] > 0, hist["m2"] / np.maximum(hist["n"], 1), 0.0)

    def logf(self, theta, x, hist):
        th = np.asarray(theta, dtype=float)
        mu, sd = th[..., 0], th[..., 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            return -np.log(sd) - _HALF_LOG_2PI - 0.5 * ((x[:, None] - mu) / sd) ** 2

    def draw(self, theta, hist, noise):
        mu, sd = self.check_parameter(theta)
        return mu + sd * noise

    def check_parameter(self, theta):
        t = super().check_parameter(theta)
        if not t[1] > 0:
            raise ValueError(f"sigma must be positive in {theta!r}")
        return t

    def kl(self, theta, vartheta) -> float:
        mu, sd = self.check_parameter(theta)
        mu2, sd2 = np.asarray(vartheta, dtype=float)
        if not sd2 > 0:
            return math.inf
        return 0.5 * (((mu - mu2) ** 2 + sd * sd) / (sd2 * sd2) + 2 * math.log(sd2 / sd) - 1.0)

    def kl_to_region(self, theta, region: Region) -> float | None:
        if region.lo[1] > 0 or math.isfinite(region.hi[1]):
            return None
        mu, sd = self.check_parameter(theta)
        gap = mu - min(max(mu, region.lo[0]), region.hi[0])
        return 0.5 * math.log1p((gap / sd) ** 2)

    def restricted_mle(self, region: Region, hist) -> tuple[np.ndarray, np.ndarray]:
        """(mu_hat, sigma_hat^2) maximizing the likelihood over ``region``."""
        mean, v2 = hist["mean"], self.variance(hist)
        mu = np.clip(mean, region.lo[0], region.hi[0])
        s2 = v2 + (mean - mu) ** 2
        s2 = np.clip(s2, region.lo[1] ** 2, region.hi[1] ** 2)
        return mu, s2

    def log_sup(self, region: Region, hist):
        n = hist["n"]
        mean, v2 = hist["mean"], self.variance(hist)
        mu, s2 = self.restricted_mle(region, hist)
        rss = n * (v2 + (mean - mu) ** 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = -0.5 * n * np.log(2 * math.pi * s2) - 0.5 * rss / s2
            # 0/0 when the fitted variance collapses onto a perfect fit; the sup is then +inf
            return np.where(rss > 0, val, -0.5 * n * np.log(2 * math.pi * s2))

    def estimate(self, hist):
        v2 = self.variance(hist)
        return np.stack([hist["mean"], np.sqrt(v2)], axis=1), v2 > 0


def q_parameter(theta) -> float:
    mu, sd = theta
    return mu / sd


def invariant_mixture_statistic(sample) -> float:
    """(n/2) log(1 + mean^2 / v^2) - (1/2) log n for a sample with v^2 > 0."""
    xs = np.asarray(sample, dtype=float)
    n = xs.size
    mean = xs.mean()
    v2 = np.mean((xs - mean) ** 2)
    if not v2 > 0:
        raise ValueError("sample variance is zero")
    return 0.5 * n * math.log1p(mean * mean / v2) - 0.5 * math.log(n)


def uv_statistics(model: UnknownVarianceModel, sample, initial=(0.0, 1.0)):
    """Adaptive and restricted statistics after the whole ``sample``.

    Returns ``(ell, ell0, ell1, mixture, fallbacks)`` where ``ell`` is the
    plug-in log-likelihood built with one-step-delayed MLEs (the ``initial``
    (mu, sigma) wherever the running variance is zero), ``ell_i`` the
    restricted maxima, both shifted by n/2 log(2 pi) so that
    ell_i = (n/2)(log(1/sigma_hat_i^2) - 1). ``mixture`` is NaN when the
    sample variance is zero.
    """
    xs = np.asarray(sample, dtype=float)
    hist = model.init_hist(1)
    ell = 0.0
    fallbacks = 0
    init = np.asarray(initial, dtype=float)
    for x in xs:
        est, ok = model.estimate(hist)
        theta = est[0] if ok[0] else init
        fallbacks += int(not ok[0])
        xa = np.array([x])
        ell += float(model.logf(theta[None, None, :], xa, hist)[0, 0]) + _HALF_LOG_2PI
        hist = model.update(hist, xa)
    n = xs.size
    layout = model.layout()
    ells = [float(model.log_sup(r, hist)[0]) + n * _HALF_LOG_2PI for r in layout.regions]
    try:
        mix = invariant_mixture_statistic(xs)
    except ValueError:
        mix = math.nan
    return ell, ells[0], ells[1], mix, fallbacks
