from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import Region
from .base import ObservationModel


@dataclass(frozen=True)
class BernoulliModel(ObservationModel):
    """i.i.d. Bernoulli(p) observations; the parameter is p itself."""

    dim = 1
    noise = "uniform"

    def init_hist(self, batch: int) -> dict[str, np.ndarray]:
        return {"n": np.zeros(batch, dtype=np.int64), "s": np.zeros(batch)}

    def update(self, hist, x):
        return {"n": hist["n"] + 1, "s": hist["s"] + x}

    def logf(self, theta, x, hist):
        p = np.asarray(theta)[..., 0]
        x = x[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0.5, np.log(p), np.log1p(-p))

    def draw(self, theta, hist, noise):
        p = float(self.check_parameter(theta)[0])
        return (noise < p).astype(float)

    def kl(self, theta, vartheta) -> float:
        p = float(self.check_parameter(theta)[0])
        q = float(self.check_parameter(vartheta)[0])
        out = 0.0
        if p > 0:
            out += p * math.log(p / q)
        if p < 1:
            out += (1 - p) * math.log((1 - p) / (1 - q))
        return out

    def log_sup(self, region: Region, hist):
        n, s = hist["n"], hist["s"]
        with np.errstate(divide="ignore", invalid="ignore"):
            phat = np.where(n > 0, s / np.maximum(n, 1), 0.5)
            p = np.clip(phat, region.lo[0], region.hi[0])
            return np.where(s > 0, s * np.log(p), 0.0) + np.where(n - s > 0, (n - s) * np.log1p(-p), 0.0)

    def estimate(self, hist):
        n, s = hist["n"], hist["s"]
        ok = (s > 0) & (s < n)
        return (s / np.maximum(n, 1))[:, None], ok
