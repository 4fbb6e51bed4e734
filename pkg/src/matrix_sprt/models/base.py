"""Observation-model contract shared by the engines and the Monte Carlo runner.

Every method works on a batch of trajectories. ``hist`` is a dict of arrays
with a leading batch axis holding whatever running statistics the model needs
(at least ``"n"``, the number of observations absorbed so far). Parameters are
vectors of length ``dim``; ``logf`` broadcasts ``theta`` of shape
``(B or 1, G, dim)`` against the batch and returns ``(B, G)``.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Any

import numpy as np

from ..asymptotics import PsiSpec
from ..core import Region


class RestrictedSupError(RuntimeError):
    """The restricted supremum is not available for this model/region."""


class ObservationModel(ABC):
    dim: int = 1
    #: kind of standard noise the sampler consumes: "normal" or "uniform"
    noise: str = "normal"

    @property
    def psi(self) -> PsiSpec:
        return PsiSpec(1.0)

    def init_hist(self, batch: int) -> dict[str, np.ndarray]:
        return {"n": np.zeros(batch, dtype=np.int64)}

    @abstractmethod
    def update(self, hist: dict[str, np.ndarray], x: np.ndarray) -> dict[str, np.ndarray]:
        """Absorb observation ``x`` (one per row) into the running statistics."""

    @abstractmethod
    def logf(self, theta: np.ndarray, x: np.ndarray, hist: dict[str, np.ndarray]) -> np.ndarray:
        """Conditional log-density of ``x`` given the history in ``hist``."""

    @abstractmethod
    def draw(self, theta: Any, hist: dict[str, np.ndarray], noise: np.ndarray) -> np.ndarray:
        """Next observation under the true parameter ``theta``, driven by ``noise``."""

    @abstractmethod
    def kl(self, theta: Any, vartheta: Any) -> float:
        """Per-psi-unit K-L information I(theta, vartheta)."""

    def log_sup(self, region: Region, hist: dict[str, np.ndarray]) -> np.ndarray:
        raise RestrictedSupError(f"{type(self).__name__} has no closed-form restricted supremum")

    def estimate(self, hist: dict[str, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
        """Estimate from the sample so far: ``(theta (B, dim), defined (B,))``."""
        raise NotImplementedError(f"{type(self).__name__} has no estimator")

    def kl_to_region(self, theta: Any, region: Region) -> float | None:
        """Closed-form inf of I(theta, .) over ``region``; None if unavailable."""
        return None

    def check_parameter(self, theta: Any) -> np.ndarray:
        t = np.atleast_1d(np.asarray(theta, dtype=float))
        if t.shape != (self.dim,) or not np.isfinite(t).all():
            raise ValueError(f"parameter {theta!r} is not a finite vector of length {self.dim}")
        return t

    def log_likelihood(self, theta: Any, xs: np.ndarray) -> float:
        """Cumulative log-density of a single trajectory ``xs`` at ``theta``."""
        t = self.check_parameter(theta)
        hist = self.init_hist(1)
        total = 0.0
        for x in np.asarray(xs, dtype=float):
            xa = np.array([x])
            total += float(self.logf(t[None, None, :], xa, hist)[0, 0])
            hist = self.update(hist, xa)
        return total


def shift_in(lag: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Push ``x`` in front of a most-recent-first lag buffer ``(B, p)``."""
    if lag.shape[1] == 0:
        return lag
    return np.concatenate([x[:, None], lag[:, :-1]], axis=1)
