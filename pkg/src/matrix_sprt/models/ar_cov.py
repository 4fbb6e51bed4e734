"""Gaussian AR(p) with unit innovations; the parameter is the coefficient vector.

Y_n = rho_1 Y_{n-1} + ... + rho_p Y_{n-p} + w_n, w_n ~ N(0, 1), started from
Y_0 = ... = Y_{1-p} = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import ConfigurationError, Region
from .base import ObservationModel, shift_in


class StabilityError(ValueError):
    """Coefficients outside the stationarity region."""


def companion(rho: np.ndarray) -> np.ndarray:
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    p = rho.size
    mat = np.zeros((p, p))
    mat[0] = rho
    if p > 1:
        mat[1:, :-1] = np.eye(p - 1)
    return mat


def spectral_radius(rho: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(companion(rho)))))


def stationary_covariance(rho: np.ndarray, tol: float = 1e-14, max_terms: int = 100_000) -> np.ndarray:
    """F = sum_n L^n B (L^T)^n with B = e1 e1^T, truncated once a term drops below ``tol``."""
    if spectral_radius(rho) >= 1:
        raise StabilityError(f"coefficients {np.asarray(rho).tolist()} are not stable")
    mat = companion(rho)
    term = np.zeros_like(mat)
    term[0, 0] = 1.0
    total = term.copy()
    for _ in range(max_terms):
        term = mat @ term @ mat.T
        total += term
        if np.max(np.abs(term)) < tol:
            break
    return 0.5 * (total + total.T)


def box_qp(hess: np.ndarray, lin: np.ndarray, lo: np.ndarray, hi: np.ndarray,
           tol: float = 1e-13, max_sweeps: int = 500) -> np.ndarray:
    """Minimize 0.5 x'Hx - lin'x over a box, batched over the leading axis.

    Cyclic coordinate descent; exact for convex H. Coordinates with a zero
    diagonal stay at the projection of 0.
    """
    hess = np.asarray(hess, dtype=float)
    lin = np.asarray(lin, dtype=float)
    p = lin.shape[-1]
    x = np.clip(np.zeros_like(lin), lo, hi)
    for _ in range(max_sweeps):
        moved = np.zeros(lin.shape[:-1])
        for k in range(p):
            diag = hess[..., k, k]
            rest = np.einsum("...l,...l->...", hess[..., k, :], x) - diag * x[..., k]
            with np.errstate(divide="ignore", invalid="ignore"):
                new = np.where(diag > 0, (lin[..., k] - rest) / diag, x[..., k])
            new = np.clip(new, lo[k], hi[k])
            moved = np.maximum(moved, np.abs(new - x[..., k]))
            x[..., k] = new
        if p == 1 or np.all(moved <= tol):
            break
    return x


@dataclass(frozen=True)
class ArCovModel(ObservationModel):
    order: int = 1

    def __post_init__(self) -> None:
        if self.order < 1:
            raise ConfigurationError("AR order must be >= 1")

    @property
    def dim(self) -> int:  # type: ignore[override]
        return self.order

    def init_hist(self, batch: int):
        p = self.order
        return {
            "n": np.zeros(batch, dtype=np.int64),
            "xlag": np.zeros((batch, p)),
            "xy": np.zeros((batch, p)),
            "yy": np.zeros((batch, p, p)),
            "xx": np.zeros(batch),
        }

    def update(self, hist, x):
        lag = hist["xlag"]
        return {
            "n": hist["n"] + 1,
            "xlag": shift_in(lag, x),
            "xy": hist["xy"] + x[:, None] * lag,
            "yy": hist["yy"] + lag[:, :, None] * lag[:, None, :],
            "xx": hist["xx"] + x * x,
        }

    def logf(self, theta, x, hist):
        pred = np.einsum("bgp,bp->bg", np.broadcast_to(theta, (x.size,) + np.shape(theta)[1:]), hist["xlag"])
        return -0.5 * (x[:, None] - pred) ** 2 - 0.5 * math.log(2 * math.pi)

    def draw(self, theta, hist, noise):
        rho = self.check_parameter(theta)
        return hist["xlag"] @ rho + noise

    def kl(self, theta, vartheta) -> float:
        t = self.check_parameter(theta)
        d = t - self.check_parameter(vartheta)
        return float(0.5 * d @ stationary_covariance(t) @ d)

    def kl_to_region(self, theta, region: Region) -> float:
        t = self.check_parameter(theta)
        fmat = stationary_covariance(t)
        lo, hi = np.asarray(region.lo), np.asarray(region.hi)
        if self.order == 1:
            v = region.clip(t)
        else:
            v = box_qp(fmat, fmat @ t, lo, hi)
        d = t - v
        return float(0.5 * d @ fmat @ d)

    def nearest_in_region(self, theta, region: Region) -> np.ndarray:
        """Minimizer of I(theta, .) over the box ``region``."""
        t = self.check_parameter(theta)
        fmat = stationary_covariance(t)
        return box_qp(fmat, fmat @ t, np.asarray(region.lo), np.asarray(region.hi))

    def restricted_mle(self, region: Region, hist) -> np.ndarray:
        return box_qp(hist["yy"], hist["xy"], np.asarray(region.lo), np.asarray(region.hi))

    def log_sup(self, region: Region, hist):
        rho = self.restricted_mle(region, hist)
        rss = hist["xx"] - 2 * np.einsum("bp,bp->b", rho, hist["xy"]) + np.einsum("bp,bpq,bq->b", rho, hist["yy"], rho)
        return -0.5 * np.maximum(rss, 0.0) - 0.5 * hist["n"] * math.log(2 * math.pi)

    def estimate(self, hist):
        yy, xy = hist["yy"], hist["xy"]
        p = self.order
        scale = np.trace(yy, axis1=1, axis2=2) / p
        det = np.linalg.det(yy)
        ok = (scale > 0) & (det > 1e-10 * np.maximum(scale, 1e-300) ** p)
        safe = np.where(ok[:, None, None], yy, np.eye(p)[None])
        return np.linalg.solve(safe, xy[..., None])[..., 0], ok
