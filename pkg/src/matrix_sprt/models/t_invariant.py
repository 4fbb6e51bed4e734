"""Scale-invariant test of the standardized mean theta = mu / sigma.

Observations are i.i.d. N(theta * sigma, sigma^2) with sigma unknown. The
decision statistics depend on the data only through t_n = mean(X) / sqrt(mean(X^2)),
which is unchanged when every X_t is multiplied by c > 0.

The invariant log-likelihood of theta, up to terms common to all hypotheses, is
log J_n(theta t_n) - n theta^2 / 2 with J_n(z) = int_0^inf u^{-1} exp(n f(u, z)) du,
f(u, z) = -u^2/2 + z u + log u. Laplace's method gives n (phi(theta t_n) - theta^2/2)
up to a bounded remainder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import log_ndtr

from ..core import ConfigurationError
from .base import ObservationModel


class QuadratureError(ArithmeticError):
    def __init__(self, message: str, error_estimate: float):
        super().__init__(f"{message} (error estimate {error_estimate:.3g})")
        self.error_estimate = error_estimate


def phi(z):
    root = np.sqrt(4.0 + np.square(z))
    return z * (z + root) / 4.0 + np.log(z + root)


def g(theta_i: float, theta_j: float, t):
    return phi(theta_i * t) - phi(theta_j * t) - 0.5 * (theta_i**2 - theta_j**2)


def q_limit(theta: float) -> float:
    """Almost-sure limit of t_n when the standardized mean is ``theta``."""
    return theta / math.sqrt(1.0 + theta * theta)


def t_statistic(xs) -> float:
    xs = np.asarray(xs, dtype=float)
    return float(xs.mean() / math.sqrt(np.mean(xs * xs)))


def peak(z: float) -> float:
    """Maximizer of f(u, z) over u > 0."""
    return 0.5 * (z + math.sqrt(z * z + 4.0))


def log_J(n: int, z: float, rel_tol: float = 1e-10) -> float:
    """log of J_n(z) by adaptive quadrature around the peak of the log-integrand."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        # J_1(z) = sqrt(2 pi) exp(z^2/2) Phi(z)
        return 0.5 * math.log(2 * math.pi) + 0.5 * z * z + float(log_ndtr(z))
    # log-integrand h(u) = n f(u, z) - log u; h'(u) = 0 is a quadratic in u
    top = (n * z + math.sqrt(n * n * z * z + 4.0 * n * (n - 1))) / (2.0 * n)

    def h(u: float) -> float:
        return n * (-0.5 * u * u + z * u) + (n - 1) * math.log(u)

    width = 1.0 / math.sqrt(n + (n - 1) / (top * top))
    h_top = h(top)
    lo, hi = max(0.0, top - 10 * width), top + 10 * width

    def integrand(u: float) -> float:
        return math.exp(h(u) - h_top) if u > 0 else 0.0

    value, err = quad(integrand, lo, hi, points=[top], epsabs=0.0, epsrel=rel_tol, limit=200)
    if not value > 0 or err > 100 * rel_tol * value:
        raise QuadratureError(f"J_{n}({z}) did not converge", err)
    return h_top + math.log(value)


def t_llr_approx(theta_i: float, theta_j: float, n: int, t: float) -> float:
    return n * float(g(theta_i, theta_j, t))


def t_llr_exact(theta_i: float, theta_j: float, n: int, t: float) -> float:
    if theta_i == theta_j:
        return 0.0
    return log_J(n, theta_i * t) - log_J(n, theta_j * t) - 0.5 * n * (theta_i**2 - theta_j**2)


@dataclass(frozen=True)
class TInvariantModel(ObservationModel):
    sigma: float = 1.0
    exact: bool = False

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ConfigurationError("sigma must be positive")

    def init_hist(self, batch: int):
        return {"n": np.zeros(batch, dtype=np.int64), "sx": np.zeros(batch), "sxx": np.zeros(batch)}

    def update(self, hist, x):
        return {"n": hist["n"] + 1, "sx": hist["sx"] + x, "sxx": hist["sxx"] + x * x}

    @staticmethod
    def statistic(hist) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return hist["sx"] / np.sqrt(hist["n"] * hist["sxx"])

    def invariant_loglik(self, theta, hist) -> np.ndarray:
        """Per-row invariant log-likelihood at ``theta`` of shape (B or 1, G); 0 at n = 0."""
        th = np.asarray(theta, dtype=float)
        th = th[..., 0] if th.ndim == 3 else th
        n = hist["n"][:, None].astype(float)
        t = self.statistic(hist)[:, None]
        if not self.exact:
            out = n * (phi(th * t) - 0.5 * th * th)
        else:
            th_b = np.broadcast_to(th, (n.shape[0], th.shape[-1]))
            out = np.empty(th_b.shape)
            for b in range(out.shape[0]):
                nb = int(n[b, 0])
                for k in range(out.shape[1]):
                    tk = th_b[b, k]
                    out[b, k] = 0.0 if nb == 0 else log_J(nb, tk * float(t[b, 0])) - 0.5 * nb * tk * tk
        return np.where(n > 0, out, 0.0)

    def hypothesis_loglik(self, points: np.ndarray, hist) -> np.ndarray:
        return self.invariant_loglik(np.asarray(points)[None, :, 0], hist)

    def logf(self, theta, x, hist):
        return self.invariant_loglik(theta, self.update(hist, x)) - self.invariant_loglik(theta, hist)

    def draw(self, theta, hist, noise):
        th = float(self.check_parameter(theta)[0])
        return self.sigma * (th + noise)

    def kl(self, theta, vartheta) -> float:
        ti = float(self.check_parameter(theta)[0])
        tj = float(self.check_parameter(vartheta)[0])
        return float(g(ti, tj, q_limit(ti)))
