"""Exact distribution of (min(T, H), d) for the matrix SPRT on i.i.d. finite-alphabet data.

The sequence tree is walked depth first and pruned where the test stops.
Probabilities under every hypothesis are carried along each path and summed
with compensated (Neumaier) accumulation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigurationError, EngineKind, ThresholdMatrix, acceptance_margins

MAX_HORIZON = 20
MAX_PATHS = 10**8


class EnumerationBudgetError(ConfigurationError):
    """The sequence tree is too large to enumerate."""


@dataclass(frozen=True)
class FiniteAlphabetSpec:
    #: probs[i, k] = P(X = k) under hypothesis i
    probs: np.ndarray
    horizon: int
    thresholds: ThresholdMatrix

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 2 or probs.shape[0] < 2 or probs.shape[1] < 1:
            raise ConfigurationError("probs must be a (hypotheses, alphabet) matrix")
        if np.any(probs <= 0):
            raise ConfigurationError("all symbol probabilities must be positive")
        if np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-12):
            raise ConfigurationError("each probability vector must sum to 1")
        if not 1 <= self.horizon <= MAX_HORIZON:
            raise ConfigurationError(f"horizon must lie in [1, {MAX_HORIZON}]")
        if self.thresholds.size != probs.shape[0]:
            raise ConfigurationError("threshold matrix size does not match the hypotheses")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def alphabet(self) -> int:
        return self.probs.shape[1]

    @property
    def hypotheses(self) -> int:
        return self.probs.shape[0]


class _Sum:
    """Neumaier compensated sum."""

    __slots__ = ("total", "comp")

    def __init__(self) -> None:
        self.total = 0.0
        self.comp = 0.0

    def add(self, x: float) -> None:
        t = self.total + x
        if abs(self.total) >= abs(x):
            self.comp += (self.total - t) + x
        else:
            self.comp += (x - t) + self.total
        self.total = t

    @property
    def value(self) -> float:
        return self.total + self.comp


@dataclass(frozen=True)
class ExactResult:
    #: alpha[h, j] = P_h(accept j by the horizon)
    alpha: np.ndarray
    #: P_h(T > H)
    survival: np.ndarray
    #: r -> E_h[min(T, H)^r] per hypothesis h
    moments: dict[int, np.ndarray]
    #: P_h(tie at stopping)
    ties: np.ndarray
    paths: int

    def total_probability(self) -> np.ndarray:
        return self.alpha.sum(axis=1) + self.survival


def enumerate_exact(spec: FiniteAlphabetSpec, kind: EngineKind | str = EngineKind.MSPRT,
                    orders: tuple[int, ...] = (1, 2)) -> ExactResult:
    if EngineKind(kind) is not EngineKind.MSPRT:
        raise ConfigurationError("exact enumeration covers the MSPRT only")
    k_alpha, horizon = spec.alphabet, spec.horizon
    if k_alpha**horizon > MAX_PATHS:
        raise EnumerationBudgetError(f"{k_alpha}^{horizon} sequences exceed the budget of {MAX_PATHS}")
    m = spec.hypotheses
    logp = np.log(spec.probs)
    # pairwise increments per symbol, formed exactly as the engine forms them
    incs = [logp[:, s][:, None] - logp[:, s][None, :] for s in range(k_alpha)]
    a = spec.thresholds.a
    stop_prob = [[_Sum() for _ in range(m)] for _ in range(m)]
    surv = [_Sum() for _ in range(m)]
    tie = [_Sum() for _ in range(m)]
    mom = {r: [_Sum() for _ in range(m)] for r in orders}
    paths = 0

    def record_end(n: int, weights: list[float]) -> None:
        for h in range(m):
            for r in orders:
                mom[r][h].add(weights[h] * float(n) ** r)

    stack: list[tuple[int, np.ndarray, list[float]]] = [(0, np.zeros((m, m)), [1.0] * m)]
    while stack:
        n, stats, weights = stack.pop()
        for s in range(k_alpha - 1, -1, -1):
            w = [weights[h] * spec.probs[h, s] for h in range(m)]
            st = stats + incs[s]
            margins = acceptance_margins(st[None], a)[0]
            ok = margins >= 0
            if ok.any():
                paths += 1
                d = int(np.argmax(ok))
                for h in range(m):
                    stop_prob[h][d].add(w[h])
                    if ok.sum() >= 2:
                        tie[h].add(w[h])
                record_end(n + 1, w)
            elif n + 1 >= horizon:
                paths += 1
                for h in range(m):
                    surv[h].add(w[h])
                record_end(n + 1, w)
            else:
                stack.append((n + 1, st, w))
    alpha = np.array([[stop_prob[h][j].value for j in range(m)] for h in range(m)])
    return ExactResult(
        alpha=alpha,
        survival=np.array([s.value for s in surv]),
        moments={r: np.array([x.value for x in mom[r]]) for r in orders},
        ties=np.array([t.value for t in tie]),
        paths=paths,
    )


def bernoulli_spec(p0: float, p1: float, a: float, horizon: int) -> FiniteAlphabetSpec:
    """Two Bernoulli hypotheses over the alphabet {0, 1} with symmetric thresholds."""
    probs = np.array([[1 - p0, p0], [1 - p1, p1]])
    return FiniteAlphabetSpec(probs, horizon, ThresholdMatrix.uniform(2, a))


def fixture_table(result: ExactResult) -> str:
    """Plain-text table of the aggregate exact results (no sequences)."""
    lines = ["# quantity hypothesis value"]
    m = result.alpha.shape[0]
    for h in range(m):
        for j in range(m):
            lines.append(f"alpha {h} {j} {float(result.alpha[h, j])!r}")
        lines.append(f"survival {h} - {float(result.survival[h])!r}")
        for r, vals in sorted(result.moments.items()):
            lines.append(f"moment{r} {h} - {float(vals[h])!r}")
    return "\n".join(lines) + "\n"


def read_fixture(text: str) -> dict[tuple[str, int, str], float]:
    out = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        name, h, j, value = line.split()
        out[(name, int(h), j)] = float(value)
    return out


def one_step_probabilities(spec: FiniteAlphabetSpec) -> np.ndarray:
    """P_h(d = j) when the test must stop at the first observation."""
    m = spec.hypotheses
    logp = np.log(spec.probs)
    out = np.zeros((m, m))
    for s in range(spec.alphabet):
        st = logp[:, s][:, None] - logp[:, s][None, :]
        ok = acceptance_margins(st[None], spec.thresholds.a)[0] >= 0
        if ok.any():
            out[:, int(np.argmax(ok))] += spec.probs[:, s]
    return out


__all__ = [
    "EnumerationBudgetError",
    "ExactResult",
    "FiniteAlphabetSpec",
    "bernoulli_spec",
    "enumerate_exact",
    "fixture_table",
    "one_step_probabilities",
    "read_fixture",
]
