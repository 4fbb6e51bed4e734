"""Acceptance criteria, one test each; every test records a single PASS/FAIL line."""

import json
import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from matrix_sprt import MSPRT, EngineKind, ErrorBudget, HypothesisLayout, ThresholdMatrix
from matrix_sprt.asymptotics import worst_point_ar_mean, worst_point_unknown_variance
from matrix_sprt.config import build_plan, load_config
from matrix_sprt.models import (
    ArCovModel,
    ArMeanModel,
    Signal,
    TInvariantModel,
    UnknownVarianceModel,
    gaussian_mean,
    invariant_mixture_statistic,
    phi,
    stationary_covariance,
    t_llr_approx,
    t_llr_exact,
)
from matrix_sprt.montecarlo import (
    ExperimentPlan,
    adaptive_likelihood_ratio,
    bound_check,
    ess_ratio_trend,
    run_experiment,
    slln_diagnostic,
)
from matrix_sprt.oracle import bernoulli_spec, enumerate_exact

CONFIGS = Path(__file__).parent.parent / "configs"


def _plan(name, **overrides):
    return build_plan(load_config(str(CONFIGS / f"{name}.cfg"), overrides))


def test_error_bound_suite(criterion):
    start = time.perf_counter()
    worst = {}
    cells_ok = True
    for name in ("msprt_gaussian3", "mmsprt_unknown_variance", "amsprt_ar_mean"):
        plan = _plan(name)
        assert plan.trials == 10_000
        assert np.allclose(plan.threshold_matrix.a[~np.eye(plan.layout.count, dtype=bool)], math.log(100))
        report = run_experiment(plan)
        cells = bound_check(report)
        assert cells
        cells_ok &= all(c.passed for c in cells)
        worst[name] = max(c.alpha_hat for c in cells)
    elapsed = time.perf_counter() - start
    ok = all(v <= 0.01 for v in worst.values()) and cells_ok and elapsed < 120
    detail = ", ".join(f"{k} max alpha_hat={v:.4f}" for k, v in worst.items())
    criterion("error-bound suite", ok, f"{detail}; {elapsed:.1f} s (limit 120 s)")


def test_oracle_equivalence(criterion):
    start = time.perf_counter()
    exact = enumerate_exact(bernoulli_spec(0.3, 0.7, 1.5, 14))
    conserved = float(np.max(np.abs(exact.total_probability() - 1.0)))
    plan = _plan("msprt_bernoulli")
    assert plan.trials == 200_000 and plan.horizon == 14
    report = run_experiment(plan)
    p0, p1 = report.points
    n = plan.trials
    checks = []
    for label, est, ref in (("alpha_01", p0.alpha_hat[1], exact.alpha[0, 1]),
                            ("alpha_10", p1.alpha_hat[0], exact.alpha[1, 0])):
        se = math.sqrt(est * (1 - est) / n)
        checks.append((label, abs(est - ref) / se))
    for h, p in enumerate((p0, p1)):
        mean, se = p.truncated[1]
        checks.append((f"E_{h}[min(T,14)]", abs(mean - exact.moments[1][h]) / se))
    elapsed = time.perf_counter() - start
    ok = all(z <= 3 for _, z in checks) and conserved <= 1e-12 and elapsed < 60
    detail = ", ".join(f"{k} |z|={z:.2f}" for k, z in checks)
    criterion("oracle equivalence", ok, f"{detail}; total probability error {conserved:.1e}; {elapsed:.1f} s")


def test_first_order_ess_trend(criterion):
    start = time.perf_counter()
    plans = [
        ExperimentPlan(gaussian_mean(), HypothesisLayout.simple([0.0, 1.0]), EngineKind.MSPRT, [1.0], 10_000,
                       budget=ErrorBudget.uniform(2, a), seed=0, orders=(1, 2))
        for a in (1e-2, 1e-3, 1e-4)
    ]
    rows = ess_ratio_trend(plans)
    elapsed = time.perf_counter() - start
    ok = elapsed < 120
    parts = []
    for r in (1, 2):
        ratios = [row["ratio"] for row in rows if row["r"] == r]
        for row in rows:
            if row["r"] == r:
                assert row["predicted"] == (abs(math.log(row["alpha"])) / 0.5) ** r
        ok &= all(b < a for a, b in zip(ratios, ratios[1:])) and ratios[-1] <= 1.5
        parts.append(f"r={r} ratios " + " > ".join(f"{v:.4f}" for v in ratios))
    criterion("first-order ESS trend", ok, f"{'; '.join(parts)}; {elapsed:.1f} s")


def test_martingale_property(criterion):
    model = UnknownVarianceModel(0.0, 1.0)
    out = adaptive_likelihood_ratio(model, truth=(0.5, 1.0), initial=(0.0, 1.0), n_values=(5, 10, 20),
                                    trials=100_000, seed=0)
    zs = {n: (mean - 1.0) / se for n, (mean, se) in out.items()}
    ok = all(abs(z) <= 3 for z in zs.values())
    detail = ", ".join(f"n={n} mean={out[n][0]:.4f} se={out[n][1]:.4f} z={zs[n]:.1f}" for n in sorted(out))
    criterion("martingale property", ok, detail)


def test_invariance_suite(criterion):
    rng = np.random.default_rng(0)
    c = 7.3
    stat_err = 0.0
    decisions_equal = True
    points = [-0.5, 0.0, 0.5, 1.0]
    for exact in (False, True):
        model = TInvariantModel(exact=exact)
        engine = MSPRT(HypothesisLayout.simple(points), ThresholdMatrix.uniform(4, 3.0), model)
        for _ in range(20 if exact else 100):
            xs = rng.normal(rng.uniform(-1, 1.5), rng.uniform(0.2, 3.0), 60)
            scaled = c * xs
            ha, hb = model.init_hist(1), model.init_hist(1)
            for xa, xb in zip(xs[:25], scaled[:25]):
                ha = model.update(ha, np.array([xa]))
                hb = model.update(hb, np.array([xb]))
                la = model.hypothesis_loglik(np.array(points)[:, None], ha)
                lb = model.hypothesis_loglik(np.array(points)[:, None], hb)
                stat_err = max(stat_err, float(np.max(np.abs(la - lb) / np.maximum(np.abs(la), 1e-300))))
            decisions_equal &= engine.run(xs) == engine.run(scaled)

    mix_err = 0.0
    for _ in range(100):
        xs = rng.normal(rng.normal(), rng.uniform(0.2, 3.0), int(rng.integers(2, 50)))
        base = invariant_mixture_statistic(xs)
        mix_err = max(mix_err, abs(invariant_mixture_statistic(c * xs) - base) / max(abs(base), 1e-300))

    anti = trans = 0.0
    engine = MSPRT(HypothesisLayout.simple([-1.0, 0.0, 0.5, 2.0]), ThresholdMatrix.uniform(4, 50.0), gaussian_mean())
    for k in range(100):
        sub = np.random.default_rng(1000 + k)
        xs = sub.normal(sub.choice([-1.0, 0.0, 0.5, 2.0]), 1.0, 80)
        state = engine.start(1)
        for x in xs:
            engine.step(state, x)
            if state.finished:
                break
            lam = state.stats[0]
            scale = max(1.0, float(np.abs(lam).max()))
            anti = max(anti, float(np.abs(lam + lam.T).max()) / scale)
            for j in range(4):
                trans = max(trans, float(np.abs(lam - (lam[:, [j]] + lam[[j], :])).max()) / scale)

    ok = stat_err <= 1e-9 and decisions_equal and mix_err <= 1e-9 and anti <= 1e-12 and trans <= 1e-10
    criterion("invariance suite", ok,
              f"t-statistics rel err {stat_err:.1e}, decisions equal {decisions_equal}, "
              f"mixture rel err {mix_err:.1e}, antisymmetry {anti:.1e}, transitivity {trans:.1e}")


def test_analytic_cross_checks(criterion):
    a0, a1 = 1e-8, 1e-2  # c = 4
    theta = worst_point_ar_mean(0.0, 1.0, a0, a1)
    l0, l1 = abs(math.log(a0)), abs(math.log(a1))
    root = brentq(lambda t: l0 / t**2 - l1 / (1 - t) ** 2, 1e-6, 1 - 1e-6, xtol=1e-14)
    theta_ok = abs(theta - 2 / 3) <= 1e-15 and abs(root - theta) < 1e-10
    q = worst_point_unknown_variance(0.0, 1.0, 0.01, 0.01)
    f_err = abs(stationary_covariance([0.5])[0, 0] - 4 / 3)
    phi_err = abs(phi(0.0) - math.log(2))
    gaps = {}
    for n in (50, 100, 200):
        gaps[n] = max(abs(t_llr_exact(1.0, 0.0, n, t) - t_llr_approx(1.0, 0.0, n, t))
                      for t in np.linspace(-1.0, 1.0, 41))
    gap_ok = max(gaps.values()) <= 0.5 and gaps[200] <= gaps[50] + 0.01
    ok = theta_ok and q == 0.5 and f_err <= 1e-12 and phi_err <= 1e-14 and gap_ok
    criterion("analytic cross-checks", ok,
              f"theta*={theta!r} (bisection residual {abs(root - theta):.1e}), q*={q!r}, "
              f"F error {f_err:.1e}, phi(0) error {phi_err:.1e}, "
              "sup |gap| " + ", ".join(f"n={n}: {v:.4f}" for n, v in gaps.items()))


def test_slln_diagnostic(criterion):
    ar_mean = slln_diagnostic(ArMeanModel((0.5,), 1.0, Signal("constant", 2.0)), [1.0], [0.0],
                              n_max=5000, reps=100, seed=0)
    ar_cov = slln_diagnostic(ArCovModel(1), [0.5], [0.0], n_max=5000, reps=100, seed=0)
    assert ar_mean.target == 0.5 and abs(ar_cov.target - 1 / 6) < 1e-15
    ok = ar_mean.fraction >= 0.95 and ar_cov.fraction >= 0.95
    criterion("SLLN diagnostic", ok,
              f"AR-mean fraction {ar_mean.fraction:.2f} (I=0.5), AR(1) fraction {ar_cov.fraction:.2f} (I=1/6), "
              "need >= 0.95")


def test_determinism(criterion):
    mismatched = []
    for path in sorted(CONFIGS.glob("*.cfg")):
        texts = []
        for workers in (1, 2):
            plan = _plan(path.stem, **{"experiment.trials": 1500, "experiment.chunk": 500})
            plan = replace(plan, workers=workers)
            texts.append(json.dumps(run_experiment(plan).to_dict(), sort_keys=True))
        if texts[0] != texts[1]:
            mismatched.append(path.stem)
    criterion("determinism", not mismatched,
              f"{len(list(CONFIGS.glob('*.cfg')))} shipped configs, workers 1 vs 2; mismatches: {mismatched or 'none'}")
