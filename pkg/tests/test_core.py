import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import logsumexp
from scipy.stats import norm

from matrix_sprt import (
    AMSPRT,
    MMSPRT,
    MSPRT,
    ConfigurationError,
    EngineKind,
    ErrorBudget,
    HypothesisLayout,
    PriorGrid,
    Region,
    TestRunState,
    ThresholdMatrix,
    build_threshold_matrix,
)
from matrix_sprt.core import acceptance_margins, msprt_step, wald_sprt
from matrix_sprt.models import ArMeanModel, BernoulliModel, Signal, UnknownVarianceModel, gaussian_mean, uv_statistics


# --- thresholds -------------------------------------------------------------


def test_threshold_from_one_percent():
    a = build_threshold_matrix(ErrorBudget.uniform(3, 0.01)).a
    off = ~np.eye(3, dtype=bool)
    assert np.allclose(a[off], math.log(100))
    assert a[0, 1] == pytest.approx(4.60517, abs=1e-5)


def test_threshold_from_inverse_e():
    a = build_threshold_matrix(ErrorBudget.uniform(2, math.exp(-1))).a
    assert a[0, 1] == pytest.approx(1.0, abs=1e-15)


def test_asymmetric_budget():
    a = build_threshold_matrix(ErrorBudget([[0, 1e-3], [1e-2, 0]])).a
    assert a[0, 1] == pytest.approx(6.9078, abs=1e-4)
    assert a[1, 0] == pytest.approx(4.6052, abs=1e-4)


@pytest.mark.parametrize("bad", [0.0, 1.0, 1.5, -0.1, float("nan")])
def test_budget_rejects_out_of_range(bad):
    with pytest.raises(ConfigurationError, match="outside"):
        ErrorBudget([[0, bad], [0.1, 0]])


def test_thresholds_must_be_positive():
    with pytest.raises(ConfigurationError):
        ThresholdMatrix([[0, 0.0], [1.0, 0]])


def test_budget_diagonal_is_ignored():
    ErrorBudget([[7.0, 0.1], [0.1, -3.0]])


# --- layouts ----------------------------------------------------------------


def test_layout_needs_two_hypotheses():
    with pytest.raises(ConfigurationError):
        HypothesisLayout.simple([0.0])


def test_overlapping_regions_rejected():
    with pytest.raises(ConfigurationError, match="overlap"):
        HypothesisLayout((Region.interval(0, 1), Region.interval(0.5, 2)))


def test_touching_closed_regions_overlap():
    with pytest.raises(ConfigurationError):
        HypothesisLayout((Region.interval(0, 1), Region.interval(1, 2)))


def test_two_sided_layout_labels():
    layout = HypothesisLayout.two_sided(0.0, 1.0)
    assert layout.label(-3.0) == "H0"
    assert layout.label(0.0) == "H0"
    assert layout.label(0.5) == "in"
    assert layout.label(1.0) == "H1"
    assert layout.locate(0.5) is None


def test_indifference_overlap_rejected():
    with pytest.raises(ConfigurationError):
        HypothesisLayout((Region.interval(0, 1), Region.interval(2, 3)), Region.interval(0.5, 2.5, closed=False))


# --- MSPRT --------------------------------------------------------------------


def bernoulli_engine(a=2.0, p=(0.25, 0.75), horizon=10**6):
    return MSPRT(HypothesisLayout.simple(list(p)), ThresholdMatrix.uniform(len(p), a), BernoulliModel(), horizon)


def test_bernoulli_accepts_after_two_successes():
    engine = bernoulli_engine()
    state = engine.start(1)
    engine.step(state, 1.0)
    assert state.stats[0, 1, 0] == pytest.approx(math.log(3))
    assert not state.finished
    engine.step(state, 1.0)
    d = state.decision(0)
    assert d.stopping_time == 2 and d.accepted == 1 and not d.ambiguous_tie
    assert 2 * math.log(3) == pytest.approx(2.197, abs=1e-3)


def test_tiny_thresholds_stop_at_first_observation():
    engine = MSPRT(HypothesisLayout.simple([-1.0, 0.0, 1.0]), ThresholdMatrix.uniform(3, 1e-12), gaussian_mean())
    for x in (-2.0, 0.1, 3.0):
        d = engine.run([x])
        assert d.stopping_time == 1
    assert engine.run([3.0]).accepted == 2
    assert engine.run([-2.0]).accepted == 0


def test_non_finite_increment_marks_trial_invalid():
    state = TestRunState(EngineKind.MSPRT, 2, 0, np.zeros((2, 2, 2)), {})
    inc = np.zeros((2, 2, 2))
    inc[1, 0, 1] = np.nan
    stopped = msprt_step(state, inc, ThresholdMatrix.uniform(2, 5.0))
    assert list(stopped) == [1]
    assert state.decision(1).invalid
    assert state.decision(0) is None


def test_horizon_censors():
    engine = bernoulli_engine(horizon=3)
    d = engine.run([1, 0, 1, 0, 1])
    assert d.censored and d.accepted is None and d.stopping_time == 3


def test_tie_takes_smallest_index_and_flags():
    # two identical hypotheses: both clear their thresholds together
    state = TestRunState(EngineKind.MSPRT, 1, 0, np.zeros((1, 3, 3)), {})
    inc = np.array([[0.0, 0.0, 5.0], [0.0, 0.0, 5.0], [-5.0, -5.0, 0.0]])
    a = np.full((3, 3), 1.0)
    np.fill_diagonal(a, 0.0)
    a[0, 1] = a[1, 0] = 1e-9
    # lambda_01 = 0 < a_10: nobody accepts yet
    msprt_step(state, inc, ThresholdMatrix(a))
    assert not state.finished
    a2 = ThresholdMatrix(np.where(np.eye(3, dtype=bool), 0.0, np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0.0]])))
    state2 = TestRunState(EngineKind.MSPRT, 1, 0, np.zeros((1, 3, 3)), {})
    margins = acceptance_margins(np.array([[[0, 2, 2], [2, 0, 2], [-2, -2, 0.0]]]), a2.a)
    assert (margins[0, :2] >= 0).all()
    msprt_step(state2, np.array([[0, 2, 2], [2, 0, 2], [-2, -2, 0.0]]), a2)
    d = state2.decision(0)
    assert d.accepted == 0 and d.ambiguous_tie


def _random_gaussian_run(seed, points, a, n=60):
    rng = np.random.default_rng(seed)
    engine = MSPRT(HypothesisLayout.simple(points), ThresholdMatrix.uniform(len(points), a), gaussian_mean())
    state = engine.start(1)
    xs = rng.normal(rng.choice(points), 1.0, n)
    history = []
    for x in xs:
        engine.step(state, x)
        if state.finished:
            break
        history.append(state.stats[0].copy())
    return history


def test_antisymmetry_and_transitivity_on_random_trajectories():
    for seed in range(100):
        for lam in _random_gaussian_run(seed, [-1.0, 0.0, 0.5, 2.0], 50.0):
            scale = max(1.0, np.abs(lam).max())
            assert np.abs(lam + lam.T).max() <= 1e-12 * scale
            for k in range(4):
                assert np.abs(lam - (lam[:, [k]] + lam[[k], :])).max() <= 1e-10 * scale


@settings(max_examples=60, deadline=None)
@given(
    xs=st.lists(st.floats(-4, 4, allow_nan=False), min_size=1, max_size=40),
    a01=st.floats(0.05, 6),
    a10=st.floats(0.05, 6),
)
def test_two_hypotheses_match_wald(xs, a01, a10):
    model = gaussian_mean()
    engine = MSPRT(HypothesisLayout.simple([0.0, 1.0]), ThresholdMatrix([[0, a01], [a10, 0]]), model)
    llr = [x - 0.5 for x in xs]
    d = engine.run(xs)
    w = wald_sprt(llr, lower=a10, upper=a01)
    if w is None:
        assert d is None
    else:
        assert (d.stopping_time, d.accepted) == w


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), bump=st.floats(0.0, 3.0))
def test_raising_thresholds_never_stops_earlier(seed, bump):
    xs = np.random.default_rng(seed).normal(0.3, 1.0, 400)
    layout = HypothesisLayout.simple([-1.0, 0.0, 1.0])
    base = MSPRT(layout, ThresholdMatrix.uniform(3, 2.0), gaussian_mean()).run(xs)
    higher = MSPRT(layout, ThresholdMatrix.uniform(3, 2.0 + bump), gaussian_mean()).run(xs)
    if base is not None and higher is not None:
        assert higher.stopping_time >= base.stopping_time


def test_batched_rows_match_single_runs():
    rng = np.random.default_rng(3)
    xs = rng.normal(0.2, 1.0, (50, 300))
    engine = MSPRT(HypothesisLayout.simple([-1.0, 0.0, 1.0]), ThresholdMatrix.uniform(3, 3.0), gaussian_mean())
    state = engine.start(50)
    n = 0
    while not state.finished:
        engine.step(state, xs[state.rows, n])
        n += 1
    for k in range(50):
        assert state.decision(k) == engine.run(xs[k])


# --- MMSPRT -------------------------------------------------------------------


def test_point_mass_mixture_equals_simple_llr():
    model = gaussian_mean()
    layout = HypothesisLayout((Region.point(0.0), Region.interval(2.0, 5.0)))
    engine = MMSPRT(layout, ThresholdMatrix.uniform(2, 50.0), model, prior=PriorGrid.point_mass(0.7))
    state = engine.start(1)
    xs = [0.3, 1.2, -0.4, 0.9]
    for n, x in enumerate(xs, start=1):
        engine.step(state, x)
        simple = sum(0.7 * v - 0.7**2 / 2 for v in xs[:n])
        assert state.stats[0, 0] == pytest.approx(simple, abs=1e-12)


def test_grid_mixture_matches_direct_sum():
    grid = np.array([-1.0, -0.25, 0.4, 1.1, 2.0])
    logw = np.log(np.array([0.1, 0.3, 0.2, 0.25, 0.15]))
    prior = PriorGrid(grid[:, None], logw)
    engine = MMSPRT(HypothesisLayout.two_sided(0.0, 1.0), ThresholdMatrix.uniform(2, 50.0), gaussian_mean(), prior=prior)
    state = engine.start(1)
    xs = [0.8, -0.3, 1.7]
    for x in xs:
        engine.step(state, x)
    direct = np.log(sum(w * np.prod(norm.pdf(np.array(xs) - g)) for g, w in zip(grid, np.exp(logw))))
    assert state.extra["log_g"][0] == pytest.approx(direct, abs=1e-12)


def test_mixture_stays_finite_for_long_streams():
    prior = PriorGrid.uniform(-3.0, 3.0, 201)
    engine = MMSPRT(HypothesisLayout.two_sided(-2.9, 2.9), ThresholdMatrix.uniform(2, 1e9), gaussian_mean(), prior=prior)
    state = engine.start(1)
    for x in np.random.default_rng(0).normal(0.0, 1.0, 3000):
        engine.step(state, x)
    assert np.isfinite(state.extra["log_g"]).all()
    assert np.isfinite(state.stats).all()


def test_grid_sup_mode_uses_region_points():
    prior = PriorGrid.uniform(-2.0, 3.0, 51)
    layout = HypothesisLayout.two_sided(0.0, 1.0)
    engine = MMSPRT(layout, ThresholdMatrix.uniform(2, 1e9), gaussian_mean(), prior=prior, sup="grid")
    state = engine.start(1)
    for x in (0.2, 0.6):
        engine.step(state, x)
    ll = state.extra["grid_loglik"][0]
    inside = prior.points[:, 0] >= 1.0
    assert state.stats[0, 1] == pytest.approx(state.extra["log_g"][0] - ll[inside].max())


def test_prior_without_support_rejected():
    with pytest.raises(ConfigurationError):
        PriorGrid(np.zeros((2, 1)), np.array([-np.inf, -np.inf]))


def test_prior_product_weights_are_normalized():
    prior = PriorGrid.product([(-1.0, 1.0, 5, "linear"), (0.5, 2.0, 4, "log")])
    assert prior.points.shape == (20, 2)
    assert logsumexp(prior.log_weights) == pytest.approx(0.0, abs=1e-14)


def test_mmsprt_needs_prior():
    with pytest.raises(ConfigurationError):
        MMSPRT(HypothesisLayout.two_sided(0.0, 1.0), ThresholdMatrix.uniform(2, 1.0), gaussian_mean())


# --- AMSPRT -------------------------------------------------------------------


def test_frozen_estimate_gives_simple_llrs():
    model = gaussian_mean()
    layout = HypothesisLayout.simple([0.0, 2.0])
    frozen = lambda hist: (np.full((hist["n"].size, 1), 0.8), np.ones(hist["n"].size, dtype=bool))
    engine = AMSPRT(layout, ThresholdMatrix.uniform(2, 50.0), model, initial_estimate=(0.8,), estimator=frozen)

    state = engine.start(1)
    xs = [0.1, 1.3, 0.4]
    # simple hypotheses: the restricted sup is the log-density at the point
    for n, x in enumerate(xs, start=1):
        engine.step(state, x)
        s = np.array(xs[:n])
        for j, v in enumerate((0.0, 2.0)):
            llr = np.sum((0.8 - v) * s - (0.8**2 - v**2) / 2)
            assert state.stats[0, j] == pytest.approx(llr, abs=1e-12)


def test_ar_mean_adaptive_statistic_by_hand():
    # rho = 0.5, S = 2: whitened signal (2, 1, 1); raw stream below
    model = ArMeanModel((0.5,), 1.0, Signal("constant", 2.0))
    engine = AMSPRT(HypothesisLayout.two_sided(0.0, 1.0), ThresholdMatrix.uniform(2, 50.0), model, initial_estimate=(0.5,))
    state = engine.start(1)
    for x in (0.3, 1.7, 0.9):
        engine.step(state, x)
    s_t = np.array([2.0, 1.0, 1.0])
    x_t = np.array([0.3, 1.55, 0.05])
    est = np.array([0.5, 0.6 / 4.0, 2.15 / 5.0])
    numerator = np.sum(est * s_t * x_t - est**2 * s_t**2 / 2)
    clipped = 1.0  # unrestricted MLE 2.2/6 lies below theta_1 = 1
    denominator = clipped * np.sum(s_t * x_t) - clipped**2 * np.sum(s_t**2) / 2
    assert state.stats[0, 1] == pytest.approx(numerator - denominator, abs=1e-12)
    assert state.fallback_steps[0] == 1


def test_unknown_variance_adaptive_statistics_match_closed_form():
    model = UnknownVarianceModel(0.0, 1.0)
    engine = AMSPRT(model.layout(), ThresholdMatrix.uniform(2, 1e6), model, initial_estimate=(0.0, 1.0))
    xs = np.random.default_rng(11).normal(0.4, 1.3, 25)
    state = engine.start(1)
    for x in xs:
        engine.step(state, x)
    ell, ell0, ell1, _, fallbacks = uv_statistics(model, xs, (0.0, 1.0))
    assert state.stats[0, 0] == pytest.approx(ell - ell0, abs=1e-10)
    assert state.stats[0, 1] == pytest.approx(ell - ell1, abs=1e-10)
    # steps 1 and 2 see no data, then a zero running variance
    assert state.fallback_steps[0] == fallbacks == 2


def test_amsprt_accepts_on_the_mixture_style_index():
    # H1 is accepted when the statistic against region 0 clears a_01
    model = gaussian_mean()
    a = ThresholdMatrix([[0, 1.0], [40.0, 0]])
    engine = AMSPRT(HypothesisLayout.two_sided(0.0, 1.0), a, model, initial_estimate=(3.0,))
    d = engine.run([3.0] * 30)
    assert d.accepted == 1


def test_amsprt_needs_initial_estimate():
    with pytest.raises(ConfigurationError):
        AMSPRT(HypothesisLayout.two_sided(0.0, 1.0), ThresholdMatrix.uniform(2, 1.0), gaussian_mean())


def test_engine_rejects_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        MSPRT(HypothesisLayout.simple([(0.0, 1.0), (1.0, 1.0)]), ThresholdMatrix.uniform(2, 1.0), gaussian_mean())


def test_msprt_rejects_composite_layout():
    with pytest.raises(ConfigurationError):
        MSPRT(HypothesisLayout.two_sided(0.0, 1.0), ThresholdMatrix.uniform(2, 1.0), gaussian_mean())
