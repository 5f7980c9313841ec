import numpy as np
import pytest

import oracles
from kdehmm import (
    ArHmm,
    ArModel,
    RankDeficient,
    SequenceTooShort,
    SyntheticSpec,
    ar_fit,
    ar_hmm_fit,
    ar_hmm_sample,
    ar_hmm_score,
    ar_loglik,
    as_series,
    generate_synthetic,
    threshold_occupancies,
)
from kdehmm.numerics import stationary_distribution


def test_ar_fit_three_point_hand_solved():
    # normal equations of {(1 -> 2), (2 -> 5)}: intercept -1, slope 3
    model = ar_fit([1.0, 2.0, 5.0], 1)
    assert model.intercept == pytest.approx(-1.0, abs=1e-10)
    assert model.coefficients[0] == pytest.approx(3.0, abs=1e-10)
    # exact fit: residuals vanish, noise variance sits at its floor
    assert model.noise_std == pytest.approx(1e-5, rel=1e-6)


def test_ar_fit_recovers_known_coefficient():
    rng = np.random.default_rng(0)
    from scipy.signal import lfilter

    u = rng.standard_normal(100_000)
    x = lfilter([1.0], [1.0, -2.0 / 3.0], u)
    model = ar_fit(x, 1)
    assert model.coefficients[0] == pytest.approx(2.0 / 3.0, abs=0.01)
    assert model.noise_std == pytest.approx(1.0, abs=0.02)


def test_ar_fit_white_noise_coefficient_near_zero():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(10_000)
    model = ar_fit(x, 1)
    assert abs(model.coefficients[0]) <= 3.0 / np.sqrt(len(x))


def test_ar_fit_rank_deficient():
    with pytest.raises(RankDeficient):
        ar_fit(np.ones(20), 1)


def test_ar_fit_too_short():
    with pytest.raises(SequenceTooShort):
        ar_fit([1.0, 2.0], 1)


def test_ar_loglik_gaussian_sum():
    model = ArModel(0, np.empty(0), 1.5, 2.0)
    seq = np.array([0.0, 1.0, 4.0])
    want = sum(np.log(oracles.gauss((x - 1.5) / 2.0) / 2.0) for x in seq)
    assert ar_loglik(model, seq) == pytest.approx(want, rel=1e-12)


def synthetic_series(n, seed):
    series, _ = generate_synthetic(SyntheticSpec(length=n, seed=seed))
    return series


def test_ar_hmm_single_state_reduces_to_ar_fit():
    series = synthetic_series(400, 2)
    direct = ar_fit(series, 1)
    guess = np.ones((1, len(series)))
    model, report = ar_hmm_fit(series, 1, 1, guess, max_iterations=10)
    assert model.models[0].coefficients[0] == pytest.approx(direct.coefficients[0], rel=1e-8)
    assert model.models[0].intercept == pytest.approx(direct.intercept, abs=1e-8)
    assert model.models[0].noise_std == pytest.approx(direct.noise_std, rel=1e-8)


def test_ar_hmm_em_monotone():
    series = synthetic_series(500, 3)
    model, report = ar_hmm_fit(series, 2, 1, threshold_occupancies(series), max_iterations=100)
    trace = np.array(report.objective_trace + [report.final_objective])
    diffs = np.diff(trace)
    assert np.all(diffs >= -1e-8 * np.abs(trace[:-1]))


def test_ar_hmm_recovers_noise_scales():
    # N = 10^3.5 two-state data with noise stds 1 and 5
    series = synthetic_series(3162, 4)
    model, _ = ar_hmm_fit(series, 2, 1, threshold_occupancies(series), max_iterations=300)
    stds = sorted(m.noise_std for m in model.models)
    assert stds[0] == pytest.approx(1.0, rel=0.15)
    assert stds[1] == pytest.approx(5.0, rel=0.15)


def test_ar_hmm_score_single_state_order0():
    model = ArHmm(np.ones((1, 1)), np.ones(1), (ArModel(0, np.empty(0), 0.5, 1.2),))
    seq = np.array([0.2, -0.4, 1.0, 0.6])
    want = sum(np.log(oracles.gauss((x - 0.5) / 1.2) / 1.2) for x in seq)
    assert ar_hmm_score(model, seq) == pytest.approx(want, rel=1e-12)


def test_ar_hmm_score_matches_enumeration():
    a = np.array([[0.8, 0.2], [0.35, 0.65]])
    pi = stationary_distribution(a)
    params = [(np.array([0.5]), 0.1, 1.0), (np.array([-0.3]), 0.0, 2.5)]
    model = ArHmm(a, pi, tuple(ArModel(1, c, i, s) for c, i, s in params))
    rng = np.random.default_rng(5)
    seq = rng.normal(size=8)
    want = oracles.gaussian_hmm_enumeration_loglik(seq, 1, a, pi, params)
    assert ar_hmm_score(model, seq) == pytest.approx(want, rel=1e-10)


def test_ar_hmm_sample_deterministic():
    a = np.array([[0.9, 0.1], [0.2, 0.8]])
    model = ArHmm(
        a, stationary_distribution(a),
        (ArModel(1, np.array([0.6]), 0.0, 1.0), ArModel(1, np.array([0.6]), 0.0, 5.0)),
    )
    s1 = ar_hmm_sample(model, 50, rng_seed=9)
    s2 = ar_hmm_sample(model, 50, rng_seed=9)
    assert np.array_equal(s1.values, s2.values)


def test_ar_hmm_sample_fit_round_trip():
    a = np.array([[0.8, 0.2], [0.2, 0.8]])
    model = ArHmm(
        a, stationary_distribution(a),
        (ArModel(1, np.array([2.0 / 3.0]), 0.0, 1.0), ArModel(1, np.array([2.0 / 3.0]), 0.0, 5.0)),
    )
    series = ar_hmm_sample(model, 100_000, rng_seed=11)
    fitted, _ = ar_hmm_fit(series, 2, 1, threshold_occupancies(series), max_iterations=200)
    # state identity up to permutation: order by noise std
    order = np.argsort([m.noise_std for m in fitted.models])
    a_fit = fitted.transition[np.ix_(order, order)]
    assert np.all(np.abs(a_fit - a) <= 0.05)


def test_ar_hmm_score_approaches_generating_density():
    a = np.array([[0.8, 0.2], [0.2, 0.8]])
    model = ArHmm(
        a, stationary_distribution(a),
        (ArModel(1, np.array([2.0 / 3.0]), 0.0, 1.0), ArModel(1, np.array([2.0 / 3.0]), 0.0, 5.0)),
    )
    per_sample = []
    for rep in range(30):
        val = ar_hmm_sample(model, 1000, rng_seed=100 + rep)
        per_sample.append(ar_hmm_score(model, val) / (len(val) - 1))
    per_sample = np.array(per_sample)
    big = ar_hmm_sample(model, 200_000, rng_seed=999)
    reference = ar_hmm_score(model, big) / (len(big) - 1)
    stderr = per_sample.std(ddof=1) / np.sqrt(len(per_sample))
    assert abs(per_sample.mean() - reference) <= 2 * stderr


def test_starved_state_flagged_and_held():
    series = synthetic_series(200, 6)
    gamma = np.zeros((2, len(series)))
    gamma[0] = 1.0
    gamma[0, 0] = 0.999999
    gamma[1, 0] = 0.000001
    model, report = ar_hmm_fit(series, 2, 1, gamma, max_iterations=5)
    assert any(flag.startswith("starved_state_1") for flag in report.flags)
