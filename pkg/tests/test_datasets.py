import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kdehmm import (
    DataError,
    NoCycleStructure,
    OccupancyGuess,
    SyntheticSpec,
    dequantize,
    generate_synthetic,
    instantaneous_phase,
    load_series,
    logistic_map_surrogate,
    phase_occupancies,
    threshold_occupancies,
    write_series,
)
from kdehmm.datasets import write_occupancies_csv


# ------------------------------------------------------------ synthetic data


def test_synthetic_reproducible():
    spec = SyntheticSpec(length=500, seed=9)
    a, sa = generate_synthetic(spec)
    b, sb = generate_synthetic(spec)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(sa, sb)


def test_synthetic_ar_variance_single_scale():
    # equal noise scales make the state irrelevant: Var = 1 / (1 - 4/9) = 1.8
    spec = SyntheticSpec(length=1_000_000, seed=10, noise_stds=(1.0, 1.0))
    series, _ = generate_synthetic(spec)
    assert float(np.var(series.values)) == pytest.approx(1.8, rel=0.03)


def test_synthetic_gmm_noise_unit_variance():
    # with a zero AR coefficient the output equals the driving noise
    spec = SyntheticSpec(
        length=1_000_000, seed=11, ar_coefficient=0.0, noise_stds=(1.0, 1.0),
        noise_family="bimodal_gmm",
    )
    series, _ = generate_synthetic(spec)
    u = series.values
    assert float(np.var(u)) == pytest.approx(1.0, rel=0.01)
    assert float(np.mean(u)) == pytest.approx(0.0, abs=0.01)
    # bimodal: mass near zero is much thinner than for a standard normal
    assert np.mean(np.abs(u) < 0.2) < 0.10


def test_synthetic_stay_frequency():
    spec = SyntheticSpec(length=100_000, seed=12)
    _, states = generate_synthetic(spec)
    stays = np.mean(states[1:] == states[:-1])
    assert stays == pytest.approx(0.8, abs=0.01)


def test_synthetic_gmm_requires_unit_variance():
    with pytest.raises(ValueError):
        SyntheticSpec(length=10, noise_family="bimodal_gmm", gmm_mean=1.0, gmm_std=1.0)


def test_logistic_surrogate_integer_quantized():
    series = logistic_map_surrogate(500, seed=3)
    assert np.array_equal(series.values, np.round(series.values))
    assert series.values.min() >= 0 and series.values.max() <= 255
    again = logistic_map_surrogate(500, seed=3)
    assert np.array_equal(series.values, again.values)


# ------------------------------------------------------------------ file I/O


def test_load_plain(tmp_path):
    path = tmp_path / "series.txt"
    path.write_text("1\n2\n3\n")
    series = load_series(path)
    assert np.array_equal(series.values, [1.0, 2.0, 3.0])
    assert series.source == str(path)


def test_load_csv_column(tmp_path):
    path = tmp_path / "series.csv"
    path.write_text("t,value\n0,1.5\n1,2.5\n2,-3.0\n")
    series = load_series(path, fmt="csv", column="value")
    assert np.array_equal(series.values, [1.5, 2.5, -3.0])
    by_index = load_series(path, fmt="csv", column=1)
    assert np.array_equal(by_index.values, [1.5, 2.5, -3.0])


def test_write_read_round_trip(tmp_path):
    rng = np.random.default_rng(13)
    values = rng.normal(size=50)
    for fmt in ("plain", "csv"):
        path = tmp_path / f"rt.{fmt}"
        write_series(path, values, fmt=fmt)
        back = load_series(path, fmt=fmt, column="value" if fmt == "csv" else None)
        assert np.array_equal(back.values, values)


def test_load_errors(tmp_path):
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    with pytest.raises(DataError):
        load_series(empty)
    bad = tmp_path / "bad.txt"
    bad.write_text("1.0\nnot-a-number\n")
    with pytest.raises(DataError, match="line 2"):
        load_series(bad)
    with pytest.raises(DataError):
        load_series(tmp_path / "missing.txt")
    nocol = tmp_path / "nocol.csv"
    nocol.write_text("a,b\n1,2\n")
    with pytest.raises(DataError):
        load_series(nocol, fmt="csv", column="c")


# --------------------------------------------------------------- dequantize


def test_dequantize_breaks_ties():
    series = logistic_map_surrogate(400, seed=4)
    noisy = dequantize(series, 0.5, seed=5)
    assert len(np.unique(noisy.values)) == len(noisy)
    assert np.all(np.abs(noisy.values - series.values) < 0.5)


def test_dequantize_mean_shift_small():
    series = logistic_map_surrogate(10_000, seed=6)
    noisy = dequantize(series, 0.5, seed=7)
    shift = float(np.mean(noisy.values - series.values))
    assert abs(shift) <= 3 * 0.5 / np.sqrt(3 * len(series))


def test_dequantize_deterministic():
    series = logistic_map_surrogate(100, seed=8)
    a = dequantize(series, 0.5, seed=9)
    b = dequantize(series, 0.5, seed=9)
    assert np.array_equal(a.values, b.values)
    assert len(a) == len(series)


# --------------------------------------------------------------- occupancies


def test_threshold_constant_series():
    guess = threshold_occupancies(np.zeros(5) + 2.0)
    assert np.array_equal(guess.gamma_hat[0], [0.5, 1, 1, 1, 1])


def test_threshold_frozen_example():
    guess = threshold_occupancies([0.0, 0.0, 10.0, 10.0])
    assert np.array_equal(guess.gamma_hat[0], [0.5, 1.0, 0.0, 1.0])
    assert np.array_equal(guess.gamma_hat[1], [0.5, 0.0, 1.0, 0.0])


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=2, max_size=40))
def test_threshold_columns_sum_to_one(values):
    guess = threshold_occupancies(values)
    assert np.allclose(guess.gamma_hat.sum(axis=0), 1.0, atol=1e-12)
    assert np.all(guess.gamma_hat >= 0)


def oscillation(n=240, period=12.0, seed=0):
    t = np.arange(n)
    rng = np.random.default_rng(seed)
    return np.sin(2 * np.pi * t / period) * (1 + 0.2 * np.cos(t / 30)) + 0.01 * rng.standard_normal(n)


def test_phase_occupancies_grid_points():
    series = oscillation()
    m = 4
    guess = phase_occupancies(series, m)
    phase = instantaneous_phase(series)
    grid_state = np.round(np.mod(phase, 2 * np.pi) / (2 * np.pi / m)).astype(int) % m
    on_grid = np.isclose(np.mod(phase, 2 * np.pi / m), 0.0, atol=1e-9)
    for t in np.flatnonzero(on_grid):
        assert guess.gamma_hat[grid_state[t], t] == pytest.approx(1.0, abs=1e-9)


def test_phase_occupancies_columns_sum_to_one():
    series = oscillation(seed=1)
    for m in (2, 3, 5):
        guess = phase_occupancies(series, m)
        assert np.allclose(guess.gamma_hat.sum(axis=0), 1.0, atol=1e-12)
        assert np.all(guess.gamma_hat >= 0)
        # at most two adjacent states active per column
        assert np.all((guess.gamma_hat > 1e-12).sum(axis=0) <= 2)


def test_phase_occupancies_triangle_on_linear_ramp():
    # a synthetic linear phase ramp maps to the closed-form triangle shape
    m = 4
    phase = np.linspace(0.0, 2 * np.pi, 101)
    grid = 2 * np.pi * np.arange(m) / m
    delta = np.mod(phase[None, :] - grid[:, None], 2 * np.pi)
    circ = np.minimum(delta, 2 * np.pi - delta)
    expected = np.maximum(0.0, 1.0 - m / (2 * np.pi) * circ)
    expected /= expected.sum(axis=0, keepdims=True)
    # triangle peak at each grid crossing, linear in between
    k = 25  # phase = pi/2 -> state 1 peak
    assert expected[1, k] == pytest.approx(1.0, abs=1e-12)
    assert expected[0, 12] == pytest.approx(expected[1, 12], abs=0.05)


def test_phase_occupancies_single_state():
    guess = phase_occupancies(oscillation(), 1)
    assert np.array_equal(guess.gamma_hat, np.ones((1, 240)))


def test_phase_occupancies_need_two_peaks():
    with pytest.raises(NoCycleStructure):
        phase_occupancies(np.linspace(0, 1, 50), 3)


def test_occupancy_guess_validation():
    with pytest.raises(ValueError):
        OccupancyGuess(np.array([[0.7, 0.2], [0.2, 0.2]]), method="x")
    with pytest.raises(ValueError):
        OccupancyGuess(np.array([[1.2, -0.2], [-0.2, 1.2]]), method="x")


def test_occupancies_csv(tmp_path):
    guess = threshold_occupancies([0.0, 0.0, 10.0, 10.0])
    path = tmp_path / "occ.csv"
    write_occupancies_csv(path, guess)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,q,gamma_hat"
    assert len(lines) == 1 + 4 * 2
