import json

import numpy as np
import pytest

from kdehmm import (
    ArHmm,
    ArModel,
    DataError,
    KdeMm,
    as_series,
    hmm_initialize,
    hmm_score,
    load_model,
    mm_pseudo_log_likelihood,
    save_model,
    threshold_occupancies,
)
from kdehmm.serialize import model_from_dict, model_to_dict, series_sha256


def small_hmm(seed=0, n=16):
    rng = np.random.default_rng(seed)
    series = as_series(rng.normal(size=n))
    return hmm_initialize(series, threshold_occupancies(series), order=1)


def test_kde_mm_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    model = KdeMm(as_series(rng.normal(size=12)), 1, 0.7345218491, periodic_extension=True)
    path = tmp_path / "mm.json"
    save_model(model, path)
    back = load_model(path)
    assert isinstance(back, KdeMm)
    assert back.bandwidth == model.bandwidth
    assert back.order == model.order
    assert back.periodic_extension == model.periodic_extension
    assert np.array_equal(back.series.values, model.series.values)
    assert mm_pseudo_log_likelihood(back) == mm_pseudo_log_likelihood(model)


def test_kde_hmm_round_trip_exact_scores(tmp_path):
    model = small_hmm()
    path = tmp_path / "hmm.json"
    save_model(model, path)
    back = load_model(path)
    assert np.array_equal(back.transition, model.transition)
    assert np.array_equal(back.weights, model.weights)
    assert np.array_equal(back.bandwidths, model.bandwidths)
    rng = np.random.default_rng(2)
    seq = rng.normal(size=10)
    assert hmm_score(back, seq) == hmm_score(model, seq)


def test_kde_hmm_sparse_weights_round_trip(tmp_path):
    model = small_hmm(seed=3)
    path = tmp_path / "hmm_sparse.json"
    save_model(model, path, sparse_weights=True)
    payload = json.loads(path.read_text())
    assert "weights_sparse" in payload and "weights" not in payload
    back = load_model(path)
    assert np.array_equal(back.weights, model.weights)


def test_series_ref_round_trip(tmp_path):
    model = small_hmm(seed=4)
    path = tmp_path / "hmm_ref.json"
    save_model(model, path, series_ref="series.txt")
    assert (tmp_path / "series.txt").exists()
    payload = json.loads(path.read_text())
    assert payload["training_series"]["path"] == "series.txt"
    back = load_model(path)
    assert np.array_equal(back.series.values, model.series.values)


def test_series_hash_mismatch(tmp_path):
    model = small_hmm(seed=5)
    path = tmp_path / "hmm_ref.json"
    save_model(model, path, series_ref="series.txt")
    (tmp_path / "series.txt").write_text("1.0\n2.0\n3.0\n4.0\n5.0\n")
    with pytest.raises(DataError, match="hash"):
        load_model(path)


def test_ar_round_trips(tmp_path):
    ar = ArModel(2, np.array([0.4, -0.2]), 0.1, 1.5)
    path = tmp_path / "ar.json"
    save_model(ar, path)
    back = load_model(path)
    assert np.array_equal(back.coefficients, ar.coefficients)
    assert back.intercept == ar.intercept and back.noise_std == ar.noise_std

    arhmm = ArHmm(
        np.array([[0.9, 0.1], [0.3, 0.7]]),
        np.array([0.75, 0.25]),
        (ArModel(1, np.array([0.5]), 0.0, 1.0), ArModel(1, np.array([0.2]), 0.1, 2.0)),
    )
    path2 = tmp_path / "arhmm.json"
    save_model(arhmm, path2)
    back2 = load_model(path2)
    assert np.array_equal(back2.transition, arhmm.transition)
    assert back2.models[1].noise_std == 2.0


def test_unknown_model_type():
    with pytest.raises(DataError):
        model_from_dict({"model_type": "mystery"})


def test_sha256_stable():
    values = np.array([1.0, 2.0, 3.0])
    assert series_sha256(values) == series_sha256(values.copy())
    payload = model_to_dict(KdeMm(as_series(values.repeat(2)), 0, 1.0))
    assert payload["training_series"]["sha256"] == series_sha256(values.repeat(2))
