"""Self-describing JSON serialization for all model types.

Training series are stored inline by default; passing ``series_ref`` writes
the values to a plain-text side file instead and records its path plus a
content hash, so several models can share one stored series.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .baselines import ArHmm, ArModel
from .datasets import load_series, write_series
from .errors import DataError
from .hmm import KdeHmm
from .kernels import Kernel
from .markov import KdeMm
from .series import TimeSeries


def series_sha256(values: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(values, dtype="<f8").tobytes()).hexdigest()


def _series_payload(series: TimeSeries, series_ref: str | None, base_dir: str) -> dict:
    digest = series_sha256(series.values)
    if series_ref is None:
        return {"values": series.values.tolist(), "source": series.source, "sha256": digest}
    write_series(os.path.join(base_dir, series_ref), series, fmt="plain")
    return {"path": series_ref, "source": series.source, "sha256": digest}


def _series_from_payload(payload: dict, base_dir: str) -> TimeSeries:
    if "values" in payload:
        series = TimeSeries(np.asarray(payload["values"], dtype=np.float64), source=payload.get("source"))
    elif "path" in payload:
        loaded = load_series(os.path.join(base_dir, payload["path"]), fmt="plain")
        series = TimeSeries(loaded.values, source=payload.get("source") or loaded.source)
    else:
        raise DataError("training series payload needs 'values' or 'path'")
    expected = payload.get("sha256")
    if expected is not None and series_sha256(series.values) != expected:
        raise DataError("training series content hash mismatch")
    return series


def model_to_dict(model, series_ref: str | None = None, base_dir: str = ".", sparse_weights: bool = False) -> dict:
    if isinstance(model, KdeMm):
        return {
            "model_type": "kde_mm",
            "order": model.order,
            "bandwidth": float(model.bandwidth),
            "periodic_extension": bool(model.periodic_extension),
            "kernel": model.kernel.value,
            "training_series": _series_payload(model.series, series_ref, base_dir),
        }
    if isinstance(model, KdeHmm):
        out = {
            "model_type": "kde_hmm",
            "order": model.order,
            "states": model.states,
            "transition": model.transition.tolist(),
            "stationary": model.stationary.tolist(),
            "bandwidths": model.bandwidths.tolist(),
            "kernel": model.kernel.value,
            "training_series": _series_payload(model.series, series_ref, base_dir),
        }
        if sparse_weights:
            out["weights_sparse"] = [
                [[int(n), float(v)] for n, v in zip(np.flatnonzero(row), row[row != 0])]
                for row in model.weights
            ]
            out["weights_length"] = model.weights.shape[1]
        else:
            out["weights"] = model.weights.tolist()
        return out
    if isinstance(model, ArModel):
        return {
            "model_type": "ar",
            "order": model.order,
            "coefficients": model.coefficients.tolist(),
            "intercept": float(model.intercept),
            "noise_std": float(model.noise_std),
        }
    if isinstance(model, ArHmm):
        return {
            "model_type": "ar_hmm",
            "order": model.order,
            "states": model.states,
            "transition": model.transition.tolist(),
            "stationary": model.stationary.tolist(),
            "models": [model_to_dict(mod) for mod in model.models],
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(payload: dict, base_dir: str = "."):
    kind = payload.get("model_type")
    if kind == "kde_mm":
        return KdeMm(
            series=_series_from_payload(payload["training_series"], base_dir),
            order=int(payload["order"]),
            bandwidth=float(payload["bandwidth"]),
            periodic_extension=bool(payload["periodic_extension"]),
            kernel=Kernel(payload.get("kernel", "gaussian")),
        )
    if kind == "kde_hmm":
        series = _series_from_payload(payload["training_series"], base_dir)
        if "weights" in payload:
            weights = np.asarray(payload["weights"], dtype=np.float64)
        else:
            ne = int(payload["weights_length"])
            weights = np.zeros((int(payload["states"]), ne))
            for q, row in enumerate(payload["weights_sparse"]):
                for n, v in row:
                    weights[q, int(n)] = float(v)
        return KdeHmm(
            series=series,
            order=int(payload["order"]),
            transition=np.asarray(payload["transition"], dtype=np.float64),
            stationary=np.asarray(payload["stationary"], dtype=np.float64),
            weights=weights,
            bandwidths=np.asarray(payload["bandwidths"], dtype=np.float64),
            kernel=Kernel(payload.get("kernel", "gaussian")),
        )
    if kind == "ar":
        return ArModel(
            order=int(payload["order"]),
            coefficients=np.asarray(payload["coefficients"], dtype=np.float64),
            intercept=float(payload["intercept"]),
            noise_std=float(payload["noise_std"]),
        )
    if kind == "ar_hmm":
        return ArHmm(
            transition=np.asarray(payload["transition"], dtype=np.float64),
            stationary=np.asarray(payload["stationary"], dtype=np.float64),
            models=tuple(model_from_dict(mod) for mod in payload["models"]),
        )
    raise DataError(f"unknown model_type {kind!r}")


def save_model(model, path, series_ref: str | None = None, sparse_weights: bool = False) -> None:
    path = str(path)
    base_dir = os.path.dirname(os.path.abspath(path))
    payload = model_to_dict(model, series_ref=series_ref, base_dir=base_dir, sparse_weights=sparse_weights)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_model(path):
    path = str(path)
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc
    return model_from_dict(payload, base_dir=os.path.dirname(os.path.abspath(path)))
