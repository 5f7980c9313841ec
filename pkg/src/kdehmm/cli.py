"""Command-line front end: train, evaluate, sample, experiment, inspect.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure. Failures print a machine-readable JSON object and, when an output
directory is known, also write it to error.json there.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .baselines import ArHmm, ArModel, ar_fit, ar_hmm_fit, ar_hmm_sample, ar_hmm_score, ar_loglik
from .datasets import (
    SyntheticSpec,
    dequantize,
    generate_synthetic,
    load_series,
    phase_occupancies,
    threshold_occupancies,
    uniform_occupancies,
    write_series,
)
from .errors import ConfigError, DataError, KdehmmError, NumericalFailure, SequenceTooShort
from .experiments import ExperimentConfig, run_experiment
from .hmm import HmmTrainingConfig, KdeHmm, hmm_initialize, hmm_sample, hmm_score, hmm_train
from .markov import KdeMm, MmTrainingConfig, initialize_mm, lag_table, mm_sample, mm_sequence_logpdf, mm_train
from .serialize import load_model, save_model
from .series import TimeSeries


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc


def _resolve_data(data_cfg: dict) -> TimeSeries:
    if not isinstance(data_cfg, dict):
        raise ConfigError("'data' must be an object")
    series = None
    if data_cfg.get("path"):
        series = load_series(
            data_cfg["path"], fmt=data_cfg.get("format", "plain"), column=data_cfg.get("column")
        )
    elif data_cfg.get("synthetic"):
        spec_args = dict(data_cfg["synthetic"])
        try:
            spec = SyntheticSpec(**spec_args)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"synthetic spec: {exc}") from exc
        series, _ = generate_synthetic(spec)
    else:
        raise ConfigError("'data' needs either 'path' or 'synthetic'")
    take = data_cfg.get("take")
    if take is not None:
        if int(take) < 1 or int(take) > len(series):
            raise ConfigError(f"'take' must be in 1..{len(series)}")
        series = TimeSeries(series.values[: int(take)], source=series.source)
    amp = data_cfg.get("dequantize")
    if amp:
        series = dequantize(series, amplitude=float(amp), seed=int(data_cfg.get("dequantize_seed", 0)))
    return series


def _occupancy_guess(name: str, series: TimeSeries, states: int):
    if states == 1 or name == "uniform":
        return uniform_occupancies(len(series), states)
    if name == "threshold":
        if states != 2:
            raise ConfigError("threshold initializer defines exactly 2 states")
        return threshold_occupancies(series)
    if name == "phase":
        return phase_occupancies(series, states)
    raise ConfigError(f"unknown initializer {name!r}")


def cmd_train(args) -> int:
    cfg = _load_json(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    out_dir = cfg.get("out", "run")
    os.makedirs(out_dir, exist_ok=True)
    model_cfg = cfg.get("model")
    if not isinstance(model_cfg, dict) or "type" not in model_cfg:
        raise ConfigError("'model' object with a 'type' field is required")
    mtype = model_cfg["type"]
    series = _resolve_data(cfg.get("data", {}))
    order = int(model_cfg.get("order", 1))
    states = int(model_cfg.get("states", 1))
    max_iterations = int(model_cfg.get("max_iterations", 500))
    relative_tolerance = float(model_cfg.get("relative_tolerance", 1e-6))
    resume = cfg.get("resume_from")

    report = None
    if mtype == "ar":
        model = ar_fit(series, order)
    elif mtype in ("hmm", "ar_hmm"):
        guess = _occupancy_guess(model_cfg.get("initializer", "threshold" if states == 2 else "phase"), series, states)
        model, report = ar_hmm_fit(
            series, states, 0 if mtype == "hmm" else order, guess,
            max_iterations=max_iterations, relative_tolerance=relative_tolerance,
        )
    elif mtype == "kde_mm":
        if resume:
            model0 = load_model(resume)
            if not isinstance(model0, KdeMm):
                raise ConfigError("resume_from does not hold a kde_mm model")
        else:
            model0 = initialize_mm(series, order, periodic_extension=bool(model_cfg.get("periodic_extension", True)))
        train_cfg = MmTrainingConfig(
            mode=model_cfg.get("mode", "exact_gem"),
            max_iterations=max_iterations,
            relative_tolerance=relative_tolerance,
            bandwidth_floor=model_cfg.get("bandwidth_floor"),
        )
        model, report = mm_train(model0, train_cfg)
    elif mtype == "kde_hmm":
        if resume:
            model0 = load_model(resume)
            if not isinstance(model0, KdeHmm):
                raise ConfigError("resume_from does not hold a kde_hmm model")
        else:
            guess = _occupancy_guess(model_cfg.get("initializer", "phase"), series, states)
            model0 = hmm_initialize(series, guess, order)
        try:
            train_cfg = HmmTrainingConfig(
                mode=model_cfg.get("mode", "accelerated"),
                update_weights=model_cfg.get("update_weights"),
                max_iterations=max_iterations,
                relative_tolerance=relative_tolerance,
                bandwidth_floor=model_cfg.get("bandwidth_floor"),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        model, report = hmm_train(model0, train_cfg)
    else:
        raise ConfigError(f"unknown model type {mtype!r}")

    model_path = os.path.join(out_dir, "model.json")
    save_model(model, model_path)
    if report is not None:
        report.write_trace_csv(os.path.join(out_dir, "trace.csv"))
        report_payload = {
            "iterations": report.iterations,
            "converged": report.converged,
            "status": report.status,
            "final_objective": report.final_objective,
            "decreasing_steps": report.decreasing_steps,
            "min_separation": report.min_separation,
            "flags": report.flags,
        }
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            json.dump(report_payload, fh, indent=1)
            fh.write("\n")
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump(cfg, fh, indent=1)
        fh.write("\n")
    print(json.dumps({"model": model_path, "status": report.status if report else "fitted"}))
    return 0


def _score(model, heldout: TimeSeries) -> float:
    if isinstance(model, KdeMm):
        return mm_sequence_logpdf(model, heldout)
    if isinstance(model, KdeHmm):
        return hmm_score(model, heldout)
    if isinstance(model, ArModel):
        return ar_loglik(model, heldout)
    if isinstance(model, ArHmm):
        return ar_hmm_score(model, heldout)
    raise ConfigError(f"cannot score model of type {type(model).__name__}")


def _model_order(model) -> int:
    return model.order


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    heldout = load_series(args.data, fmt=args.format, column=args.column)
    total = _score(model, heldout)
    points = len(heldout) - _model_order(model)
    payload = {"total_log_prob": total, "points": points, "per_sample_log_prob": total / points}
    print(json.dumps(payload))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "evaluate.json"), "w") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
    return 0


def cmd_sample(args) -> int:
    model = load_model(args.model)
    os.makedirs(args.out, exist_ok=True)
    series_path = os.path.join(args.out, "series.txt")
    if isinstance(model, KdeMm):
        rng = np.random.default_rng(args.seed)
        _, ex_table = lag_table(model.series.values, model.order, model.periodic_extension)
        ctx = ex_table[int(rng.integers(ex_table.shape[0])), 1:][::-1]
        burn = 10 * model.order if args.burn_in is None else args.burn_in
        series, picks = mm_sample(model, ctx, args.length + burn, rng)
        series = TimeSeries(series.values[burn:], source=series.source)
        picks = picks[burn:]
        write_series(series_path, series)
        np.savetxt(os.path.join(args.out, "exemplars.txt"), picks, fmt="%d")
    elif isinstance(model, KdeHmm):
        series, states, picks = hmm_sample(model, args.length, args.seed, burn_in=args.burn_in)
        write_series(series_path, series)
        np.savetxt(os.path.join(args.out, "states.txt"), states, fmt="%d")
        np.savetxt(os.path.join(args.out, "exemplars.txt"), picks, fmt="%d")
    elif isinstance(model, (ArModel, ArHmm)):
        if isinstance(model, ArModel):
            model = ArHmm(np.ones((1, 1)), np.ones(1), (model,))
        series, states = ar_hmm_sample(
            model, args.length, args.seed,
            burn_in=100 if args.burn_in is None else args.burn_in,
            return_states=True,
        )
        write_series(series_path, series)
        np.savetxt(os.path.join(args.out, "states.txt"), states, fmt="%d")
    else:
        raise ConfigError(f"cannot sample from {type(model).__name__}")
    print(json.dumps({"series": series_path, "length": args.length}))
    return 0


def cmd_experiment(args) -> int:
    payload = _load_json(args.config)
    if args.seed is not None:
        payload["seed"] = args.seed
    if args.out is not None:
        payload["out_dir"] = args.out
    if args.threads is not None:
        payload["threads"] = args.threads
    if args.profile is not None:
        payload["profile"] = args.profile
    cfg = ExperimentConfig.from_dict(payload)
    paths = run_experiment(cfg)
    print(json.dumps(paths))
    return 0


def cmd_inspect(args) -> int:
    model = load_model(args.model)
    info: dict = {"model_type": type(model).__name__}
    if isinstance(model, KdeMm):
        info.update(
            order=model.order,
            bandwidth=model.bandwidth,
            periodic_extension=model.periodic_extension,
            training_points=len(model.series),
            source=model.series.source,
        )
    elif isinstance(model, KdeHmm):
        info.update(
            order=model.order,
            states=model.states,
            bandwidths=model.bandwidths.tolist(),
            training_points=len(model.series),
            source=model.series.source,
        )
    elif isinstance(model, ArModel):
        info.update(
            order=model.order,
            coefficients=model.coefficients.tolist(),
            intercept=model.intercept,
            noise_std=model.noise_std,
        )
    elif isinstance(model, ArHmm):
        info.update(
            order=model.order,
            states=model.states,
            noise_stds=[m.noise_std for m in model.models],
        )
    print(json.dumps(info, indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kdehmm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from a JSON config")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--out")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="held-out log-probability of a series")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--format", default="plain", choices=["plain", "csv"])
    p_eval.add_argument("--column", default=None)
    p_eval.add_argument("--out")
    p_eval.set_defaults(func=cmd_evaluate)

    p_sample = sub.add_parser("sample", help="generate a new series from a model")
    p_sample.add_argument("--model", required=True)
    p_sample.add_argument("--length", type=int, required=True)
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--burn-in", type=int, default=None, dest="burn_in")
    p_sample.add_argument("--out", required=True)
    p_sample.set_defaults(func=cmd_sample)

    p_exp = sub.add_parser("experiment", help="run an experiment grid")
    p_exp.add_argument("--config", required=True)
    p_exp.add_argument("--seed", type=int)
    p_exp.add_argument("--out")
    p_exp.add_argument("--threads", type=int)
    p_exp.add_argument("--profile", choices=["smoke", "desk", "full"])
    p_exp.set_defaults(func=cmd_experiment)

    p_inspect = sub.add_parser("inspect", help="print a model summary")
    p_inspect.add_argument("--model", required=True)
    p_inspect.set_defaults(func=cmd_inspect)
    return parser


def _error_payload(exc: Exception) -> dict:
    return {"error": type(exc).__name__, "message": str(exc)}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    out_dir = getattr(args, "out", None)
    try:
        return args.func(args)
    except (NumericalFailure, AssertionError, FloatingPointError) as exc:
        code = 4
        err = exc
    except (DataError, SequenceTooShort) as exc:
        code = 3
        err = exc
    except (ConfigError, ValueError) as exc:
        code = 2
        err = exc
    except KdehmmError as exc:
        code = 3
        err = exc
    payload = _error_payload(err)
    print(json.dumps(payload))
    if out_dir:
        try:
            os.makedirs(out_dir, exist_ok=True)
            with open(os.path.join(out_dir, "error.json"), "w") as fh:
                json.dump(payload, fh, indent=1)
                fh.write("\n")
        except OSError:
            pass
    return code


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
