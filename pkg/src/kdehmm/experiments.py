"""Experiment harness: job grids, deterministic seeding, result tables.

Three experiment families are provided: a synthetic convergence study over
training-set sizes, a Markov-order sweep, and a (states x order) grid of
hidden-state models. Jobs are enumerated in a canonical order, seeded
deterministically from the master seed, and may run in a process pool;
result rows are merged in job order regardless of completion order, so a
run is byte-reproducible for a fixed (config, seed).
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .baselines import ar_fit, ar_hmm_fit, ar_hmm_score, ar_loglik
from .datasets import (
    OccupancyGuess,
    SyntheticSpec,
    dequantize,
    generate_synthetic,
    load_series,
    logistic_map_surrogate,
    phase_occupancies,
    threshold_occupancies,
    uniform_occupancies,
)
from .errors import ConfigError
from .hmm import HmmTrainingConfig, hmm_initialize, hmm_score, hmm_state_assignments, hmm_train
from .markov import MmTrainingConfig, initialize_mm, mm_sequence_logpdf, mm_train
from .series import TimeSeries

RESULT_COLUMNS = [
    "experiment",
    "dataset",
    "model_type",
    "p",
    "M",
    "N",
    "replication",
    "heldout_log_prob",
    "heldout_points",
    "per_sample_log_prob",
    "train_seconds",
    "iterations",
    "converged",
    "status",
]

SUMMARY_COLUMNS = [
    "experiment",
    "dataset",
    "model_type",
    "p",
    "M",
    "N",
    "replications",
    "per_sample_median",
    "per_sample_q25",
    "per_sample_q75",
    "mean_train_seconds",
]

_PROFILES = ("smoke", "desk", "full")


@dataclass
class ExperimentConfig:
    """Declarative experiment description; unset fields take profile defaults."""

    experiment: str
    out_dir: str = "results"
    seed: int = 0
    profile: str = "desk"
    threads: int = 1
    replications: int | None = None
    data_sizes: list[int] | None = None
    noise_families: list[str] | None = None
    orders: list[int] | None = None
    states: list[int] | None = None
    train_size: int | None = None
    validation_size: int | None = None
    data_path: str | None = None
    data_format: str = "plain"
    data_column: object = None
    dequantize_amplitude: float | None = 0.5
    max_iterations: int = 500
    relative_tolerance: float = 1e-6
    time_budget_s: float = 7200.0

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            cfg = cls(**payload)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg

    def resolved(self) -> "ExperimentConfig":
        if self.experiment not in ("synthetic_convergence", "markov_order_sweep", "hmm_grid"):
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.profile not in _PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        cfg = replace(self)
        prof = self.profile
        if self.experiment == "synthetic_convergence":
            defaults = {
                "smoke": dict(replications=2, data_sizes=[32, 100], noise_families=["gaussian"], validation_size=200),
                "desk": dict(replications=10, data_sizes=[32, 100, 316, 1000, 3162], noise_families=["gaussian", "bimodal_gmm"], validation_size=1000),
                "full": dict(replications=30, data_sizes=[32, 100, 316, 1000, 3162], noise_families=["gaussian", "bimodal_gmm"], validation_size=1000),
            }[prof]
        elif self.experiment == "markov_order_sweep":
            defaults = {
                "smoke": dict(orders=list(range(0, 3)), train_size=200, validation_size=200, replications=1),
                "desk": dict(orders=list(range(0, 11)), train_size=1000, validation_size=1000, replications=1),
                "full": dict(orders=list(range(0, 11)), train_size=3000, validation_size=3000, replications=1),
            }[prof]
        else:  # hmm_grid
            defaults = {
                "smoke": dict(orders=[0, 1], states=[1, 2], train_size=300, validation_size=300, replications=1),
                "desk": dict(orders=[0, 1, 2], states=list(range(1, 9)), train_size=1000, validation_size=1000, replications=1),
                "full": dict(orders=[0, 1, 2, 3], states=list(range(1, 16)), train_size=3000, validation_size=3000, replications=1),
            }[prof]
        for key, value in defaults.items():
            if getattr(cfg, key) is None:
                cfg = replace(cfg, **{key: value})
        for listfield in ("data_sizes", "noise_families", "orders", "states"):
            val = getattr(cfg, listfield)
            if val is not None and len(val) == 0:
                raise ConfigError(f"{listfield} must be non-empty")
        if cfg.replications is not None and cfg.replications < 1:
            raise ConfigError("replications must be >= 1")
        return cfg


@dataclass(frozen=True)
class Job:
    """One (cell, replication) unit of work; fully self-describing."""

    index: int
    experiment: str
    dataset: str
    model_type: str
    order: int
    states: int
    train_size: int
    validation_size: int
    replication: int
    train_seed: int
    val_seed: int
    noise_family: str | None = None
    data_path: str | None = None
    data_format: str = "plain"
    data_column: object = None
    dequantize_amplitude: float | None = None
    max_iterations: int = 500
    relative_tolerance: float = 1e-6
    time_budget_s: float = 7200.0


def derive_seeds(master_seed: int, key_index: int, count: int) -> list[int]:
    """Deterministic child seeds for job ``key_index`` under a master seed."""
    return [int(s) for s in np.random.SeedSequence([int(master_seed), int(key_index)]).generate_state(count)]


def _real_or_surrogate(job: Job) -> TimeSeries:
    total = job.train_size + job.validation_size
    if job.data_path:
        series = load_series(job.data_path, fmt=job.data_format, column=job.data_column)
        if len(series) < total:
            raise ConfigError(
                f"data file has {len(series)} points; need {total} for train+validation"
            )
        series = TimeSeries(series.values[:total], source=series.source)
    else:
        series = logistic_map_surrogate(total, seed=job.train_seed)
    if job.dequantize_amplitude:
        series = dequantize(series, amplitude=job.dequantize_amplitude, seed=job.val_seed)
    return series


def _job_data(job: Job) -> tuple[TimeSeries, TimeSeries]:
    """Training and validation series for a job (never overlapping)."""
    if job.experiment == "synthetic_convergence":
        spec = SyntheticSpec(length=job.train_size, seed=job.train_seed, noise_family=job.noise_family)
        train, _ = generate_synthetic(spec)
        vspec = SyntheticSpec(length=job.validation_size, seed=job.val_seed, noise_family=job.noise_family)
        val, _ = generate_synthetic(vspec)
        return train, val
    series = _real_or_surrogate(job)
    train = TimeSeries(series.values[: job.train_size], source=series.source)
    val = TimeSeries(series.values[job.train_size : job.train_size + job.validation_size], source=series.source)
    return train, val


def _occupancies(job: Job, train: TimeSeries) -> OccupancyGuess:
    if job.states == 1:
        return uniform_occupancies(len(train), 1)
    if job.experiment == "synthetic_convergence":
        return threshold_occupancies(train)
    return phase_occupancies(train, job.states)


def run_job(job: Job) -> dict:
    """Train one model, score the held-out set, return a result row."""
    row = {
        "experiment": job.experiment,
        "dataset": job.dataset,
        "model_type": job.model_type,
        "p": job.order,
        "M": job.states,
        "N": job.train_size,
        "replication": job.replication,
        "heldout_log_prob": np.nan,
        "heldout_points": 0,
        "per_sample_log_prob": np.nan,
        "train_seconds": 0.0,
        "iterations": 0,
        "converged": False,
        "status": "error",
    }
    started = time.perf_counter()
    try:
        train, val = _job_data(job)
        points = len(val) - job.order
        if job.model_type == "ar":
            model = ar_fit(train, job.order)
            total = ar_loglik(model, val)
            row.update(iterations=0, converged=True, status="converged")
        elif job.model_type in ("hmm", "ar_hmm"):
            guess = _occupancies(job, train)
            model, rep = ar_hmm_fit(
                train,
                job.states,
                job.order,
                guess,
                max_iterations=job.max_iterations,
                relative_tolerance=job.relative_tolerance,
                time_budget_s=job.time_budget_s,
            )
            total = ar_hmm_score(model, val)
            row.update(iterations=rep.iterations, converged=rep.converged, status=rep.status)
        elif job.model_type == "kde_mm":
            model0 = initialize_mm(train, job.order)
            model, rep = mm_train(
                model0,
                MmTrainingConfig(
                    mode="scalar_numeric",
                    max_iterations=job.max_iterations,
                    relative_tolerance=job.relative_tolerance,
                    time_budget_s=job.time_budget_s,
                ),
            )
            total = mm_sequence_logpdf(model, val)
            row.update(iterations=rep.iterations, converged=rep.converged, status=rep.status)
        elif job.model_type == "kde_hmm":
            guess = _occupancies(job, train)
            model0 = hmm_initialize(train, guess, job.order)
            model, rep = hmm_train(
                model0,
                HmmTrainingConfig(
                    mode="accelerated",
                    max_iterations=job.max_iterations,
                    relative_tolerance=job.relative_tolerance,
                    time_budget_s=job.time_budget_s,
                ),
            )
            total = hmm_score(model, val)
            row.update(iterations=rep.iterations, converged=rep.converged, status=rep.status)
        else:
            raise ConfigError(f"unknown model type {job.model_type!r}")
        row.update(
            heldout_log_prob=float(total),
            heldout_points=points,
            per_sample_log_prob=float(total) / points,
        )
    except Exception as exc:  # per-cell failures must not abort the sweep
        row["status"] = f"error:{type(exc).__name__}"
        row["converged"] = False
    row["train_seconds"] = time.perf_counter() - started
    return row


def build_jobs(cfg: ExperimentConfig) -> list[Job]:
    """Canonical job enumeration for a resolved config."""
    jobs: list[Job] = []
    common = dict(
        max_iterations=cfg.max_iterations,
        relative_tolerance=cfg.relative_tolerance,
        time_budget_s=cfg.time_budget_s,
        data_path=cfg.data_path,
        data_format=cfg.data_format,
        data_column=cfg.data_column,
    )
    if cfg.experiment == "synthetic_convergence":
        models = [("ar", 1, 1), ("hmm", 0, 2), ("ar_hmm", 1, 2), ("kde_mm", 1, 1), ("kde_hmm", 1, 2)]
        cell = 0
        for family in cfg.noise_families:
            for size in cfg.data_sizes:
                for rep in range(cfg.replications):
                    train_seed, val_seed = derive_seeds(cfg.seed, cell, 2)
                    cell += 1
                    for model_type, order, states in models:
                        jobs.append(
                            Job(
                                index=len(jobs),
                                experiment=cfg.experiment,
                                dataset=f"synthetic_{family}",
                                model_type=model_type,
                                order=order,
                                states=states,
                                train_size=size,
                                validation_size=cfg.validation_size,
                                replication=rep,
                                train_seed=train_seed,
                                val_seed=val_seed,
                                noise_family=family,
                                **{k: v for k, v in common.items() if k not in ("data_path", "data_format", "data_column")},
                            )
                        )
        return jobs

    dataset = os.path.basename(cfg.data_path) if cfg.data_path else "logistic_surrogate"
    train_seed, val_seed = derive_seeds(cfg.seed, 0, 2)
    if cfg.experiment == "markov_order_sweep":
        for order in cfg.orders:
            for model_type, states in (("ar", 1), ("kde_mm", 1), ("kde_hmm", 1)):
                jobs.append(
                    Job(
                        index=len(jobs),
                        experiment=cfg.experiment,
                        dataset=dataset,
                        model_type=model_type,
                        order=order,
                        states=states,
                        train_size=cfg.train_size,
                        validation_size=cfg.validation_size,
                        replication=0,
                        train_seed=train_seed,
                        val_seed=val_seed,
                        dequantize_amplitude=cfg.dequantize_amplitude,
                        **common,
                    )
                )
        return jobs

    # hmm_grid
    for order in cfg.orders:
        for states in cfg.states:
            for model_type in ("ar_hmm", "kde_hmm"):
                jobs.append(
                    Job(
                        index=len(jobs),
                        experiment=cfg.experiment,
                        dataset=dataset,
                        model_type=model_type,
                        order=order,
                        states=states,
                        train_size=cfg.train_size,
                        validation_size=cfg.validation_size,
                        replication=0,
                        train_seed=train_seed,
                        val_seed=val_seed,
                        dequantize_amplitude=cfg.dequantize_amplitude,
                        **common,
                    )
                )
    return jobs


def _format_cell(value) -> str:
    if isinstance(value, float):
        if not np.isfinite(value):
            return ""
        return repr(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def write_rows_csv(path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row.get(col)) for col in columns])


def summarize(rows: list[dict]) -> list[dict]:
    """Per-cell quantile summary over replications, in first-seen cell order."""
    cells: dict[tuple, list[dict]] = {}
    order: list[tuple] = []
    for row in rows:
        key = (row["experiment"], row["dataset"], row["model_type"], row["p"], row["M"], row["N"])
        if key not in cells:
            cells[key] = []
            order.append(key)
        cells[key].append(row)
    out = []
    for key in order:
        group = cells[key]
        vals = [r["per_sample_log_prob"] for r in group if np.isfinite(r["per_sample_log_prob"])]
        med, q25, q75 = (np.nan, np.nan, np.nan)
        if vals:
            med = float(np.median(vals))
            q25 = float(np.quantile(vals, 0.25))
            q75 = float(np.quantile(vals, 0.75))
        out.append(
            {
                "experiment": key[0],
                "dataset": key[1],
                "model_type": key[2],
                "p": key[3],
                "M": key[4],
                "N": key[5],
                "replications": len(group),
                "per_sample_median": med,
                "per_sample_q25": q25,
                "per_sample_q75": q75,
                "mean_train_seconds": float(np.mean([r["train_seconds"] for r in group])),
            }
        )
    return out


def _write_scatter(path, cfg: ExperimentConfig, rows: list[dict]) -> None:
    """State-assignment scatter export for the best held-out KDE-HMM cell.

    Columns: position, previous value, value, assigned state, and that
    state's per-lag bandwidths. The winning cell is retrained
    deterministically from its job description.
    """
    best = None
    for row in rows:
        if row["model_type"] != "kde_hmm" or not np.isfinite(row["per_sample_log_prob"]):
            continue
        if best is None or row["per_sample_log_prob"] > best["per_sample_log_prob"]:
            best = row
    if best is None:
        return
    jobs = [j for j in build_jobs(cfg) if j.model_type == "kde_hmm" and j.order == best["p"] and j.states == best["M"]]
    job = jobs[0]
    train, _ = _job_data(job)
    guess = _occupancies(job, train)
    model0 = hmm_initialize(train, guess, job.order)
    model, _ = hmm_train(
        model0,
        HmmTrainingConfig(
            mode="accelerated",
            max_iterations=job.max_iterations,
            relative_tolerance=job.relative_tolerance,
            time_budget_s=job.time_budget_s,
        ),
    )
    labels = hmm_state_assignments(model, train)
    values = train.values
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["t", "y_prev", "y", "state"] + [f"h_{l}" for l in range(model.order + 1)]
        writer.writerow(header)
        for i, label in enumerate(labels):
            t = i + model.order
            if t < 1:
                continue
            bw = model.bandwidths[label]
            writer.writerow(
                [t, repr(float(values[t - 1])), repr(float(values[t])), int(label)]
                + [repr(float(b)) for b in bw]
            )


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run all jobs and write results.csv, summary.csv, and the config sidecar."""
    cfg = cfg.resolved()
    os.makedirs(cfg.out_dir, exist_ok=True)
    jobs = build_jobs(cfg)
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            rows = list(pool.map(run_job, jobs, chunksize=1))
    else:
        rows = [run_job(job) for job in jobs]

    results_path = os.path.join(cfg.out_dir, "results.csv")
    summary_path = os.path.join(cfg.out_dir, "summary.csv")
    config_path = os.path.join(cfg.out_dir, "config.json")
    write_rows_csv(results_path, rows, RESULT_COLUMNS)
    write_rows_csv(summary_path, summarize(rows), SUMMARY_COLUMNS)
    sidecar = asdict(cfg)
    with open(config_path, "w") as fh:
        json.dump(sidecar, fh, indent=1, default=str)
        fh.write("\n")
    paths = {"results": results_path, "summary": summary_path, "config": config_path}
    if cfg.experiment == "hmm_grid":
        scatter_path = os.path.join(cfg.out_dir, "scatter.csv")
        _write_scatter(scatter_path, cfg, rows)
        if os.path.exists(scatter_path):
            paths["scatter"] = scatter_path
    return paths
