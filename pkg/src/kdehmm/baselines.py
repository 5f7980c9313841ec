"""Parametric comparison models: linear Gaussian AR and Gaussian AR-HMMs.

An AR-HMM with order 0 is an ordinary Gaussian-output HMM; with one state it
collapses to a plain AR model. Fitting uses exact least squares (AR) and EM
with occupancy-weighted least squares per state (AR-HMM).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure, RankDeficient, SequenceTooShort
from .kernels import LOG_2PI
from .markov import lag_table
from .numerics import (
    forward_log_likelihood,
    scaled_forward_backward,
    stationary_distribution,
    transition_from_cooccurrence,
)
from .report import TrainingReport
from .series import TimeSeries, as_series

_NOISE_VAR_FLOOR = 1e-10


@dataclass(frozen=True)
class ArModel:
    """Linear Gaussian autoregression x_t = intercept + sum_l a_l x_{t-l} + noise."""

    order: int
    coefficients: np.ndarray  # (p,), entry l-1 multiplies lag l
    intercept: float
    noise_std: float

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=np.float64).reshape(-1)
        if c.shape[0] != self.order:
            raise ValueError("coefficient count must equal the order")
        if not (self.noise_std > 0):
            raise ValueError("noise_std must be positive")
        object.__setattr__(self, "coefficients", c)


@dataclass(frozen=True)
class ArHmm:
    """HMM whose state-conditional outputs are linear Gaussian AR models."""

    transition: np.ndarray
    stationary: np.ndarray
    models: tuple[ArModel, ...]

    def __post_init__(self):
        a = np.asarray(self.transition, dtype=np.float64)
        pi = np.asarray(self.stationary, dtype=np.float64)
        models = tuple(self.models)
        m = a.shape[0]
        if a.shape != (m, m) or np.any(a < 0) or np.max(np.abs(a.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("transition must be row-stochastic")
        if pi.shape != (m,) or abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError("stationary vector must sum to 1")
        if len(models) != m:
            raise ValueError("need one AR model per state")
        if len({mod.order for mod in models}) != 1:
            raise ValueError("all states must share one order")
        object.__setattr__(self, "transition", a)
        object.__setattr__(self, "stationary", pi)
        object.__setattr__(self, "models", models)

    @property
    def states(self) -> int:
        return self.transition.shape[0]

    @property
    def order(self) -> int:
        return self.models[0].order


def _design(tgt_table: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a lag table into regression design [1, lags] and targets."""
    t_total = tgt_table.shape[0]
    design = np.empty((t_total, tgt_table.shape[1]))
    design[:, 0] = 1.0
    design[:, 1:] = tgt_table[:, 1:]
    return design, tgt_table[:, 0]


def ar_fit(series, order: int) -> ArModel:
    """Exact maximum-likelihood (least-squares) AR fit.

    Raises RankDeficient when the normal equations are singular, e.g. on a
    constant series with order >= 1.
    """
    values = as_series(series).values
    if len(values) <= order + 1:
        raise SequenceTooShort("series too short for the requested order")
    _, tgt_table = lag_table(values, order, periodic=False)
    design, target = _design(tgt_table)
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < order + 1:
        raise RankDeficient(f"design matrix rank {rank} < {order + 1}")
    residuals = target - design @ coef
    noise_var = max(float(np.mean(residuals**2)), _NOISE_VAR_FLOOR)
    return ArModel(order, coef[1:], float(coef[0]), float(np.sqrt(noise_var)))


def _ar_log_emissions(models: tuple[ArModel, ...], tgt_table: np.ndarray) -> np.ndarray:
    design, target = _design(tgt_table)
    out = np.empty((len(models), tgt_table.shape[0]))
    for q, mod in enumerate(models):
        mean = design @ np.concatenate(([mod.intercept], mod.coefficients))
        z = (target - mean) / mod.noise_std
        out[q] = -0.5 * z * z - np.log(mod.noise_std) - 0.5 * LOG_2PI
    return out


def ar_loglik(model: ArModel, series) -> float:
    """Conditional log-likelihood of a series (first ``order`` points condition)."""
    values = as_series(series).values
    if len(values) <= model.order:
        raise SequenceTooShort("series too short for the model order")
    _, tgt_table = lag_table(values, model.order, periodic=False)
    return float(_ar_log_emissions((model,), tgt_table)[0].sum())


def ar_hmm_fit(
    series,
    states: int,
    order: int,
    occupancy_guess,
    max_iterations: int = 500,
    relative_tolerance: float = 1e-6,
    time_budget_s: float | None = None,
) -> tuple[ArHmm, TrainingReport]:
    """EM fit of a Gaussian AR-HMM from an initial occupancy guess.

    The M-step solves occupancy-weighted least squares per state; a starved
    state keeps its parameters and is flagged. Noise variances are floored
    against spike collapse.
    """
    values = as_series(series).values
    if len(values) <= order + 1:
        raise SequenceTooShort("series too short for the requested order")
    gamma_hat = np.asarray(getattr(occupancy_guess, "gamma_hat", occupancy_guess), dtype=np.float64)
    if gamma_hat.shape != (states, len(values)):
        raise ValueError(f"occupancy guess must have shape ({states}, {len(values)})")
    _, tgt_table = lag_table(values, order, periodic=False)
    design, target = _design(tgt_table)
    t_total = target.shape[0]

    pooled = ar_fit(values, order)
    transition = transition_from_cooccurrence(gamma_hat)
    models = []
    residuals = target - design @ np.concatenate(([pooled.intercept], pooled.coefficients))
    for q in range(states):
        w = gamma_hat[q, order:]
        mass = w.sum()
        var = float(np.sum(w * residuals**2) / mass) if mass > 0 else pooled.noise_std**2
        var = max(var, _NOISE_VAR_FLOOR)
        models.append(ArModel(order, pooled.coefficients, pooled.intercept, float(np.sqrt(var))))
    current = ArHmm(transition, stationary_distribution(transition), tuple(models))

    report = TrainingReport()
    started = time.perf_counter()
    deadline = None if time_budget_s is None else started + time_budget_s
    report.status = "max_iterations"
    for i in range(max_iterations):
        if deadline is not None and time.perf_counter() > deadline:
            report.status = "timeout"
            break
        log_b = _ar_log_emissions(current.models, tgt_table)
        fb = scaled_forward_backward(log_b, current.transition, current.stationary)
        if not np.isfinite(fb.log_likelihood):
            raise NumericalFailure("log-likelihood is not finite", index=i)
        report.objective_trace.append(fb.log_likelihood)
        if i > 0:
            prev = report.objective_trace[-2]
            if abs(fb.log_likelihood - prev) < relative_tolerance * abs(prev):
                report.status = "converged"
                report.converged = True
                break

        row_mass = fb.xi_sum.sum(axis=1)
        new_a = current.transition.copy()
        ok = row_mass > 1e-12 * max(t_total - 1, 1)
        new_a[ok] = fb.xi_sum[ok] / row_mass[ok, None]
        new_a /= new_a.sum(axis=1, keepdims=True)
        new_models = []
        for q in range(states):
            w = fb.gamma[q]
            mass = w.sum()
            if mass <= 1e-12 * t_total:
                flag = f"starved_state_{q}"
                if flag not in report.flags:
                    report.flags.append(flag)
                new_models.append(current.models[q])
                continue
            sw = np.sqrt(w)
            coef, _, rank, _ = np.linalg.lstsq(design * sw[:, None], target * sw, rcond=None)
            if rank < order + 1:
                flag = f"rank_deficient_state_{q}"
                if flag not in report.flags:
                    report.flags.append(flag)
                new_models.append(current.models[q])
                continue
            res = target - design @ coef
            var = max(float(np.sum(w * res**2) / mass), _NOISE_VAR_FLOOR)
            new_models.append(ArModel(order, coef[1:], float(coef[0]), float(np.sqrt(var))))
        current = ArHmm(new_a, stationary_distribution(new_a), tuple(new_models))
        report.iterations = i + 1
    log_b = _ar_log_emissions(current.models, tgt_table)
    report.final_objective = forward_log_likelihood(log_b, current.transition, current.stationary)
    report.train_seconds = time.perf_counter() - started
    return current, report


def ar_hmm_score(model: ArHmm, heldout) -> float:
    """Forward-algorithm log-probability; first ``order`` points condition only."""
    values = as_series(heldout).values
    if len(values) <= model.order:
        raise SequenceTooShort("held-out series too short for the model order")
    _, tgt_table = lag_table(values, model.order, periodic=False)
    log_b = _ar_log_emissions(model.models, tgt_table)
    return forward_log_likelihood(log_b, model.transition, model.stationary)


def ar_hmm_sample(
    model: ArHmm,
    length: int,
    rng_seed,
    burn_in: int = 100,
    return_states: bool = False,
):
    """Ancestral sampling; the context starts at zero and burn-in is discarded."""
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    p = model.order

    def draw(probabilities):
        cum = np.cumsum(probabilities)
        cum /= cum[-1]
        return int(np.searchsorted(cum, rng.random(), side="left"))

    ctx = np.zeros(p)  # ctx[l-1] holds the lag-l value
    state = draw(model.stationary)
    total = burn_in + length
    out = np.empty(length)
    states = np.empty(length, dtype=np.int64)
    for t in range(total):
        mod = model.models[state]
        x = mod.intercept + float(mod.coefficients @ ctx) + mod.noise_std * rng.standard_normal()
        if t >= burn_in:
            out[t - burn_in] = x
            states[t - burn_in] = state
        if p > 0:
            ctx = np.concatenate(([x], ctx[:-1]))
        state = draw(model.transition[state])
    series = TimeSeries(out, source="ar_hmm sample")
    return (series, states) if return_states else series
