"""Kernel-density Markov models of scalar time series.

The next-step conditional density is a ratio of kernel sums over training
exemplars with a single shared bandwidth. Contexts are passed in time order
(oldest first, most recent last). All densities are computed in the log
domain with log-sum-exp.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateSample, NumericalFailure, SequenceTooShort
from .kernels import LOG_2PI, Kernel, reference_rule_bandwidth
from .numerics import bound_gain, golden_section_maximize, iter_blocks, row_softmax_lse
from .report import TrainingReport
from .series import TimeSeries, as_series

_BLOCK = 512


@dataclass(frozen=True)
class KdeMm:
    """Markov model whose next-step distribution is a conditional KDE.

    Parameters
    ----------
    series : TimeSeries
        Training data y_1..y_N; the model keeps a reference to it.
    order : int
        Markov order p >= 0.
    bandwidth : float
        Single positive kernel scale shared by all lags.
    periodic_extension : bool
        When True, exemplar and training-target indices wrap cyclically, so
        the implied process is exactly stationary. Defaults on.
    """

    series: TimeSeries
    order: int
    bandwidth: float
    periodic_extension: bool = True
    kernel: Kernel = Kernel.GAUSSIAN

    def __post_init__(self):
        object.__setattr__(self, "series", as_series(self.series))
        if self.order < 0:
            raise ValueError("order must be non-negative")
        if len(self.series) <= self.order + 1:
            raise ValueError("training series must be longer than order + 1")
        if not (self.bandwidth > 0):
            raise ValueError("bandwidth must be positive")


@dataclass(frozen=True)
class MmTrainingConfig:
    mode: str = "exact_gem"  # exact_gem | relaxed_gem | scalar_numeric
    max_iterations: int = 500
    relative_tolerance: float = 1e-6
    bandwidth_floor: float | None = None  # default: 1e-6 * sample std
    time_budget_s: float | None = None

    def __post_init__(self):
        if self.mode not in ("exact_gem", "relaxed_gem", "scalar_numeric"):
            raise ValueError(f"unknown training mode {self.mode!r}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not (self.relative_tolerance >= 0):
            raise ValueError("relative_tolerance must be >= 0")


def lag_table(values: np.ndarray, order: int, periodic: bool) -> tuple[np.ndarray, np.ndarray]:
    """Index list and lag matrix for a series.

    Returns (idx, table) where idx are the 0-based positions with a full
    context (all positions when periodic) and table[i, l] = values[idx[i]-l],
    wrapping negative indices cyclically when periodic.
    """
    n = len(values)
    if periodic:
        idx = np.arange(n)
    else:
        idx = np.arange(order, n)
    table = np.empty((idx.size, order + 1))
    for lag in range(order + 1):
        table[:, lag] = values[(idx - lag) % n] if periodic else values[idx - lag]
    return idx, table


def context_to_lags(context) -> np.ndarray:
    """Reverse a chronological context so column l-1 holds the lag-l value."""
    ctx = np.asarray(context, dtype=np.float64)
    if ctx.ndim != 1:
        raise ValueError("context must be a 1-D array")
    return ctx[::-1]


def min_separation(values: np.ndarray) -> float:
    """Smallest |y_t - y_n| over distinct pairs (0 when duplicates exist)."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size < 2:
        return np.inf
    return float(np.min(np.diff(v)))


def _ratio_terms(ex_table, tgt_table, h, cross_validate, block=_BLOCK):
    """Per-target log ratio lse(joint) - lse(context) for a KDE-MM.

    With ``cross_validate`` the exemplar whose position matches the target is
    removed from both sums; this requires aligned exemplar/target index lists.
    """
    inv2 = 0.5 / (h * h)
    order = ex_table.shape[1] - 1
    t_total = tgt_table.shape[0]
    out = np.empty(t_total)
    for start, stop in iter_blocks(t_total, block):
        blk = tgt_table[start:stop]
        s_ctx = np.zeros((blk.shape[0], ex_table.shape[0]))
        for lag in range(1, order + 1):
            diff = blk[:, lag][:, None] - ex_table[:, lag][None, :]
            s_ctx -= inv2 * diff * diff
        if cross_validate:
            rows = np.arange(start, stop)
            s_ctx[rows - start, rows] = -np.inf
        d0 = blk[:, 0][:, None] - ex_table[:, 0][None, :]
        s_joint = s_ctx - inv2 * d0 * d0
        _, lse_ctx = row_softmax_lse(s_ctx)
        _, lse_joint = row_softmax_lse(s_joint)
        out[start:stop] = lse_joint - lse_ctx
    return out


def mm_next_step_logpdf(model: KdeMm, context, x):
    """Log next-step conditional density at ``x`` given a chronological context.

    ``x`` may be a scalar or a 1-D array of evaluation points. For order 0
    this reduces to the log of a plain KDE over the exemplar values.
    """
    ctx = context_to_lags(context)
    if ctx.size != model.order:
        raise ValueError(f"context must have exactly {model.order} values")
    _, ex_table = lag_table(model.series.values, model.order, model.periodic_extension)
    h = model.bandwidth
    inv2 = 0.5 / (h * h)
    s_ctx = np.zeros(ex_table.shape[0])
    for lag in range(1, model.order + 1):
        diff = ctx[lag - 1] - ex_table[:, lag]
        s_ctx -= inv2 * diff * diff
    x_arr = np.asarray(x, dtype=np.float64)
    scalar = x_arr.ndim == 0
    pts = np.atleast_1d(x_arr)
    d0 = pts[:, None] - ex_table[:, 0][None, :]
    s_joint = s_ctx[None, :] - inv2 * d0 * d0
    _, lse_ctx = row_softmax_lse(s_ctx[None, :])
    _, lse_joint = row_softmax_lse(s_joint)
    out = lse_joint - lse_ctx[0] - np.log(h) - 0.5 * LOG_2PI
    return float(out[0]) if scalar else out


def mm_sequence_logpdf(model: KdeMm, sequence, periodic: bool = False) -> float:
    """Log density of a sequence under the model.

    Held-out semantics by default: the first ``order`` points only condition
    and are not scored, so the result is the sum of next-step log densities
    over t = order+1..T. With ``periodic=True`` the scored sequence itself is
    wrapped cyclically and all T points are scored (any T >= 1).
    """
    seq = as_series(sequence).values
    if not periodic and len(seq) <= model.order:
        raise SequenceTooShort(
            f"sequence of length {len(seq)} cannot be scored with order {model.order}"
        )
    _, ex_table = lag_table(model.series.values, model.order, model.periodic_extension)
    _, tgt_table = lag_table(seq, model.order, periodic)
    terms = _ratio_terms(ex_table, tgt_table, model.bandwidth, cross_validate=False)
    return float(terms.sum() - terms.size * (np.log(model.bandwidth) + 0.5 * LOG_2PI))


def mm_pseudo_log_likelihood(model: KdeMm, bandwidth: float | None = None) -> float:
    """Leave-one-out pseudo-log-likelihood of the training series.

    Each training point is scored with its own exemplar removed from both the
    joint and the context sums. Targets wrap cyclically when the model uses
    the periodic extension; otherwise the first ``order`` points are skipped.
    """
    h = model.bandwidth if bandwidth is None else float(bandwidth)
    values = model.series.values
    _, ex_table = lag_table(values, model.order, model.periodic_extension)
    _, tgt_table = lag_table(values, model.order, model.periodic_extension)
    terms = _ratio_terms(ex_table, tgt_table, h, cross_validate=True)
    return float(terms.sum() - terms.size * (np.log(h) + 0.5 * LOG_2PI))


def mm_sample(model: KdeMm, seed_context, length: int, rng_seed) -> tuple[TimeSeries, np.ndarray]:
    """Generate ``length`` new points from the model.

    Each step draws an exemplar index from the context-dependent weights and
    emits that exemplar's value plus bandwidth-scaled kernel noise. Returns
    the generated series and the trace of chosen exemplar positions (0-based
    indices into the training series). Deterministic for an integer seed.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    ctx = context_to_lags(seed_context)
    if ctx.size != model.order:
        raise ValueError(f"seed context must have exactly {model.order} values")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    ex_idx, ex_table = lag_table(model.series.values, model.order, model.periodic_extension)
    h = model.bandwidth
    inv2 = 0.5 / (h * h)
    out = np.empty(length)
    picks = np.empty(length, dtype=np.int64)
    for t in range(length):
        scores = np.zeros(ex_table.shape[0])
        for lag in range(1, model.order + 1):
            diff = ctx[lag - 1] - ex_table[:, lag]
            scores -= inv2 * diff * diff
        weights, _ = row_softmax_lse(scores[None, :])
        cum = np.cumsum(weights[0])
        cum /= cum[-1]
        z = int(np.searchsorted(cum, rng.random(), side="left"))
        x = ex_table[z, 0] + h * rng.standard_normal()
        out[t] = x
        picks[t] = ex_idx[z]
        if model.order > 0:
            ctx = np.concatenate(([x], ctx[:-1]))
    return TimeSeries(out, source="kde_mm sample"), picks


def initialize_mm(series, order: int, periodic_extension: bool = True) -> KdeMm:
    """KDE-MM with the normal-reference-rule bandwidth (dimension order+1)."""
    ts = as_series(series)
    h = reference_rule_bandwidth(ts.values, effective_dimension=order + 1)
    return KdeMm(ts, order, h, periodic_extension=periodic_extension)


def _gem_pass(ex_table, tgt_table, h, relaxed, block=_BLOCK):
    """One pseudo-likelihood evaluation plus the bandwidth-update statistics.

    Returns (objective, numerator, denominator, damping) so the caller can
    form h2_new = (damping * h^2 + numerator) / (damping + denominator).
    """
    order = ex_table.shape[1] - 1
    inv_h2 = 1.0 / (h * h)
    t_total = tgt_table.shape[0]
    objective = 0.0
    num = 0.0
    den = 0.0
    damping = 0.0
    for start, stop in iter_blocks(t_total, block):
        blk = tgt_table[start:stop]
        d_ctx = np.zeros((blk.shape[0], ex_table.shape[0]))
        for lag in range(1, order + 1):
            diff = blk[:, lag][:, None] - ex_table[:, lag][None, :]
            d_ctx += diff * diff
        s_ctx = -0.5 * inv_h2 * d_ctx
        rows = np.arange(start, stop)
        s_ctx[rows - start, rows] = -np.inf
        d0 = blk[:, 0][:, None] - ex_table[:, 0][None, :]
        s_joint = s_ctx - 0.5 * inv_h2 * d0 * d0
        r_ctx, lse_ctx = row_softmax_lse(s_ctx)
        r_joint, lse_joint = row_softmax_lse(s_joint)
        objective += float(np.sum(lse_joint - lse_ctx))
        r_diff = r_joint - r_ctx
        num += float(np.sum(r_joint * d0 * d0)) + float(np.sum(r_diff * d_ctx))
        den += float(np.sum(r_joint)) + order * float(np.sum(r_diff))
        if order > 0:
            mean_ctx_sq = d_ctx / order
            excess = mean_ctx_sq * inv_h2 - 1.0
            if relaxed:
                damp_mid = order * r_ctx * excess * excess
            else:
                damp_mid = 2.0 * order * bound_gain(0.5 * r_ctx) * excess * excess
            damp_pos = r_ctx * np.maximum(excess, 0.0)
            damping += order * float(np.sum(r_ctx + damp_mid + damp_pos))
    objective -= t_total * (np.log(h) + 0.5 * LOG_2PI)
    return objective, num, den, damping


def mm_train(model: KdeMm, config: MmTrainingConfig | None = None) -> tuple[KdeMm, TrainingReport]:
    """Fit the bandwidth by pseudo-likelihood maximization.

    Modes: damped fixed-point updates with the exact curvature gain
    (``exact_gem``, ascent guaranteed), the relaxed gain (``relaxed_gem``,
    larger steps), or one-dimensional golden-section search over log h
    (``scalar_numeric``). Stops when the relative objective change drops
    below the tolerance or after ``max_iterations``.
    """
    config = config or MmTrainingConfig()
    values = model.series.values
    floor = config.bandwidth_floor
    if floor is None:
        floor = 1e-6 * float(np.std(values))
        if floor <= 0:
            raise DegenerateSample("training series is constant")
    report = TrainingReport(initial_bandwidth=model.bandwidth)
    report.min_separation = min_separation(values)
    if report.min_separation == 0.0:
        report.flags.append("degenerate_min_separation")
    started = time.perf_counter()

    if config.mode == "scalar_numeric":
        trained = _train_scalar(model, config, floor, report)
    else:
        trained = _train_gem(model, config, floor, report, relaxed=(config.mode == "relaxed_gem"))

    report.final_objective = mm_pseudo_log_likelihood(trained)
    report.train_seconds = time.perf_counter() - started
    return trained, report


def _train_gem(model, config, floor, report, relaxed):
    h = model.bandwidth
    _, ex_table = lag_table(model.series.values, model.order, model.periodic_extension)
    tgt_table = ex_table  # training targets coincide with exemplars
    deadline = None if config.time_budget_s is None else time.perf_counter() + config.time_budget_s
    report.status = "max_iterations"
    for i in range(config.max_iterations):
        if deadline is not None and time.perf_counter() > deadline:
            report.status = "timeout"
            break
        objective, num, den, damping = _gem_pass(ex_table, tgt_table, h, relaxed)
        if not np.isfinite(objective):
            raise NumericalFailure("pseudo-log-likelihood is not finite", index=i)
        report.objective_trace.append(objective)
        report.bandwidth_trace.append(h)
        if i > 0:
            prev = report.objective_trace[-2]
            if abs(objective - prev) < config.relative_tolerance * abs(prev):
                report.status = "converged"
                report.converged = True
                break
        h2_new = (damping * h * h + num) / (damping + den)
        if not np.isfinite(h2_new) or h2_new <= 0:
            raise NumericalFailure("bandwidth update is not positive", index=i)
        h = max(float(np.sqrt(h2_new)), floor)
        report.iterations = i + 1
    return replace(model, bandwidth=h)


def _train_scalar(model, config, floor, report):
    values = model.series.values
    d_min = report.min_separation
    span = float(np.max(values) - np.min(values))
    if span <= 0:
        raise DegenerateSample("training series is constant")
    lo_h = d_min / 10.0 if d_min and d_min > 0 else floor
    lo_h = max(lo_h, 1e-300)
    hi_h = 10.0 * span

    def objective(log_h):
        return mm_pseudo_log_likelihood(model, bandwidth=float(np.exp(log_h)))

    best_log_h, best_f, trace = golden_section_maximize(
        objective, np.log(lo_h), np.log(hi_h), tol=1e-8, max_iter=config.max_iterations
    )
    if not np.isfinite(best_f):
        raise NumericalFailure("pseudo-log-likelihood is not finite")
    report.objective_trace = [float(v) for v in trace]
    report.iterations = len(trace)
    report.converged = True
    report.status = "converged"
    h = max(float(np.exp(best_log_h)), floor)
    report.bandwidth_trace = [h]
    return replace(model, bandwidth=h)
