"""Hidden Markov models with kernel-density emissions.

Each hidden state owns per-lag bandwidths and per-exemplar weights; the
state-conditional next-step density is a weighted conditional KDE over the
training series. Inference uses scaled forward-backward recursions; training
uses damped fixed-point updates whose step length is controlled by curvature
terms, either exact (guaranteed ascent) or relaxed (large steps, weights held
fixed).

Responsibility matrices are O(M N^2) and are therefore streamed blockwise
over target times; they are only materialized on explicit request for small
instances.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import EmptyState, NumericalFailure, SequenceTooShort
from .kernels import LOG_2PI, Kernel, reference_rule_bandwidth
from .markov import context_to_lags, lag_table, min_separation
from .numerics import (
    ForwardBackwardResult,
    bound_gain,
    forward_log_likelihood,
    iter_blocks,
    row_softmax_lse,
    scaled_forward_backward,
    stationary_distribution,
    transition_from_cooccurrence,
)
from .report import TrainingReport
from .series import TimeSeries, as_series

_BLOCK = 256
_WEIGHT_FLOOR = 1e-12
_RESP_LIMIT = 20_000_000  # max M*T*N entries for dense responsibilities


@dataclass(frozen=True)
class KdeHmm:
    """HMM whose state-conditional emissions are weighted conditional KDEs.

    Parameters
    ----------
    series : TimeSeries
        Training data y_1..y_N (kept by reference; exemplars are the
        positions with a full context, i.e. indices order..N-1).
    order : int
        Markov order p of the within-state dynamics.
    transition : ndarray, shape (M, M)
        Row-stochastic state transition matrix.
    stationary : ndarray, shape (M,)
        Leading left eigenvector of ``transition`` (initial distribution).
    weights : ndarray, shape (M, N - order)
        Per-state exemplar weights, each row non-negative and summing to 1.
    bandwidths : ndarray, shape (M, order + 1)
        Column 0 is the emission bandwidth, columns 1..p the context
        bandwidths; all positive.
    """

    series: TimeSeries
    order: int
    transition: np.ndarray
    stationary: np.ndarray
    weights: np.ndarray
    bandwidths: np.ndarray
    kernel: Kernel = Kernel.GAUSSIAN

    def __post_init__(self):
        object.__setattr__(self, "series", as_series(self.series))
        object.__setattr__(self, "transition", np.asarray(self.transition, dtype=np.float64))
        object.__setattr__(self, "stationary", np.asarray(self.stationary, dtype=np.float64))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))
        object.__setattr__(self, "bandwidths", np.asarray(self.bandwidths, dtype=np.float64))
        self.validate()

    @property
    def states(self) -> int:
        return self.transition.shape[0]

    @property
    def exemplar_count(self) -> int:
        return len(self.series) - self.order

    def validate(self) -> None:
        n, p, m = len(self.series), self.order, self.transition.shape[0]
        if p < 0:
            raise ValueError("order must be non-negative")
        if n <= p + 1:
            raise ValueError("training series must be longer than order + 1")
        if self.transition.shape != (m, m):
            raise ValueError("transition matrix must be square")
        if np.any(self.transition < 0) or np.max(np.abs(self.transition.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("transition rows must lie on the simplex")
        if self.stationary.shape != (m,) or abs(self.stationary.sum() - 1.0) > 1e-12:
            raise ValueError("stationary vector must sum to 1")
        if self.weights.shape != (m, n - p):
            raise ValueError(f"weights must have shape ({m}, {n - p})")
        if np.any(self.weights < 0) or np.max(np.abs(self.weights.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("weight rows must lie on the simplex")
        if self.bandwidths.shape != (m, p + 1):
            raise ValueError(f"bandwidths must have shape ({m}, {p + 1})")
        if not np.all(self.bandwidths > 0):
            raise ValueError("bandwidths must be positive")


@dataclass
class Posteriors:
    """One E-step over a sequence: occupancies plus working arrays.

    ``resp_joint``/``resp_context`` are the per-(state, time) exemplar
    responsibilities given, respectively, the context plus the emitted value
    and the context alone. They are None unless explicitly requested, since
    they are O(M T N); training streams them blockwise instead.
    """

    gamma: np.ndarray
    xi_sum: np.ndarray
    log_likelihood: float
    log_alpha_scaled: np.ndarray
    log_beta_scaled: np.ndarray
    log_scales: np.ndarray
    transition: np.ndarray
    cross_validated: bool
    resp_joint: np.ndarray | None = None
    resp_context: np.ndarray | None = None


@dataclass
class GemWorkspace:
    """Streamed reductions of one damped update step.

    Per state: total occupancy, the joint-responsibility emission sum, the
    responsibility-difference masses and per-lag squared sums, per-exemplar
    difference totals (for weight updates), and the damping factor that
    limits the step length.
    """

    occupancy: np.ndarray       # (M,)
    emission_sq: np.ndarray     # (M,)
    diff_mass: np.ndarray       # (M,)
    diff_sq: np.ndarray         # (M, p) for lags 1..p
    weight_diff: np.ndarray     # (M, NE)
    damping: np.ndarray         # (M,)


@dataclass
class GemDiagnostics:
    objective: float
    damping: np.ndarray
    occupancy: np.ndarray
    starved_states: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class HmmTrainingConfig:
    mode: str = "accelerated"  # exact | accelerated
    update_weights: bool | None = None  # default: exact -> True, accelerated -> False
    max_iterations: int = 500
    relative_tolerance: float = 1e-6
    bandwidth_floor: float | None = None  # default: 1e-6 * sample std
    time_budget_s: float | None = None

    def __post_init__(self):
        if self.mode not in ("exact", "accelerated"):
            raise ValueError(f"unknown training mode {self.mode!r}")
        if self.mode == "accelerated" and self.update_weights:
            raise ValueError("accelerated mode requires fixed weights")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    def resolved_update_weights(self) -> bool:
        if self.update_weights is None:
            return self.mode == "exact"
        return bool(self.update_weights)


def _log_weights(weights: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(weights)


def _state_scores(log_w_q, bandwidths_q, d_list, cv_rows=None):
    """Context and joint score matrices for one state over a target block.

    ``d_list[l]`` holds squared lag-l differences, shape (B, NE). Returns
    (s_ctx, s_joint); CV rows mask the exemplar matching each target.
    """
    order = len(d_list) - 1
    s_ctx = np.broadcast_to(log_w_q, d_list[0].shape).copy()
    for lag in range(1, order + 1):
        s_ctx -= (0.5 / bandwidths_q[lag] ** 2) * d_list[lag]
    if cv_rows is not None:
        s_ctx[np.arange(len(cv_rows)), cv_rows] = -np.inf
    s_joint = s_ctx - (0.5 / bandwidths_q[0] ** 2) * d_list[0]
    return s_ctx, s_joint


def _block_diffs(blk, ex_table):
    order = ex_table.shape[1] - 1
    return [
        (blk[:, lag][:, None] - ex_table[:, lag][None, :]) ** 2
        for lag in range(order + 1)
    ]


def _emission_matrix(model: KdeHmm, tgt_table: np.ndarray, cross_validate: bool, block: int = _BLOCK) -> np.ndarray:
    """Per-state CV-aware emission log densities, shape (M, T)."""
    _, ex_table = lag_table(model.series.values, model.order, periodic=False)
    log_w = _log_weights(model.weights)
    t_total = tgt_table.shape[0]
    out = np.empty((model.states, t_total))
    for start, stop in iter_blocks(t_total, block):
        d_list = _block_diffs(tgt_table[start:stop], ex_table)
        cv_rows = np.arange(start, stop) if cross_validate else None
        for q in range(model.states):
            s_ctx, s_joint = _state_scores(log_w[q], model.bandwidths[q], d_list, cv_rows)
            _, lse_ctx = row_softmax_lse(s_ctx)
            _, lse_joint = row_softmax_lse(s_joint)
            with np.errstate(invalid="ignore"):
                vals = np.where(np.isfinite(lse_ctx), lse_joint - lse_ctx, -np.inf)
            out[q, start:stop] = vals - np.log(model.bandwidths[q, 0]) - 0.5 * LOG_2PI
    return out


def hmm_emission_logpdf(model: KdeHmm, state: int, context, x, exclude_exemplar: int | None = None):
    """Log emission density of one state at ``x`` given a chronological context.

    ``exclude_exemplar`` removes the exemplar at that 0-based series position
    from both the joint and the context sums (training-time cross-validation).
    """
    ctx = context_to_lags(context)
    if ctx.size != model.order:
        raise ValueError(f"context must have exactly {model.order} values")
    _, ex_table = lag_table(model.series.values, model.order, periodic=False)
    log_w = _log_weights(model.weights)[state].copy()
    if exclude_exemplar is not None:
        row = int(exclude_exemplar) - model.order
        if not 0 <= row < ex_table.shape[0]:
            raise ValueError("exclude_exemplar must be an exemplar position")
        log_w[row] = -np.inf
    h = model.bandwidths[state]
    s_ctx = log_w.copy()
    for lag in range(1, model.order + 1):
        diff = ctx[lag - 1] - ex_table[:, lag]
        s_ctx -= (0.5 / h[lag] ** 2) * diff * diff
    x_arr = np.asarray(x, dtype=np.float64)
    scalar = x_arr.ndim == 0
    pts = np.atleast_1d(x_arr)
    d0 = pts[:, None] - ex_table[:, 0][None, :]
    s_joint = s_ctx[None, :] - (0.5 / h[0] ** 2) * d0 * d0
    _, lse_ctx = row_softmax_lse(s_ctx[None, :])
    _, lse_joint = row_softmax_lse(s_joint)
    out = np.where(np.isfinite(lse_ctx[0]), lse_joint - lse_ctx[0], -np.inf)
    out = out - np.log(h[0]) - 0.5 * LOG_2PI
    return float(out[0]) if scalar else out


def _targets_for(model: KdeHmm, sequence) -> tuple[np.ndarray, np.ndarray]:
    seq = as_series(sequence).values
    if len(seq) <= model.order:
        raise SequenceTooShort(
            f"sequence of length {len(seq)} cannot be scored with order {model.order}"
        )
    _, tgt_table = lag_table(seq, model.order, periodic=False)
    return seq, tgt_table


def hmm_forward_backward(
    model: KdeHmm,
    sequence,
    cross_validate: bool = False,
    keep_responsibilities: bool = False,
    block: int = _BLOCK,
) -> Posteriors:
    """Scaled forward-backward over a sequence.

    Cross-validation (exemplar t removed at time t) applies only when the
    scored sequence is the training series itself; for any other sequence the
    flag has no effect. The initial state distribution is the stationary
    vector of the transition matrix.
    """
    seq, tgt_table = _targets_for(model, sequence)
    cv_active = bool(cross_validate) and np.array_equal(seq, model.series.values)
    log_b = _emission_matrix(model, tgt_table, cv_active, block)
    fb = scaled_forward_backward(log_b, model.transition, model.stationary)
    post = Posteriors(
        gamma=fb.gamma,
        xi_sum=fb.xi_sum,
        log_likelihood=fb.log_likelihood,
        log_alpha_scaled=fb.log_alpha_scaled,
        log_beta_scaled=fb.log_beta_scaled,
        log_scales=fb.log_scales,
        transition=model.transition.copy(),
        cross_validated=cv_active,
    )
    if keep_responsibilities:
        t_total = tgt_table.shape[0]
        ne = model.exemplar_count
        if model.states * t_total * ne > _RESP_LIMIT:
            raise ValueError("responsibility matrices too large to materialize")
        _, ex_table = lag_table(model.series.values, model.order, periodic=False)
        log_w = _log_weights(model.weights)
        resp_joint = np.empty((model.states, t_total, ne))
        resp_context = np.empty((model.states, t_total, ne))
        for start, stop in iter_blocks(t_total, block):
            d_list = _block_diffs(tgt_table[start:stop], ex_table)
            cv_rows = np.arange(start, stop) if cv_active else None
            for q in range(model.states):
                s_ctx, s_joint = _state_scores(log_w[q], model.bandwidths[q], d_list, cv_rows)
                resp_context[q, start:stop], _ = row_softmax_lse(s_ctx)
                resp_joint[q, start:stop], _ = row_softmax_lse(s_joint)
        post.resp_joint = resp_joint
        post.resp_context = resp_context
    return post


@dataclass
class TransitionUpdate:
    transition: np.ndarray
    stationary: np.ndarray
    starved_states: list[int]


def hmm_update_transitions(posteriors: Posteriors) -> TransitionUpdate:
    """Standard transition re-estimate from pairwise posteriors.

    A state with zero total occupancy keeps its previous row and is reported
    as starved. Rows are renormalized to machine precision and the stationary
    vector is recomputed from the updated matrix.
    """
    row_mass = posteriors.xi_sum.sum(axis=1)
    t_len = posteriors.gamma.shape[1]
    starved = [int(q) for q in np.flatnonzero(row_mass <= 1e-12 * max(t_len - 1, 1))]
    new_a = posteriors.transition.copy()
    ok = row_mass > 1e-12 * max(t_len - 1, 1)
    new_a[ok] = posteriors.xi_sum[ok] / row_mass[ok, None]
    new_a /= new_a.sum(axis=1, keepdims=True)
    return TransitionUpdate(new_a, stationary_distribution(new_a), starved)


def _gem_statistics(model: KdeHmm, gamma: np.ndarray, mode: str, update_weights: bool, block: int = _BLOCK) -> GemWorkspace:
    """Blockwise accumulation of every sum the update formulas need."""
    _, ex_table = lag_table(model.series.values, model.order, periodic=False)
    log_w = _log_weights(model.weights)
    p = model.order
    m = model.states
    ne = ex_table.shape[0]
    ws = GemWorkspace(
        occupancy=np.zeros(m),
        emission_sq=np.zeros(m),
        diff_mass=np.zeros(m),
        diff_sq=np.zeros((m, p)),
        weight_diff=np.zeros((m, ne)),
        damping=np.zeros(m),
    )
    # 1/w - 1 with zero-weight exemplars contributing nothing (their
    # responsibilities are identically zero, so they are absent terms).
    xi_w = np.where(model.weights > 0, 1.0 / np.where(model.weights > 0, model.weights, 1.0) - 1.0, 0.0)
    t_total = ne
    for start, stop in iter_blocks(t_total, block):
        d_list = _block_diffs(ex_table[start:stop], ex_table)
        cv_rows = np.arange(start, stop)
        for q in range(m):
            h_q = model.bandwidths[q]
            s_ctx, s_joint = _state_scores(log_w[q], h_q, d_list, cv_rows)
            r_ctx, _ = row_softmax_lse(s_ctx)
            r_joint, _ = row_softmax_lse(s_joint)
            g = gamma[q, start:stop][:, None]
            ws.occupancy[q] += float(np.sum(gamma[q, start:stop]))
            ws.emission_sq[q] += float(np.sum(g * r_joint * d_list[0]))
            r_diff = r_joint - r_ctx
            g_diff = g * r_diff
            ws.diff_mass[q] += float(np.sum(g_diff))
            for lag in range(1, p + 1):
                ws.diff_sq[q, lag - 1] += float(np.sum(g_diff * d_list[lag]))
            if update_weights:
                ws.weight_diff[q] += g_diff.sum(axis=0)

            if p > 0:
                sq_sum = np.zeros_like(r_ctx)
                max_excess = np.full_like(r_ctx, -np.inf)
                for lag in range(1, p + 1):
                    excess = d_list[lag] / h_q[lag] ** 2 - 1.0
                    sq_sum += excess * excess
                    np.maximum(max_excess, excess, out=max_excess)
            else:
                sq_sum = None
                max_excess = None

            if mode == "exact":
                gain = bound_gain(0.5 * r_ctx)
                damp = r_ctx.copy()
                if p > 0:
                    damp += 2.0 * gain * sq_sum
                if update_weights:
                    damp += 4.0 * gain * xi_w[q][None, :]
                    top = xi_w[q][None, :] if p == 0 else np.maximum(max_excess, xi_w[q][None, :])
                    damp += r_ctx * top
                elif p > 0:
                    damp += r_ctx * np.maximum(max_excess, 0.0)
            else:  # accelerated
                damp = r_ctx.copy()
                if p > 0:
                    damp += r_ctx * sq_sum
                    damp += r_ctx * np.maximum(max_excess, 0.0)
            ws.damping[q] += float(np.sum(g * damp))
    return ws


def _gem_reduced_pass(model: KdeHmm, mode: str, block: int = _BLOCK):
    """Single sweep computing CV emissions plus per-(state, t) update sums.

    Only valid with fixed weights: every statistic the bandwidth updates need
    is then a gamma-weighted contraction of per-(q, t) reductions over
    exemplars, so the expensive exemplar sums run once per step.
    """
    _, ex_table = lag_table(model.series.values, model.order, periodic=False)
    log_w = _log_weights(model.weights)
    p = model.order
    m = model.states
    t_total = ex_table.shape[0]
    log_b = np.empty((m, t_total))
    s0 = np.empty((m, t_total))       # sum_n r_joint * (y_t - y_n)^2
    mdiff = np.empty((m, t_total))    # sum_n (r_joint - r_ctx), zero in exact arithmetic
    sdl = np.empty((m, p, t_total))   # sum_n (r_joint - r_ctx) * lag diff^2
    damp = np.empty((m, t_total))     # per-t damping contribution
    for start, stop in iter_blocks(t_total, block):
        d_list = _block_diffs(ex_table[start:stop], ex_table)
        cv_rows = np.arange(start, stop)
        for q in range(m):
            h_q = model.bandwidths[q]
            s_ctx, s_joint = _state_scores(log_w[q], h_q, d_list, cv_rows)
            r_ctx, lse_ctx = row_softmax_lse(s_ctx)
            r_joint, lse_joint = row_softmax_lse(s_joint)
            with np.errstate(invalid="ignore"):
                vals = np.where(np.isfinite(lse_ctx), lse_joint - lse_ctx, -np.inf)
            log_b[q, start:stop] = vals - np.log(h_q[0]) - 0.5 * LOG_2PI
            s0[q, start:stop] = np.sum(r_joint * d_list[0], axis=1)
            r_diff = r_joint - r_ctx
            mdiff[q, start:stop] = r_diff.sum(axis=1)
            if p > 0:
                sq_sum = np.zeros_like(r_ctx)
                max_excess = np.full_like(r_ctx, -np.inf)
                for lag in range(1, p + 1):
                    excess = d_list[lag] / h_q[lag] ** 2 - 1.0
                    sq_sum += excess * excess
                    np.maximum(max_excess, excess, out=max_excess)
                    sdl[q, lag - 1, start:stop] = np.sum(r_diff * d_list[lag], axis=1)
            if mode == "exact":
                local = r_ctx.copy()
                if p > 0:
                    gain = bound_gain(0.5 * r_ctx)
                    local += 2.0 * gain * sq_sum
                    local += r_ctx * np.maximum(max_excess, 0.0)
            else:
                local = r_ctx.copy()
                if p > 0:
                    local += r_ctx * sq_sum
                    local += r_ctx * np.maximum(max_excess, 0.0)
            damp[q, start:stop] = local.sum(axis=1)
    return log_b, s0, mdiff, sdl, damp


def hmm_gem_step(
    model: KdeHmm,
    mode: str = "exact",
    update_weights: bool | None = None,
    bandwidth_floor: float = 0.0,
    block: int = _BLOCK,
) -> tuple[KdeHmm, GemDiagnostics]:
    """One damped update of bandwidths (and optionally weights) plus transitions.

    Returns the updated model and diagnostics carrying the pre-update
    pseudo-log-likelihood. Accelerated mode requires fixed weights.
    """
    if model.kernel is not Kernel.GAUSSIAN:
        raise NotImplementedError("updates require the Gaussian kernel")
    if mode not in ("exact", "accelerated"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "accelerated":
        if update_weights:
            raise ValueError("accelerated mode requires fixed weights")
        update_weights = False
    elif update_weights is None:
        update_weights = True

    if update_weights:
        post = hmm_forward_backward(model, model.series, cross_validate=True, block=block)
        ws = _gem_statistics(model, post.gamma, mode, update_weights, block)
    else:
        log_b, s0, mdiff, sdl, damp = _gem_reduced_pass(model, mode, block)
        fb = scaled_forward_backward(log_b, model.transition, model.stationary)
        post = Posteriors(
            gamma=fb.gamma,
            xi_sum=fb.xi_sum,
            log_likelihood=fb.log_likelihood,
            log_alpha_scaled=fb.log_alpha_scaled,
            log_beta_scaled=fb.log_beta_scaled,
            log_scales=fb.log_scales,
            transition=model.transition.copy(),
            cross_validated=True,
        )
        gamma = fb.gamma
        ws = GemWorkspace(
            occupancy=gamma.sum(axis=1),
            emission_sq=np.sum(gamma * s0, axis=1),
            diff_mass=np.sum(gamma * mdiff, axis=1),
            diff_sq=np.sum(gamma[:, None, :] * sdl, axis=2),
            weight_diff=np.zeros_like(model.weights),
            damping=np.sum(gamma * damp, axis=1),
        )
    trans = hmm_update_transitions(post)

    t_total = post.gamma.shape[1]
    new_bw = model.bandwidths.copy()
    new_w = model.weights.copy()
    starved = list(trans.starved_states)
    for q in range(model.states):
        if ws.occupancy[q] <= 1e-12 * t_total:
            if q not in starved:
                starved.append(q)
            continue
        new_bw[q, 0] = np.sqrt(ws.emission_sq[q] / ws.occupancy[q])
        denom = ws.damping[q] + ws.diff_mass[q]
        if not denom > 0:
            raise AssertionError(
                f"damping + responsibility-difference mass must be positive (state {q})"
            )
        for lag in range(1, model.order + 1):
            new_bw[q, lag] = np.sqrt(
                (ws.damping[q] * model.bandwidths[q, lag] ** 2 + ws.diff_sq[q, lag - 1]) / denom
            )
        if update_weights:
            w_new = (ws.damping[q] * model.weights[q] + ws.weight_diff[q]) / denom
            # Live weights are floored against roundoff; exactly-zero weights
            # have identically zero responsibilities and stay out of the model.
            live = model.weights[q] > 0
            w_new = np.where(live, np.maximum(w_new, _WEIGHT_FLOOR), 0.0)
            new_w[q] = w_new / w_new.sum()
    np.maximum(new_bw, bandwidth_floor, out=new_bw)
    new_model = replace(
        model,
        transition=trans.transition,
        stationary=trans.stationary,
        weights=new_w,
        bandwidths=new_bw,
    )
    diag = GemDiagnostics(
        objective=post.log_likelihood,
        damping=ws.damping,
        occupancy=ws.occupancy,
        starved_states=sorted(starved),
    )
    return new_model, diag


def hmm_pseudo_log_likelihood(model: KdeHmm, block: int = _BLOCK) -> float:
    """Leave-one-out pseudo-log-likelihood of the training series."""
    _, tgt_table = _targets_for(model, model.series)
    log_b = _emission_matrix(model, tgt_table, cross_validate=True, block=block)
    return forward_log_likelihood(log_b, model.transition, model.stationary)


def hmm_train(model: KdeHmm, config: HmmTrainingConfig | None = None) -> tuple[KdeHmm, TrainingReport]:
    """Iterate damped update steps until the objective stalls.

    The report's trace holds the pseudo-log-likelihood at the start of each
    iteration; ``final_objective`` is that of the returned model.
    """
    config = config or HmmTrainingConfig()
    floor = config.bandwidth_floor
    if floor is None:
        floor = 1e-6 * float(np.std(model.series.values))
    update_weights = config.resolved_update_weights()
    report = TrainingReport()
    report.min_separation = min_separation(model.series.values)
    if report.min_separation == 0.0:
        report.flags.append("degenerate_min_separation")
    started = time.perf_counter()
    deadline = None if config.time_budget_s is None else started + config.time_budget_s
    report.status = "max_iterations"
    current = model
    for i in range(config.max_iterations):
        if deadline is not None and time.perf_counter() > deadline:
            report.status = "timeout"
            break
        candidate, diag = hmm_gem_step(
            current, mode=config.mode, update_weights=update_weights, bandwidth_floor=floor
        )
        if not np.isfinite(diag.objective):
            raise NumericalFailure("pseudo-log-likelihood is not finite", index=i)
        report.objective_trace.append(diag.objective)
        report.bandwidth_trace.append(current.bandwidths.copy())
        for q in diag.starved_states:
            flag = f"starved_state_{q}"
            if flag not in report.flags:
                report.flags.append(flag)
        if i > 0:
            prev = report.objective_trace[-2]
            if abs(diag.objective - prev) < config.relative_tolerance * abs(prev):
                report.status = "converged"
                report.converged = True
                break
        current = candidate
        report.iterations = i + 1
    report.final_objective = hmm_pseudo_log_likelihood(current)
    report.train_seconds = time.perf_counter() - started
    return current, report


def hmm_initialize(series, occupancy_guess, order: int) -> KdeHmm:
    """Build a KDE-HMM from an occupancy guess.

    Weights are the per-state occupancies over exemplar positions normalized
    to 1, the transition matrix comes from occupancy co-occurrences, and all
    lags of a state share the weighted normal-reference-rule bandwidth with
    effective dimension order + 1.
    """
    ts = as_series(series)
    gamma_hat = np.asarray(getattr(occupancy_guess, "gamma_hat", occupancy_guess), dtype=np.float64)
    if gamma_hat.ndim != 2 or gamma_hat.shape[1] != len(ts):
        raise ValueError("occupancy guess must have shape (M, N)")
    col_sums = gamma_hat.sum(axis=0)
    if np.any(gamma_hat < 0) or np.max(np.abs(col_sums - 1.0)) > 1e-8:
        raise ValueError("occupancy columns must lie on the simplex")
    m = gamma_hat.shape[0]
    state_mass = gamma_hat.sum(axis=1)
    if np.any(state_mass <= 0):
        raise EmptyState(f"state {int(np.argmin(state_mass))} has zero occupancy mass")
    try:
        transition = transition_from_cooccurrence(gamma_hat)
    except ValueError as exc:
        raise EmptyState(str(exc)) from exc
    exemplar_gamma = gamma_hat[:, order:]
    totals = exemplar_gamma.sum(axis=1)
    if np.any(totals <= 0):
        raise EmptyState(f"state {int(np.argmin(totals))} has zero exemplar mass")
    weights = exemplar_gamma / totals[:, None]
    exemplar_values = ts.values[order:]
    bandwidths = np.empty((m, order + 1))
    for q in range(m):
        bandwidths[q, :] = reference_rule_bandwidth(
            exemplar_values, weights=weights[q], effective_dimension=order + 1
        )
    return KdeHmm(
        series=ts,
        order=order,
        transition=transition,
        stationary=stationary_distribution(transition),
        weights=weights,
        bandwidths=bandwidths,
    )


def hmm_score(model: KdeHmm, heldout, block: int = _BLOCK) -> float:
    """Forward-algorithm log-probability of a held-out sequence.

    No cross-validation exclusion; the first ``order`` points of the sequence
    only provide conditioning context and are not scored.
    """
    _, tgt_table = _targets_for(model, heldout)
    log_b = _emission_matrix(model, tgt_table, cross_validate=False, block=block)
    return forward_log_likelihood(log_b, model.transition, model.stationary)


def hmm_sample(
    model: KdeHmm,
    length: int,
    rng_seed,
    seed_context=None,
    burn_in: int | None = None,
) -> tuple[TimeSeries, np.ndarray, np.ndarray]:
    """Ancestral sampling: state chain, exemplar choice, kernel noise.

    Without an explicit ``seed_context`` the initial context is drawn
    uniformly from the training contexts and a burn-in of 10 * order samples
    is discarded (0 when a context is supplied). Returns the generated
    series, the state trace, and the exemplar trace (0-based positions in
    the training series), all aligned.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    ex_idx, ex_table = lag_table(model.series.values, model.order, periodic=False)
    log_w = _log_weights(model.weights)
    p = model.order
    if seed_context is None:
        ctx = ex_table[int(rng.integers(ex_table.shape[0])), 1:].copy()
        burn = 10 * p if burn_in is None else int(burn_in)
    else:
        ctx = context_to_lags(seed_context).copy()
        if ctx.size != p:
            raise ValueError(f"seed context must have exactly {p} values")
        burn = 0 if burn_in is None else int(burn_in)

    def draw(probabilities):
        cum = np.cumsum(probabilities)
        cum /= cum[-1]
        return int(np.searchsorted(cum, rng.random(), side="left"))

    state = draw(model.stationary)
    total = burn + length
    out = np.empty(length)
    states = np.empty(length, dtype=np.int64)
    picks = np.empty(length, dtype=np.int64)
    for t in range(total):
        scores = log_w[state].copy()
        for lag in range(1, p + 1):
            diff = ctx[lag - 1] - ex_table[:, lag]
            scores -= (0.5 / model.bandwidths[state, lag] ** 2) * diff * diff
        kappa, _ = row_softmax_lse(scores[None, :])
        z = draw(kappa[0])
        x = ex_table[z, 0] + model.bandwidths[state, 0] * rng.standard_normal()
        if t >= burn:
            out[t - burn] = x
            states[t - burn] = state
            picks[t - burn] = ex_idx[z]
        if p > 0:
            ctx = np.concatenate(([x], ctx[:-1]))
        state = draw(model.transition[state])
    return TimeSeries(out, source="kde_hmm sample"), states, picks


def hmm_state_assignments(model: KdeHmm, series) -> np.ndarray:
    """Most probable state per scored time step (argmax of occupancies).

    Labels are 0-based and aligned with positions order..T-1 of the series;
    ties resolve to the lowest state index.
    """
    post = hmm_forward_backward(model, series, cross_validate=False)
    return np.argmax(post.gamma, axis=0)
