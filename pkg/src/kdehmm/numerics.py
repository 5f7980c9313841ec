"""Shared numerical routines: chain algebra, bound gains, scaled recursions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure

# Breakpoint of the piecewise curvature gain used by the damped updates.
_GAIN_BREAK = 1.0 / 6.0
_GAIN_AT_BREAK = ((_GAIN_BREAK - 1.0) / np.log(_GAIN_BREAK)) ** 2 - 1.0 / (
    4.0 * np.log(_GAIN_BREAK)
)


def bound_gain(g):
    """Curvature gain mapping a responsibility-like value to a damping weight.

    Piecewise: ((g-1)/ln g)^2 - 1/(4 ln g) below the 1/6 breakpoint, then
    linear continuation with unit slope. Continuous at the breakpoint;
    bound_gain(0) == 0.
    """
    g = np.asarray(g, dtype=np.float64)
    scalar = g.ndim == 0
    g = np.atleast_1d(g)
    if np.any(g < 0):
        raise ValueError("gain argument must be non-negative")
    out = _GAIN_AT_BREAK + g - _GAIN_BREAK
    small = g < _GAIN_BREAK
    if np.any(small):
        with np.errstate(divide="ignore"):
            lg = np.log(g[small])
        out[small] = ((g[small] - 1.0) / lg) ** 2 - 1.0 / (4.0 * lg)
    return float(out[0]) if scalar else out


def stationary_distribution(transition: np.ndarray, tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Leading left eigenvector of a row-stochastic matrix, normalized to sum 1.

    Damped power iteration on (I + A)/2, which has the same stationary
    vectors as A but converges for periodic chains as well.
    """
    a = np.asarray(transition, dtype=np.float64)
    m = a.shape[0]
    x = np.full(m, 1.0 / m)
    for _ in range(max_iter):
        nxt = 0.5 * (x + x @ a)
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - x)) < tol:
            return nxt
        x = nxt
    return x


def transition_from_cooccurrence(gamma_hat: np.ndarray) -> np.ndarray:
    """Transition-matrix guess from soft occupancy co-occurrences.

    A[q, q'] = sum_t g[q, t] g[q', t+1] / sum_t g[q, t], summing t over all
    but the last column. Rows sum to one whenever the occupancy columns do.
    """
    g = np.asarray(gamma_hat, dtype=np.float64)
    num = g[:, :-1] @ g[:, 1:].T
    den = g[:, :-1].sum(axis=1)
    if np.any(den <= 0):
        raise ValueError("a state has zero occupancy mass over t = 1..N-1")
    a = num / den[:, None]
    return a / a.sum(axis=1, keepdims=True)


def row_softmax_lse(scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise softmax together with the row log-sum-exp values.

    Rows that are entirely -inf yield zero probabilities and -inf lse.
    """
    m = np.max(scores, axis=1)
    finite = np.isfinite(m)
    shifted = np.exp(scores - np.where(finite, m, 0.0)[:, None])
    totals = shifted.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        probs = shifted / totals[:, None]
    probs[~finite] = 0.0
    lse = np.where(finite, m + np.log(np.where(totals > 0, totals, 1.0)), -np.inf)
    return probs, lse


def golden_section_maximize(fn, lo: float, hi: float, tol: float = 1e-8, max_iter: int = 200):
    """Golden-section search maximizing ``fn`` on [lo, hi].

    Returns (x_best, f_best, best_trace) where best_trace records the running
    best objective after each function evaluation (a non-decreasing sequence).
    """
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    best_x, best_f = (c, fc) if fc >= fd else (d, fd)
    trace = [max(fc, fd)]
    for _ in range(max_iter):
        if abs(b - a) < tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
        f_new = max(fc, fd)
        if f_new > best_f:
            best_f = f_new
            best_x = c if fc >= fd else d
        trace.append(best_f)
    return best_x, best_f, trace


@dataclass
class ForwardBackwardResult:
    """Scaled forward-backward pass over one emission matrix."""

    gamma: np.ndarray          # (M, T) posterior state occupancies
    xi_sum: np.ndarray         # (M, M) summed pairwise posteriors
    log_likelihood: float
    log_alpha_scaled: np.ndarray
    log_beta_scaled: np.ndarray
    log_scales: np.ndarray     # per-t log normalizers (includes emission shifts)


def scaled_forward_backward(log_emissions: np.ndarray, transition: np.ndarray, initial: np.ndarray) -> ForwardBackwardResult:
    """Forward-backward with per-step normalization.

    ``log_emissions`` is (M, T). Scaling constants are kept in log space so
    very small emission densities survive; a time step whose emissions are
    all zero raises NumericalFailure with that step's index.
    """
    log_b = np.asarray(log_emissions, dtype=np.float64)
    m_states, t_len = log_b.shape
    shift = np.max(log_b, axis=0)
    bad = ~np.isfinite(shift)
    if np.any(bad):
        raise NumericalFailure("all-zero emission row", index=int(np.argmax(bad)))
    b = np.exp(log_b - shift[None, :])

    alpha = np.empty((m_states, t_len))
    scales = np.empty(t_len)
    vec = initial * b[:, 0]
    total = vec.sum()
    if not (total > 0) or not np.isfinite(total):
        raise NumericalFailure("forward recursion underflowed", index=0)
    alpha[:, 0] = vec / total
    scales[0] = total
    trans_t = transition.T
    for t in range(1, t_len):
        vec = (trans_t @ alpha[:, t - 1]) * b[:, t]
        total = vec.sum()
        if not (total > 0) or not np.isfinite(total):
            raise NumericalFailure("forward recursion underflowed", index=t)
        alpha[:, t] = vec / total
        scales[t] = total

    beta = np.empty((m_states, t_len))
    beta[:, -1] = 1.0
    xi_sum = np.zeros((m_states, m_states))
    for t in range(t_len - 2, -1, -1):
        nxt = b[:, t + 1] * beta[:, t + 1]
        xi_sum += transition * np.outer(alpha[:, t], nxt) / scales[t + 1]
        beta[:, t] = (transition @ nxt) / scales[t + 1]

    gamma = alpha * beta
    gamma /= gamma.sum(axis=0, keepdims=True)
    log_scales = np.log(scales) + shift
    with np.errstate(divide="ignore"):
        log_alpha = np.log(alpha)
        log_beta = np.log(beta)
    return ForwardBackwardResult(
        gamma=gamma,
        xi_sum=xi_sum,
        log_likelihood=float(log_scales.sum()),
        log_alpha_scaled=log_alpha,
        log_beta_scaled=log_beta,
        log_scales=log_scales,
    )


def forward_log_likelihood(log_emissions: np.ndarray, transition: np.ndarray, initial: np.ndarray) -> float:
    """Forward-pass total log-likelihood only (no backward sweep)."""
    log_b = np.asarray(log_emissions, dtype=np.float64)
    _, t_len = log_b.shape
    shift = np.max(log_b, axis=0)
    bad = ~np.isfinite(shift)
    if np.any(bad):
        raise NumericalFailure("all-zero emission row", index=int(np.argmax(bad)))
    b = np.exp(log_b - shift[None, :])
    vec = initial * b[:, 0]
    total = vec.sum()
    if not (total > 0) or not np.isfinite(total):
        raise NumericalFailure("forward recursion underflowed", index=0)
    out = np.log(total) + shift[0]
    state = vec / total
    trans_t = transition.T
    for t in range(1, t_len):
        vec = (trans_t @ state) * b[:, t]
        total = vec.sum()
        if not (total > 0) or not np.isfinite(total):
            raise NumericalFailure("forward recursion underflowed", index=t)
        out += np.log(total) + shift[t]
        state = vec / total
    return float(out)


def iter_blocks(total: int, block: int):
    """Yield (start, stop) pairs covering range(total) in fixed-size chunks."""
    for start in range(0, total, block):
        yield start, min(start + block, total)


def weighted_quantiles(values, qs):
    """Plain quantiles of a 1-D sample (linear interpolation)."""
    return np.quantile(np.asarray(values, dtype=np.float64), qs)
