"""Kernel functions, plain multi-dimensional KDE, and reference-rule bandwidths.

Every density here has a log-domain primary implementation; the linear-domain
functions are thin wrappers. Products of several kernel factors underflow
quickly, so downstream modules work in logs throughout.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSample

LOG_2PI = float(np.log(2.0 * np.pi))


class Kernel(enum.Enum):
    """Kernel shape for density estimates.

    Only the squared-exponential (Gaussian) kernel is implemented. The
    enumeration exists so evaluation-side kernels can be added later;
    training modules require the Gaussian shape, whose closed-form updates
    they rely on.
    """

    GAUSSIAN = "gaussian"


def kernel_log(kernel: Kernel, r):
    """Log kernel value at scaled distance ``r`` (scalar or array)."""
    if kernel is not Kernel.GAUSSIAN:
        raise NotImplementedError(f"kernel {kernel} not implemented")
    r = np.asarray(r, dtype=np.float64)
    return -0.5 * r * r - 0.5 * LOG_2PI


def kernel_eval(kernel: Kernel, r):
    """Kernel value at scaled distance ``r``; (1/sqrt(2 pi)) exp(-r^2/2)."""
    return np.exp(kernel_log(kernel, r))


@dataclass(frozen=True)
class KdeEstimate:
    """A product-kernel density estimate with a single shared bandwidth.

    Parameters
    ----------
    centres : ndarray, shape (N, D)
        Kernel centres.
    bandwidth : float
        Common positive scale for every dimension.
    kernel : Kernel
        Per-dimension kernel shape (identical across dimensions).
    """

    centres: np.ndarray
    bandwidth: float
    kernel: Kernel = Kernel.GAUSSIAN

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centres, dtype=np.float64))
        if c.ndim != 2 or c.shape[0] == 0:
            raise ValueError("centres must be a non-empty (N, D) array")
        if not np.isfinite(c).all():
            raise ValueError("centres must be finite")
        if not (self.bandwidth > 0):
            raise ValueError("bandwidth must be positive")
        object.__setattr__(self, "centres", c)

    @property
    def dimension(self) -> int:
        return self.centres.shape[1]


def _as_points(est: KdeEstimate, x) -> tuple[np.ndarray, bool]:
    """Normalize query points to shape (K, D).

    A scalar or a 1-D array is a batch of points when D == 1, and a single
    point when its length equals D > 1.
    """
    d = est.dimension
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        if d != 1:
            raise ValueError(f"scalar query for a {d}-dimensional estimate")
        return x.reshape(1, 1), True
    if x.ndim == 1:
        if d == 1:
            return x.reshape(-1, 1), False
        if x.shape[0] != d:
            raise ValueError(f"point of length {x.shape[0]} for dimension {d}")
        return x.reshape(1, d), True
    if x.ndim == 2 and x.shape[1] == d:
        return x, False
    raise ValueError(f"cannot interpret query of shape {x.shape} for dimension {d}")


def kde_logpdf(est: KdeEstimate, x):
    """Log density of the estimate at point(s) ``x``.

    log (1/N) sum_n h^-D prod_d k((x_d - y_nd)/h), evaluated with log-sum-exp.
    """
    pts, single = _as_points(est, x)
    h = est.bandwidth
    d = est.dimension
    # (K, N) summed log kernels across dimensions
    scaled = (pts[:, None, :] - est.centres[None, :, :]) / h
    log_terms = np.sum(kernel_log(est.kernel, scaled), axis=2)
    m = np.max(log_terms, axis=1)
    out = m + np.log(np.mean(np.exp(log_terms - m[:, None]), axis=1))
    out -= d * np.log(h)
    return float(out[0]) if single else out


def kde_pdf(est: KdeEstimate, x):
    """Density of the estimate at point(s) ``x``; wrapper over kde_logpdf."""
    return np.exp(kde_logpdf(est, x))


def kish_effective_size(weights: np.ndarray) -> float:
    """Kish effective sample size (sum w)^2 / sum w^2."""
    w = np.asarray(weights, dtype=np.float64)
    total = w.sum()
    return float(total * total / np.sum(w * w))


def reference_rule_bandwidth(values, weights=None, effective_dimension: int = 1) -> float:
    """Normal-reference-rule bandwidth for a weighted scalar sample.

    Uses the Scott/Bowman constant,

        h = sigma * (4 / ((d + 2) * N_eff)) ** (1 / (d + 4)),

    with ``sigma`` the weighted standard deviation, ``d`` the effective
    dimension of the estimate the bandwidth will serve, and ``N_eff`` the
    Kish effective sample size of the weights. With uniform weights N_eff
    equals the sample count, so rescaling all weights leaves h unchanged.

    Raises
    ------
    DegenerateSample
        If the weighted variance is zero (or weights are all zero).
    """
    y = np.asarray(values, dtype=np.float64)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("values must be a non-empty 1-D array")
    if weights is None:
        w = np.ones_like(y)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != y.shape:
            raise ValueError("weights must match values in shape")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
    total = w.sum()
    if total <= 0:
        raise DegenerateSample("all weights are zero")
    mean = float(np.sum(w * y) / total)
    var = float(np.sum(w * (y - mean) ** 2) / total)
    if var <= 0:
        raise DegenerateSample("weighted sample variance is zero")
    d = int(effective_dimension)
    if d < 1:
        raise ValueError("effective_dimension must be >= 1")
    n_eff = kish_effective_size(w)
    return float(np.sqrt(var) * (4.0 / ((d + 2) * n_eff)) ** (1.0 / (d + 4)))
