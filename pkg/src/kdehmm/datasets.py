"""Data generation, file ingestion, dequantization, and occupancy guesses."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import find_peaks, lfilter

from .errors import DataError, NoCycleStructure
from .series import TimeSeries, as_series

GMM_MEAN = float(np.sqrt(36.0 / 37.0))
GMM_STD = float(np.sqrt(1.0 / 37.0))


@dataclass(frozen=True)
class SyntheticSpec:
    """Two-state switching autoregression used as the synthetic reference process.

    x_t = ar_coefficient * x_{t-1} + sigma_{q_t} * u_t, with a symmetric
    two-state chain (stay probability ``stay_probability``) and unit-variance
    driving noise ``u`` that is either standard normal or a bimodal two-mean
    Gaussian mixture.
    """

    length: int
    seed: int = 0
    ar_coefficient: float = 2.0 / 3.0
    noise_stds: tuple[float, float] = (1.0, 5.0)
    stay_probability: float = 0.8
    noise_family: str = "gaussian"  # gaussian | bimodal_gmm
    gmm_mean: float = GMM_MEAN
    gmm_std: float = GMM_STD
    burn_in: int = 1000

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("length must be >= 1")
        if not 0.0 < self.stay_probability < 1.0:
            raise ValueError("stay_probability must lie in (0, 1)")
        if self.noise_family not in ("gaussian", "bimodal_gmm"):
            raise ValueError(f"unknown noise family {self.noise_family!r}")
        if self.noise_family == "bimodal_gmm":
            if abs(self.gmm_mean**2 + self.gmm_std**2 - 1.0) > 1e-12:
                raise ValueError("mixture parameters must give unit variance")


def generate_synthetic(spec: SyntheticSpec) -> tuple[TimeSeries, np.ndarray]:
    """Draw one realization plus its true state trace.

    The start is approximately stationary: the recursion begins at zero and a
    burn-in stretch is discarded. Bit-reproducible for a fixed spec.
    """
    rng = np.random.default_rng(spec.seed)
    total = spec.burn_in + spec.length
    first = int(rng.integers(2))
    flips = rng.random(total) < (1.0 - spec.stay_probability)
    flips[0] = False
    states = (first + np.cumsum(flips)) % 2
    if spec.noise_family == "gaussian":
        u = rng.standard_normal(total)
    else:
        signs = 1.0 - 2.0 * rng.integers(0, 2, size=total)  # +-1 with equal probability
        u = signs * spec.gmm_mean + spec.gmm_std * rng.standard_normal(total)
    shocks = np.asarray(spec.noise_stds, dtype=np.float64)[states] * u
    x = lfilter([1.0], [1.0, -spec.ar_coefficient], shocks)
    series = TimeSeries(
        x[spec.burn_in:],
        source=f"synthetic {spec.noise_family} N={spec.length} seed={spec.seed}",
    )
    return series, states[spec.burn_in:].astype(np.int64)


def logistic_map_surrogate(
    length: int,
    seed: int = 0,
    rate: float = 4.0,
    levels: int = 256,
    burn_in: int = 200,
    cycle: float = 7.0,
    growth: float = 1.045,
) -> TimeSeries:
    """Integer-quantized chaotic relaxation oscillations (a laser-like surrogate).

    A fast oscillation (period ``cycle`` samples) rides an amplitude envelope
    that grows geometrically until saturation and then collapses; a chaotic
    logistic map (z -> rate * z * (1 - z)) supplies the collapse depths and a
    slight frequency jitter. The result mimics integer-quantized laser
    intensity data: bursts of oscillation that build up and intermittently
    break down. Pair with ``dequantize`` before model fitting.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = np.random.default_rng(seed)
    z = float(rng.uniform(0.05, 0.95))
    envelope = 0.1
    phase = 0.0
    total = burn_in + length
    out = np.empty(total)
    for t in range(total):
        z = rate * z * (1.0 - z)
        envelope *= growth
        if envelope > 1.0:
            envelope = 0.04 + 0.22 * z  # chaotic collapse depth
        phase += 2.0 * np.pi / cycle * (1.0 + 0.05 * (z - 0.5))
        out[t] = envelope * (0.5 + 0.5 * np.sin(phase))
    quantized = np.round(out[burn_in:] * (levels - 1))
    return TimeSeries(quantized, source=f"chaotic oscillation surrogate N={length} seed={seed}")


def load_series(path, fmt: str = "plain", column=None) -> TimeSeries:
    """Read a series from a plain one-value-per-line file or a CSV column.

    For CSV, ``column`` names a header field or gives a 0-based index (a
    leading non-numeric row is treated as a header). Parse failures report
    the offending line number.
    """
    path = str(path)
    if fmt == "plain":
        values = []
        try:
            with open(path) as fh:
                for lineno, line in enumerate(fh, start=1):
                    text = line.strip()
                    if not text:
                        continue
                    try:
                        values.append(float(text))
                    except ValueError as exc:
                        raise DataError(f"{path}: line {lineno}: cannot parse {text!r}") from exc
        except OSError as exc:
            raise DataError(f"{path}: {exc}") from exc
        if not values:
            raise DataError(f"{path}: file contains no values")
        return TimeSeries(np.asarray(values), source=path)
    if fmt == "csv":
        if column is None:
            column = 0
        values = []
        try:
            with open(path, newline="") as fh:
                reader = csv.reader(fh)
                rows = list(reader)
        except OSError as exc:
            raise DataError(f"{path}: {exc}") from exc
        if not rows:
            raise DataError(f"{path}: file contains no values")
        start = 0
        if isinstance(column, str):
            header = rows[0]
            if column not in header:
                raise DataError(f"{path}: no column named {column!r}")
            col = header.index(column)
            start = 1
        else:
            col = int(column)
            try:
                float(rows[0][col])
            except (ValueError, IndexError):
                start = 1  # header row
        for lineno, row in enumerate(rows[start:], start=start + 1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                values.append(float(row[col]))
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}: line {lineno}: cannot parse column {col}") from exc
        if not values:
            raise DataError(f"{path}: file contains no values")
        return TimeSeries(np.asarray(values), source=path)
    raise ValueError(f"unknown format {fmt!r}")


def write_series(path, series, fmt: str = "plain") -> None:
    """Write a series in a format ``load_series`` reads back identically."""
    ts = as_series(series)
    path = str(path)
    if fmt == "plain":
        with open(path, "w") as fh:
            for v in ts.values:
                fh.write(repr(float(v)) + "\n")
        return
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["value"])
            for v in ts.values:
                writer.writerow([repr(float(v))])
        return
    raise ValueError(f"unknown format {fmt!r}")


def dequantize(series, amplitude: float = 0.5, seed: int = 0) -> TimeSeries:
    """Add i.i.d. uniform(-amplitude, amplitude) noise.

    Breaks ties between quantized values so all pairwise separations become
    positive almost surely. Deterministic under the seed.
    """
    ts = as_series(series)
    if not amplitude > 0:
        raise ValueError("amplitude must be positive")
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-amplitude, amplitude, size=len(ts))
    source = f"{ts.source or 'series'} + dequantization(+-{amplitude})"
    return TimeSeries(ts.values + noise, source=source)


@dataclass(frozen=True)
class OccupancyGuess:
    """Initial soft state assignments, columns on the simplex."""

    gamma_hat: np.ndarray  # (M, N)
    method: str

    def __post_init__(self):
        g = np.asarray(self.gamma_hat, dtype=np.float64)
        if g.ndim != 2:
            raise ValueError("occupancy matrix must be 2-D")
        if np.any(g < 0) or np.any(g > 1 + 1e-12):
            raise ValueError("occupancy entries must lie in [0, 1]")
        if np.max(np.abs(g.sum(axis=0) - 1.0)) > 1e-12:
            raise ValueError("occupancy columns must sum to 1")
        object.__setattr__(self, "gamma_hat", g)

    @property
    def states(self) -> int:
        return self.gamma_hat.shape[0]


def uniform_occupancies(n: int, states: int) -> OccupancyGuess:
    return OccupancyGuess(np.full((states, n), 1.0 / states), method="uniform")


def threshold_occupancies(series) -> OccupancyGuess:
    """Two-state guess splitting low- from high-volatility points.

    State 0 holds points whose absolute first difference is at most the
    median absolute first difference; the first point, which has no
    difference, is split half and half.
    """
    values = as_series(series).values
    n = len(values)
    if n < 2:
        raise ValueError("need at least two points")
    diffs = np.abs(np.diff(values))
    thresh = float(np.median(diffs))
    calm = np.empty(n)
    calm[0] = 0.5
    calm[1:] = (diffs <= thresh).astype(np.float64)
    return OccupancyGuess(np.vstack([calm, 1.0 - calm]), method="threshold")


def instantaneous_phase(series, prominence: float | None = None, min_spacing: int = 3) -> np.ndarray:
    """Per-sample phase estimate from oscillation-cycle peaks.

    Local maxima (with a minimum prominence defaulting to a quarter of the
    interquartile range, and a minimum spacing) are assigned phases 2*pi*k;
    a natural cubic spline interpolates in between and extends linearly
    beyond the first and last peak.
    """
    values = as_series(series).values
    if prominence is None:
        q75, q25 = np.percentile(values, [75, 25])
        prominence = 0.25 * float(q75 - q25)
    peaks, _ = find_peaks(values, prominence=prominence, distance=min_spacing)
    if peaks.size < 2:
        raise NoCycleStructure(f"found {peaks.size} peak(s); need at least 2")
    spline = CubicSpline(peaks, 2.0 * np.pi * np.arange(peaks.size), bc_type="natural")
    t = np.arange(len(values), dtype=np.float64)
    phase = np.asarray(spline(np.clip(t, peaks[0], peaks[-1])), dtype=np.float64)
    left = t < peaks[0]
    right = t > peaks[-1]
    if np.any(left):
        phase[left] += float(spline(peaks[0], 1)) * (t[left] - peaks[0])
    if np.any(right):
        phase[right] += float(spline(peaks[-1], 1)) * (t[right] - peaks[-1])
    return phase


def phase_occupancies(series, states: int, prominence: float | None = None, min_spacing: int = 3) -> OccupancyGuess:
    """Soft quantization of the instantaneous phase into ``states`` bins.

    gamma[q, t] = max(0, 1 - (M / 2 pi) * circular_distance(phase_t, grid_q))
    with grid points 2 pi (q - 1) / M; at most two adjacent states are active
    and columns sum to one. A single state yields all ones.
    """
    values = as_series(series).values
    n = len(values)
    if states == 1:
        return OccupancyGuess(np.ones((1, n)), method="phase")
    phase = instantaneous_phase(series, prominence=prominence, min_spacing=min_spacing)
    grid = 2.0 * np.pi * np.arange(states)[:, None] / states
    delta = np.mod(phase[None, :] - grid, 2.0 * np.pi)
    circ = np.minimum(delta, 2.0 * np.pi - delta)
    gamma = np.maximum(0.0, 1.0 - states / (2.0 * np.pi) * circ)
    gamma /= gamma.sum(axis=0, keepdims=True)
    return OccupancyGuess(gamma, method="phase")


def write_occupancies_csv(path, guess: OccupancyGuess) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "q", "gamma_hat"])
        m, n = guess.gamma_hat.shape
        for t in range(n):
            for q in range(m):
                writer.writerow([t, q, repr(float(guess.gamma_hat[q, t]))])
